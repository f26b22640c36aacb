#pragma once
//
// Monte Carlo synthesis of emulsion grain data on a tilted film: signal grains
// drawn from a fringe pattern under a Gaussian beam envelope, plus uniform
// thermal noise grains through the full emulsion thickness.
//
// Generation is tiled on the analysis view grid; every tile owns independent
// RNG streams derived from (seed, kind, tile index), so output never depends
// on evaluation order or worker count.
//

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>
#include <vector>

#include "talbot/errors.hpp"
#include "talbot/parallel.hpp"
#include "talbot/rng.hpp"
#include "talbot/wave.hpp"

namespace talbot {

struct EmulsionFrame {
    double tilt_angle_rad = std::numbers::pi / 4.0;
    /// L2 of the film point Y = 0.
    double L2_at_origin_mm = 579.0;
    double film_origin_X_mm = -5.0;
    double film_origin_Y_mm = -15.5;
    double film_width_mm = 10.0;
    double film_height_mm = 14.0;
    double thickness_um = 50.0;
    int y_sign = 1;

    void validate() const {
        if (!(tilt_angle_rad > 0.0 && tilt_angle_rad < std::numbers::pi / 2.0))
            throw DomainError("film tilt must lie in (0, pi/2)");
        if (!(thickness_um > 0.0)) throw DomainError("emulsion thickness must be positive");
        if (!(film_width_mm > 0.0 && film_height_mm > 0.0)) throw DomainError("film size must be positive");
        if (y_sign != 1 && y_sign != -1) throw DomainError("y_sign must be +1 or -1");
    }
};

struct LabPosition {
    double L2_mm = 0.0;
    double y_lab_mm = 0.0;
};

inline LabPosition emulsion_to_lab(EmulsionFrame const& frame, double Y_mm) {
    return {frame.L2_at_origin_mm + frame.y_sign * Y_mm * std::sin(frame.tilt_angle_rad),
            Y_mm * std::cos(frame.tilt_angle_rad)};
}

/// Film Y of the line where the film crosses distance L2.
inline double lab_to_emulsion_Y(EmulsionFrame const& frame, double L2_mm) {
    return (L2_mm - frame.L2_at_origin_mm) / (frame.y_sign * std::sin(frame.tilt_angle_rad));
}

enum class HitKind : std::uint8_t { signal, noise };

struct HitRecord {
    double X_um = 0.0;
    double Y_um = 0.0;
    double Z_um = 0.0;
    HitKind kind = HitKind::signal;
};

using HitSet = std::vector<HitRecord>;

struct ExposureConfig {
    double target_grains_per_view = 11000.0;
    /// grains per 1000 um^3
    double noise_density = 5.8;
    double implantation_mean_um = 2.0;
    double implantation_sigma_um = 1.45;
    double beam_center_X_mm = 0.0;
    double beam_center_Y_mm = -8.5;
    double beam_fwhm_mm = 6.5;
    std::uint64_t rng_seed = 1;
    double view_width_um = 370.0;
    double view_height_um = 294.0;

    void validate(EmulsionFrame const& frame) const {
        if (!(target_grains_per_view > 0.0)) throw DomainError("target grains per view must be positive");
        if (!(noise_density >= 0.0)) throw DomainError("noise density must be non-negative");
        if (!(implantation_sigma_um > 0.0)) throw DomainError("implantation sigma must be positive");
        if (!(implantation_mean_um > 0.0 && implantation_mean_um < frame.thickness_um))
            throw DomainError("implantation peak must lie inside the emulsion");
        if (!(beam_fwhm_mm > 0.0)) throw DomainError("beam FWHM must be positive");
        if (!(view_width_um > 0.0 && view_height_um > 0.0)) throw DomainError("view size must be positive");
    }
};

/// I(X; L2) = 1 + C(L2) sin(2 pi X'/d3 + phase), with C(L2) a Gaussian envelope
/// on a constant baseline and X' the coordinate across fringes rotated by alpha.
struct ParametricPattern {
    double contrast_peak = 0.491;
    double center_L2_mm = 573.0;
    double width_L2_mm = 2.12;
    double baseline = 0.0;
    double d3_um = 5.90;
    double phase_rad = 0.0;
    double alpha_rad = 0.0;

    double contrast_at(double L2_mm) const {
        double const u = (L2_mm - center_L2_mm) / width_L2_mm;
        return baseline + contrast_peak * std::exp(-0.5 * u * u);
    }
    double intensity(double X_um, double Y_um, double L2_mm) const {
        double const xr = X_um * std::cos(alpha_rad) - Y_um * std::sin(alpha_rad);
        return 1.0 + contrast_at(L2_mm) * std::sin(2.0 * std::numbers::pi * xr / d3_um + phase_rad);
    }
    double max_intensity() const { return 1.0 + std::max(baseline + contrast_peak, baseline); }

    void validate() const {
        if (!(d3_um > 0.0)) throw DomainError("fringe period must be positive");
        if (!(width_L2_mm > 0.0)) throw DomainError("envelope width must be positive");
        double const cmax = std::max(std::abs(baseline + contrast_peak), std::abs(baseline));
        if (!(cmax < 1.0)) throw InputError("parametric pattern is non-positive somewhere (contrast >= 1)");
    }
};

/// Simulated carpet as a pattern source: linear interpolation in z and x, with
/// X wrapped onto the longest stretch of whole fringe periods in the window.
class CarpetPattern {
public:
    CarpetPattern(TalbotCarpet carpet, double fringe_period_um) : carpet_(std::move(carpet)) {
        if (carpet_.profiles.empty()) throw InputError("carpet has no planes");
        if (carpet_.profiles.size() != carpet_.z_values_mm.size()) throw InputError("carpet plane count mismatch");
        for (auto& p : carpet_.profiles) {
            p = p.normalized();
            for (double v : p.intensity)
                if (!(v >= 0.0) || !std::isfinite(v)) throw InputError("carpet intensity is negative or not finite");
            if (!(p.mean() > 0.0)) throw InputError("carpet plane has zero intensity");
            max_ = std::max(max_, *std::max_element(p.intensity.begin(), p.intensity.end()));
        }
        auto const& p0 = carpet_.profiles.front();
        double const periods = std::floor((p0.width_um() - p0.spacing_um) / fringe_period_um);
        wrap_um_ = periods >= 1.0 ? periods * fringe_period_um : p0.width_um() - p0.spacing_um;
    }

    double intensity(double X_um, double /*Y_um*/, double L2_mm) const {
        auto const& zs = carpet_.z_values_mm;
        if (zs.size() == 1 || L2_mm <= zs.front()) return at_plane(0, X_um);
        if (L2_mm >= zs.back()) return at_plane(zs.size() - 1, X_um);
        auto const it = std::upper_bound(zs.begin(), zs.end(), L2_mm);
        auto const j = static_cast<std::size_t>(it - zs.begin());
        double const t = (L2_mm - zs[j - 1]) / (zs[j] - zs[j - 1]);
        return (1.0 - t) * at_plane(j - 1, X_um) + t * at_plane(j, X_um);
    }
    double max_intensity() const noexcept { return max_; }

private:
    double at_plane(std::size_t j, double X_um) const {
        auto const& p = carpet_.profiles[j];
        double u = std::fmod(X_um - p.x_start_um, wrap_um_);
        if (u < 0.0) u += wrap_um_;
        double const s = u / p.spacing_um;
        auto const i = static_cast<std::size_t>(s);
        double const f = s - static_cast<double>(i);
        std::size_t const i1 = std::min(i + 1, p.intensity.size() - 1);
        return (1.0 - f) * p.intensity[std::min(i, p.intensity.size() - 1)] + f * p.intensity[i1];
    }

    TalbotCarpet carpet_;
    double wrap_um_ = 0.0;
    double max_ = 0.0;
};

using PatternSource = std::variant<ParametricPattern, CarpetPattern>;

/// Axis-aligned film region in micrometres.
struct Region {
    double X0_um = 0.0, X1_um = 0.0, Y0_um = 0.0, Y1_um = 0.0;
    double area_um2() const noexcept { return std::max(0.0, X1_um - X0_um) * std::max(0.0, Y1_um - Y0_um); }
};

struct ViewTiling {
    double origin_X_um = 0.0;
    double origin_Y_um = 0.0;
    double width_um = 0.0;
    double height_um = 0.0;
    double view_width_um = 370.0;
    double view_height_um = 294.0;

    std::size_t nx() const { return static_cast<std::size_t>(std::floor(width_um / view_width_um + 1e-9)); }
    std::size_t ny() const { return static_cast<std::size_t>(std::floor(height_um / view_height_um + 1e-9)); }
    std::size_t count() const { return nx() * ny(); }

    Region tile(std::size_t ix, std::size_t iy) const {
        double const x0 = origin_X_um + static_cast<double>(ix) * view_width_um;
        double const y0 = origin_Y_um + static_cast<double>(iy) * view_height_um;
        return {x0, x0 + view_width_um, y0, y0 + view_height_um};
    }

    static ViewTiling of(EmulsionFrame const& frame, double view_w_um, double view_h_um) {
        return {frame.film_origin_X_mm * 1e3, frame.film_origin_Y_mm * 1e3, frame.film_width_mm * 1e3,
                frame.film_height_mm * 1e3, view_w_um, view_h_um};
    }
};

namespace stream_kind {
inline constexpr std::uint64_t signal = 0x5349474eull;
inline constexpr std::uint64_t noise = 0x4e4f4953ull;
} // namespace stream_kind

namespace detail {

inline double gaussian_window_integral(double half_width, double sigma) {
    return sigma * std::sqrt(2.0 * std::numbers::pi) * std::erf(half_width / (std::numbers::sqrt2 * sigma));
}

inline double truncated_normal(std::mt19937_64& rng, double mean, double sigma, double lo, double hi) {
    std::normal_distribution<double> n(mean, sigma);
    for (int tries = 0; tries < 100000; ++tries) {
        double const z = n(rng);
        if (z >= lo && z <= hi) return z;
    }
    throw DomainError("implantation window has negligible probability inside the emulsion");
}

} // namespace detail

/// Signal grains of one tile. Proposals are uniform in the tile with Poisson
/// count set by the envelope maximum over the tile; acceptance probability is
/// envelope * I / (envelope_max * I_max).
inline HitSet generate_signal_tile(PatternSource const& source, EmulsionFrame const& frame,
                                   ExposureConfig const& exposure, Region const& tile, std::uint64_t tile_index) {
    double const sx = exposure.beam_fwhm_mm * 1e3 / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
    double const sy = sx / std::cos(frame.tilt_angle_rad);
    double const xc = exposure.beam_center_X_mm * 1e3, yc = exposure.beam_center_Y_mm * 1e3;
    double const norm_area = detail::gaussian_window_integral(0.5 * exposure.view_width_um, sx) *
                             detail::gaussian_window_integral(0.5 * exposure.view_height_um, sy);
    double const rho0 = exposure.target_grains_per_view / norm_area;

    auto envelope = [&](double x, double y) {
        double const u = (x - xc) / sx, v = (y - yc) / sy;
        return std::exp(-0.5 * (u * u + v * v));
    };
    double const ex = std::clamp(xc, tile.X0_um, tile.X1_um), ey = std::clamp(yc, tile.Y0_um, tile.Y1_um);
    double const env_max = envelope(ex, ey);
    double const i_max = std::visit([](auto const& s) { return s.max_intensity(); }, source);
    double const mean_proposals = rho0 * env_max * i_max * tile.area_um2();

    auto rng = make_stream(exposure.rng_seed, stream_kind::signal, tile_index);
    HitSet out;
    if (!(mean_proposals > 0.0)) return out;
    std::poisson_distribution<long long> count(mean_proposals);
    long long const n = count(rng);
    out.reserve(static_cast<std::size_t>(n / std::max(1.0, i_max)));
    for (long long k = 0; k < n; ++k) {
        double const x = tile.X0_um + uniform01(rng) * (tile.X1_um - tile.X0_um);
        double const y = tile.Y0_um + uniform01(rng) * (tile.Y1_um - tile.Y0_um);
        double const u = uniform01(rng);
        double const L2 = emulsion_to_lab(frame, y * 1e-3).L2_mm;
        double const inten = std::visit([&](auto const& s) { return s.intensity(x, y, L2); }, source);
        if (u * env_max * i_max >= envelope(x, y) * inten) continue;
        double const z = detail::truncated_normal(rng, exposure.implantation_mean_um, exposure.implantation_sigma_um,
                                                  0.0, frame.thickness_um);
        out.push_back({x, y, z, HitKind::signal});
    }
    return out;
}

/// Uniform thermal grains: Poisson(density * volume) positions uniform in the
/// region and in depth over the full thickness.
inline HitSet generate_noise_grains(EmulsionFrame const& frame, Region const& region, double density_per_1000um3,
                                    std::uint64_t seed, std::uint64_t stream_index = 0) {
    if (!(density_per_1000um3 > 0.0)) throw DomainError("noise density must be positive");
    double const volume = region.area_um2() * frame.thickness_um;
    HitSet out;
    if (!(volume > 0.0)) return out;
    auto rng = make_stream(seed, stream_kind::noise, stream_index);
    std::poisson_distribution<long long> count(density_per_1000um3 * 1e-3 * volume);
    long long const n = count(rng);
    out.reserve(static_cast<std::size_t>(n));
    for (long long k = 0; k < n; ++k) {
        double const x = region.X0_um + uniform01(rng) * (region.X1_um - region.X0_um);
        double const y = region.Y0_um + uniform01(rng) * (region.Y1_um - region.Y0_um);
        double const z = uniform01(rng) * frame.thickness_um;
        out.push_back({x, y, z, HitKind::noise});
    }
    return out;
}

inline void validate_source(PatternSource const& source) {
    if (auto const* p = std::get_if<ParametricPattern>(&source)) p->validate();
}

/// Signal grains over every full view tile of the film.
inline HitSet generate_signal_hits(PatternSource const& source, EmulsionFrame const& frame,
                                   ExposureConfig const& exposure, unsigned threads = 1) {
    frame.validate();
    exposure.validate(frame);
    validate_source(source);
    auto const tiling = ViewTiling::of(frame, exposure.view_width_um, exposure.view_height_um);
    std::vector<HitSet> parts(tiling.count());
    parallel_for(parts.size(), threads, [&](std::size_t i) {
        parts[i] = generate_signal_tile(source, frame, exposure, tiling.tile(i % tiling.nx(), i / tiling.nx()), i);
    });
    HitSet out;
    for (auto& p : parts) out.insert(out.end(), p.begin(), p.end());
    return out;
}

struct ExposureCounts {
    std::size_t signal = 0;
    std::size_t noise = 0;
};

/// Full exposure: per tile, signal grains followed by noise grains, tiles in
/// index order (row-major in Y).
inline HitSet generate_exposure(PatternSource const& source, EmulsionFrame const& frame,
                                ExposureConfig const& exposure, unsigned threads = 1,
                                ExposureCounts* counts = nullptr) {
    frame.validate();
    exposure.validate(frame);
    validate_source(source);
    auto const tiling = ViewTiling::of(frame, exposure.view_width_um, exposure.view_height_um);
    std::vector<HitSet> parts(tiling.count());
    std::vector<ExposureCounts> tallies(tiling.count());
    parallel_for(parts.size(), threads, [&](std::size_t i) {
        Region const tile = tiling.tile(i % tiling.nx(), i / tiling.nx());
        HitSet h = generate_signal_tile(source, frame, exposure, tile, i);
        tallies[i].signal = h.size();
        if (exposure.noise_density > 0.0) {
            HitSet n = generate_noise_grains(frame, tile, exposure.noise_density, exposure.rng_seed, i);
            tallies[i].noise = n.size();
            h.insert(h.end(), n.begin(), n.end());
        }
        parts[i] = std::move(h);
    });
    HitSet out;
    std::size_t total = 0;
    for (auto const& p : parts) total += p.size();
    out.reserve(total);
    ExposureCounts c;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        out.insert(out.end(), parts[i].begin(), parts[i].end());
        c.signal += tallies[i].signal;
        c.noise += tallies[i].noise;
    }
    if (counts) *counts = c;
    return out;
}

// ---------------------------------------------------------------------------
// Hit file: CSV "X_um,Y_um,Z_um", three decimals, LF. The kind tag is never
// written.

inline constexpr std::string_view hit_file_header = "X_um,Y_um,Z_um";

namespace detail {
inline void append_fixed3(std::string& out, double v) {
    char buf[64];
    auto const r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 3);
    out.append(buf, r.ptr);
}
} // namespace detail

inline void write_hits(std::span<HitRecord const> hits, std::string const& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot open " + path + " for writing");
    std::string buf;
    buf.reserve(1 << 20);
    buf.append(hit_file_header);
    buf.push_back('\n');
    for (auto const& h : hits) {
        detail::append_fixed3(buf, h.X_um);
        buf.push_back(',');
        detail::append_fixed3(buf, h.Y_um);
        buf.push_back(',');
        detail::append_fixed3(buf, h.Z_um);
        buf.push_back('\n');
        if (buf.size() > (1u << 20) - 128) {
            f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
            buf.clear();
        }
    }
    f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!f) throw InputError("write failed: " + path);
}

inline HitSet read_hits(std::string const& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot open " + path);
    HitSet out;
    std::string line;
    std::size_t lineno = 0;
    bool header_seen = false;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!header_seen) {
            if (line != hit_file_header) throw ParseError(path, lineno, "expected header '" + std::string(hit_file_header) + "'");
            header_seen = true;
            continue;
        }
        if (line.empty()) continue;
        double v[3];
        char const* p = line.data();
        char const* const end = line.data() + line.size();
        for (int k = 0; k < 3; ++k) {
            auto const r = std::from_chars(p, end, v[k]);
            if (r.ec != std::errc() || !std::isfinite(v[k]))
                throw ParseError(path, lineno, "field " + std::to_string(k + 1) + " is not a number");
            p = r.ptr;
            if (k < 2) {
                if (p == end || *p != ',') throw ParseError(path, lineno, "expected 3 comma-separated fields");
                ++p;
            }
        }
        if (p != end) throw ParseError(path, lineno, "trailing characters after 3 fields");
        out.push_back({v[0], v[1], v[2], HitKind::signal});
    }
    if (!header_seen) throw ParseError(path, 1, "empty file, missing header");
    return out;
}

} // namespace talbot
