#pragma once
//
// Scalar paraxial wave optics for the two-grating interferometer.
//
// The transverse coordinate lives on a periodic FFT box (Grid1D). Partial
// coherence is modelled as an incoherent sum over input plane-wave tilts drawn
// at stratified quantiles of the tilt distribution. The classical (ballistic)
// model integrates straight-line ray transmission over the same distribution
// and never sees the wavelength.
//

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

#include "talbot/errors.hpp"
#include "talbot/fft.hpp"
#include "talbot/parallel.hpp"
#include "talbot/physics.hpp"

namespace talbot {

struct Grid1D {
    std::size_t num_points = 1u << 15;
    double spacing_um = 0.025;
    /// Fraction of the window excluded on each side of returned profiles.
    double guard_fraction = 0.25;

    static constexpr std::size_t min_points = 1u << 12;

    double window_um() const noexcept { return static_cast<double>(num_points) * spacing_um; }

    double x_um(std::size_t i) const noexcept {
        return (static_cast<double>(i) - static_cast<double>(num_points / 2)) * spacing_um;
    }

    std::size_t guard_points() const noexcept {
        return static_cast<std::size_t>(std::floor(guard_fraction * static_cast<double>(num_points)));
    }
    std::size_t physics_begin() const noexcept { return guard_points(); }
    std::size_t physics_end() const noexcept { return num_points - guard_points(); }

    void validate() const {
        if (num_points < min_points) throw ConfigError("grid needs at least 4096 points");
        if (!(spacing_um > 0.0)) throw ConfigError("grid spacing must be positive");
        if (!(guard_fraction >= 0.0 && guard_fraction < 0.5)) throw ConfigError("guard fraction must lie in [0, 0.5)");
    }

    /// Throws unless the spacing resolves `period_um` with at least 20 samples.
    void require_resolves(double period_um) const {
        if (spacing_um > period_um / 20.0)
            throw ConfigError("grid spacing " + std::to_string(spacing_um) + " um does not resolve period " +
                              std::to_string(period_um) + " um (need >= 20 samples per period)");
    }
};

/// Smallest window that is a common multiple of both grating periods and at
/// least `min_window_um` wide, sampled with a power-of-two number of points at
/// spacing <= `max_spacing_um`. Falls back to min_window_um when the periods
/// share no common multiple below `max_multiple` periods of d1.
inline Grid1D commensurate_grid(double d1_um, double d2_um, double min_window_um = 512.0,
                                double max_spacing_um = 0.025, double guard_fraction = 0.25,
                                int max_multiple = 100000) {
    double base = 0.0;
    for (int p = 1; p <= max_multiple; ++p) {
        double const w = p * d1_um;
        double const q = std::round(w / d2_um);
        if (q >= 1.0 && std::abs(w - q * d2_um) <= 1e-9 * w) {
            base = w;
            break;
        }
    }
    double window = min_window_um;
    if (base > 0.0) window = base * std::ceil(min_window_um / base);
    std::size_t n = Grid1D::min_points;
    while (window / static_cast<double>(n) > max_spacing_um) n *= 2;
    Grid1D g;
    g.num_points = n;
    g.spacing_um = window / static_cast<double>(n);
    g.guard_fraction = guard_fraction;
    return g;
}

struct ComplexField {
    Grid1D grid;
    std::vector<std::complex<double>> amplitudes;
    double wavelength_pm = 0.0;

    /// Sum |u|^2 * dx.
    double power() const {
        double s = 0.0;
        for (auto const& a : amplitudes) s += std::norm(a);
        return s * grid.spacing_um;
    }
};

/// Unit plane wave; a non-zero tilt is rounded to an integer number of phase
/// cycles across the window so the wave stays periodic. The carrier must stay
/// below the grid's Nyquist frequency.
inline ComplexField plane_wave(Grid1D const& grid, double wavelength_pm, double tilt_rad = 0.0) {
    grid.validate();
    ComplexField f{grid, std::vector<std::complex<double>>(grid.num_points), wavelength_pm};
    double const cycles = std::round(tilt_rad * grid.window_um() / (wavelength_pm * 1e-6));
    if (std::abs(cycles) >= static_cast<double>(grid.num_points / 2))
        throw ConfigError("plane-wave tilt exceeds the grid's Nyquist frequency");
    for (std::size_t i = 0; i < grid.num_points; ++i) {
        double const phase = 2.0 * std::numbers::pi * cycles * (static_cast<double>(i) / grid.num_points);
        f.amplitudes[i] = std::polar(1.0, phase);
    }
    return f;
}

/// Spatial frequency (1/um) of FFT bin k.
inline double fft_frequency(Grid1D const& grid, std::size_t k) {
    auto const n = static_cast<std::ptrdiff_t>(grid.num_points);
    auto kk = static_cast<std::ptrdiff_t>(k);
    if (kk >= n / 2) kk -= n;
    return static_cast<double>(kk) / grid.window_um();
}

/// Paraxial transfer function exp(-i pi lambda z f^2) sampled on the FFT bins.
inline std::vector<std::complex<double>> fresnel_transfer(Grid1D const& grid, double wavelength_pm,
                                                          double distance_mm) {
    std::vector<std::complex<double>> h(grid.num_points);
    double const lz = wavelength_pm * 1e-6 * distance_mm * 1e3; // um^2
    for (std::size_t k = 0; k < grid.num_points; ++k) {
        double const f = fft_frequency(grid, k);
        h[k] = std::polar(1.0, -std::numbers::pi * lz * f * f);
    }
    return h;
}

/// Multiplies a spectrum by the phase ramp that translates the field by `shift_um`.
inline void translate_spectrum(Grid1D const& grid, std::span<std::complex<double>> spectrum, double shift_um) {
    if (shift_um == 0.0) return;
    for (std::size_t k = 0; k < spectrum.size(); ++k)
        spectrum[k] *= std::polar(1.0, -2.0 * std::numbers::pi * fft_frequency(grid, k) * shift_um);
}

inline ComplexField fresnel_propagate(ComplexField field, double distance_mm) {
    if (!(distance_mm >= 0.0)) throw DomainError("propagation distance must be non-negative");
    auto const h = fresnel_transfer(field.grid, field.wavelength_pm, distance_mm);
    fft_forward(field.amplitudes);
    for (std::size_t k = 0; k < h.size(); ++k) field.amplitudes[k] *= h[k];
    fft_inverse(field.amplitudes);
    return field;
}

/// Binary transmission of a grating sampled on the grid (1 in slits, 0 on bars).
inline std::vector<double> grating_mask(Grid1D const& grid, GratingSpec const& spec) {
    spec.validate();
    grid.require_resolves(spec.period_um);
    std::vector<double> m(grid.num_points);
    double const half = 0.5 * spec.open_fraction;
    for (std::size_t i = 0; i < grid.num_points; ++i) {
        double const u = (grid.x_um(i) - spec.lateral_offset_um) / spec.period_um;
        double const t = u - std::floor(u + 0.5);
        m[i] = (t >= -half && t < half) ? 1.0 : 0.0;
    }
    return m;
}

inline ComplexField apply_grating(ComplexField field, GratingSpec const& spec) {
    auto const mask = grating_mask(field.grid, spec);
    for (std::size_t i = 0; i < mask.size(); ++i) field.amplitudes[i] *= mask[i];
    return field;
}

// ---------------------------------------------------------------------------
// Partial coherence

struct TiltDistribution {
    enum class Kind { gaussian, uniform };
    Kind kind = Kind::gaussian;
    /// Gaussian sigma or uniform half-width.
    double width_rad = 2.0e-4;
    /// Gaussian truncation half-width; infinity for none.
    double truncation_rad = std::numeric_limits<double>::infinity();

    static TiltDistribution gaussian(double sigma, double truncation = std::numeric_limits<double>::infinity()) {
        return {Kind::gaussian, sigma, truncation};
    }
    static TiltDistribution uniform(double half_width) {
        return {Kind::uniform, half_width, std::numeric_limits<double>::infinity()};
    }
};

/// Gaussian with the beam's angular sigma truncated at the collimator acceptance.
inline TiltDistribution default_tilt_distribution(InterferometerGeometry const& g, BeamModel const& beam) {
    return TiltDistribution::gaussian(beam.angular_sigma_rad, g.collimator_acceptance_rad());
}

namespace detail {
inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
inline double std_normal_quantile(double p) { return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p); }
} // namespace detail

/// Tilts at the quantile midpoints (k + 1/2)/n of the distribution. The seed
/// only permutes the order in which samples are summed.
inline std::vector<double> stratified_tilts(TiltDistribution const& dist, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw ConfigError("need at least one tilt sample");
    std::vector<double> t(n);
    for (std::size_t k = 0; k < n; ++k) {
        double const u = (static_cast<double>(k) + 0.5) / static_cast<double>(n);
        if (dist.width_rad <= 0.0) {
            t[k] = 0.0;
        } else if (dist.kind == TiltDistribution::Kind::uniform) {
            t[k] = dist.width_rad * (2.0 * u - 1.0);
        } else {
            double const a = dist.truncation_rad / dist.width_rad;
            double const lo = std::isfinite(a) ? detail::std_normal_cdf(-a) : 0.0;
            double const hi = std::isfinite(a) ? detail::std_normal_cdf(a) : 1.0;
            t[k] = dist.width_rad * detail::std_normal_quantile(lo + u * (hi - lo));
        }
    }
    std::mt19937_64 rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(t[i - 1], t[pick(rng)]);
    }
    return t;
}

enum class Model { quantum, classical };

struct SimConfig {
    Grid1D grid;
    std::size_t num_tilt_samples = 128;
    TiltDistribution tilt;
    Model model = Model::quantum;
    std::uint64_t rng_seed = 1;
    unsigned threads = 1;
};

struct IntensityProfile {
    double x_start_um = 0.0;
    double spacing_um = 0.0;
    std::vector<double> intensity;
    double plane_z_mm = 0.0;

    double x_um(std::size_t i) const noexcept { return x_start_um + static_cast<double>(i) * spacing_um; }
    double width_um() const noexcept { return static_cast<double>(intensity.size()) * spacing_um; }

    double mean() const {
        if (intensity.empty()) return 0.0;
        return std::accumulate(intensity.begin(), intensity.end(), 0.0) / static_cast<double>(intensity.size());
    }

    /// Copy rescaled to unit mean.
    IntensityProfile normalized() const {
        IntensityProfile p = *this;
        double const m = mean();
        if (m > 0.0)
            for (auto& v : p.intensity) v /= m;
        return p;
    }
};

struct TalbotCarpet {
    std::vector<double> z_values_mm;
    std::vector<IntensityProfile> profiles;
};

/// Fringe spatial frequency 1/d2 - 1/d1 survives tilt averaging at every plane;
/// its period equals fringe_period_um() for a resonant geometry.
inline double beat_period_um(InterferometerGeometry const& g) {
    return resonant_fringe_period_um(g.grating1.period_um, g.grating2.period_um);
}

/// Quantum simulator: caches, per tilt sample, the angular spectrum just after
/// the second grating so that any number of detector planes costs one inverse
/// FFT per tilt.
///
/// Tilts are handled in the frame co-moving with the tilted wave: a paraxial
/// wave u = v exp(2 pi i theta x / lambda) propagates as v translated by
/// theta * z. The carrier is dropped and G2 and the detector see the untilted
/// field translated by theta*L1 and theta*z, which keeps every tilt inside the
/// grid bandwidth.
class QuantumSimulator {
public:
    QuantumSimulator(InterferometerGeometry const& geometry, ParticleState const& particle, SimConfig const& config)
        : geometry_(geometry), config_(config), wavelength_pm_(de_broglie_wavelength_pm(particle)) {
        geometry_.validate();
        Grid1D const& grid = config_.grid;
        grid.validate();
        grid.require_resolves(geometry_.grating1.period_um);
        grid.require_resolves(geometry_.grating2.period_um);
        double const walk_um = 5.0 * wavelength_pm_ * 1e-6 * geometry_.L1_mm * 1e3 / geometry_.grating1.period_um;
        if (walk_um > grid.guard_fraction * grid.window_um())
            throw ConfigError("grid too narrow: diffraction walk-off " + std::to_string(walk_um) +
                              " um exceeds the guard band");

        tilts_ = stratified_tilts(config_.tilt, config_.num_tilt_samples, config_.rng_seed);
        auto const mask1 = grating_mask(grid, geometry_.grating1);
        auto const mask2 = grating_mask(grid, geometry_.grating2);
        auto const h1 = fresnel_transfer(grid, wavelength_pm_, geometry_.L1_mm);

        spectra_.assign(tilts_.size(), {});
        parallel_for(tilts_.size(), config_.threads, [&](std::size_t t) {
            std::vector<std::complex<double>> u(mask1.begin(), mask1.end());
            fft_forward(u);
            for (std::size_t k = 0; k < u.size(); ++k) u[k] *= h1[k];
            translate_spectrum(grid, u, tilts_[t] * geometry_.L1_mm * 1e3);
            fft_inverse(u);
            for (std::size_t i = 0; i < u.size(); ++i) u[i] *= mask2[i];
            fft_forward(u);
            spectra_[t] = std::move(u);
        });
    }

    double wavelength_pm() const noexcept { return wavelength_pm_; }
    std::span<double const> tilts() const noexcept { return tilts_; }

    /// Tilt-averaged intensity at distance z behind the second grating, guard
    /// bands removed.
    IntensityProfile pattern_at(double z_mm) const {
        if (!(z_mm > 0.0)) throw DomainError("detector distance must be positive");
        Grid1D const& grid = config_.grid;
        std::size_t const b = grid.physics_begin(), e = grid.physics_end();
        auto const h = fresnel_transfer(grid, wavelength_pm_, z_mm);

        std::vector<std::vector<double>> partial(tilts_.size());
        parallel_for(tilts_.size(), config_.threads, [&](std::size_t t) {
            auto u = spectra_[t];
            for (std::size_t k = 0; k < u.size(); ++k) u[k] *= h[k];
            translate_spectrum(grid, u, tilts_[t] * z_mm * 1e3);
            fft_inverse(u);
            std::vector<double> inten(e - b);
            for (std::size_t i = b; i < e; ++i) inten[i - b] = std::norm(u[i]);
            partial[t] = std::move(inten);
        });

        IntensityProfile p;
        p.x_start_um = grid.x_um(b);
        p.spacing_um = grid.spacing_um;
        p.plane_z_mm = z_mm;
        p.intensity.assign(e - b, 0.0);
        for (auto const& part : partial)
            for (std::size_t i = 0; i < part.size(); ++i) p.intensity[i] += part[i];
        double const inv = 1.0 / static_cast<double>(tilts_.size());
        for (auto& v : p.intensity) v *= inv;
        return p;
    }

private:
    InterferometerGeometry geometry_;
    SimConfig config_;
    double wavelength_pm_;
    std::vector<double> tilts_;
    std::vector<std::vector<std::complex<double>>> spectra_;
};

inline IntensityProfile simulate_quantum_pattern(InterferometerGeometry const& geometry, ParticleState const& particle,
                                                 double z_detector_mm, SimConfig const& config) {
    if (config.model != Model::quantum) throw ConfigError("simulate_quantum_pattern needs model = quantum");
    if (!(z_detector_mm > 0.0)) throw DomainError("detector distance must be positive");
    return QuantumSimulator(geometry, particle, config).pattern_at(z_detector_mm);
}

namespace detail {

/// Closed tilt intervals [lo, hi] (ascending) within [lo_lim, hi_lim] for which a
/// ray reaching detector position x crosses a slit of `g` located `dist_um`
/// upstream of the detector.
inline void open_tilt_intervals(double x_um, double dist_um, GratingSpec const& g, double lo_lim, double hi_lim,
                                std::vector<std::pair<double, double>>& out) {
    out.clear();
    double const d = g.period_um;
    double const half = 0.5 * g.open_fraction * d;
    double const s0 = x_um - g.lateral_offset_um; // ray hits the grating at s0 - theta*dist
    // slit k spans s in [k d - half, k d + half)  ->  theta in ((s0 - k d - half)/dist, (s0 - k d + half)/dist]
    double const s_min = s0 - hi_lim * dist_um;
    double const s_max = s0 - lo_lim * dist_um;
    auto const k_lo = static_cast<long long>(std::floor((s_min - half) / d)) - 1;
    auto const k_hi = static_cast<long long>(std::ceil((s_max + half) / d)) + 1;
    for (long long k = k_hi; k >= k_lo; --k) {
        double const a = (s0 - static_cast<double>(k) * d - half) / dist_um;
        double const b = (s0 - static_cast<double>(k) * d + half) / dist_um;
        double const lo = std::max(a, lo_lim), hi = std::min(b, hi_lim);
        if (hi > lo) out.emplace_back(lo, hi);
    }
}

} // namespace detail

/// Ballistic shadow pattern: for each detector point, the probability over the
/// tilt distribution that the straight ray passes open slits of both gratings.
/// No wavelength enters.
inline IntensityProfile simulate_classical_pattern(InterferometerGeometry const& geometry, double z_detector_mm,
                                                   Grid1D const& grid, TiltDistribution const& dist,
                                                   unsigned threads = 1) {
    if (!(z_detector_mm > 0.0)) throw DomainError("detector distance must be positive");
    geometry.validate();
    grid.validate();
    std::size_t const b = grid.physics_begin(), e = grid.physics_end();
    IntensityProfile p;
    p.x_start_um = grid.x_um(b);
    p.spacing_um = grid.spacing_um;
    p.plane_z_mm = z_detector_mm;
    p.intensity.assign(e - b, 0.0);

    GratingSpec const& g1 = geometry.grating1;
    GratingSpec const& g2 = geometry.grating2;
    double const z2 = z_detector_mm * 1e3;
    double const z1 = (z_detector_mm + geometry.L1_mm) * 1e3;

    auto transmits = [](GratingSpec const& g, double s) {
        double const u = (s - g.lateral_offset_um) / g.period_um;
        double const t = u - std::floor(u + 0.5);
        return t >= -0.5 * g.open_fraction && t < 0.5 * g.open_fraction;
    };

    if (!(dist.width_rad > 0.0)) {
        for (std::size_t i = b; i < e; ++i) {
            double const x = grid.x_um(i);
            p.intensity[i - b] = (transmits(g1, x) && transmits(g2, x)) ? 1.0 : 0.0;
        }
        return p;
    }

    bool const gauss = dist.kind == TiltDistribution::Kind::gaussian;
    double const sigma = dist.width_rad;
    double const lim = gauss ? std::min(dist.truncation_rad, 6.0 * sigma) : dist.width_rad;
    auto cdf = [&](double th) { return gauss ? detail::std_normal_cdf(th / sigma) : (th + lim) / (2.0 * lim); };
    double const norm = cdf(lim) - cdf(-lim);

    std::size_t const chunk = 256;
    std::size_t const n_chunks = (e - b + chunk - 1) / chunk;
    parallel_for(n_chunks, threads, [&](std::size_t c) {
        std::vector<std::pair<double, double>> iv1, iv2;
        std::size_t const i0 = b + c * chunk, i1 = std::min(e, i0 + chunk);
        for (std::size_t i = i0; i < i1; ++i) {
            double const x = grid.x_um(i);
            detail::open_tilt_intervals(x, z1, g1, -lim, lim, iv1);
            detail::open_tilt_intervals(x, z2, g2, -lim, lim, iv2);
            double acc = 0.0;
            std::size_t a = 0, k = 0;
            while (a < iv1.size() && k < iv2.size()) {
                double const lo = std::max(iv1[a].first, iv2[k].first);
                double const hi = std::min(iv1[a].second, iv2[k].second);
                if (hi > lo) acc += cdf(hi) - cdf(lo);
                if (iv1[a].second < iv2[k].second) ++a;
                else ++k;
            }
            p.intensity[i - b] = acc / norm;
        }
    });
    return p;
}

// ---------------------------------------------------------------------------
// Contrast extraction

struct FringeContrast {
    double contrast = 0.0;
    double phase_rad = 0.0;
};

/// First-harmonic visibility 2|A1|/A0 at the given period. A0 and A1 are
/// obtained by least-squares projection onto {1, cos, sin} over the longest
/// run of samples spanning an integer number of periods, which equals the
/// discrete Fourier amplitude when the run is period-aligned and stays exact
/// for a pure sinusoid when it is not.
inline FringeContrast pattern_contrast(IntensityProfile const& profile, double period_um) {
    double const dx = profile.spacing_um;
    if (!(period_um >= 4.0 * dx)) throw DomainError("fringe period not resolved by the profile sampling");
    double const width = profile.width_um();
    auto const periods = static_cast<std::size_t>(std::floor(width / period_um));
    if (periods < 10) throw DomainError("profile must cover at least 10 fringe periods");
    std::size_t const n = std::min(profile.intensity.size(),
                                   static_cast<std::size_t>(std::llround(periods * period_um / dx)));

    double const w = 2.0 * std::numbers::pi / period_um;
    // normal equations for I = a + b cos + c sin
    double s11 = 0, s1c = 0, s1s = 0, scc = 0, scs = 0, sss = 0, y1 = 0, yc = 0, ys = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double const x = profile.x_um(i);
        double const cs = std::cos(w * x), sn = std::sin(w * x);
        double const y = profile.intensity[i];
        s11 += 1.0; s1c += cs; s1s += sn;
        scc += cs * cs; scs += cs * sn; sss += sn * sn;
        y1 += y; yc += y * cs; ys += y * sn;
    }
    // 3x3 solve by Cramer's rule
    auto det3 = [](double a, double b, double c, double d, double e, double f, double g, double h, double i) {
        return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g);
    };
    double const D = det3(s11, s1c, s1s, s1c, scc, scs, s1s, scs, sss);
    if (D == 0.0) throw NumericalError("singular contrast projection");
    double const a = det3(y1, s1c, s1s, yc, scc, scs, ys, scs, sss) / D;
    double const bc = det3(s11, y1, s1s, s1c, yc, scs, s1s, ys, sss) / D;
    double const cs = det3(s11, s1c, y1, s1c, scc, yc, s1s, scs, ys) / D;
    FringeContrast r;
    if (a <= 0.0) return r;
    r.contrast = std::hypot(bc, cs) / a;
    r.phase_rad = std::atan2(-cs, bc);
    return r;
}

/// Period of the strongest non-zero Fourier component of the mean-removed
/// profile, searched between `min_period_um` and half the profile width.
inline double dominant_period_um(IntensityProfile const& profile, double min_period_um = 0.0) {
    std::size_t const n = profile.intensity.size();
    if (n < 16) throw DomainError("profile too short for a spectrum");
    std::size_t m = 1;
    while (m < 8 * n) m *= 2;
    double const mean = profile.mean();
    std::vector<std::complex<double>> buf(m);
    for (std::size_t i = 0; i < n; ++i) buf[i] = profile.intensity[i] - mean;
    fft_forward(buf);
    double const span = static_cast<double>(m) * profile.spacing_um; // padded length
    double const fmax = min_period_um > 0.0 ? 1.0 / min_period_um : std::numeric_limits<double>::infinity();
    double const fmin = 2.0 / profile.width_um();
    std::size_t best = 0;
    double best_mag = -1.0;
    for (std::size_t k = 1; k < m / 2; ++k) {
        double const f = static_cast<double>(k) / span;
        if (f < fmin || f > fmax) continue;
        double const mag = std::abs(buf[k]);
        if (mag > best_mag) { best_mag = mag; best = k; }
    }
    if (best == 0) throw NumericalError("no spectral peak in the allowed band");
    double const l = std::abs(buf[best - 1]), c = std::abs(buf[best]), r = std::abs(buf[best + 1]);
    double const den = l - 2.0 * c + r;
    double const shift = den != 0.0 ? 0.5 * (l - r) / den : 0.0;
    return span / (static_cast<double>(best) + shift);
}

// ---------------------------------------------------------------------------
// Scans

struct ContrastSample {
    double z_mm = 0.0;
    double contrast = 0.0;
};

/// Evaluates patterns for one model at arbitrary planes; the quantum
/// simulator is built once and reused.
class PlaneEvaluator {
public:
    PlaneEvaluator(InterferometerGeometry const& geometry, BeamModel const& beam, ParticleState const& particle,
                   SimConfig const& config)
        : geometry_(geometry), config_(config), period_(beat_period_um(geometry)) {
        beam.validate();
        if (config.model == Model::quantum) quantum_.emplace(geometry, particle, config);
    }

    IntensityProfile pattern(double z_mm) const {
        if (quantum_) return quantum_->pattern_at(z_mm);
        return simulate_classical_pattern(geometry_, z_mm, config_.grid, config_.tilt, config_.threads);
    }

    double contrast(double z_mm) const { return pattern_contrast(pattern(z_mm), period_).contrast; }
    double period_um() const noexcept { return period_; }

private:
    InterferometerGeometry geometry_;
    SimConfig config_;
    double period_;
    std::optional<QuantumSimulator> quantum_;
};

inline std::vector<ContrastSample> contrast_vs_L2(InterferometerGeometry const& geometry, BeamModel const& beam,
                                                  ParticleState const& particle, std::span<double const> z_values_mm,
                                                  SimConfig const& config) {
    PlaneEvaluator const eval(geometry, beam, particle, config);
    std::vector<ContrastSample> out;
    out.reserve(z_values_mm.size());
    for (double z : z_values_mm) out.push_back({z, eval.contrast(z)});
    return out;
}

inline std::vector<double> linspace(double a, double b, std::size_t n) {
    std::vector<double> v(n);
    if (n == 1) { v[0] = a; return v; }
    for (std::size_t i = 0; i < n; ++i) v[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    return v;
}

struct ContrastPeak {
    double z_mm = 0.0;
    double contrast = 0.0;
    std::vector<ContrastSample> scan;
};

/// Coarse scan over [z_lo, z_hi] followed by golden-section refinement inside
/// the bracket around the best coarse plane.
inline ContrastPeak find_contrast_peak(PlaneEvaluator const& eval, double z_lo_mm, double z_hi_mm,
                                       std::size_t n_coarse = 29, double tol_mm = 0.05) {
    if (!(z_hi_mm > z_lo_mm) || !(z_lo_mm > 0.0)) throw DomainError("invalid z range");
    if (n_coarse < 3) throw DomainError("need at least 3 coarse planes");
    ContrastPeak peak;
    for (double z : linspace(z_lo_mm, z_hi_mm, n_coarse)) peak.scan.push_back({z, eval.contrast(z)});
    std::size_t best = 0;
    for (std::size_t i = 1; i < peak.scan.size(); ++i)
        if (peak.scan[i].contrast > peak.scan[best].contrast) best = i;
    double a = peak.scan[best == 0 ? 0 : best - 1].z_mm;
    double b = peak.scan[std::min(best + 1, peak.scan.size() - 1)].z_mm;
    double const gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = eval.contrast(c), fd = eval.contrast(d);
    while (b - a > tol_mm) {
        if (fc > fd) {
            b = d; d = c; fd = fc;
            c = b - gr * (b - a); fc = eval.contrast(c);
        } else {
            a = c; c = d; fc = fd;
            d = a + gr * (b - a); fd = eval.contrast(d);
        }
    }
    double const zm = 0.5 * (a + b);
    double const cm = eval.contrast(zm);
    peak.z_mm = zm;
    peak.contrast = cm;
    if (peak.scan[best].contrast > cm) {
        peak.z_mm = peak.scan[best].z_mm;
        peak.contrast = peak.scan[best].contrast;
    }
    return peak;
}

struct EnergyContrast {
    double energy_kev = 0.0;
    double peak_z_mm = 0.0;
    /// Peak contrast over the z-scan at this energy.
    double contrast = 0.0;
    /// contrast / contrast at the reference (resonance) energy.
    double c_normalized = 0.0;
    /// Contrast at the reference energy's peak plane.
    double contrast_fixed_plane = 0.0;
    /// contrast_fixed_plane / contrast (<= 1).
    double c_fixed_plane_ratio = 0.0;
};

/// Contrast versus particle energy at fixed geometry. Each energy is scanned in
/// z; normalization is to the peak contrast at `reference_energy_kev`.
inline std::vector<EnergyContrast> contrast_vs_energy(InterferometerGeometry const& geometry, BeamModel const& beam,
                                                      std::span<double const> energies_kev, SimConfig const& config,
                                                      double reference_energy_kev, double z_lo_mm, double z_hi_mm,
                                                      std::size_t n_coarse = 29) {
    auto particle_at = [&](double e) {
        ParticleState p = beam.particle;
        p.kinetic_energy_kev = e;
        return p;
    };
    for (double e : energies_kev)
        if (!(e >= 5.0 && e <= 20.0)) throw DomainError("energies must lie within [5, 20] keV");

    PlaneEvaluator const ref_eval(geometry, beam, particle_at(reference_energy_kev), config);
    ContrastPeak const ref = find_contrast_peak(ref_eval, z_lo_mm, z_hi_mm, n_coarse);

    std::vector<EnergyContrast> out;
    for (double e : energies_kev) {
        PlaneEvaluator const eval(geometry, beam, particle_at(e), config);
        ContrastPeak const pk = find_contrast_peak(eval, z_lo_mm, z_hi_mm, n_coarse);
        EnergyContrast ec;
        ec.energy_kev = e;
        ec.peak_z_mm = pk.z_mm;
        ec.contrast = pk.contrast;
        ec.c_normalized = ref.contrast > 0.0 ? pk.contrast / ref.contrast : 0.0;
        ec.contrast_fixed_plane = eval.contrast(ref.z_mm);
        ec.c_fixed_plane_ratio = pk.contrast > 0.0 ? ec.contrast_fixed_plane / pk.contrast : 0.0;
        out.push_back(ec);
    }
    return out;
}

inline TalbotCarpet simulate_carpet(InterferometerGeometry const& geometry, BeamModel const& beam,
                                    ParticleState const& particle, std::span<double const> z_values_mm,
                                    SimConfig const& config) {
    for (std::size_t i = 1; i < z_values_mm.size(); ++i)
        if (!(z_values_mm[i] > z_values_mm[i - 1])) throw DomainError("carpet planes must be strictly increasing");
    PlaneEvaluator const eval(geometry, beam, particle, config);
    TalbotCarpet c;
    for (double z : z_values_mm) {
        c.z_values_mm.push_back(z);
        c.profiles.push_back(eval.pattern(z));
    }
    return c;
}

} // namespace talbot
