#pragma once
//
// Fringe analysis of emulsion grain data: tiling into views, Rayleigh-test
// search for the fringe angle and period per view, selection of views with a
// consistent periodicity, noise-subtracted contrast per view, and exposure
// level fits (contrast profile along the film, peak position, period).
//

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "talbot/errors.hpp"
#include "talbot/fit.hpp"
#include "talbot/hitgen.hpp"
#include "talbot/parallel.hpp"
#include "talbot/physics.hpp"

namespace talbot {

// ---------------------------------------------------------------------------
// Views

struct View {
    std::size_t ix = 0;
    std::size_t iy = 0;
    Region bounds;
    std::vector<HitRecord> hits;

    double center_X_um() const { return 0.5 * (bounds.X0_um + bounds.X1_um); }
    double center_Y_um() const { return 0.5 * (bounds.Y0_um + bounds.Y1_um); }
};

struct Partition {
    /// nx * ny views, index iy * nx + ix.
    std::vector<View> views;
    std::size_t nx = 0;
    std::size_t ny = 0;
    /// Hits outside the full tiles.
    std::size_t untiled = 0;
};

namespace detail {
/// Tile index with intervals (lo, hi]; the tiling origin itself belongs to
/// tile 0. Returns npos when outside [0, n) tiles.
inline std::size_t tile_index(double v, double origin, double size, std::size_t n) {
    constexpr auto npos = static_cast<std::size_t>(-1);
    double const t = (v - origin) / size;
    if (!(t >= 0.0)) return npos;
    double const k = std::max(std::ceil(t) - 1.0, 0.0);
    if (k >= static_cast<double>(n)) return npos;
    return static_cast<std::size_t>(k);
}

inline bool hit_less(HitRecord const& a, HitRecord const& b) {
    return std::tie(a.X_um, a.Y_um, a.Z_um) < std::tie(b.X_um, b.Y_um, b.Z_um);
}
} // namespace detail

/// Exact tiling anchored at the tiling origin. A hit on a shared boundary goes
/// to the lower-index view. Hits inside each view are put in canonical
/// (X, Y, Z) order so results do not depend on input order.
inline Partition partition_views(std::span<HitRecord const> hits, ViewTiling const& tiling) {
    if (!(tiling.view_width_um > 0.0 && tiling.view_height_um > 0.0)) throw DomainError("view size must be positive");
    Partition p;
    p.nx = tiling.nx();
    p.ny = tiling.ny();
    p.views.resize(p.nx * p.ny);
    for (std::size_t iy = 0; iy < p.ny; ++iy)
        for (std::size_t ix = 0; ix < p.nx; ++ix) {
            auto& v = p.views[iy * p.nx + ix];
            v.ix = ix;
            v.iy = iy;
            v.bounds = tiling.tile(ix, iy);
        }
    constexpr auto npos = static_cast<std::size_t>(-1);
    for (auto const& h : hits) {
        auto const ix = detail::tile_index(h.X_um, tiling.origin_X_um, tiling.view_width_um, p.nx);
        auto const iy = detail::tile_index(h.Y_um, tiling.origin_Y_um, tiling.view_height_um, p.ny);
        if (ix == npos || iy == npos) {
            ++p.untiled;
            continue;
        }
        p.views[iy * p.nx + ix].hits.push_back(h);
    }
    for (auto& v : p.views) std::sort(v.hits.begin(), v.hits.end(), detail::hit_less);
    return p;
}

// ---------------------------------------------------------------------------
// Rayleigh test

/// Coordinates relative to a pivot, the form every per-view search works on.
struct LocalPoints {
    std::vector<double> x;
    std::vector<double> y;

    std::size_t size() const noexcept { return x.size(); }

    static LocalPoints of(std::span<HitRecord const> hits, double pivot_X_um, double pivot_Y_um) {
        LocalPoints p;
        p.x.reserve(hits.size());
        p.y.reserve(hits.size());
        for (auto const& h : hits) {
            p.x.push_back(h.X_um - pivot_X_um);
            p.y.push_back(h.Y_um - pivot_Y_um);
        }
        return p;
    }
};

/// R = |(1/n) sum exp(2 pi i X'(alpha) / d3)| with X' = x cos(alpha) - y sin(alpha).
inline double rayleigh_statistic(LocalPoints const& pts, double alpha_rad, double d3_um) {
    if (pts.size() == 0) throw DomainError("Rayleigh statistic of an empty set is undefined");
    if (!(d3_um > 0.0)) throw DomainError("trial period must be positive");
    double const k = 2.0 * std::numbers::pi / d3_um;
    double const ca = k * std::cos(alpha_rad), sa = k * std::sin(alpha_rad);
    double sc = 0.0, ss = 0.0;
    for (std::size_t j = 0; j < pts.size(); ++j) {
        double const ph = pts.x[j] * ca - pts.y[j] * sa;
        sc += std::cos(ph);
        ss += std::sin(ph);
    }
    double const n = static_cast<double>(pts.size());
    return std::min(1.0, std::hypot(sc, ss) / n);
}

inline double rayleigh_statistic(std::span<HitRecord const> hits, double alpha_rad, double d3_um,
                                 double pivot_X_um = 0.0, double pivot_Y_um = 0.0) {
    return rayleigh_statistic(LocalPoints::of(hits, pivot_X_um, pivot_Y_um), alpha_rad, d3_um);
}

struct RayleighSearch {
    double alpha_min_rad = -0.05;
    double alpha_max_rad = 0.05;
    double d3_min_um = 5.7;
    double d3_max_um = 6.1;
    double view_width_um = 370.0;
    double view_height_um = 294.0;
    std::size_t min_hits = 100;
    int refine_sweeps = 3;
    /// Coarse-grid steps are divided by this factor (1 = the resolution bound).
    double grid_refinement = 1.0;

    void validate() const {
        if (!(alpha_max_rad > alpha_min_rad)) throw DomainError("empty angle range");
        if (!(d3_max_um > d3_min_um && d3_min_um > 0.0)) throw DomainError("empty period range");
        if (!(view_width_um > 0.0 && view_height_um > 0.0)) throw DomainError("view size must be positive");
        if (!(grid_refinement >= 1.0)) throw DomainError("grid refinement must be >= 1");
    }
    /// Period step <= d3^2 / (4 W), angle step <= d3 / (4 H), at the smallest period.
    std::size_t period_steps() const {
        double const step = d3_min_um * d3_min_um / (4.0 * view_width_um) / grid_refinement;
        return static_cast<std::size_t>(std::ceil((d3_max_um - d3_min_um) / step)) + 1;
    }
    std::size_t angle_steps() const {
        double const step = d3_min_um / (4.0 * view_height_um) / grid_refinement;
        return static_cast<std::size_t>(std::ceil((alpha_max_rad - alpha_min_rad) / step)) + 1;
    }
};

struct RayleighResult {
    double alpha_star_rad = 0.0;
    double d3_star_um = 0.0;
    double R_star = 0.0;
    std::size_t n_hits = 0;
    bool reliable = false;
};

namespace detail {
/// Maximizes f on [a, b] by golden-section search.
template <class F>
inline std::pair<double, double> golden_max(F&& f, double a, double b, double tol) {
    double const gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc > fd) {
            b = d; d = c; fd = fc;
            c = b - gr * (b - a); fc = f(c);
        } else {
            a = c; c = d; fc = fd;
            d = a + gr * (b - a); fd = f(d);
        }
    }
    return fc > fd ? std::pair{c, fc} : std::pair{d, fd};
}
} // namespace detail

/// Grid search over (alpha, d3) followed by alternating golden-section
/// refinement along each axis. Views with fewer than `min_hits` points are
/// still searched but flagged unreliable.
inline RayleighResult maximize_rayleigh(LocalPoints const& pts, RayleighSearch const& s = {}) {
    s.validate();
    if (pts.size() == 0) throw DomainError("cannot search an empty view");
    std::size_t const na = s.angle_steps(), nd = s.period_steps();
    double const da = (s.alpha_max_rad - s.alpha_min_rad) / static_cast<double>(na - 1);
    double const dd = (s.d3_max_um - s.d3_min_um) / static_cast<double>(nd - 1);
    RayleighResult r;
    r.n_hits = pts.size();
    r.reliable = pts.size() >= s.min_hits;
    r.R_star = -1.0;
    for (std::size_t i = 0; i < na; ++i) {
        double const a = s.alpha_min_rad + da * static_cast<double>(i);
        for (std::size_t j = 0; j < nd; ++j) {
            double const d = s.d3_min_um + dd * static_cast<double>(j);
            double const R = rayleigh_statistic(pts, a, d);
            if (R > r.R_star) {
                r.R_star = R;
                r.alpha_star_rad = a;
                r.d3_star_um = d;
            }
        }
    }
    for (int sweep = 0; sweep < s.refine_sweeps; ++sweep) {
        double const a_lo = std::max(s.alpha_min_rad, r.alpha_star_rad - da);
        double const a_hi = std::min(s.alpha_max_rad, r.alpha_star_rad + da);
        auto const [a, Ra] = detail::golden_max(
            [&](double v) { return rayleigh_statistic(pts, v, r.d3_star_um); }, a_lo, a_hi, 1e-7);
        if (Ra > r.R_star) {
            r.alpha_star_rad = a;
            r.R_star = Ra;
        }
        double const d_lo = std::max(s.d3_min_um, r.d3_star_um - dd);
        double const d_hi = std::min(s.d3_max_um, r.d3_star_um + dd);
        auto const [d, Rd] = detail::golden_max(
            [&](double v) { return rayleigh_statistic(pts, r.alpha_star_rad, v); }, d_lo, d_hi, 1e-7);
        if (Rd > r.R_star) {
            r.d3_star_um = d;
            r.R_star = Rd;
        }
    }
    return r;
}

inline RayleighResult maximize_rayleigh(View const& view, RayleighSearch const& s = {}) {
    return maximize_rayleigh(LocalPoints::of(view.hits, view.center_X_um(), view.center_Y_um()), s);
}

// ---------------------------------------------------------------------------
// Scatter-peak selection

struct EllipseSelection {
    double alpha0_rad = 0.0;
    double d0_um = 0.0;
    double alpha0_err_rad = 0.0;
    double d0_err_um = 0.0;
    double sigma_alpha_rad = 0.0;
    double sigma_d_um = 0.0;
    /// Fitted constant background of each histogram, counts per bin.
    double background_alpha = 0.0;
    double background_d = 0.0;
    bool degenerate = false;
    /// Both histograms peak inside the search box and the ellipse holds at
    /// least 5 + 5 sqrt(b) more views than the b expected from a uniform scatter.
    bool significant = false;
    std::size_t n_inside = 0;
    double expected_background_inside = 0.0;
    Histogram hist_alpha;
    Histogram hist_d;

    double semi_alpha() const { return 3.0 * sigma_alpha_rad; }
    double semi_d() const { return 3.0 * sigma_d_um; }
    bool contains(double alpha, double d) const {
        double const u = (alpha - alpha0_rad) / semi_alpha(), v = (d - d0_um) / semi_d();
        return u * u + v * v <= 1.0;
    }
};

class ScatterFitError : public NumericalError {
public:
    ScatterFitError(std::string const& what, Histogram a, Histogram d)
        : NumericalError(what), hist_alpha(std::move(a)), hist_d(std::move(d)) {}
    Histogram hist_alpha;
    Histogram hist_d;
};

/// Histograms alpha* and d3* over the search ranges, fits each with a Gaussian
/// on a constant, and returns the axis-aligned 3-sigma ellipse.
inline EllipseSelection fit_scatter_peak(std::span<RayleighResult const> results, RayleighSearch const& s = {},
                                         std::size_t bins = 60) {
    if (results.size() < 50) throw InputError("scatter-peak fit needs at least 50 views, got " +
                                              std::to_string(results.size()));
    EllipseSelection e;
    e.hist_alpha = Histogram(s.alpha_min_rad, s.alpha_max_rad, bins);
    e.hist_d = Histogram(s.d3_min_um, s.d3_max_um, bins);
    for (auto const& r : results) {
        e.hist_alpha.fill(r.alpha_star_rad);
        e.hist_d.fill(r.d3_star_um);
    }
    GaussianFit fa, fd;
    try {
        fa = fit_histogram_peak(e.hist_alpha);
        fd = fit_histogram_peak(e.hist_d);
    } catch (NumericalError const& err) {
        throw ScatterFitError(std::string("scatter-peak fit failed: ") + err.what(), e.hist_alpha, e.hist_d);
    }
    e.alpha0_rad = fa.mean;
    e.d0_um = fd.mean;
    e.alpha0_err_rad = fa.mean_err;
    e.d0_err_um = fd.mean_err;
    e.sigma_alpha_rad = fa.sigma;
    e.sigma_d_um = fd.sigma;
    e.background_alpha = fa.baseline;
    e.background_d = fd.baseline;
    e.degenerate = fa.sigma_floored || fd.sigma_floored;

    for (auto const& r : results)
        if (e.contains(r.alpha_star_rad, r.d3_star_um)) ++e.n_inside;
    double const box = (s.alpha_max_rad - s.alpha_min_rad) * (s.d3_max_um - s.d3_min_um);
    double const ellipse = std::numbers::pi * e.semi_alpha() * e.semi_d();
    e.expected_background_inside = static_cast<double>(results.size()) * std::min(1.0, ellipse / box);
    bool const inside_box = fa.mean > s.alpha_min_rad && fa.mean < s.alpha_max_rad && fd.mean > s.d3_min_um &&
                            fd.mean < s.d3_max_um;
    bool const peaks = fa.amplitude > 0.0 && fd.amplitude > 0.0;
    double const excess = static_cast<double>(e.n_inside) - e.expected_background_inside;
    e.significant = inside_box && peaks && excess >= 5.0 * std::sqrt(e.expected_background_inside) + 5.0;
    return e;
}

// ---------------------------------------------------------------------------
// Depth window, folding, noise subtraction

struct DepthWindow {
    double z_mean_um = 0.0;
    double z_sigma_um = 0.0;
    double lo_um = 0.0;
    double hi_um = 0.0;
    /// Bulk (noise-only) grain density per um^3 and the count it came from.
    double bulk_density_per_um3 = 0.0;
    std::size_t bulk_count = 0;
    double bulk_volume_um3 = 0.0;

    double width_um() const { return hi_um - lo_um; }
};

struct DepthOptions {
    double bin_um = 0.25;
    double window_sigmas = 1.0;
    double bulk_gap_sigmas = 3.0;
    std::size_t min_hits = 50;
};

/// Fits the implantation profile of a view (Gaussian on the uniform noise
/// floor) and measures the bulk noise density away from the peak.
inline DepthWindow fit_depth_window(std::span<HitRecord const> hits, double view_area_um2, double thickness_um,
                                    DepthOptions const& opt = {}) {
    if (hits.size() < opt.min_hits)
        throw InputError("depth fit needs at least " + std::to_string(opt.min_hits) + " hits");
    auto const nb = static_cast<std::size_t>(std::ceil(thickness_um / opt.bin_um));
    Histogram h(0.0, static_cast<double>(nb) * opt.bin_um, nb);
    for (auto const& g : hits) h.fill(g.Z_um);
    GaussianFit const f = fit_histogram_peak(h);
    if (!(f.amplitude > 0.0)) throw NumericalError("no implantation peak in depth profile");
    DepthWindow w;
    w.z_mean_um = f.mean;
    w.z_sigma_um = f.sigma;
    w.lo_um = std::max(0.0, f.mean - opt.window_sigmas * f.sigma);
    w.hi_um = std::min(thickness_um, f.mean + opt.window_sigmas * f.sigma);
    if (!(w.hi_um > w.lo_um)) throw NumericalError("implantation window lies outside the emulsion");
    double const gap_lo = f.mean - opt.bulk_gap_sigmas * f.sigma;
    double const gap_hi = f.mean + opt.bulk_gap_sigmas * f.sigma;
    double slab = std::max(0.0, thickness_um - std::max(gap_hi, 0.0)) + std::max(0.0, std::min(gap_lo, thickness_um));
    for (auto const& g : hits)
        if (g.Z_um > gap_hi || g.Z_um < gap_lo) ++w.bulk_count;
    w.bulk_volume_um3 = slab * view_area_um2;
    w.bulk_density_per_um3 = w.bulk_volume_um3 > 0.0 ? static_cast<double>(w.bulk_count) / w.bulk_volume_um3 : 0.0;
    return w;
}

/// Hits inside the centred analysis area of the view and the depth window.
inline std::vector<HitRecord> select_and_trim(View const& view, DepthWindow const& window, double area_width_um,
                                              double area_height_um) {
    double const hx = 0.5 * area_width_um, hy = 0.5 * area_height_um;
    double const cx = view.center_X_um(), cy = view.center_Y_um();
    std::vector<HitRecord> out;
    for (auto const& h : view.hits)
        if (std::abs(h.X_um - cx) <= hx && std::abs(h.Y_um - cy) <= hy && h.Z_um >= window.lo_um &&
            h.Z_um <= window.hi_um)
            out.push_back(h);
    return out;
}

struct FoldFit {
    double a = 0.0, p = 0.0, q = 0.0;
    Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();
    double contrast_raw = 0.0;
    double contrast_raw_err = 0.0;
    /// Fringe phase phi in a + A sin(2 pi X / d3 + phi).
    double phase_rad = 0.0;
    std::size_t n_bins = 0;
    std::size_t n_hits = 0;
    std::vector<double> counts;
    std::vector<double> model;
    std::vector<double> residuals;

    double mean_per_bin() const { return a; }
    double amplitude() const { return std::hypot(p, q); }
};

/// Fits a + p sin + q cos to a folded histogram covering fold_periods
/// periods in bins_per_period * fold_periods bins, by weighted linear least
/// squares iterated with model Poisson variances. The basis is the bin average
/// of sin/cos, so the bin integrals of an exact sinusoid are reproduced exactly.
inline FoldFit fit_folded_counts(std::vector<double> counts, std::size_t bins_per_period, int fold_periods = 1) {
    if (fold_periods < 1 || bins_per_period < 4) throw DomainError("invalid folding parameters");
    FoldFit f;
    f.n_bins = bins_per_period * static_cast<std::size_t>(fold_periods);
    if (counts.size() != f.n_bins) throw DomainError("histogram size does not match the folding parameters");
    f.counts = std::move(counts);
    double n = 0.0;
    for (double c : f.counts) n += c;
    f.n_hits = static_cast<std::size_t>(std::llround(n));
    double const s = sinc(std::numbers::pi / static_cast<double>(bins_per_period));
    Eigen::MatrixXd X(f.n_bins, 3);
    Eigen::VectorXd y(f.n_bins);
    for (std::size_t b = 0; b < f.n_bins; ++b) {
        double const th = 2.0 * std::numbers::pi * (static_cast<double>(b) + 0.5) / static_cast<double>(bins_per_period);
        X(b, 0) = 1.0;
        X(b, 1) = s * std::sin(th);
        X(b, 2) = s * std::cos(th);
        y(b) = f.counts[b];
    }
    Eigen::VectorXd w = (y.array().max(1.0)).inverse().matrix();
    Eigen::Vector3d beta = Eigen::Vector3d::Zero();
    Eigen::Matrix3d XtWX;
    for (int iter = 0; iter < 4; ++iter) {
        XtWX = X.transpose() * w.asDiagonal() * X;
        beta = XtWX.ldlt().solve(X.transpose() * (w.asDiagonal() * y));
        Eigen::VectorXd const m = X * beta;
        w = (m.array().max(0.5)).inverse().matrix();
    }
    XtWX = X.transpose() * w.asDiagonal() * X;
    f.covariance = XtWX.inverse();
    f.a = beta[0];
    f.p = beta[1];
    f.q = beta[2];
    if (!(f.a > 0.0)) throw InputError("fold fit gave a non-positive mean (unphysical)");
    Eigen::VectorXd const m = X * beta;
    f.model.assign(m.data(), m.data() + m.size());
    f.residuals.resize(f.n_bins);
    for (std::size_t b = 0; b < f.n_bins; ++b) f.residuals[b] = f.counts[b] - f.model[b];
    double const A = f.amplitude();
    f.contrast_raw = A / f.a;
    f.phase_rad = std::atan2(f.q, f.p);
    Eigen::Vector3d grad;
    if (A > 0.0)
        grad << -A / (f.a * f.a), f.p / (A * f.a), f.q / (A * f.a);
    else
        grad << 0.0, 1.0 / f.a, 0.0;
    f.contrast_raw_err = std::sqrt(std::max(0.0, double(grad.transpose() * f.covariance * grad)));
    return f;
}

/// Folds X'(alpha) modulo fold_periods * d3 into bins and fits the folded
/// histogram with fit_folded_counts.
inline FoldFit fold_and_fit(LocalPoints const& pts, double alpha_rad, double d3_um, std::size_t bins_per_period = 30,
                            int fold_periods = 1, std::size_t min_hits = 500) {
    if (pts.size() < min_hits) throw InputError("folding needs at least " + std::to_string(min_hits) + " hits");
    if (!(d3_um > 0.0)) throw DomainError("period must be positive");
    if (fold_periods < 1 || bins_per_period < 4) throw DomainError("invalid folding parameters");
    std::size_t const n_bins = bins_per_period * static_cast<std::size_t>(fold_periods);
    double const P = d3_um * fold_periods;
    double const ca = std::cos(alpha_rad), sa = std::sin(alpha_rad);
    std::vector<double> counts(n_bins, 0.0);
    for (std::size_t j = 0; j < pts.size(); ++j) {
        double u = std::fmod(pts.x[j] * ca - pts.y[j] * sa, P);
        if (u < 0.0) u += P;
        auto b = static_cast<std::size_t>(u / P * static_cast<double>(n_bins));
        if (b >= n_bins) b = n_bins - 1;
        counts[b] += 1.0;
    }
    FoldFit f = fit_folded_counts(std::move(counts), bins_per_period, fold_periods);
    f.n_hits = pts.size();
    return f;
}

/// Contrast referred to the signal-only mean: a * C_raw / (a - b_noise) with
/// b_noise = bulk_density * region_volume / n_bins.
inline double subtract_noise(double contrast_raw, double mean_per_bin, double bulk_density_per_um3,
                             double region_volume_um3, std::size_t n_bins) {
    if (n_bins == 0) throw DomainError("n_bins must be positive");
    double const b = bulk_density_per_um3 * region_volume_um3 / static_cast<double>(n_bins);
    if (!(mean_per_bin > b)) throw InputError("signal-free view: noise level reaches the mean");
    return mean_per_bin * contrast_raw / (mean_per_bin - b);
}

struct CorrectedContrast {
    double contrast = 0.0;
    double contrast_err = 0.0;
    double noise_per_bin = 0.0;
};

/// Noise subtraction with error propagation from the fold covariance and the
/// bulk-count Poisson error (independent).
inline CorrectedContrast subtract_noise(FoldFit const& f, double noise_per_bin, double noise_per_bin_err) {
    if (!(f.a > noise_per_bin)) throw InputError("signal-free view: noise level reaches the mean");
    CorrectedContrast c;
    c.noise_per_bin = noise_per_bin;
    double const A = f.amplitude();
    double const den = f.a - noise_per_bin;
    c.contrast = A / den;
    Eigen::Vector3d grad;
    if (A > 0.0)
        grad << -A / (den * den), f.p / (A * den), f.q / (A * den);
    else
        grad << 0.0, 1.0 / den, 0.0;
    double var = grad.transpose() * f.covariance * grad;
    double const db = A / (den * den) * noise_per_bin_err;
    var += db * db;
    c.contrast_err = std::sqrt(std::max(var, 0.0));
    return c;
}

// ---------------------------------------------------------------------------
// Contrast profile along the film

struct ProfilePoint {
    double Y_mm = 0.0;
    double contrast = 0.0;
    double contrast_err = 0.0;
};

struct ProfileFit {
    double C_max = 0.0;
    double C_max_err = 0.0;
    double Y0_mm = 0.0;
    double Y0_err_mm = 0.0;
    double baseline = 0.0;
    double amplitude = 0.0;
    double width_mm = 0.0;
    bool degenerate = false;
    GaussianFit fit;
};

/// C(Y) = B + A exp(-(Y - Y0)^2 / (2 w^2)); C_max = B + A.
inline ProfileFit contrast_profile_fit(std::span<ProfilePoint const> points, std::size_t min_points = 10) {
    if (points.size() < min_points)
        throw InputError("contrast profile fit needs at least " + std::to_string(min_points) + " views, got " +
                         std::to_string(points.size()));
    std::vector<double> x, y, w;
    for (auto const& p : points) {
        x.push_back(p.Y_mm);
        y.push_back(p.contrast);
        w.push_back(p.contrast_err > 0.0 ? 1.0 / (p.contrast_err * p.contrast_err) : 1.0);
    }
    ProfileFit r;
    r.fit = fit_gaussian_plus_constant(x, y, w);
    r.baseline = r.fit.baseline;
    r.amplitude = r.fit.amplitude;
    r.Y0_mm = r.fit.mean;
    r.Y0_err_mm = r.fit.mean_err;
    r.width_mm = r.fit.sigma;
    r.C_max = r.baseline + r.amplitude;
    auto const& C = r.fit.covariance;
    r.C_max_err = std::sqrt(std::max(0.0, C(0, 0) + C(1, 1) + 2.0 * C(0, 1)));
    r.degenerate = !(r.amplitude > 3.0 * r.fit.amplitude_err) || r.fit.sigma_floored;
    return r;
}

// ---------------------------------------------------------------------------
// Exposure pipeline

struct AnalysisParams {
    RayleighSearch search;
    std::size_t scatter_bins = 60;
    double area_width_um = 340.0;
    double area_height_um = 270.0;
    DepthOptions depth;
    std::size_t bins_per_period = 30;
    int fold_periods = 1;
    std::size_t min_fold_hits = 500;
    /// Centre of the X band used for the profile fit; NaN = centre of the film.
    double band_center_X_mm = std::numeric_limits<double>::quiet_NaN();
    double band_width_mm = 1.0;
    std::size_t min_band_views = 10;
    /// Relative systematic error on the measured period.
    double systematic_fraction = 0.008;
    /// Minimum bulk grains for a per-view density; sparser views use the film average.
    std::size_t min_bulk_count = 20;
    double energy_kev = 14.0;
};

struct ViewRow {
    std::size_t ix = 0, iy = 0;
    double X_center_um = 0.0, Y_center_um = 0.0;
    std::size_t n_hits = 0;
    bool searched = false;
    RayleighResult rayleigh;
    bool selected = false;
    double contrast = 0.0;
    double contrast_err = 0.0;
    double phase_rad = 0.0;
    double n_signal_est = 0.0;
    double n_noise_est = 0.0;
    double window_width_um = 0.0;
    std::string note;
    std::optional<FoldFit> fold;
};

struct ExposureAnalysis {
    std::vector<ViewRow> views;
    std::size_t nx = 0, ny = 0;
    std::size_t untiled_hits = 0;
    std::size_t total_hits = 0;
    std::string verdict;
    std::optional<EllipseSelection> selection;
    std::optional<ProfileFit> profile;
    std::string selection_note;
    std::string profile_note;
    double band_center_X_mm = 0.0;
    double d3_measured_um = 0.0, d3_stat_um = 0.0, d3_syst_um = 0.0;
    double L2_peak_mm = 0.0, L2_peak_err_mm = 0.0;
    double mean_window_width_um = 0.0;
    double film_bulk_density_per_um3 = 0.0;
    double energy_kev = 0.0;
};

namespace verdicts {
inline constexpr char const* fringes = "fringes found";
inline constexpr char const* none = "no consistent periodicity";
inline constexpr char const* too_few = "insufficient views";
inline constexpr char const* no_profile = "fringes found, contrast profile not fitted";
} // namespace verdicts

/// Full pipeline over one exposure. Per-view work is independent and runs in
/// parallel; all aggregation is in view-index order.
inline ExposureAnalysis analyze_exposure(std::span<HitRecord const> hits, EmulsionFrame const& frame,
                                         AnalysisParams const& params, unsigned threads = 1) {
    frame.validate();
    params.search.validate();
    ExposureAnalysis out;
    out.energy_kev = params.energy_kev;
    out.total_hits = hits.size();
    auto const tiling = ViewTiling::of(frame, params.search.view_width_um, params.search.view_height_um);
    Partition part = partition_views(hits, tiling);
    out.nx = part.nx;
    out.ny = part.ny;
    out.untiled_hits = part.untiled;
    std::size_t const nv = part.views.size();
    out.views.resize(nv);
    std::vector<std::optional<DepthWindow>> windows(nv);
    double const view_area = params.search.view_width_um * params.search.view_height_um;

    // Stage 1: depth window and Rayleigh search per view.
    parallel_for(nv, threads, [&](std::size_t i) {
        View const& v = part.views[i];
        ViewRow& row = out.views[i];
        row.ix = v.ix;
        row.iy = v.iy;
        row.X_center_um = v.center_X_um();
        row.Y_center_um = v.center_Y_um();
        row.n_hits = v.hits.size();
        if (v.hits.size() < params.search.min_hits) {
            row.note = "too few hits";
            return;
        }
        try {
            windows[i] = fit_depth_window(v.hits, view_area, frame.thickness_um, params.depth);
        } catch (std::exception const& e) {
            row.note = std::string("depth fit: ") + e.what();
            return;
        }
        std::vector<HitRecord> in_window;
        for (auto const& h : v.hits)
            if (h.Z_um >= windows[i]->lo_um && h.Z_um <= windows[i]->hi_um) in_window.push_back(h);
        row.window_width_um = windows[i]->width_um();
        if (in_window.size() < params.search.min_hits) {
            row.note = "too few hits in depth window";
            return;
        }
        row.rayleigh = maximize_rayleigh(LocalPoints::of(in_window, row.X_center_um, row.Y_center_um), params.search);
        row.searched = row.rayleigh.reliable;
    });

    // Film-wide bulk density as a fallback for sparse views.
    {
        std::size_t cnt = 0;
        double vol = 0.0;
        for (auto const& w : windows)
            if (w) {
                cnt += w->bulk_count;
                vol += w->bulk_volume_um3;
            }
        out.film_bulk_density_per_um3 = vol > 0.0 ? static_cast<double>(cnt) / vol : 0.0;
    }

    std::vector<RayleighResult> results;
    for (auto const& row : out.views)
        if (row.searched) results.push_back(row.rayleigh);
    if (results.size() < 50) {
        out.verdict = verdicts::too_few;
        out.selection_note = "only " + std::to_string(results.size()) + " views with enough hits";
        return out;
    }
    try {
        out.selection = fit_scatter_peak(results, params.search, params.scatter_bins);
    } catch (NumericalError const& e) {
        out.verdict = verdicts::none;
        out.selection_note = e.what();
        return out;
    }
    if (!out.selection->significant) {
        out.verdict = verdicts::none;
        out.selection_note = "scatter peak not significant above the uniform background";
        out.selection.reset();
        return out;
    }
    EllipseSelection const sel = *out.selection;
    out.d3_measured_um = sel.d0_um;
    out.d3_stat_um = sel.d0_err_um;
    out.d3_syst_um = params.systematic_fraction * sel.d0_um;

    // Stage 2: contrast of the views inside the ellipse.
    double const area_volume_per_um = params.area_width_um * params.area_height_um;
    parallel_for(nv, threads, [&](std::size_t i) {
        ViewRow& row = out.views[i];
        if (!row.searched) return;
        if (!sel.contains(row.rayleigh.alpha_star_rad, row.rayleigh.d3_star_um)) {
            row.note = "outside selection ellipse";
            return;
        }
        DepthWindow const& w = *windows[i];
        auto const trimmed = select_and_trim(part.views[i], w, params.area_width_um, params.area_height_um);
        try {
            auto const pts = LocalPoints::of(trimmed, row.X_center_um, row.Y_center_um);
            FoldFit f = fold_and_fit(pts, row.rayleigh.alpha_star_rad, row.rayleigh.d3_star_um,
                                     params.bins_per_period, params.fold_periods, params.min_fold_hits);
            bool const sparse = w.bulk_count < params.min_bulk_count;
            double const density = sparse ? out.film_bulk_density_per_um3 : w.bulk_density_per_um3;
            double const rel = sparse || w.bulk_count == 0 ? 0.0 : 1.0 / std::sqrt(static_cast<double>(w.bulk_count));
            double const noise = density * area_volume_per_um * w.width_um() / static_cast<double>(f.n_bins);
            auto const c = subtract_noise(f, noise, noise * rel);
            row.selected = true;
            row.contrast = c.contrast;
            row.contrast_err = c.contrast_err;
            row.phase_rad = f.phase_rad;
            row.n_noise_est = noise * static_cast<double>(f.n_bins);
            row.n_signal_est = (f.a - noise) * static_cast<double>(f.n_bins);
            row.fold = std::move(f);
        } catch (std::exception const& e) {
            row.note = e.what();
        }
    });

    double wsum = 0.0;
    std::size_t wn = 0;
    for (auto const& row : out.views)
        if (row.selected) {
            wsum += row.window_width_um;
            ++wn;
        }
    out.mean_window_width_um = wn ? wsum / static_cast<double>(wn) : 0.0;

    // Stage 3: contrast profile in the X band.
    out.band_center_X_mm = std::isnan(params.band_center_X_mm)
                               ? tiling.origin_X_um * 1e-3 + 0.5 * static_cast<double>(part.nx) *
                                                                 tiling.view_width_um * 1e-3
                               : params.band_center_X_mm;
    std::vector<ProfilePoint> band;
    for (auto const& row : out.views)
        if (row.selected && std::abs(row.X_center_um * 1e-3 - out.band_center_X_mm) <= 0.5 * params.band_width_mm)
            band.push_back({row.Y_center_um * 1e-3, row.contrast, row.contrast_err});
    try {
        out.profile = contrast_profile_fit(band, params.min_band_views);
        out.verdict = verdicts::fringes;
        auto const lab = emulsion_to_lab(frame, out.profile->Y0_mm);
        out.L2_peak_mm = lab.L2_mm;
        out.L2_peak_err_mm = out.profile->Y0_err_mm * std::sin(frame.tilt_angle_rad);
        if (out.profile->degenerate) out.profile_note = "flat profile: peak position unidentifiable";
    } catch (std::exception const& e) {
        out.verdict = verdicts::no_profile;
        out.profile_note = e.what();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Energy comparison

struct EnergyPoint {
    double energy_kev = 0.0;
    double contrast = 0.0;
    double contrast_err = 0.0;
};

/// Model contrast versus energy, normalized to the resonance energy.
struct ModelCurve {
    std::vector<double> energy_kev;
    std::vector<double> c_normalized;

    /// Linear interpolation, clamped at the ends; NaN when empty.
    double at(double e) const {
        if (energy_kev.empty()) return std::numeric_limits<double>::quiet_NaN();
        std::vector<std::size_t> idx(energy_kev.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return energy_kev[a] < energy_kev[b]; });
        if (e <= energy_kev[idx.front()]) return c_normalized[idx.front()];
        if (e >= energy_kev[idx.back()]) return c_normalized[idx.back()];
        for (std::size_t k = 1; k < idx.size(); ++k) {
            double const e0 = energy_kev[idx[k - 1]], e1 = energy_kev[idx[k]];
            if (e <= e1) {
                double const t = (e - e0) / (e1 - e0);
                return (1.0 - t) * c_normalized[idx[k - 1]] + t * c_normalized[idx[k]];
            }
        }
        return c_normalized[idx.back()];
    }
};

struct ComparisonRow {
    double energy_kev = 0.0;
    double contrast = 0.0;
    double contrast_err = 0.0;
    double c_normalized = 0.0;
    double c_normalized_err = 0.0;
    double quantum = std::numeric_limits<double>::quiet_NaN();
    double classical = std::numeric_limits<double>::quiet_NaN();
};

struct Comparison {
    std::vector<ComparisonRow> rows;
    double reference_energy_kev = 0.0;
    std::string verdict;
};

namespace verdicts {
inline constexpr char const* quantum_compatible = "quantum-compatible";
inline constexpr char const* classical_compatible = "classical-compatible";
inline constexpr char const* inconclusive = "inconclusive";
inline constexpr char const* insufficient = "insufficient data";
} // namespace verdicts

/// Normalizes each contrast to the one at the resonance energy (or the highest
/// energy present) and judges the energy dependence:
/// quantum-compatible when contrast drops from the highest to the lowest energy
/// by more than 3 combined sigma and no step towards lower energy rises by
/// more than 3 sigma; classical-compatible when every pair agrees within 3
/// sigma; inconclusive otherwise.
inline Comparison summarize(std::vector<EnergyPoint> points, ModelCurve const& quantum = {},
                            ModelCurve const& classical = {}, double resonance_energy_kev = 14.0) {
    Comparison c;
    std::sort(points.begin(), points.end(),
              [](auto const& a, auto const& b) { return a.energy_kev > b.energy_kev; });
    if (points.size() < 2) {
        c.verdict = verdicts::insufficient;
        for (auto const& p : points) c.rows.push_back({p.energy_kev, p.contrast, p.contrast_err, 1.0, 0.0});
        return c;
    }
    std::size_t ref = 0;
    for (std::size_t i = 0; i < points.size(); ++i)
        if (std::abs(points[i].energy_kev - resonance_energy_kev) < 1e-9) ref = i;
    c.reference_energy_kev = points[ref].energy_kev;
    double const cr = points[ref].contrast, er = points[ref].contrast_err;
    for (std::size_t i = 0; i < points.size(); ++i) {
        auto const& p = points[i];
        ComparisonRow row{p.energy_kev, p.contrast, p.contrast_err};
        row.c_normalized = cr != 0.0 ? p.contrast / cr : 0.0;
        if (i == ref)
            row.c_normalized_err = 0.0;
        else if (cr != 0.0)
            row.c_normalized_err = std::abs(row.c_normalized) *
                                   std::hypot(p.contrast_err / std::max(std::abs(p.contrast), 1e-300), er / cr);
        row.quantum = quantum.at(p.energy_kev);
        row.classical = classical.at(p.energy_kev);
        c.rows.push_back(row);
    }
    auto differs = [](EnergyPoint const& a, EnergyPoint const& b) {
        return std::abs(a.contrast - b.contrast) > 3.0 * std::hypot(a.contrast_err, b.contrast_err);
    };
    bool all_agree = true;
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t j = i + 1; j < points.size(); ++j)
            if (differs(points[i], points[j])) all_agree = false;
    auto const& hi = points.front();
    auto const& lo = points.back();
    bool const drop = hi.contrast - lo.contrast > 3.0 * std::hypot(hi.contrast_err, lo.contrast_err);
    bool no_rise = true;
    for (std::size_t i = 1; i < points.size(); ++i)
        if (points[i].contrast - points[i - 1].contrast >
            3.0 * std::hypot(points[i].contrast_err, points[i - 1].contrast_err))
            no_rise = false;
    if (drop && no_rise)
        c.verdict = verdicts::quantum_compatible;
    else if (all_agree)
        c.verdict = verdicts::classical_compatible;
    else
        c.verdict = verdicts::inconclusive;
    return c;
}

} // namespace talbot
