#pragma once
//
// Small least-squares fitters: Gaussian plus constant background (coarse grid
// then damped Gauss-Newton with analytic Jacobian) and histogram helpers.
//

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "talbot/errors.hpp"

namespace talbot {

/// y(x) = baseline + amplitude * exp(-(x - mean)^2 / (2 sigma^2)).
struct GaussianFit {
    double baseline = 0.0;
    double amplitude = 0.0;
    double mean = 0.0;
    double sigma = 0.0;
    double baseline_err = 0.0;
    double amplitude_err = 0.0;
    double mean_err = 0.0;
    double sigma_err = 0.0;
    /// Covariance of (baseline, amplitude, mean, sigma).
    Eigen::Matrix4d covariance = Eigen::Matrix4d::Zero();
    double chi2 = 0.0;
    int dof = 0;
    int iterations = 0;
    /// sigma hit the floor (degenerate, unresolved peak).
    bool sigma_floored = false;

    double operator()(double x) const {
        double const u = (x - mean) / sigma;
        return baseline + amplitude * std::exp(-0.5 * u * u);
    }
};

struct GaussianFitOptions {
    /// Lower bound on sigma; defaults to the smallest sample spacing.
    double sigma_floor = 0.0;
    std::size_t grid_means = 48;
    std::size_t grid_sigmas = 32;
    int max_iterations = 200;
    /// Convergence: every step below this fraction of its parameter scale.
    double step_tolerance = 1e-6;
};

namespace detail {

struct LinearBA {
    double B = 0.0, A = 0.0, chi2 = std::numeric_limits<double>::infinity();
};

/// Weighted least squares for (B, A) at fixed mean and sigma.
inline LinearBA solve_baseline_amplitude(std::span<double const> x, std::span<double const> y,
                                         std::span<double const> w, double mu, double sigma) {
    double s11 = 0, s12 = 0, s22 = 0, t1 = 0, t2 = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double const u = (x[i] - mu) / sigma;
        double const g = std::exp(-0.5 * u * u);
        s11 += w[i];
        s12 += w[i] * g;
        s22 += w[i] * g * g;
        t1 += w[i] * y[i];
        t2 += w[i] * g * y[i];
    }
    double const det = s11 * s22 - s12 * s12;
    LinearBA r;
    if (!(std::abs(det) > 1e-300)) return r;
    r.B = (t1 * s22 - t2 * s12) / det;
    r.A = (s11 * t2 - s12 * t1) / det;
    double c = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double const u = (x[i] - mu) / sigma;
        double const d = y[i] - r.B - r.A * std::exp(-0.5 * u * u);
        c += w[i] * d * d;
    }
    r.chi2 = c;
    return r;
}

inline double weighted_chi2(std::span<double const> x, std::span<double const> y, std::span<double const> w,
                            Eigen::Vector4d const& p) {
    double c = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double const u = (x[i] - p[2]) / p[3];
        double const d = y[i] - p[0] - p[1] * std::exp(-0.5 * u * u);
        c += w[i] * d * d;
    }
    return c;
}

} // namespace detail

/// Weighted fit of a Gaussian on a constant. Weights are 1/variance (empty
/// span: unit weights). Parameter errors come from (J^T W J)^-1.
/// Throws NumericalError on non-convergence.
inline GaussianFit fit_gaussian_plus_constant(std::span<double const> x, std::span<double const> y,
                                              std::span<double const> weights = {},
                                              GaussianFitOptions const& opt = {}) {
    if (x.size() != y.size()) throw DomainError("x and y sizes differ");
    if (!weights.empty() && weights.size() != x.size()) throw DomainError("weight count differs from data");
    if (x.size() < 5) throw DomainError("Gaussian fit needs at least 5 points");
    std::vector<double> w(weights.begin(), weights.end());
    if (w.empty()) w.assign(x.size(), 1.0);

    auto const [xmin_it, xmax_it] = std::minmax_element(x.begin(), x.end());
    double const xmin = *xmin_it, xmax = *xmax_it;
    double const range = xmax - xmin;
    if (!(range > 0.0)) throw DomainError("x values must span a nonzero range");
    double floor = opt.sigma_floor;
    if (!(floor > 0.0)) {
        std::vector<double> xs(x.begin(), x.end());
        std::sort(xs.begin(), xs.end());
        floor = range;
        for (std::size_t i = 1; i < xs.size(); ++i)
            if (xs[i] > xs[i - 1]) floor = std::min(floor, xs[i] - xs[i - 1]);
        floor *= 0.5;
    }

    // Coarse grid: means across the data range, sigmas log-spaced from the floor to the range.
    Eigen::Vector4d p;
    double best = std::numeric_limits<double>::infinity();
    double const s_lo = floor, s_hi = std::max(range, 2.0 * floor);
    for (std::size_t im = 0; im < opt.grid_means; ++im) {
        double const mu = xmin + range * (static_cast<double>(im) + 0.5) / static_cast<double>(opt.grid_means);
        for (std::size_t is = 0; is < opt.grid_sigmas; ++is) {
            double const t = static_cast<double>(is) / static_cast<double>(opt.grid_sigmas - 1);
            double const s = s_lo * std::pow(s_hi / s_lo, t);
            auto const r = detail::solve_baseline_amplitude(x, y, w, mu, s);
            if (r.chi2 < best) {
                best = r.chi2;
                p << r.B, r.A, mu, s;
            }
        }
    }
    if (!std::isfinite(best)) throw NumericalError("Gaussian fit: coarse grid found no finite solution");

    // Levenberg-Marquardt refinement.
    double lambda = 1e-3;
    double chi2 = best;
    GaussianFit fit;
    bool converged = false;
    Eigen::Matrix4d JtWJ;
    auto build = [&](Eigen::Vector4d const& q, Eigen::Matrix4d& H, Eigen::Vector4d& g) {
        H.setZero();
        g.setZero();
        for (std::size_t i = 0; i < x.size(); ++i) {
            double const u = (x[i] - q[2]) / q[3];
            double const e = std::exp(-0.5 * u * u);
            Eigen::Vector4d J;
            J << 1.0, e, q[1] * e * u / q[3], q[1] * e * u * u / q[3];
            double const r = y[i] - q[0] - q[1] * e;
            H.noalias() += w[i] * J * J.transpose();
            g.noalias() += w[i] * r * J;
        }
    };
    Eigen::Vector4d g;
    int it = 0;
    for (; it < opt.max_iterations; ++it) {
        build(p, JtWJ, g);
        bool accepted = false;
        double const chi2_before = chi2;
        Eigen::Vector4d step = Eigen::Vector4d::Zero();
        for (int tries = 0; tries < 40 && !accepted; ++tries) {
            Eigen::Matrix4d A = JtWJ;
            for (int k = 0; k < 4; ++k) A(k, k) += lambda * std::max(JtWJ(k, k), 1e-300);
            step = A.ldlt().solve(g);
            Eigen::Vector4d q = p + step;
            if (q[3] < floor) {
                // Active bound: hold sigma at the floor and solve for the rest.
                q[3] = floor;
                Eigen::Vector3d const s3 = A.topLeftCorner<3, 3>().ldlt().solve(
                    g.head<3>() - A.topRightCorner<3, 1>() * (floor - p[3]));
                q.head<3>() = p.head<3>() + s3;
            }
            step = q - p;
            double const c = detail::weighted_chi2(x, y, w, q);
            if (std::isfinite(c) && c <= chi2) {
                p = q;
                chi2 = c;
                lambda = std::max(lambda * 0.3, 1e-12);
                accepted = true;
            } else {
                lambda *= 10.0;
            }
        }
        double const ab_scale = std::max({std::abs(p[0]), std::abs(p[1]), 1e-12});
        double const scales[4] = {ab_scale, ab_scale, range, range};
        bool small = true;
        for (int k = 0; k < 4; ++k)
            if (std::abs(step[k]) > opt.step_tolerance * scales[k]) small = false;
        // A chi2 gain below 1e-6 moves the parameters by ~1e-3 of their errors.
        bool const stalled = accepted && chi2_before - chi2 <= std::max(1e-12 * chi2, 1e-6);
        if (small || stalled || !accepted) {
            converged = true;
            break;
        }
    }
    if (!converged) throw NumericalError("Gaussian fit did not converge in " + std::to_string(opt.max_iterations) +
                                         " iterations");

    build(p, JtWJ, g);
    fit.baseline = p[0];
    fit.amplitude = p[1];
    fit.mean = p[2];
    fit.sigma = std::abs(p[3]);
    fit.sigma_floored = fit.sigma <= floor * (1.0 + 1e-9);
    if (fit.sigma_floored) fit.sigma = floor;
    fit.chi2 = chi2;
    fit.dof = static_cast<int>(x.size()) - 4;
    fit.iterations = it;
    Eigen::FullPivLU<Eigen::Matrix4d> lu(JtWJ);
    if (lu.isInvertible()) {
        Eigen::Matrix4d const cov = lu.inverse();
        fit.covariance = cov;
        fit.baseline_err = std::sqrt(std::max(cov(0, 0), 0.0));
        fit.amplitude_err = std::sqrt(std::max(cov(1, 1), 0.0));
        fit.mean_err = std::sqrt(std::max(cov(2, 2), 0.0));
        fit.sigma_err = std::sqrt(std::max(cov(3, 3), 0.0));
    } else {
        fit.baseline_err = fit.amplitude_err = fit.mean_err = fit.sigma_err =
            std::numeric_limits<double>::infinity();
        fit.covariance.setConstant(std::numeric_limits<double>::infinity());
    }
    return fit;
}

/// Fixed-width histogram over [lo, hi); values outside are ignored, hi itself
/// goes to the last bin.
struct Histogram {
    double lo = 0.0;
    double hi = 1.0;
    std::vector<double> counts;

    Histogram() = default;
    Histogram(double lo_, double hi_, std::size_t bins) : lo(lo_), hi(hi_), counts(bins, 0.0) {
        if (!(hi > lo)) throw DomainError("histogram range must be increasing");
        if (bins == 0) throw DomainError("histogram needs at least one bin");
    }
    double bin_width() const { return (hi - lo) / static_cast<double>(counts.size()); }
    double center(std::size_t i) const { return lo + (static_cast<double>(i) + 0.5) * bin_width(); }
    std::vector<double> centers() const {
        std::vector<double> c(counts.size());
        for (std::size_t i = 0; i < c.size(); ++i) c[i] = center(i);
        return c;
    }
    void fill(double v, double weight = 1.0) {
        if (!(v >= lo && v <= hi)) return;
        auto i = static_cast<std::size_t>((v - lo) / bin_width());
        if (i >= counts.size()) i = counts.size() - 1;
        counts[i] += weight;
    }
    double total() const {
        double t = 0;
        for (double c : counts) t += c;
        return t;
    }
};

/// Gaussian + constant fit to histogram counts with Poisson weights
/// 1/max(count, 1). Sigma is floored at one bin width.
inline GaussianFit fit_histogram_peak(Histogram const& h) {
    auto const xc = h.centers();
    std::vector<double> w(h.counts.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = 1.0 / std::max(h.counts[i], 1.0);
    GaussianFitOptions opt;
    opt.sigma_floor = h.bin_width();
    return fit_gaussian_plus_constant(xc, h.counts, w, opt);
}

} // namespace talbot
