#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "talbot/fit.hpp"

using namespace talbot;

namespace {

double gauss(double x, double b, double a, double m, double s) {
    return b + a * std::exp(-0.5 * (x - m) * (x - m) / (s * s));
}

} // namespace

TEST(GaussianFit, RecoversExactCurve) {
    std::vector<double> x, y;
    for (int i = 0; i < 80; ++i) {
        x.push_back(-4.0 + 0.1 * i);
        y.push_back(gauss(x.back(), 3.0, 20.0, 0.37, 0.55));
    }
    auto const f = fit_gaussian_plus_constant(x, y);
    EXPECT_NEAR(f.baseline, 3.0, 1e-6);
    EXPECT_NEAR(f.amplitude, 20.0, 1e-6);
    EXPECT_NEAR(f.mean, 0.37, 1e-7);
    EXPECT_NEAR(f.sigma, 0.55, 1e-7);
    EXPECT_NEAR(f.chi2, 0.0, 1e-8);
    EXPECT_EQ(f.dof, 76);
    EXPECT_FALSE(f.sigma_floored);
    EXPECT_NEAR(f(0.37), 23.0, 1e-6);
}

TEST(GaussianFit, NegativeSigmaEquivalentIsReportedPositive) {
    std::vector<double> x, y;
    for (int i = 0; i < 50; ++i) {
        x.push_back(i);
        y.push_back(gauss(i, 1.0, 5.0, 20.0, 4.0));
    }
    EXPECT_GT(fit_gaussian_plus_constant(x, y).sigma, 0.0);
}

TEST(GaussianFit, ReportedErrorsMatchMonteCarloSpread) {
    // Poisson histograms of a known peak: the reported mean error must describe
    // the actual trial-to-trial scatter of the fitted mean.
    std::mt19937_64 rng(7);
    std::vector<double> means, errs;
    for (int trial = 0; trial < 300; ++trial) {
        Histogram h(-3.0, 3.0, 60);
        for (std::size_t i = 0; i < h.counts.size(); ++i) {
            double const mu = gauss(h.center(i), 20.0, 150.0, 0.1, 0.4);
            h.counts[i] = static_cast<double>(std::poisson_distribution<int>(mu)(rng));
        }
        auto const f = fit_histogram_peak(h);
        means.push_back(f.mean);
        errs.push_back(f.mean_err);
    }
    double m = 0, s = 0, e = 0;
    for (double v : means) m += v;
    m /= means.size();
    for (double v : means) s += (v - m) * (v - m);
    s = std::sqrt(s / (means.size() - 1));
    for (double v : errs) e += v;
    e /= errs.size();
    EXPECT_NEAR(m, 0.1, 3.0 * s / std::sqrt(means.size()) + 1e-3);
    EXPECT_NEAR(e / s, 1.0, 0.2);
}

TEST(GaussianFit, SubBinPeakConvergesAtSigmaFloor) {
    // A peak narrower than one bin on a flat background: the width is
    // unresolved and must sit at the floor while the centre stays accurate.
    std::mt19937_64 rng(3);
    Histogram h(0.0, 60.0, 60);
    std::normal_distribution<double> peak(30.4, 0.3);
    std::uniform_real_distribution<double> flat(0.0, 60.0);
    for (int i = 0; i < 500; ++i) h.fill(peak(rng));
    for (int i = 0; i < 120; ++i) h.fill(flat(rng));
    auto const f = fit_histogram_peak(h);
    EXPECT_TRUE(f.sigma_floored);
    EXPECT_DOUBLE_EQ(f.sigma, h.bin_width());
    EXPECT_NEAR(f.mean, 30.4, 0.3);
    EXPECT_LT(f.iterations, 50);
    EXPECT_GT(f.amplitude, 5.0 * f.amplitude_err);
    EXPECT_NEAR(f.baseline, 2.0, 1.0);
}

TEST(GaussianFit, InputValidation) {
    std::vector<double> x{1, 2, 3}, y{1, 2, 3};
    EXPECT_THROW(fit_gaussian_plus_constant(x, y), DomainError);
    std::vector<double> x2{1, 2, 3, 4, 5, 6}, y2{1, 2, 3, 4, 5};
    EXPECT_THROW(fit_gaussian_plus_constant(x2, y2), DomainError);
    std::vector<double> same(6, 1.0), y3{1, 2, 3, 4, 5, 6};
    EXPECT_THROW(fit_gaussian_plus_constant(same, y3), DomainError);
}

TEST(HistogramTest, FillAndCenters) {
    Histogram h(0.0, 1.0, 4);
    h.fill(0.1);
    h.fill(0.3);
    h.fill(1.0); // upper edge goes into the last bin
    h.fill(1.5); // outside
    h.fill(-0.1);
    EXPECT_DOUBLE_EQ(h.total(), 3.0);
    EXPECT_DOUBLE_EQ(h.counts[0], 1.0);
    EXPECT_DOUBLE_EQ(h.counts[1], 1.0);
    EXPECT_DOUBLE_EQ(h.counts[3], 1.0);
    EXPECT_DOUBLE_EQ(h.center(2), 0.625);
    EXPECT_THROW(Histogram(1.0, 1.0, 3), DomainError);
    EXPECT_THROW(Histogram(0.0, 1.0, 0), DomainError);
}
