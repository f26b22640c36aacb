#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "talbot/physics.hpp"

using namespace talbot;

namespace {

// Independent oracle: lambda = h / (gamma m v) from the Lorentz factor.
double oracle_wavelength_pm(double kinetic_kev, double rest_kev) {
    double const gamma = 1.0 + kinetic_kev / rest_kev;
    double const beta = std::sqrt(1.0 - 1.0 / (gamma * gamma));
    return 1239.841984 / (gamma * beta * rest_kev);
}

ParticleState positron(double e) { return ParticleState{e, constants::electron_rest_kev}; }

InterferometerGeometry apparatus() { return design_geometry(1.210, 1.004, positron(14.0)); }

} // namespace

TEST(Wavelength, MatchesLorentzFactorOracle) {
    for (double e : {0.1, 1.0, 5.0, 8.0, 14.0, 20.0, 100.0, 1000.0})
        EXPECT_NEAR(de_broglie_wavelength_pm(positron(e)), oracle_wavelength_pm(e, constants::electron_rest_kev),
                    1e-12 * oracle_wavelength_pm(e, constants::electron_rest_kev))
            << "E = " << e;
}

TEST(Wavelength, FourteenKevPositron) {
    double const lam = de_broglie_wavelength_pm(positron(14.0));
    EXPECT_NEAR(lam, 10.30, 0.05);
    // The non-relativistic value sits outside the same tolerance.
    double const nonrel = 1239.841984 / std::sqrt(2.0 * constants::electron_rest_kev * 14.0);
    EXPECT_GT(std::abs(nonrel - 10.30), 0.05);
}

TEST(Wavelength, InverseRoundTrip) {
    for (double e : {1e-3, 0.5, 8.0, 14.0, 300.0}) {
        double const lam = de_broglie_wavelength_pm(positron(e));
        EXPECT_NEAR(kinetic_energy_for_wavelength_kev(lam), e, 1e-10 * e);
    }
}

TEST(Wavelength, RejectsNonPositiveEnergy) {
    EXPECT_THROW(de_broglie_wavelength_pm(positron(0.0)), DomainError);
    EXPECT_THROW(de_broglie_wavelength_pm(positron(-1.0)), DomainError);
    EXPECT_THROW(kinetic_energy_for_wavelength_kev(0.0), DomainError);
}

TEST(Wavelength, DecreasesWithEnergy) {
    double prev = de_broglie_wavelength_pm(positron(0.5));
    for (double e = 1.0; e <= 30.0; e += 0.5) {
        double const l = de_broglie_wavelength_pm(positron(e));
        EXPECT_LT(l, prev);
        prev = l;
    }
}

TEST(Resonance, RatioOfApparatusPeriods) {
    EXPECT_NEAR(resonance_ratio(1.210, 1.004), 0.206 / 1.004, 1e-14);
    EXPECT_NEAR(resonance_ratio(1.210, 1.004), 0.205, 0.001);
}

TEST(Resonance, EqualPeriodsHaveNoMagnifyingResonance) {
    try {
        resonance_ratio(1.0, 1.0);
        FAIL() << "expected DomainError";
    } catch (DomainError const& e) {
        EXPECT_NE(std::string(e.what()).find("no magnifying resonance"), std::string::npos);
    }
    EXPECT_THROW(design_geometry(1.0, 1.0, positron(14.0)), DomainError);
    EXPECT_THROW(design_geometry(1.0, 1.2, positron(14.0)), DomainError);
}

TEST(DesignGeometry, ApparatusDistances) {
    auto const g = apparatus();
    double const lam_um = oracle_wavelength_pm(14.0, constants::electron_rest_kev) * 1e-6;
    EXPECT_NEAR(g.L1_mm, 1.210 * 1.004 / lam_um * 1e-3, 1e-9);
    EXPECT_GE(g.L1_mm, 117.8);
    EXPECT_LE(g.L1_mm, 118.4);
    EXPECT_GE(g.L2_mm, 571.0);
    EXPECT_LE(g.L2_mm, 581.0);
    EXPECT_NEAR(g.L1_mm / g.L2_mm, resonance_ratio(1.210, 1.004), 1e-12);
}

TEST(FringePeriod, ApparatusValueAndResonanceIdentity) {
    auto const g = apparatus();
    EXPECT_NEAR(fringe_period_um(g), 5.90, 0.04);
    EXPECT_NEAR(fringe_period_um(g), resonant_fringe_period_um(1.210, 1.004), 1e-12);
}

TEST(FringePeriod, GeneralGeometry) {
    InterferometerGeometry g = apparatus();
    g.L1_mm = 100.0;
    g.L2_mm = 300.0;
    EXPECT_NEAR(fringe_period_um(g), 1.004 * 4.0, 1e-12);
}

TEST(RotationalTolerance, ApparatusValue) {
    auto const g = apparatus();
    BeamModel beam;
    beam.coherence_ratio = 800.0;
    double const expected = 1.004e-3 * 800.0 / (std::sqrt(2.0 * std::numbers::pi) * g.L2_mm) * 1e6;
    EXPECT_NEAR(rotational_tolerance_urad(g, beam), expected, 1e-9);
    EXPECT_NEAR(rotational_tolerance_urad(g, beam), 556.0, 0.05 * 556.0);
}

TEST(RotationalTolerance, ScalesWithCoherenceRatio) {
    auto const g = apparatus();
    BeamModel a, b;
    a.coherence_ratio = 400.0;
    b.coherence_ratio = 800.0;
    EXPECT_NEAR(rotational_tolerance_urad(g, b) / rotational_tolerance_urad(g, a), 2.0, 1e-12);
    a.coherence_ratio = 0.0;
    EXPECT_THROW(rotational_tolerance_urad(g, a), DomainError);
}

TEST(RotationContrast, GaussianFactor) {
    double const sigma = 556e-6;
    EXPECT_DOUBLE_EQ(rotation_contrast_factor(0.0, sigma), 1.0);
    EXPECT_GT(rotation_contrast_factor(70e-6, sigma), 0.99);
    EXPECT_NEAR(rotation_contrast_factor(sigma, sigma), std::exp(-0.5), 1e-15);
    EXPECT_DOUBLE_EQ(rotation_contrast_factor(-1e-4, sigma), rotation_contrast_factor(1e-4, sigma));
    EXPECT_THROW(rotation_contrast_factor(1e-4, 0.0), DomainError);
}

TEST(RegimeIndicator, UnityAtDesignGeometry) {
    auto const g = apparatus();
    EXPECT_NEAR(diffraction_regime_indicator(g, positron(14.0)), 1.0, 1e-12);
    // Lower energy, longer wavelength: deeper in the diffractive regime.
    EXPECT_GT(diffraction_regime_indicator(g, positron(8.0)), 1.0);
}

TEST(ToleranceReport, ResonanceRatioUncertainty) {
    auto const g = apparatus();
    BeamModel beam;
    auto const t = tolerance_report(g, beam, 0.001);
    // Independent finite-difference propagation of the period errors.
    double const h = 1e-7;
    double const dr1 = (resonance_ratio(1.210 + h, 1.004) - resonance_ratio(1.210 - h, 1.004)) / (2 * h);
    double const dr2 = (resonance_ratio(1.210, 1.004 + h) - resonance_ratio(1.210, 1.004 - h)) / (2 * h);
    double const sr = std::hypot(dr1 * 0.001, dr2 * 0.001);
    EXPECT_NEAR(t.resonance_ratio_sigma, sr, 1e-8);
    EXPECT_NEAR(t.resonance_ratio_sigma, 0.002, 0.0006);
    // L2 = L1 / r at fixed L1.
    EXPECT_NEAR(t.L2_uncertainty_mm, g.L1_mm * sr / (t.resonance_ratio * t.resonance_ratio), 1e-6);
    EXPECT_NEAR(t.L2_uncertainty_mm, 5.0, 1.5);
    EXPECT_NEAR(t.diffraction_regime_indicator, 1.0, 1e-12);
}

TEST(GratingCoefficients, BinaryMaskOracle) {
    GratingSpec g{1.0, 0.3, 0.0, 0.0};
    auto const c = grating_fourier_coefficients(g, 5);
    ASSERT_EQ(c.size(), 11u);
    // Direct numerical Fourier integral of the slit [-f/2, f/2).
    for (int m = -5; m <= 5; ++m) {
        std::complex<double> acc = 0.0;
        int const n = 200000;
        for (int i = 0; i < n; ++i) {
            double const x = -0.5 + (i + 0.5) / n;
            if (std::abs(x) < 0.15) acc += std::polar(1.0, -2.0 * std::numbers::pi * m * x);
        }
        acc /= static_cast<double>(n);
        EXPECT_NEAR(std::abs(c[m + 5] - acc), 0.0, 2e-5) << "m = " << m;
    }
}

TEST(GratingCoefficients, OffsetShiftsPhaseOnly) {
    GratingSpec a{1.2, 0.5, 0.0, 0.0}, b{1.2, 0.5, 0.37, 0.0};
    auto const ca = grating_fourier_coefficients(a, 4), cb = grating_fourier_coefficients(b, 4);
    for (std::size_t i = 0; i < ca.size(); ++i) EXPECT_NEAR(std::abs(ca[i]), std::abs(cb[i]), 1e-15);
    EXPECT_NEAR(ca[4].real(), 0.5, 1e-15);
}

TEST(Validation, RejectsBadSpecs) {
    EXPECT_THROW((GratingSpec{0.0, 0.5}.validate()), DomainError);
    EXPECT_THROW((GratingSpec{1.0, 1.0}.validate()), DomainError);
    EXPECT_THROW((GratingSpec{1.0, 0.0}.validate()), DomainError);
    InterferometerGeometry g = apparatus();
    g.L2_mm = -1.0;
    EXPECT_THROW(g.validate(), DomainError);
}
