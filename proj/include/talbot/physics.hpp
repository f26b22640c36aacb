#pragma once
//
// Closed-form kinematics and geometry of the asymmetric two-grating
// Talbot-Lau interferometer.
//
// Unit convention used throughout the library: every quantity carries its
// unit in the identifier (_um, _mm, _pm, _kev, _rad, _urad). Transverse
// lengths are micrometres, longitudinal distances millimetres, wavelengths
// picometres.
//

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "talbot/errors.hpp"

namespace talbot {

namespace constants {
/// h*c in keV*pm (CODATA 2018, exact SI value of h and c).
inline constexpr double hc_kev_pm = 1239.841984;
/// Electron (and positron) rest energy in keV (CODATA 2018).
inline constexpr double electron_rest_kev = 510.99895000;
} // namespace constants

struct ParticleState {
    double kinetic_energy_kev = 14.0;
    double rest_energy_kev = constants::electron_rest_kev;

    void validate() const {
        if (!(kinetic_energy_kev > 0.0) || !std::isfinite(kinetic_energy_kev))
            throw DomainError("kinetic energy must be positive");
        if (!(rest_energy_kev > 0.0) || !std::isfinite(rest_energy_kev))
            throw DomainError("rest energy must be positive");
    }
};

struct GratingSpec {
    double period_um = 1.0;
    double open_fraction = 0.5;
    double lateral_offset_um = 0.0;
    /// Rotation of the slits about the optical axis; only enters through
    /// rotation_contrast_factor.
    double rotation_angle_rad = 0.0;

    void validate() const {
        if (!(period_um > 0.0)) throw DomainError("grating period must be positive");
        if (!(open_fraction > 0.0 && open_fraction < 1.0))
            throw DomainError("open fraction must lie in (0, 1)");
    }
};

struct InterferometerGeometry {
    GratingSpec grating1;
    GratingSpec grating2;
    double L1_mm = 0.0;
    double L2_mm = 0.0;
    double collimator1_diameter_mm = 2.0;
    double collimator2_diameter_mm = 2.0;
    double collimator_spacing_mm = 102.0;

    void validate() const {
        grating1.validate();
        grating2.validate();
        if (!(L1_mm > 0.0) || !(L2_mm > 0.0))
            throw DomainError("grating distances must be positive");
        if (!(grating1.period_um > grating2.period_um))
            throw DomainError("no magnifying resonance: d1 must exceed d2");
    }

    /// Half-angle geometric acceptance of the two circular collimators.
    double collimator_acceptance_rad() const {
        return (collimator1_diameter_mm + collimator2_diameter_mm) / (2.0 * collimator_spacing_mm);
    }
};

struct BeamModel {
    ParticleState particle;
    double spot_fwhm_mm = 6.5;
    double angular_sigma_rad = 2.0e-4;
    /// l_det / lambda_dB at the detector plane.
    double coherence_ratio = 800.0;
    double flux_per_s = 100.0;

    void validate() const {
        particle.validate();
        if (!(spot_fwhm_mm > 0.0)) throw DomainError("spot FWHM must be positive");
        if (!(angular_sigma_rad >= 0.0)) throw DomainError("angular sigma must be non-negative");
        if (!(coherence_ratio > 0.0)) throw DomainError("coherence ratio must be positive");
    }
};

struct ToleranceReport {
    double sigma_phi_urad = 0.0;
    double resonance_ratio = 0.0;
    double resonance_ratio_sigma = 0.0;
    double L2_uncertainty_mm = 0.0;
    double diffraction_regime_indicator = 0.0;
};

/// Momentum times c in keV, relativistic.
inline double momentum_kev(ParticleState const& p) {
    p.validate();
    double const e = p.kinetic_energy_kev;
    return std::sqrt(2.0 * p.rest_energy_kev * e * (1.0 + e / (2.0 * p.rest_energy_kev)));
}

/// de Broglie wavelength h/p in picometres.
inline double de_broglie_wavelength_pm(ParticleState const& p) {
    return constants::hc_kev_pm / momentum_kev(p);
}

/// Kinetic energy whose relativistic de Broglie wavelength is `lambda_pm`.
inline double kinetic_energy_for_wavelength_kev(double lambda_pm,
                                                double rest_energy_kev = constants::electron_rest_kev) {
    if (!(lambda_pm > 0.0)) throw DomainError("wavelength must be positive");
    double const pc = constants::hc_kev_pm / lambda_pm;
    // E = sqrt(pc^2 + m^2) - m, written to avoid cancellation at small pc
    return pc * pc / (std::sqrt(pc * pc + rest_energy_kev * rest_energy_kev) + rest_energy_kev);
}

/// Resonance value of L1/L2 for grating periods d1 > d2.
inline double resonance_ratio(double d1_um, double d2_um) {
    if (!(d2_um > 0.0)) throw DomainError("grating periods must be positive");
    if (!(d1_um > d2_um)) throw DomainError("no magnifying resonance: d1 must exceed d2");
    return d1_um / d2_um - 1.0;
}

/// Geometry tuned for maximum contrast at the particle's energy: L1 = d1 d2 / lambda,
/// L2 = L1 / (d1/d2 - 1).
inline InterferometerGeometry design_geometry(double d1_um, double d2_um, ParticleState const& particle,
                                              double open_fraction = 0.5) {
    double const ratio = resonance_ratio(d1_um, d2_um);
    double const lambda_um = de_broglie_wavelength_pm(particle) * 1e-6;
    InterferometerGeometry g;
    g.grating1.period_um = d1_um;
    g.grating1.open_fraction = open_fraction;
    g.grating2.period_um = d2_um;
    g.grating2.open_fraction = open_fraction;
    g.L1_mm = d1_um * d2_um / lambda_um * 1e-3;
    g.L2_mm = g.L1_mm / ratio;
    g.validate();
    return g;
}

/// Detector fringe period d3 = d2 (L1 + L2) / L1 in micrometres.
inline double fringe_period_um(InterferometerGeometry const& g) {
    g.validate();
    return g.grating2.period_um * (g.L1_mm + g.L2_mm) / g.L1_mm;
}

/// Same quantity through the resonance identity d1 d2 / (d1 - d2).
inline double resonant_fringe_period_um(double d1_um, double d2_um) {
    if (!(d1_um > d2_um) || !(d2_um > 0.0)) throw DomainError("no magnifying resonance: d1 must exceed d2");
    return d1_um * d2_um / (d1_um - d2_um);
}

/// Standard deviation of the Gaussian contrast loss versus relative grating
/// rotation, in microradians. lambda_dB cancels through the coherence ratio.
inline double rotational_tolerance_urad(InterferometerGeometry const& g, BeamModel const& beam) {
    if (!(beam.coherence_ratio > 0.0)) throw DomainError("coherence ratio must be positive");
    g.validate();
    double const d2_mm = g.grating2.period_um * 1e-3;
    return d2_mm * beam.coherence_ratio / (std::sqrt(2.0 * std::numbers::pi) * g.L2_mm) * 1e6;
}

inline double rotation_contrast_factor(double phi_rad, double sigma_phi_rad) {
    if (!(sigma_phi_rad > 0.0)) throw DomainError("rotational tolerance must be positive");
    double const r = phi_rad / sigma_phi_rad;
    return std::exp(-0.5 * r * r);
}

/// (L1 lambda / d1) / d2: single-slit spread at G2 in units of d2. Values above
/// one mark the diffractive (Talbot-Lau) regime, values near zero the shadow limit.
inline double diffraction_regime_indicator(InterferometerGeometry const& g, ParticleState const& particle) {
    double const lambda_um = de_broglie_wavelength_pm(particle) * 1e-6;
    return (g.L1_mm * 1e3 * lambda_um / g.grating1.period_um) / g.grating2.period_um;
}

/// Propagated uncertainty of the resonance ratio from the period uncertainties.
inline double resonance_ratio_sigma(double d1_um, double d2_um, double d1_sigma_um, double d2_sigma_um) {
    resonance_ratio(d1_um, d2_um);
    double const a = d1_sigma_um / d2_um;
    double const b = d1_um * d2_sigma_um / (d2_um * d2_um);
    return std::hypot(a, b);
}

inline ToleranceReport tolerance_report(InterferometerGeometry const& g, BeamModel const& beam,
                                        double period_sigma_um = 0.001) {
    ToleranceReport r;
    double const d1 = g.grating1.period_um;
    double const d2 = g.grating2.period_um;
    r.sigma_phi_urad = rotational_tolerance_urad(g, beam);
    r.resonance_ratio = resonance_ratio(d1, d2);
    r.resonance_ratio_sigma = resonance_ratio_sigma(d1, d2, period_sigma_um, period_sigma_um);
    // L2 = L1 / r at fixed L1
    r.L2_uncertainty_mm = g.L1_mm * r.resonance_ratio_sigma / (r.resonance_ratio * r.resonance_ratio);
    r.diffraction_regime_indicator = diffraction_regime_indicator(g, beam.particle);
    return r;
}

/// sin(x)/x with sinc(0) = 1.
inline double sinc(double x) {
    if (std::abs(x) < 1e-8) return 1.0 - x * x / 6.0;
    return std::sin(x) / x;
}

/// Fourier coefficients c_m, m = -max_order..max_order (index m + max_order), of
/// the binary amplitude mask with slits centred on lateral_offset + k*period.
inline std::vector<std::complex<double>> grating_fourier_coefficients(GratingSpec const& spec, int max_order) {
    spec.validate();
    if (max_order < 0) throw DomainError("max_order must be non-negative");
    std::vector<std::complex<double>> c(2 * static_cast<std::size_t>(max_order) + 1);
    double const f = spec.open_fraction;
    for (int m = -max_order; m <= max_order; ++m) {
        double const amp = f * sinc(std::numbers::pi * m * f);
        double const phase = -2.0 * std::numbers::pi * m * spec.lateral_offset_um / spec.period_um;
        c[static_cast<std::size_t>(m + max_order)] = std::polar(amp, phase);
    }
    return c;
}

} // namespace talbot
