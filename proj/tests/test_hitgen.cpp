#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "talbot/hitgen.hpp"

using namespace talbot;
namespace fs = std::filesystem;

namespace {

fs::path scratch(std::string const& name) {
    auto const dir = fs::temp_directory_path() / "talbot_hitgen_tests";
    fs::create_directories(dir);
    return dir / name;
}

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }
double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Integral of exp(-(t - c)^2 / 2 s^2) over [a, b].
double gauss_segment(double a, double b, double c, double s) {
    return s * std::sqrt(2.0 * std::numbers::pi) * (normal_cdf((b - c) / s) - normal_cdf((a - c) / s));
}

ParametricPattern flat_contrast(double c) {
    ParametricPattern p;
    p.contrast_peak = c;
    p.width_L2_mm = 1e6; // effectively constant over the film
    return p;
}

Region centred_tile(double X_um, double Y_um, double w = 370.0, double h = 294.0) {
    return {X_um - 0.5 * w, X_um + 0.5 * w, Y_um - 0.5 * h, Y_um + 0.5 * h};
}

} // namespace

TEST(Frame, EmulsionToLabMapping) {
    EmulsionFrame f;
    EXPECT_DOUBLE_EQ(emulsion_to_lab(f, 0.0).L2_mm, 579.0);
    auto const p = emulsion_to_lab(f, -8.4);
    EXPECT_NEAR(p.L2_mm, 579.0 - 8.4 / std::numbers::sqrt2, 1e-12);
    EXPECT_NEAR(p.y_lab_mm, -8.4 / std::numbers::sqrt2, 1e-12);
    for (double y : {-15.0, -3.3, 0.0, 2.0}) EXPECT_NEAR(lab_to_emulsion_Y(f, emulsion_to_lab(f, y).L2_mm), y, 1e-12);
    f.y_sign = -1;
    EXPECT_NEAR(emulsion_to_lab(f, -8.4).L2_mm, 579.0 + 8.4 / std::numbers::sqrt2, 1e-12);
    f.y_sign = 0;
    EXPECT_THROW(f.validate(), DomainError);
}

TEST(Tiling, DefaultFilmHas1269Views) {
    auto const t = ViewTiling::of(EmulsionFrame{}, 370.0, 294.0);
    EXPECT_EQ(t.nx(), 27u);
    EXPECT_EQ(t.ny(), 47u);
    EXPECT_EQ(t.count(), 1269u);
    auto const r = t.tile(26, 46);
    EXPECT_DOUBLE_EQ(r.X1_um, -5000.0 + 27 * 370.0);
    EXPECT_DOUBLE_EQ(r.Y0_um, -15500.0 + 46 * 294.0);
}

TEST(Noise, MeanCountOverTrimmedArea) {
    // 340 x 270 x 50 um^3 at 5.8 grains / 1000 um^3.
    EmulsionFrame const f;
    Region const r{0.0, 340.0, 0.0, 270.0};
    double const expected = 5.8e-3 * 340.0 * 270.0 * 50.0;
    EXPECT_NEAR(expected, 26622.0, 1e-9);
    double sum = 0.0;
    int const trials = 40;
    for (int i = 0; i < trials; ++i) sum += static_cast<double>(generate_noise_grains(f, r, 5.8, 3, i).size());
    EXPECT_NEAR(sum / trials, expected, 4.0 * std::sqrt(expected / trials));
}

TEST(Noise, UniformInDepthAndInsideRegion) {
    EmulsionFrame const f;
    Region const r{10.0, 110.0, -50.0, 50.0};
    auto const h = generate_noise_grains(f, r, 20.0, 11);
    double zm = 0.0;
    for (auto const& g : h) {
        EXPECT_GE(g.X_um, 10.0);
        EXPECT_LE(g.X_um, 110.0);
        EXPECT_GE(g.Z_um, 0.0);
        EXPECT_LE(g.Z_um, 50.0);
        EXPECT_EQ(g.kind, HitKind::noise);
        zm += g.Z_um;
    }
    zm /= h.size();
    EXPECT_NEAR(zm, 25.0, 4.0 * 50.0 / std::sqrt(12.0 * h.size()));
    EXPECT_THROW(generate_noise_grains(f, r, 0.0, 1), DomainError);
}

TEST(Signal, CentralViewCountMatchesTarget) {
    EmulsionFrame const f;
    ExposureConfig const e;
    Region const t = centred_tile(e.beam_center_X_mm * 1e3, e.beam_center_Y_mm * 1e3);
    double sum = 0.0;
    int const trials = 10;
    for (int i = 0; i < trials; ++i) sum += generate_signal_tile(flat_contrast(0.3), f, e, t, i).size();
    // Mean fringe intensity over 62 periods deviates from 1 by at most C / (pi * 62).
    EXPECT_NEAR(sum / trials, 11000.0, 4.0 * std::sqrt(11000.0 / trials) + 11000.0 * 0.3 / (std::numbers::pi * 62));
}

TEST(Signal, BeamFootprintStretchedAlongTiltedAxis) {
    EmulsionFrame const f;
    ExposureConfig const e;
    double const sx = 6500.0 / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    double const sy = sx / std::cos(std::numbers::pi / 4.0);
    double const xc = 0.0, yc = -8500.0;
    auto const expect_count = [&](Region const& r) {
        double const ref = gauss_segment(xc - 185.0, xc + 185.0, xc, sx) * gauss_segment(yc - 147.0, yc + 147.0, yc, sy);
        return 11000.0 * gauss_segment(r.X0_um, r.X1_um, xc, sx) * gauss_segment(r.Y0_um, r.Y1_um, yc, sy) / ref;
    };
    for (auto const& r : {centred_tile(3000.0, yc), centred_tile(xc, yc + 3000.0)}) {
        double sum = 0.0;
        for (int i = 0; i < 8; ++i) sum += generate_signal_tile(flat_contrast(0.0), f, e, r, 100 + i).size();
        double const exp_mean = expect_count(r);
        EXPECT_NEAR(sum / 8.0, exp_mean, 4.0 * std::sqrt(exp_mean / 8.0));
    }
}

TEST(Signal, ImplantationDepthIsTruncatedNormal) {
    EmulsionFrame const f;
    ExposureConfig const e;
    auto const h = generate_signal_tile(flat_contrast(0.0), f, e, centred_tile(0.0, -8500.0), 1);
    double const mu = 2.0, s = 1.45, a = (0.0 - mu) / s, b = (50.0 - mu) / s;
    double const mean = mu + s * (normal_pdf(a) - normal_pdf(b)) / (normal_cdf(b) - normal_cdf(a));
    double zm = 0.0;
    for (auto const& g : h) {
        EXPECT_GE(g.Z_um, 0.0);
        zm += g.Z_um;
    }
    zm /= h.size();
    EXPECT_NEAR(zm, mean, 5.0 * s / std::sqrt(h.size()));
}

TEST(Signal, FringeModulationMatchesContrast) {
    // For I = 1 + C sin(kX), E[sin(kX)] over accepted hits is C / 2.
    EmulsionFrame const f;
    ExposureConfig const e;
    for (double c : {0.0, 0.25, 0.6}) {
        auto p = flat_contrast(c);
        p.alpha_rad = 0.01;
        auto const h = generate_signal_tile(p, f, e, centred_tile(0.0, -8500.0), 5);
        double s = 0.0;
        for (auto const& g : h) {
            double const xr = g.X_um * std::cos(p.alpha_rad) - g.Y_um * std::sin(p.alpha_rad);
            s += std::sin(2.0 * std::numbers::pi * xr / p.d3_um);
        }
        EXPECT_NEAR(2.0 * s / h.size(), c, 5.0 * std::sqrt(2.0 / h.size())) << "C = " << c;
    }
}

TEST(Signal, ContrastEnvelopeAlongL2) {
    ParametricPattern p;
    EXPECT_NEAR(p.contrast_at(573.0), 0.491, 1e-15);
    EXPECT_NEAR(p.contrast_at(573.0 + 2.12), 0.491 * std::exp(-0.5), 1e-15);
    p.contrast_peak = 1.0;
    EXPECT_THROW(p.validate(), InputError);
}

TEST(Exposure, DeterministicAcrossThreadCounts) {
    EmulsionFrame f;
    f.film_width_mm = 0.74;
    f.film_height_mm = 1.47;
    ExposureConfig e;
    e.beam_center_Y_mm = -15.0;
    ExposureCounts c1, c3;
    auto const a = generate_exposure(ParametricPattern{}, f, e, 1, &c1);
    auto const b = generate_exposure(ParametricPattern{}, f, e, 3, &c3);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].X_um, b[i].X_um);
        EXPECT_EQ(a[i].Z_um, b[i].Z_um);
    }
    EXPECT_EQ(c1.signal + c1.noise, a.size());
    EXPECT_EQ(c1.signal, c3.signal);
    e.rng_seed = 2;
    auto const c = generate_exposure(ParametricPattern{}, f, e, 1);
    EXPECT_NE(c.size(), a.size());
}

TEST(Exposure, HitsStayOnTiledFilm) {
    EmulsionFrame f;
    f.film_width_mm = 0.8;
    f.film_height_mm = 0.7;
    f.film_origin_Y_mm = -9.0;
    auto const h = generate_exposure(ParametricPattern{}, f, ExposureConfig{});
    ASSERT_FALSE(h.empty());
    for (auto const& g : h) {
        EXPECT_GE(g.X_um, -5000.0);
        EXPECT_LE(g.X_um, -5000.0 + 2 * 370.0);
        EXPECT_GE(g.Y_um, -9000.0);
        EXPECT_LE(g.Y_um, -9000.0 + 2 * 294.0);
    }
}

TEST(Exposure, RejectsBadConfig) {
    ExposureConfig e;
    e.implantation_mean_um = 60.0;
    EXPECT_THROW(generate_exposure(ParametricPattern{}, EmulsionFrame{}, e), DomainError);
}

TEST(HitFile, RoundTripAtThreeDecimals) {
    HitSet h{{1.23449, -2.0, 3.9999, HitKind::signal}, {-1000.5, 12.3456, 0.0, HitKind::noise}};
    auto const path = scratch("round.csv").string();
    write_hits(h, path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "X_um,Y_um,Z_um");
    std::getline(in, line);
    EXPECT_EQ(line, "1.234,-2.000,4.000");
    auto const r = read_hits(path);
    ASSERT_EQ(r.size(), 2u);
    EXPECT_DOUBLE_EQ(r[1].X_um, -1000.5);
    EXPECT_DOUBLE_EQ(r[1].Y_um, 12.346);
}

TEST(HitFile, ParseErrorsCarryLineNumbers) {
    auto const path = scratch("bad.csv").string();
    {
        std::ofstream o(path);
        o << "X_um,Y_um,Z_um\n";
        for (int i = 0; i < 5; ++i) o << i << ".0,1.0,2.0\n";
        o << "1.0,abc,2.0\n";
    }
    try {
        read_hits(path);
        FAIL() << "expected ParseError";
    } catch (ParseError const& e) {
        EXPECT_EQ(e.line(), 7u);
        EXPECT_NE(std::string(e.what()).find(":7:"), std::string::npos);
    }
    {
        std::ofstream o(path);
        o << "x,y,z\n1,2,3\n";
    }
    EXPECT_THROW(read_hits(path), ParseError);
    {
        std::ofstream o(path);
        o << "X_um,Y_um,Z_um\n1,2,3,4\n";
    }
    EXPECT_THROW(read_hits(path), ParseError);
    EXPECT_THROW(read_hits(scratch("missing.csv").string()), InputError);
}

TEST(Carpet, WrapsOnWholePeriods) {
    TalbotCarpet c;
    IntensityProfile p;
    p.x_start_um = -50.0;
    p.spacing_um = 0.05;
    double const d = 5.9;
    for (int i = 0; i < 2000; ++i) p.intensity.push_back(1.0 + 0.4 * std::cos(2.0 * std::numbers::pi * p.x_um(i) / d));
    c.z_values_mm = {570.0, 580.0};
    c.profiles = {p, p};
    CarpetPattern const cp(c, d);
    for (double x : {-40.0, 0.0, 3.3, 1234.5, -98765.4})
        EXPECT_NEAR(cp.intensity(x, 0.0, 575.0), 1.0 + 0.4 * std::cos(2.0 * std::numbers::pi * x / d), 2e-3) << x;
    EXPECT_NEAR(cp.max_intensity(), 1.4, 5e-3);
}

TEST(Carpet, InterpolatesBetweenPlanesAndClamps) {
    TalbotCarpet c;
    IntensityProfile lo, hi;
    lo.spacing_um = hi.spacing_um = 0.1;
    for (int i = 0; i < 1000; ++i) {
        lo.intensity.push_back(i < 500 ? 1.0 : 3.0); // mean 2 -> normalized 0.5 / 1.5
        hi.intensity.push_back(2.0);
    }
    c.z_values_mm = {570.0, 580.0};
    c.profiles = {lo, hi};
    CarpetPattern const cp(c, 100.0);
    EXPECT_NEAR(cp.intensity(10.0, 0.0, 575.0), 0.75, 1e-12);
    EXPECT_NEAR(cp.intensity(10.0, 0.0, 500.0), 0.5, 1e-12);
    EXPECT_NEAR(cp.intensity(10.0, 0.0, 600.0), 1.0, 1e-12);
}

TEST(Carpet, RejectsNegativeOrEmptyPlanes) {
    TalbotCarpet c;
    IntensityProfile p;
    p.spacing_um = 0.1;
    p.intensity.assign(100, 1.0);
    p.intensity[3] = -0.5;
    c.z_values_mm = {575.0};
    c.profiles = {p};
    EXPECT_THROW(CarpetPattern(c, 5.9), InputError);
    c.profiles[0].intensity.assign(100, 0.0);
    EXPECT_THROW(CarpetPattern(c, 5.9), InputError);
    EXPECT_THROW(CarpetPattern(TalbotCarpet{}, 5.9), InputError);
}
