#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "talbot/config.hpp"
#include "talbot/io.hpp"

using namespace talbot;
namespace fs = std::filesystem;

namespace {

fs::path scratch(std::string const& name) {
    auto const dir = fs::temp_directory_path() / "talbot_config_io_tests";
    fs::create_directories(dir);
    return dir / name;
}

std::string write(std::string const& name, std::string const& text) {
    auto const p = scratch(name).string();
    write_text_file(p, text);
    return p;
}

} // namespace

// ---------------------------------------------------------------------------
// Configuration

TEST(Config, DefaultsDescribeTheResonantApparatus) {
    RunConfig const c;
    auto const g = make_geometry(c);
    auto const ref = design_geometry(1.210, 1.004, ParticleState{14.0, constants::electron_rest_kev});
    EXPECT_DOUBLE_EQ(g.L1_mm, ref.L1_mm);
    EXPECT_DOUBLE_EQ(g.L2_mm, ref.L2_mm);
    EXPECT_NEAR(make_parametric(c).d3_um, 1.210 * 1.004 / 0.206, 1e-12);
    auto const f = make_frame(c);
    EXPECT_DOUBLE_EQ(f.film_width_mm, 10.0);
    auto const a = make_analysis_params(c);
    EXPECT_EQ(a.bins_per_period, 30u);
    EXPECT_TRUE(std::isnan(a.band_center_X_mm));
    auto const s = make_sim_config(c, g, make_beam(c), 1);
    EXPECT_EQ(s.grid.num_points, 32768u);
    EXPECT_EQ(s.model, Model::quantum);
}

TEST(Config, MergeTextWithCommentsAndWhitespace) {
    RunConfig c;
    c.merge_text("# comment\n\n  physics.energy_kev =  9   # trailing\nsim.model=classical\r\n");
    EXPECT_DOUBLE_EQ(c.number("physics.energy_kev"), 9.0);
    EXPECT_EQ(c.raw("sim.model"), "classical");
    EXPECT_EQ(make_sim_config(c, make_geometry(c), make_beam(c), 1).model, Model::classical);
}

TEST(Config, ParseErrorsNameTheLine) {
    RunConfig c;
    try {
        c.merge_text("physics.d1_um = 1.2\n# ok\nphysics.bogus = 3\n", "run.cfg");
        FAIL() << "expected ParseError";
    } catch (ParseError const& e) {
        EXPECT_EQ(e.line(), 3u);
        EXPECT_NE(std::string(e.what()).find("run.cfg:3:"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("physics.bogus"), std::string::npos);
    }
    EXPECT_THROW(c.merge_text("physics.d1_um 1.2\n"), ParseError);
    EXPECT_THROW(c.merge_text("physics.d1_um =\n"), ParseError);
    EXPECT_THROW(c.set("nope.key", "1"), ConfigError);
}

TEST(Config, EchoRoundTrips) {
    RunConfig a;
    a.set("exposure.seed", "42");
    a.set("parametric.contrast", "0.144");
    RunConfig b;
    b.merge_text(a.echo());
    EXPECT_TRUE(a == b);
    EXPECT_EQ(a.echo(), b.echo());
}

TEST(Config, TypedAccessValidates) {
    RunConfig c;
    c.set("physics.energy_kev", "fourteen");
    EXPECT_THROW(c.number("physics.energy_kev"), ConfigError);
    c.set("sim.num_tilt_samples", "1.5");
    EXPECT_THROW(c.integer("sim.num_tilt_samples"), ConfigError);
    c.set("exposure.seed", "-1");
    EXPECT_THROW(c.seed("exposure.seed"), ConfigError);
}

TEST(Config, GridKeysMustBeSetTogether) {
    RunConfig c;
    c.set("sim.num_points", "8192");
    EXPECT_THROW(make_sim_config(c, make_geometry(c), make_beam(c), 1), ConfigError);
    c.set("sim.spacing_um", "0.02");
    EXPECT_EQ(make_sim_config(c, make_geometry(c), make_beam(c), 1).grid.num_points, 8192u);
}

TEST(Config, TiltDistributionChoice) {
    RunConfig c;
    c.set("beam.tilt_distribution", "uniform");
    auto const s = make_sim_config(c, make_geometry(c), make_beam(c), 1);
    EXPECT_EQ(s.tilt.kind, TiltDistribution::Kind::uniform);
    EXPECT_NEAR(s.tilt.width_rad, std::sqrt(3.0) * 2e-4, 1e-15);
    c.set("beam.tilt_distribution", "lorentzian");
    EXPECT_THROW(make_sim_config(c, make_geometry(c), make_beam(c), 1), ConfigError);
}

TEST(Config, ExplicitDistancesOverrideDesign) {
    RunConfig c;
    c.set("physics.L1_mm", "100");
    c.set("physics.L2_mm", "300");
    auto const g = make_geometry(c);
    EXPECT_DOUBLE_EQ(g.L1_mm, 100.0);
    EXPECT_DOUBLE_EQ(g.L2_mm, 300.0);
}

TEST(Config, InvalidPhysicsRejected) {
    RunConfig c;
    c.set("physics.d2_um", "1.210");
    EXPECT_THROW(make_geometry(c), DomainError);
    RunConfig d;
    d.set("parametric.contrast", "1.2");
    EXPECT_THROW(make_parametric(d), InputError);
    RunConfig e;
    e.set("exposure.implantation_mean_um", "80");
    EXPECT_THROW(make_exposure(e), DomainError);
}

TEST(Config, MergeFileMissingIsInputError) {
    RunConfig c;
    EXPECT_THROW(c.merge_file(scratch("does_not_exist.cfg").string()), InputError);
}

// ---------------------------------------------------------------------------
// CSV files

TEST(Csv, NumericTableAndErrors) {
    auto const ok = write("ok.csv", "a,b\n1,2\n\n3.5,-4e-3\n");
    auto const t = read_numeric_csv(ok);
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_DOUBLE_EQ(t.rows[1][1], -4e-3);
    EXPECT_EQ(t.column("b", ok), 1u);
    EXPECT_THROW(t.column("c", ok), ParseError);
    try {
        read_numeric_csv(write("short.csv", "a,b\n1,2\n3\n"));
        FAIL();
    } catch (ParseError const& e) {
        EXPECT_EQ(e.line(), 3u);
    }
    try {
        read_numeric_csv(write("nan.csv", "a,b\n1,2\n3,4\n5,x\n"));
        FAIL();
    } catch (ParseError const& e) {
        EXPECT_EQ(e.line(), 4u);
    }
}

TEST(Csv, CarpetRoundTrip) {
    TalbotCarpet c;
    for (double z : {570.0, 575.0}) {
        IntensityProfile p;
        p.x_start_um = -10.0;
        p.spacing_um = 0.025;
        for (int i = 0; i < 800; ++i) p.intensity.push_back(1.0 + 0.5 * std::sin(0.01 * i * z));
        p.plane_z_mm = z;
        c.z_values_mm.push_back(z);
        c.profiles.push_back(p);
    }
    auto const path = write("carpet.csv", format_carpet(c));
    auto const r = read_carpet(path);
    ASSERT_EQ(r.profiles.size(), 2u);
    EXPECT_DOUBLE_EQ(r.z_values_mm[1], 575.0);
    EXPECT_NEAR(r.profiles[1].spacing_um, 0.025, 1e-9);
    EXPECT_NEAR(r.profiles[1].x_start_um, -10.0, 1e-9);
    auto const n = c.profiles[1].normalized();
    for (std::size_t i = 0; i < n.intensity.size(); i += 97) EXPECT_NEAR(r.profiles[1].intensity[i], n.intensity[i], 1e-8);
}

TEST(Csv, SinglePatternReadsAsOnePlane) {
    IntensityProfile p;
    p.spacing_um = 0.05;
    p.intensity.assign(200, 2.0);
    auto const r = read_carpet(write("pattern.csv", format_pattern(p)));
    ASSERT_EQ(r.profiles.size(), 1u);
    EXPECT_NEAR(r.profiles[0].intensity[10], 1.0, 1e-12);
}

TEST(Csv, CarpetPlanesMustIncrease) {
    EXPECT_THROW(read_carpet(write("dec.csv", "z_mm,x_um,intensity\n5,0,1\n5,1,1\n4,0,1\n4,1,1\n")), InputError);
}

TEST(Csv, ModelCurveFromEnergyScan) {
    std::vector<EnergyContrast> rows{{14.0, 575.0, 0.8, 1.0, 0.8, 1.0}, {8.0, 570.0, 0.4, 0.5, 0.3, 0.375}};
    auto const m = read_model_curve(write("scan.csv", format_energy_scan(rows)));
    EXPECT_NEAR(m.at(11.0), 0.75, 1e-9);
    EXPECT_THROW(read_model_curve(write("nocol.csv", "energy_kev,x\n1,2\n")), ParseError);
}

// ---------------------------------------------------------------------------
// Reports

TEST(Reports, ViewsCsvHeaderAndUnsearchedRows) {
    ExposureAnalysis a;
    ViewRow v;
    v.ix = 2;
    v.iy = 5;
    v.n_hits = 12;
    a.views.push_back(v);
    auto const text = format_views_csv(a);
    EXPECT_EQ(text.substr(0, text.find('\n')),
              "ix,iy,X_center_um,Y_center_um,n_hits,alpha_star_rad,d3_star_um,R_star,selected,contrast,"
              "contrast_err,phase_rad");
    EXPECT_NE(text.find("2,5,0.000,0.000,12,nan,nan,nan,0,"), std::string::npos);
}

TEST(Reports, KeyValueRoundTrip) {
    KeyValueReport r;
    r.add("verdict", "fringes found");
    r.add("C_max", 0.49123, "%.5f");
    auto const back = KeyValueReport::parse(r.text("title"), "x");
    EXPECT_EQ(back.get("verdict"), "fringes found");
    EXPECT_DOUBLE_EQ(back.number("C_max"), 0.49123);
    EXPECT_FALSE(back.has("missing"));
    EXPECT_THROW(back.get("missing"), InputError);
    EXPECT_THROW(back.number("verdict"), InputError);
    EXPECT_THROW(KeyValueReport::parse("no equals sign\n", "x"), ParseError);
}

TEST(Reports, SummaryKeysFollowAvailableResults) {
    ExposureAnalysis a;
    a.verdict = "insufficient views";
    a.energy_kev = 9.0;
    auto const r = summary_report(a);
    EXPECT_EQ(r.get("energy_kev"), "9.0000");
    EXPECT_FALSE(r.has("C_max"));
    a.profile = ProfileFit{};
    a.profile->C_max = 0.267;
    EXPECT_EQ(summary_report(a).get("C_max"), "0.26700");
}

TEST(Format, StrfFormatsLikePrintf) {
    EXPECT_EQ(strf("%d-%.2f-%s", 3, 1.005, "x"), "3-1.00-x");
    EXPECT_EQ(strf("%s", std::string(300, 'a').c_str()).size(), 300u);
}
