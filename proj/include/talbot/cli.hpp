#pragma once
//
// Command-line front end: design, simulate, generate, analyze, compare.
// run_cli() parses arguments and dispatches; it never calls exit(), so it can
// be driven from tests.
//
// Exit codes: 0 success, 1 usage, 2 input/parse/domain/configuration error,
// 3 numerical failure.
//

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "talbot/analysis.hpp"
#include "talbot/config.hpp"
#include "talbot/errors.hpp"
#include "talbot/hitgen.hpp"
#include "talbot/io.hpp"
#include "talbot/physics.hpp"
#include "talbot/svg.hpp"
#include "talbot/wave.hpp"

namespace talbot::cli {

namespace exit_code {
inline constexpr int success = 0;
inline constexpr int usage = 1;
inline constexpr int input = 2;
inline constexpr int numerical = 3;
} // namespace exit_code

/// Raised for flag combinations that CLI11 cannot express.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::vector<double> parse_number_list(std::string const& s, std::string const& flag) {
    std::vector<double> out;
    for (auto const& f : split_commas(s)) {
        double v = 0.0;
        auto const r = std::from_chars(f.data(), f.data() + f.size(), v);
        if (f.empty() || r.ec != std::errc() || r.ptr != f.data() + f.size())
            throw UsageError(flag + " expects comma-separated numbers, got '" + s + "'");
        out.push_back(v);
    }
    return out;
}

inline RunConfig load_config(std::string const& path) {
    RunConfig c;
    if (!path.empty()) c.merge_file(path);
    return c;
}

/// Echoes the effective configuration next to an output file.
inline void echo_config_beside(RunConfig const& c, std::string const& out_path) {
    write_text_file(out_path + ".config.txt", c.echo());
}

// ---------------------------------------------------------------------------
// design

struct DesignOptions {
    std::string config;
    std::optional<double> d1_um, d2_um, energy_kev, coherence_ratio;
    std::string out;
};

inline KeyValueReport design_report(RunConfig const& c) {
    InterferometerGeometry const g = make_geometry(c);
    BeamModel const beam = make_beam(c);
    ToleranceReport const t = tolerance_report(g, beam, c.number("physics.period_sigma_um"));
    KeyValueReport r;
    r.add("d1_um", g.grating1.period_um, "%.4f");
    r.add("d2_um", g.grating2.period_um, "%.4f");
    r.add("energy_kev", beam.particle.kinetic_energy_kev, "%.4f");
    r.add("wavelength_pm", de_broglie_wavelength_pm(beam.particle), "%.5f");
    r.add("L1_mm", g.L1_mm, "%.3f");
    r.add("L2_mm", g.L2_mm, "%.3f");
    r.add("d3_um", fringe_period_um(g), "%.4f");
    r.add("resonance_ratio", t.resonance_ratio, "%.5f");
    r.add("resonance_ratio_sigma", t.resonance_ratio_sigma, "%.5f");
    r.add("L2_uncertainty_mm", t.L2_uncertainty_mm, "%.2f");
    r.add("sigma_phi_urad", t.sigma_phi_urad, "%.1f");
    r.add("regime_indicator", t.diffraction_regime_indicator, "%.4f");
    r.add("collimator_acceptance_rad", g.collimator_acceptance_rad(), "%.5f");
    return r;
}

inline int cmd_design(DesignOptions const& o, std::ostream& out) {
    RunConfig c = load_config(o.config);
    auto num = [](double v) { return strf("%.17g", v); };
    if (o.d1_um) c.set("physics.d1_um", num(*o.d1_um));
    if (o.d2_um) c.set("physics.d2_um", num(*o.d2_um));
    if (o.energy_kev) {
        c.set("physics.energy_kev", num(*o.energy_kev));
        c.set("physics.design_energy_kev", num(*o.energy_kev));
    }
    if (o.coherence_ratio) c.set("beam.coherence_ratio", num(*o.coherence_ratio));
    std::string const text = design_report(c).text("interferometer design");
    out << text;
    if (!o.out.empty()) write_text_file(o.out, text);
    return exit_code::success;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOptions {
    std::string config;
    std::string model;
    std::string z_scan;
    std::string energy_scan;
    std::optional<double> z_mm;
    std::string out;
    unsigned threads = 1;
};

inline int cmd_simulate(SimulateOptions const& o, std::ostream& out) {
    RunConfig c = load_config(o.config);
    if (!o.model.empty()) c.set("sim.model", o.model);
    if (o.z_mm) c.set("sim.z_mm", strf("%.17g", *o.z_mm));
    if (!o.z_scan.empty() && !o.energy_scan.empty()) throw UsageError("--z-scan and --energy-scan are exclusive");
    InterferometerGeometry const g = make_geometry(c);
    BeamModel const beam = make_beam(c);
    SimConfig const sim = make_sim_config(c, g, beam, o.threads);
    double const period = beat_period_um(g);

    if (!o.energy_scan.empty()) {
        auto const energies = parse_number_list(o.energy_scan, "--energy-scan");
        double const hw = c.number("sim.peak_search_half_width_mm");
        long long const planes = c.integer("sim.peak_search_planes");
        if (planes < 3) throw ConfigError("sim.peak_search_planes must be at least 3");
        auto const rows = contrast_vs_energy(g, beam, energies, sim, c.number("physics.design_energy_kev"),
                                             g.L2_mm - hw, g.L2_mm + hw, static_cast<std::size_t>(planes));
        write_text_file(o.out, format_energy_scan(rows));
        echo_config_beside(c, o.out);
        out << "# energy scan (" << c.raw("sim.model") << ")\n";
        for (auto const& r : rows)
            out << strf("E = %.3f keV: peak_z_mm = %.3f contrast = %.6f c_normalized = %.6f\n", r.energy_kev,
                        r.peak_z_mm, r.contrast, r.c_normalized);
        return exit_code::success;
    }

    if (!o.z_scan.empty()) {
        auto const v = parse_number_list(o.z_scan, "--z-scan");
        if (v.size() != 3 || v[2] < 1 || v[2] != std::floor(v[2]))
            throw UsageError("--z-scan expects z0,z1,n with integer n >= 1");
        auto const zs = linspace(v[0], v[1], static_cast<std::size_t>(v[2]));
        TalbotCarpet const carpet = simulate_carpet(g, beam, beam.particle, zs, sim);
        write_text_file(o.out, format_carpet(carpet));
        echo_config_beside(c, o.out);
        std::vector<ContrastSample> scan;
        for (std::size_t i = 0; i < zs.size(); ++i)
            scan.push_back({zs[i], pattern_contrast(carpet.profiles[i], period).contrast});
        write_text_file(o.out + ".contrast.csv", format_contrast_scan(scan));
        auto const best = std::max_element(scan.begin(), scan.end(),
                                           [](auto const& a, auto const& b) { return a.contrast < b.contrast; });
        out << strf("planes = %zu\npeak_z_mm = %.4f\npeak_contrast = %.6f\nfringe_period_um = %.5f\n", zs.size(),
                    best->z_mm, best->contrast, period);
        return exit_code::success;
    }

    double const z = c.is_auto("sim.z_mm") ? g.L2_mm : c.number("sim.z_mm");
    PlaneEvaluator const eval(g, beam, beam.particle, sim);
    IntensityProfile const p = eval.pattern(z);
    write_text_file(o.out, format_pattern(p));
    echo_config_beside(c, o.out);
    auto const fc = pattern_contrast(p, period);
    out << strf("z_mm = %.4f\ncontrast_at_d3 = %.6f\nphase_rad = %.6f\nfringe_period_um = %.5f\n"
                "dominant_period_um = %.5f\n",
                z, fc.contrast, fc.phase_rad, period, dominant_period_um(p, 1.0));
    return exit_code::success;
}

// ---------------------------------------------------------------------------
// generate

struct GenerateOptions {
    std::string config;
    std::string pattern;
    bool parametric = false;
    std::optional<std::uint64_t> seed;
    std::string out;
    unsigned threads = 1;
};

inline int cmd_generate(GenerateOptions const& o, std::ostream& out) {
    if (o.pattern.empty() == !o.parametric)
        throw UsageError("generate needs exactly one of --pattern FILE or --parametric");
    RunConfig c = load_config(o.config);
    if (o.seed) c.set("exposure.seed", std::to_string(*o.seed));
    EmulsionFrame const frame = make_frame(c);
    ExposureConfig const exposure = make_exposure(c);
    std::optional<PatternSource> source;
    if (o.parametric) {
        source.emplace(make_parametric(c));
    } else {
        double const d3 = resonant_fringe_period_um(c.number("physics.d1_um"), c.number("physics.d2_um"));
        source.emplace(CarpetPattern(read_carpet(o.pattern), d3));
    }
    ExposureCounts counts;
    HitSet const hits = generate_exposure(*source, frame, exposure, o.threads, &counts);
    write_hits(hits, o.out);
    echo_config_beside(c, o.out);
    out << strf("signal = %zu\nnoise = %zu\ntotal = %zu\n", counts.signal, counts.noise, hits.size());
    return exit_code::success;
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeOptions {
    std::string hits;
    std::string config;
    std::string out_dir;
    bool plots = false;
    std::string quantum_curve;
    std::string classical_curve;
    unsigned threads = 1;
};

inline void write_analysis_plots(ExposureAnalysis const& a, AnalysisParams const& p, EmulsionFrame const& frame,
                                 std::filesystem::path const& dir) {
    auto const& s = p.search;
    {
        svg::Plot plot(s.alpha_min_rad, s.alpha_max_rad, s.d3_min_um, s.d3_max_um, "Optimal angle and period per view",
                       "alpha* (rad)", "d3* (um)");
        for (auto const& v : a.views)
            if (v.searched)
                plot.point(v.rayleigh.alpha_star_rad, v.rayleigh.d3_star_um, 2.0, v.selected ? "#c0392b" : "#1f4e9c");
        if (a.selection)
            plot.ellipse(a.selection->alpha0_rad, a.selection->d0_um, a.selection->semi_alpha(),
                         a.selection->semi_d());
        plot.save((dir / "scatter.svg").string());
    }
    {
        double const x0 = frame.film_origin_X_mm, y0 = frame.film_origin_Y_mm;
        double const vw = s.view_width_um * 1e-3, vh = s.view_height_um * 1e-3;
        double cmax = 0.0;
        for (auto const& v : a.views) cmax = std::max(cmax, v.selected ? v.contrast : 0.0);
        if (!(cmax > 0.0)) cmax = 1.0;
        svg::Plot plot(x0, x0 + a.nx * vw, y0, y0 + a.ny * vh, "Fringe contrast per view", "X (mm)", "Y (mm)", 480,
                       640);
        plot.set_right_margin(80);
        for (auto const& v : a.views) {
            double const cx = v.X_center_um * 1e-3, cy = v.Y_center_um * 1e-3;
            plot.cell(cx - vw / 2, cy - vh / 2, cx + vw / 2, cy + vh / 2,
                      svg::colormap(v.selected ? v.contrast / cmax : 0.0));
        }
        if (a.profile) {
            plot.vline(a.band_center_X_mm - p.band_width_mm / 2);
            plot.vline(a.band_center_X_mm + p.band_width_mm / 2);
        }
        plot.color_bar(0.0, cmax, "C");
        plot.save((dir / "heatmap.svg").string());
    }
    {
        std::vector<ViewRow const*> band;
        for (auto const& v : a.views)
            if (v.selected && std::abs(v.X_center_um * 1e-3 - a.band_center_X_mm) <= 0.5 * p.band_width_mm)
                band.push_back(&v);
        double const y0 = frame.film_origin_Y_mm, y1 = y0 + frame.film_height_mm;
        double chi = 0.1;
        for (auto const* v : band) chi = std::max(chi, v->contrast + v->contrast_err);
        svg::Plot plot(y0, y1, 0.0, chi * 1.1, "Contrast along the film", "Y (mm)", "C");
        for (auto const* v : band) {
            plot.error_bar(v->Y_center_um * 1e-3, v->contrast, v->contrast_err);
            plot.point(v->Y_center_um * 1e-3, v->contrast);
        }
        if (a.profile) {
            auto const ys = linspace(y0, y1, 200);
            std::vector<double> cs;
            for (double y : ys) cs.push_back(a.profile->fit(y));
            plot.polyline(ys, cs);
        }
        plot.save((dir / "contrast_vs_y.svg").string());
    }
    {
        ViewRow const* best = nullptr;
        for (auto const& v : a.views)
            if (v.selected && v.fold && (!best || v.contrast / v.contrast_err > best->contrast / best->contrast_err))
                best = &v;
        if (best) {
            auto const& f = *best->fold;
            double const P = best->rayleigh.d3_star_um * p.fold_periods;
            std::vector<double> xs;
            for (std::size_t b = 0; b < f.n_bins; ++b) xs.push_back((b + 0.5) * P / static_cast<double>(f.n_bins));
            double const hi = *std::max_element(f.counts.begin(), f.counts.end());
            svg::Plot plot(0.0, P, 0.0, hi * 1.15,
                           strf("Folded view (%zu, %zu): C = %.3f", best->ix, best->iy, best->contrast),
                           "X mod d3* (um)", "grains per bin");
            for (std::size_t b = 0; b < f.n_bins; ++b) {
                plot.error_bar(xs[b], f.counts[b], std::sqrt(std::max(f.counts[b], 1.0)));
                plot.point(xs[b], f.counts[b]);
            }
            plot.polyline(xs, f.model);
            plot.save((dir / "fold.svg").string());
        }
    }
}

inline int cmd_analyze(AnalyzeOptions const& o, std::ostream& out) {
    RunConfig const c = load_config(o.config);
    EmulsionFrame const frame = make_frame(c);
    AnalysisParams const params = make_analysis_params(c);
    HitSet const hits = read_hits(o.hits);
    std::filesystem::path const dir(o.out_dir);
    std::filesystem::create_directories(dir);
    ExposureAnalysis const a = analyze_exposure(hits, frame, params, o.threads);
    KeyValueReport r = summary_report(a);
    if (!o.quantum_curve.empty() || !o.classical_curve.empty()) {
        double const e = a.energy_kev;
        if (!o.quantum_curve.empty()) r.add("model_quantum_c_normalized", read_model_curve(o.quantum_curve).at(e), "%.5f");
        if (!o.classical_curve.empty())
            r.add("model_classical_c_normalized", read_model_curve(o.classical_curve).at(e), "%.5f");
    }
    std::string const text = r.text("exposure summary");
    write_text_file((dir / "summary.txt").string(), text);
    write_text_file((dir / "views.csv").string(), format_views_csv(a));
    write_text_file((dir / "config.txt").string(), c.echo());
    if (o.plots) write_analysis_plots(a, params, frame, dir);
    out << text;
    return exit_code::success;
}

// ---------------------------------------------------------------------------
// compare

struct CompareOptions {
    std::vector<std::string> summaries;
    std::string quantum_curve;
    std::string classical_curve;
    std::string out_dir;
    double resonance_energy_kev = 14.0;
};

inline int cmd_compare(CompareOptions const& o, std::ostream& out, std::ostream& err) {
    std::vector<EnergyPoint> pts;
    for (auto const& path : o.summaries) {
        KeyValueReport const r = KeyValueReport::read(path);
        if (!r.has("C_max")) {
            err << path << ": no fitted contrast (" << (r.has("verdict") ? r.get("verdict") : "no verdict")
                << "), skipped\n";
            continue;
        }
        pts.push_back({r.number("energy_kev", path), r.number("C_max", path), r.number("C_max_err", path)});
    }
    ModelCurve const q = o.quantum_curve.empty() ? ModelCurve{} : read_model_curve(o.quantum_curve);
    ModelCurve const cl = o.classical_curve.empty() ? ModelCurve{} : read_model_curve(o.classical_curve);
    Comparison const cmp = summarize(pts, q, cl, o.resonance_energy_kev);
    if (cmp.verdict == verdicts::insufficient) {
        err << "insufficient data: need at least 2 exposures with a fitted contrast\n";
        out << "verdict = " << cmp.verdict << "\n";
        return exit_code::input;
    }
    std::filesystem::path const dir(o.out_dir);
    std::filesystem::create_directories(dir);
    write_text_file((dir / "comparison.csv").string(), format_comparison_csv(cmp));
    KeyValueReport rep;
    rep.add("reference_energy_kev", cmp.reference_energy_kev, "%.4f");
    rep.add("exposures", std::to_string(cmp.rows.size()));
    rep.add("verdict", cmp.verdict);
    std::string const text = rep.text("energy comparison") + format_comparison_csv(cmp);
    write_text_file((dir / "comparison.txt").string(), text);

    double emin = 1e300, emax = -1e300, cmax = 1.2;
    for (auto const& r : cmp.rows) {
        emin = std::min(emin, r.energy_kev);
        emax = std::max(emax, r.energy_kev);
        cmax = std::max(cmax, r.c_normalized + r.c_normalized_err);
    }
    svg::Plot plot(emin - 1.0, emax + 1.0, 0.0, cmax * 1.05, "Contrast normalised to resonance",
                   "positron energy (keV)", "C / C(resonance)");
    for (auto const& r : cmp.rows) {
        plot.error_bar(r.energy_kev, r.c_normalized, r.c_normalized_err, "#000000");
        plot.point(r.energy_kev, r.c_normalized, 3.5, "#000000");
    }
    auto draw = [&](ModelCurve const& m, std::string const& color, bool dashed) {
        if (m.energy_kev.empty()) return;
        auto const es = linspace(emin - 1.0, emax + 1.0, 120);
        std::vector<double> cs;
        for (double e : es) cs.push_back(m.at(e));
        plot.polyline(es, cs, color, dashed);
    };
    draw(q, "#c0392b", false);
    draw(cl, "#1f4e9c", true);
    plot.legend("measured", "#000000", 0);
    if (!q.energy_kev.empty()) plot.legend("quantum model", "#c0392b", 1);
    if (!cl.energy_kev.empty()) plot.legend("classical model", "#1f4e9c", 2);
    plot.save((dir / "comparison.svg").string());
    out << text;
    return exit_code::success;
}

// ---------------------------------------------------------------------------
// Dispatcher

inline int run_cli(std::vector<std::string> const& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Talbot-Lau interferometer design, simulation and fringe analysis", "talbot"};
    app.require_subcommand(1);
    unsigned threads = 1;

    DesignOptions d;
    auto* design = app.add_subcommand("design", "Resonant geometry and tolerances");
    design->add_option("--config", d.config, "configuration file");
    design->add_option("--d1-um", d.d1_um, "first grating period (um)");
    design->add_option("--d2-um", d.d2_um, "second grating period (um)");
    design->add_option("--energy-kev", d.energy_kev, "design kinetic energy (keV)");
    design->add_option("--coherence-ratio", d.coherence_ratio, "coherence length at the detector / wavelength");
    design->add_option("--out", d.out, "also write the report to this file");
    design->add_option("--threads", threads, "worker threads (results do not depend on it)");

    SimulateOptions s;
    auto* simulate = app.add_subcommand("simulate", "Detector-plane patterns, carpets and energy scans");
    simulate->add_option("--config", s.config, "configuration file");
    simulate->add_option("--model", s.model, "quantum or classical")->check(CLI::IsMember({"quantum", "classical"}));
    simulate->add_option("--z-scan", s.z_scan, "z0,z1,n: carpet over n planes (mm)");
    simulate->add_option("--energy-scan", s.energy_scan, "e1,e2,...: peak contrast per energy (keV)");
    simulate->add_option("--z-mm", s.z_mm, "single detector plane (mm); default L2");
    simulate->add_option("--out", s.out, "output CSV")->required();
    simulate->add_option("--threads", threads, "worker threads (results do not depend on it)");

    GenerateOptions g;
    auto* generate = app.add_subcommand("generate", "Synthetic emulsion grain data");
    generate->add_option("--config", g.config, "configuration file");
    generate->add_option("--pattern", g.pattern, "pattern or carpet CSV from simulate");
    generate->add_flag("--parametric", g.parametric, "use the parametric fringe model from the configuration");
    generate->add_option("--seed", g.seed, "generator seed (overrides exposure.seed)");
    generate->add_option("--out", g.out, "output hit CSV")->required();
    generate->add_option("--threads", threads, "worker threads (results do not depend on it)");

    AnalyzeOptions a;
    auto* analyze = app.add_subcommand("analyze", "Fringe analysis of a hit file");
    analyze->add_option("--hits", a.hits, "hit CSV")->required();
    analyze->add_option("--config", a.config, "configuration file");
    analyze->add_option("--out-dir", a.out_dir, "output directory")->required();
    analyze->add_flag("--plots", a.plots, "write SVG figures");
    analyze->add_option("--quantum-curve", a.quantum_curve, "energy scan CSV of the quantum model");
    analyze->add_option("--classical-curve", a.classical_curve, "energy scan CSV of the classical model");
    analyze->add_option("--threads", threads, "worker threads (results do not depend on it)");

    CompareOptions cmp;
    auto* compare = app.add_subcommand("compare", "Contrast versus energy across exposures");
    compare->add_option("--summaries", cmp.summaries, "summary.txt files from analyze")->required();
    compare->add_option("--quantum-curve", cmp.quantum_curve, "energy scan CSV of the quantum model");
    compare->add_option("--classical-curve", cmp.classical_curve, "energy scan CSV of the classical model");
    compare->add_option("--resonance-energy-kev", cmp.resonance_energy_kev, "normalisation energy");
    compare->add_option("--out", cmp.out_dir, "output directory")->required();
    compare->add_option("--threads", threads, "worker threads (results do not depend on it)");

    std::vector<char const*> argv;
    argv.push_back("talbot");
    for (auto const& x : args) argv.push_back(x.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (CLI::CallForHelp const&) {
        out << app.help();
        return exit_code::success;
    } catch (CLI::CallForAllHelp const&) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_code::success;
    } catch (CLI::ParseError const& e) {
        err << "usage error: " << e.what() << "\n" << "run with --help for usage\n";
        return exit_code::usage;
    }

    try {
        if (*design) return cmd_design(d, out);
        if (*simulate) {
            s.threads = threads;
            return cmd_simulate(s, out);
        }
        if (*generate) {
            g.threads = threads;
            return cmd_generate(g, out);
        }
        if (*analyze) {
            a.threads = threads;
            return cmd_analyze(a, out);
        }
        if (*compare) return cmd_compare(cmp, out, err);
    } catch (UsageError const& e) {
        err << "usage error: " << e.what() << "\n";
        return exit_code::usage;
    } catch (NumericalError const& e) {
        err << "numerical error: " << e.what() << "\n";
        return exit_code::numerical;
    } catch (ParseError const& e) {
        err << "parse error: " << e.what() << "\n";
        return exit_code::input;
    } catch (InputError const& e) {
        err << "input error: " << e.what() << "\n";
        return exit_code::input;
    } catch (ConfigError const& e) {
        err << "configuration error: " << e.what() << "\n";
        return exit_code::input;
    } catch (DomainError const& e) {
        err << "domain error: " << e.what() << "\n";
        return exit_code::input;
    } catch (std::filesystem::filesystem_error const& e) {
        err << "input error: " << e.what() << "\n";
        return exit_code::input;
    }
    return exit_code::usage;
}

} // namespace talbot::cli
