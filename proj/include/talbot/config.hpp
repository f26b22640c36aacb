#pragma once
//
// Run configuration: a flat map of dotted keys ("section.key = value", '#'
// comments) with documented defaults, plus builders that turn it into the
// library's parameter structs. Units are part of every key name.
//

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "talbot/analysis.hpp"
#include "talbot/errors.hpp"
#include "talbot/hitgen.hpp"
#include "talbot/physics.hpp"
#include "talbot/wave.hpp"

namespace talbot {

struct ConfigKey {
    char const* name;
    char const* default_value;
    char const* description;
};

/// Every recognised key, in echo order. "auto" means derived from other keys.
inline std::vector<ConfigKey> const& config_keys() {
    static std::vector<ConfigKey> const keys = {
        {"physics.d1_um", "1.210", "period of the first grating"},
        {"physics.d2_um", "1.004", "period of the second grating"},
        {"physics.open_fraction1", "0.5", "slit width / period of the first grating"},
        {"physics.open_fraction2", "0.5", "slit width / period of the second grating"},
        {"physics.offset1_um", "0", "lateral offset of the first grating"},
        {"physics.offset2_um", "0", "lateral offset of the second grating"},
        {"physics.energy_kev", "14", "kinetic energy of the simulated particles"},
        {"physics.design_energy_kev", "14", "energy the geometry is tuned for (L1 = d1 d2 / lambda)"},
        {"physics.rest_energy_kev", "510.99895", "particle rest energy"},
        {"physics.L1_mm", "auto", "grating separation; auto = d1 d2 / lambda at the design energy"},
        {"physics.L2_mm", "auto", "second grating to detector; auto = L1 / (d1/d2 - 1)"},
        {"physics.collimator1_diameter_mm", "2", "first collimator aperture"},
        {"physics.collimator2_diameter_mm", "2", "second collimator aperture"},
        {"physics.collimator_spacing_mm", "102", "distance between the collimators"},
        {"physics.period_sigma_um", "0.001", "uncertainty of each grating period"},
        {"beam.angular_sigma_rad", "0.0002", "rms angular spread of the incoherent beam"},
        {"beam.coherence_ratio", "800", "transverse coherence length at the detector / lambda"},
        {"beam.spot_fwhm_mm", "6.5", "beam spot FWHM"},
        {"beam.tilt_distribution", "gaussian", "gaussian (truncated at the collimator acceptance) or uniform of the same rms"},
        {"sim.model", "quantum", "quantum or classical"},
        {"sim.num_points", "auto", "grid points; auto = commensurate periodic grid"},
        {"sim.spacing_um", "auto", "grid spacing; set together with sim.num_points"},
        {"sim.min_window_um", "512", "minimum window of the automatic grid"},
        {"sim.max_spacing_um", "0.025", "maximum spacing of the automatic grid"},
        {"sim.guard_fraction", "0.25", "fraction of the window discarded on each side"},
        {"sim.num_tilt_samples", "128", "incoherent tilt samples"},
        {"sim.seed", "1", "seed for the tilt summation order"},
        {"sim.z_mm", "auto", "detector plane for single-pattern runs; auto = L2"},
        {"sim.peak_search_half_width_mm", "35", "half width of the z range searched for the contrast peak"},
        {"sim.peak_search_planes", "29", "coarse planes of the contrast-peak search"},
        {"emulsion.tilt_angle_rad", "0.785398163397448", "film tilt relative to the beam"},
        {"emulsion.L2_at_origin_mm", "579", "L2 of the film line Y = 0"},
        {"emulsion.y_sign", "1", "+1 or -1: direction of increasing L2 along Y"},
        {"emulsion.film_origin_X_mm", "-5", "film corner X"},
        {"emulsion.film_origin_Y_mm", "-15.5", "film corner Y"},
        {"emulsion.film_width_mm", "10", "film size along X"},
        {"emulsion.film_height_mm", "14", "film size along Y"},
        {"emulsion.thickness_um", "50", "emulsion layer thickness"},
        {"exposure.target_grains_per_view", "11000", "signal grains in a view at the beam centre"},
        {"exposure.noise_density_per_1000um3", "5.8", "thermal noise grains per 1000 um^3"},
        {"exposure.implantation_mean_um", "2.0", "mean implantation depth"},
        {"exposure.implantation_sigma_um", "1.45", "rms implantation depth"},
        {"exposure.beam_center_X_mm", "0", "beam centre on the film, X"},
        {"exposure.beam_center_Y_mm", "-8.5", "beam centre on the film, Y"},
        {"exposure.beam_fwhm_mm", "6.5", "beam FWHM in the lab transverse plane"},
        {"exposure.seed", "1", "generator seed"},
        {"parametric.contrast", "0.491", "envelope peak contrast"},
        {"parametric.center_L2_mm", "573", "L2 of the envelope peak"},
        {"parametric.width_L2_mm", "2.12", "rms width of the envelope in L2"},
        {"parametric.baseline", "0", "constant contrast added to the envelope"},
        {"parametric.d3_um", "auto", "fringe period; auto = d1 d2 / (d1 - d2)"},
        {"parametric.phase_rad", "0", "fringe phase at X = 0"},
        {"parametric.alpha_rad", "0", "fringe rotation on the film"},
        {"analysis.view_width_um", "370", "view width"},
        {"analysis.view_height_um", "294", "view height"},
        {"analysis.alpha_min_rad", "-0.05", "angle search lower bound"},
        {"analysis.alpha_max_rad", "0.05", "angle search upper bound"},
        {"analysis.d3_min_um", "5.7", "period search lower bound"},
        {"analysis.d3_max_um", "6.1", "period search upper bound"},
        {"analysis.min_view_hits", "100", "views with fewer hits are not searched"},
        {"analysis.scatter_bins", "60", "histogram bins of the optimal-parameter scatter"},
        {"analysis.area_width_um", "340", "centred analysis area width"},
        {"analysis.area_height_um", "270", "centred analysis area height"},
        {"analysis.z_bin_um", "0.25", "depth histogram bin"},
        {"analysis.z_window_sigmas", "1", "half width of the depth window in fitted sigmas"},
        {"analysis.bulk_gap_sigmas", "3", "bulk noise is counted beyond this many sigmas"},
        {"analysis.bins_per_period", "30", "fold histogram bins per period"},
        {"analysis.fold_periods", "1", "periods per fold (1 or 3)"},
        {"analysis.band_center_X_mm", "auto", "centre of the X band for the profile fit; auto = film centre"},
        {"analysis.band_width_mm", "1", "width of the X band for the profile fit"},
        {"analysis.min_band_views", "10", "minimum selected views in the band"},
        {"analysis.systematic_fraction", "0.008", "relative systematic error of the period"},
        {"analysis.energy_kev", "14", "energy label of the analysed exposure"},
        {"analysis.resonance_energy_kev", "14", "energy used to normalise contrasts"},
    };
    return keys;
}

class RunConfig {
public:
    RunConfig() {
        for (auto const& k : config_keys()) values_[k.name] = k.default_value;
    }

    static bool known(std::string const& key) {
        for (auto const& k : config_keys())
            if (key == k.name) return true;
        return false;
    }

    void set(std::string const& key, std::string const& value) {
        if (!known(key)) throw ConfigError("unknown configuration key '" + key + "'");
        values_[key] = value;
    }

    std::string const& raw(std::string const& key) const {
        auto const it = values_.find(key);
        if (it == values_.end()) throw ConfigError("unknown configuration key '" + key + "'");
        return it->second;
    }

    bool is_auto(std::string const& key) const { return raw(key) == "auto"; }

    double number(std::string const& key) const {
        std::string const& v = raw(key);
        double d = 0.0;
        auto const r = std::from_chars(v.data(), v.data() + v.size(), d);
        if (r.ec != std::errc() || r.ptr != v.data() + v.size() || !std::isfinite(d))
            throw ConfigError("key '" + key + "' expects a number, got '" + v + "'");
        return d;
    }

    long long integer(std::string const& key) const {
        std::string const& v = raw(key);
        long long i = 0;
        auto const r = std::from_chars(v.data(), v.data() + v.size(), i);
        if (r.ec != std::errc() || r.ptr != v.data() + v.size())
            throw ConfigError("key '" + key + "' expects an integer, got '" + v + "'");
        return i;
    }

    std::uint64_t seed(std::string const& key) const {
        std::string const& v = raw(key);
        std::uint64_t i = 0;
        auto const r = std::from_chars(v.data(), v.data() + v.size(), i);
        if (r.ec != std::errc() || r.ptr != v.data() + v.size())
            throw ConfigError("key '" + key + "' expects a non-negative 64-bit integer, got '" + v + "'");
        return i;
    }

    /// Parses "section.key = value" lines; '#' starts a comment.
    void merge_text(std::string_view text, std::string const& source = "<config>") {
        std::size_t lineno = 0, pos = 0;
        while (pos <= text.size()) {
            std::size_t const nl = text.find('\n', pos);
            std::string line(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
            pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
            ++lineno;
            if (auto const hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            auto const trim = [](std::string s) {
                auto const b = s.find_first_not_of(" \t\r");
                if (b == std::string::npos) return std::string();
                auto const e = s.find_last_not_of(" \t\r");
                return s.substr(b, e - b + 1);
            };
            line = trim(line);
            if (line.empty()) continue;
            auto const eq = line.find('=');
            if (eq == std::string::npos) throw ParseError(source, lineno, "expected 'section.key = value'");
            std::string const key = trim(line.substr(0, eq));
            std::string const value = trim(line.substr(eq + 1));
            if (key.empty() || value.empty()) throw ParseError(source, lineno, "empty key or value");
            if (!known(key)) throw ParseError(source, lineno, "unknown configuration key '" + key + "'");
            values_[key] = value;
        }
    }

    void merge_file(std::string const& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw InputError("cannot open config " + path);
        std::stringstream ss;
        ss << f.rdbuf();
        merge_text(ss.str(), path);
    }

    /// Effective configuration, one key per line in table order; merging it
    /// into a default RunConfig reproduces this one.
    std::string echo() const {
        std::string out = "# effective configuration\n";
        for (auto const& k : config_keys()) {
            out += k.name;
            out += " = ";
            out += values_.at(k.name);
            out += '\n';
        }
        return out;
    }

    bool operator==(RunConfig const& o) const { return values_ == o.values_; }

private:
    std::map<std::string, std::string> values_;
};

// ---------------------------------------------------------------------------
// Builders

inline ParticleState make_particle(RunConfig const& c, double energy_kev) {
    ParticleState p;
    p.kinetic_energy_kev = energy_kev;
    p.rest_energy_kev = c.number("physics.rest_energy_kev");
    p.validate();
    return p;
}

inline ParticleState make_particle(RunConfig const& c) { return make_particle(c, c.number("physics.energy_kev")); }

inline InterferometerGeometry make_geometry(RunConfig const& c) {
    double const d1 = c.number("physics.d1_um"), d2 = c.number("physics.d2_um");
    ParticleState const design = make_particle(c, c.number("physics.design_energy_kev"));
    InterferometerGeometry g = design_geometry(d1, d2, design, 0.5);
    g.grating1.open_fraction = c.number("physics.open_fraction1");
    g.grating2.open_fraction = c.number("physics.open_fraction2");
    g.grating1.lateral_offset_um = c.number("physics.offset1_um");
    g.grating2.lateral_offset_um = c.number("physics.offset2_um");
    if (!c.is_auto("physics.L1_mm")) g.L1_mm = c.number("physics.L1_mm");
    g.L2_mm = c.is_auto("physics.L2_mm") ? g.L1_mm / resonance_ratio(d1, d2) : c.number("physics.L2_mm");
    g.collimator1_diameter_mm = c.number("physics.collimator1_diameter_mm");
    g.collimator2_diameter_mm = c.number("physics.collimator2_diameter_mm");
    g.collimator_spacing_mm = c.number("physics.collimator_spacing_mm");
    g.validate();
    return g;
}

inline BeamModel make_beam(RunConfig const& c) {
    BeamModel b;
    b.particle = make_particle(c);
    b.angular_sigma_rad = c.number("beam.angular_sigma_rad");
    b.coherence_ratio = c.number("beam.coherence_ratio");
    b.spot_fwhm_mm = c.number("beam.spot_fwhm_mm");
    b.validate();
    return b;
}

inline SimConfig make_sim_config(RunConfig const& c, InterferometerGeometry const& g, BeamModel const& beam,
                                 unsigned threads) {
    SimConfig s;
    if (c.is_auto("sim.num_points") != c.is_auto("sim.spacing_um"))
        throw ConfigError("sim.num_points and sim.spacing_um must both be set or both be auto");
    double const guard = c.number("sim.guard_fraction");
    if (c.is_auto("sim.num_points")) {
        s.grid = commensurate_grid(g.grating1.period_um, g.grating2.period_um, c.number("sim.min_window_um"),
                                   c.number("sim.max_spacing_um"), guard);
    } else {
        long long const n = c.integer("sim.num_points");
        if (n <= 0) throw ConfigError("sim.num_points must be positive");
        s.grid = Grid1D{static_cast<std::size_t>(n), c.number("sim.spacing_um"), guard};
    }
    long long const nt = c.integer("sim.num_tilt_samples");
    if (nt <= 0) throw ConfigError("sim.num_tilt_samples must be positive");
    s.num_tilt_samples = static_cast<std::size_t>(nt);
    std::string const& dist = c.raw("beam.tilt_distribution");
    if (dist == "gaussian")
        s.tilt = default_tilt_distribution(g, beam);
    else if (dist == "uniform")
        s.tilt = TiltDistribution::uniform(std::sqrt(3.0) * beam.angular_sigma_rad);
    else
        throw ConfigError("beam.tilt_distribution must be gaussian or uniform");
    std::string const& model = c.raw("sim.model");
    if (model == "quantum")
        s.model = Model::quantum;
    else if (model == "classical")
        s.model = Model::classical;
    else
        throw ConfigError("sim.model must be quantum or classical");
    s.rng_seed = c.seed("sim.seed");
    s.threads = threads;
    return s;
}

inline EmulsionFrame make_frame(RunConfig const& c) {
    EmulsionFrame f;
    f.tilt_angle_rad = c.number("emulsion.tilt_angle_rad");
    f.L2_at_origin_mm = c.number("emulsion.L2_at_origin_mm");
    f.y_sign = static_cast<int>(c.integer("emulsion.y_sign"));
    f.film_origin_X_mm = c.number("emulsion.film_origin_X_mm");
    f.film_origin_Y_mm = c.number("emulsion.film_origin_Y_mm");
    f.film_width_mm = c.number("emulsion.film_width_mm");
    f.film_height_mm = c.number("emulsion.film_height_mm");
    f.thickness_um = c.number("emulsion.thickness_um");
    f.validate();
    return f;
}

inline ExposureConfig make_exposure(RunConfig const& c) {
    ExposureConfig e;
    e.target_grains_per_view = c.number("exposure.target_grains_per_view");
    e.noise_density = c.number("exposure.noise_density_per_1000um3");
    e.implantation_mean_um = c.number("exposure.implantation_mean_um");
    e.implantation_sigma_um = c.number("exposure.implantation_sigma_um");
    e.beam_center_X_mm = c.number("exposure.beam_center_X_mm");
    e.beam_center_Y_mm = c.number("exposure.beam_center_Y_mm");
    e.beam_fwhm_mm = c.number("exposure.beam_fwhm_mm");
    e.rng_seed = c.seed("exposure.seed");
    e.view_width_um = c.number("analysis.view_width_um");
    e.view_height_um = c.number("analysis.view_height_um");
    e.validate(make_frame(c));
    return e;
}

inline ParametricPattern make_parametric(RunConfig const& c) {
    ParametricPattern p;
    p.contrast_peak = c.number("parametric.contrast");
    p.center_L2_mm = c.number("parametric.center_L2_mm");
    p.width_L2_mm = c.number("parametric.width_L2_mm");
    p.baseline = c.number("parametric.baseline");
    p.d3_um = c.is_auto("parametric.d3_um")
                  ? resonant_fringe_period_um(c.number("physics.d1_um"), c.number("physics.d2_um"))
                  : c.number("parametric.d3_um");
    p.phase_rad = c.number("parametric.phase_rad");
    p.alpha_rad = c.number("parametric.alpha_rad");
    p.validate();
    return p;
}

inline AnalysisParams make_analysis_params(RunConfig const& c) {
    AnalysisParams a;
    a.search.view_width_um = c.number("analysis.view_width_um");
    a.search.view_height_um = c.number("analysis.view_height_um");
    a.search.alpha_min_rad = c.number("analysis.alpha_min_rad");
    a.search.alpha_max_rad = c.number("analysis.alpha_max_rad");
    a.search.d3_min_um = c.number("analysis.d3_min_um");
    a.search.d3_max_um = c.number("analysis.d3_max_um");
    long long const mh = c.integer("analysis.min_view_hits");
    long long const sb = c.integer("analysis.scatter_bins");
    long long const bpp = c.integer("analysis.bins_per_period");
    long long const fp = c.integer("analysis.fold_periods");
    long long const mb = c.integer("analysis.min_band_views");
    if (mh < 1 || sb < 5 || bpp < 4 || fp < 1 || mb < 1) throw ConfigError("analysis counts out of range");
    a.search.min_hits = static_cast<std::size_t>(mh);
    a.search.validate();
    a.scatter_bins = static_cast<std::size_t>(sb);
    a.area_width_um = c.number("analysis.area_width_um");
    a.area_height_um = c.number("analysis.area_height_um");
    a.depth.bin_um = c.number("analysis.z_bin_um");
    a.depth.window_sigmas = c.number("analysis.z_window_sigmas");
    a.depth.bulk_gap_sigmas = c.number("analysis.bulk_gap_sigmas");
    a.bins_per_period = static_cast<std::size_t>(bpp);
    a.fold_periods = static_cast<int>(fp);
    a.band_center_X_mm = c.is_auto("analysis.band_center_X_mm") ? std::numeric_limits<double>::quiet_NaN()
                                                                : c.number("analysis.band_center_X_mm");
    a.band_width_mm = c.number("analysis.band_width_mm");
    a.min_band_views = static_cast<std::size_t>(mb);
    a.systematic_fraction = c.number("analysis.systematic_fraction");
    a.energy_kev = c.number("analysis.energy_kev");
    if (!(a.area_width_um > 0.0 && a.area_height_um > 0.0 && a.depth.bin_um > 0.0))
        throw ConfigError("analysis sizes must be positive");
    return a;
}

} // namespace talbot
