#pragma once
//
// Text file formats: patterns and carpets, per-view tables, key-value
// summaries, and energy scans. Numbers are written with fixed formats so
// identical inputs give byte-identical files.
//

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "talbot/analysis.hpp"
#include "talbot/errors.hpp"
#include "talbot/wave.hpp"

namespace talbot {

/// printf-style formatting into a std::string.
template <class... Args>
inline std::string strf(char const* fmt, Args... args) {
    int const n = std::snprintf(nullptr, 0, fmt, args...);
    std::string s(static_cast<std::size_t>(n), '\0');
    std::snprintf(s.data(), s.size() + 1, fmt, args...);
    return s;
}

inline void write_text_file(std::string const& path, std::string const& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot open " + path + " for writing");
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) throw InputError("write failed: " + path);
}

inline std::string read_text_file(std::string const& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------
// Generic CSV with a header row of names

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::size_t column(std::string const& name, std::string const& path) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw ParseError(path, 1, "missing column '" + name + "'");
    }
};

inline std::vector<std::string> split_commas(std::string_view line) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        auto const c = line.find(',', pos);
        out.emplace_back(line.substr(pos, c == std::string_view::npos ? std::string_view::npos : c - pos));
        if (c == std::string_view::npos) break;
        pos = c + 1;
    }
    return out;
}

/// Numeric CSV: first line is the header, every following non-empty line has
/// exactly as many numeric fields.
inline CsvTable read_numeric_csv(std::string const& path) {
    std::string const text = read_text_file(path);
    CsvTable t;
    std::size_t lineno = 0, pos = 0;
    bool header = false;
    while (pos < text.size()) {
        auto const nl = text.find('\n', pos);
        std::string_view line(text.data() + pos, (nl == std::string::npos ? text.size() : nl) - pos);
        pos = nl == std::string::npos ? text.size() : nl + 1;
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!header) {
            t.header = split_commas(line);
            header = true;
            continue;
        }
        if (line.empty()) continue;
        auto const fields = split_commas(line);
        if (fields.size() != t.header.size())
            throw ParseError(path, lineno, "expected " + std::to_string(t.header.size()) + " fields, got " +
                                               std::to_string(fields.size()));
        std::vector<double> row(fields.size());
        for (std::size_t k = 0; k < fields.size(); ++k) {
            auto const& f = fields[k];
            auto const r = std::from_chars(f.data(), f.data() + f.size(), row[k]);
            if (r.ec != std::errc() || r.ptr != f.data() + f.size())
                throw ParseError(path, lineno, "field '" + t.header[k] + "' is not a number");
        }
        t.rows.push_back(std::move(row));
    }
    if (!header) throw ParseError(path, 1, "empty file, missing header");
    return t;
}

// ---------------------------------------------------------------------------
// Patterns and carpets

inline std::string format_pattern(IntensityProfile const& profile) {
    IntensityProfile const p = profile.normalized();
    std::string out = "x_um,intensity\n";
    for (std::size_t i = 0; i < p.intensity.size(); ++i) out += strf("%.6f,%.9f\n", p.x_um(i), p.intensity[i]);
    return out;
}

inline std::string format_carpet(TalbotCarpet const& carpet) {
    std::string out = "z_mm,x_um,intensity\n";
    for (std::size_t j = 0; j < carpet.profiles.size(); ++j) {
        IntensityProfile const p = carpet.profiles[j].normalized();
        for (std::size_t i = 0; i < p.intensity.size(); ++i)
            out += strf("%.6f,%.6f,%.9f\n", carpet.z_values_mm[j], p.x_um(i), p.intensity[i]);
    }
    return out;
}

namespace detail {
inline IntensityProfile profile_from_columns(std::vector<double> const& x, std::vector<double> const& v,
                                             std::string const& path) {
    if (x.size() < 2) throw InputError(path + ": a pattern needs at least two samples");
    IntensityProfile p;
    p.x_start_um = x.front();
    p.spacing_um = (x.back() - x.front()) / static_cast<double>(x.size() - 1);
    if (!(p.spacing_um > 0.0)) throw InputError(path + ": x values must increase");
    for (std::size_t i = 1; i < x.size(); ++i)
        if (std::abs(x[i] - x.front() - p.spacing_um * static_cast<double>(i)) > 1e-3 * p.spacing_um + 2e-6)
            throw InputError(path + ": x values must be uniformly spaced");
    p.intensity = v;
    return p;
}
} // namespace detail

/// Reads either a pattern file (x_um,intensity) or a carpet file
/// (z_mm,x_um,intensity) as a carpet.
inline TalbotCarpet read_carpet(std::string const& path) {
    CsvTable const t = read_numeric_csv(path);
    TalbotCarpet c;
    bool const has_z = std::find(t.header.begin(), t.header.end(), "z_mm") != t.header.end();
    std::size_t const cx = t.column("x_um", path), ci = t.column("intensity", path);
    if (!has_z) {
        std::vector<double> x, v;
        for (auto const& r : t.rows) {
            x.push_back(r[cx]);
            v.push_back(r[ci]);
        }
        c.z_values_mm.push_back(0.0);
        c.profiles.push_back(detail::profile_from_columns(x, v, path));
        return c;
    }
    std::size_t const cz = t.column("z_mm", path);
    std::vector<double> x, v;
    auto flush = [&](double z) {
        if (!c.z_values_mm.empty() && !(z > c.z_values_mm.back()))
            throw InputError(path + ": carpet planes must have increasing z");
        c.z_values_mm.push_back(z);
        auto p = detail::profile_from_columns(x, v, path);
        p.plane_z_mm = z;
        c.profiles.push_back(std::move(p));
        x.clear();
        v.clear();
    };
    for (std::size_t k = 0; k < t.rows.size(); ++k) {
        auto const& r = t.rows[k];
        if (!x.empty() && r[cz] != t.rows[k - 1][cz]) flush(t.rows[k - 1][cz]);
        x.push_back(r[cx]);
        v.push_back(r[ci]);
    }
    if (!x.empty()) flush(t.rows.back()[cz]);
    if (c.profiles.empty()) throw InputError(path + ": no data rows");
    return c;
}

// ---------------------------------------------------------------------------
// Energy scans / model curves

inline std::string format_energy_scan(std::vector<EnergyContrast> const& rows) {
    std::string out = "energy_kev,peak_z_mm,contrast,c_normalized,contrast_fixed_plane,c_fixed_plane_ratio\n";
    for (auto const& r : rows)
        out += strf("%.6f,%.6f,%.9f,%.9f,%.9f,%.9f\n", r.energy_kev, r.peak_z_mm, r.contrast, r.c_normalized,
                    r.contrast_fixed_plane, r.c_fixed_plane_ratio);
    return out;
}

inline ModelCurve read_model_curve(std::string const& path) {
    CsvTable const t = read_numeric_csv(path);
    std::size_t const ce = t.column("energy_kev", path), cn = t.column("c_normalized", path);
    ModelCurve m;
    for (auto const& r : t.rows) {
        m.energy_kev.push_back(r[ce]);
        m.c_normalized.push_back(r[cn]);
    }
    if (m.energy_kev.empty()) throw InputError(path + ": model curve has no rows");
    return m;
}

inline std::string format_contrast_scan(std::vector<ContrastSample> const& rows) {
    std::string out = "z_mm,contrast\n";
    for (auto const& r : rows) out += strf("%.6f,%.9f\n", r.z_mm, r.contrast);
    return out;
}

// ---------------------------------------------------------------------------
// Analysis outputs

inline std::string format_views_csv(ExposureAnalysis const& a) {
    std::string out = "ix,iy,X_center_um,Y_center_um,n_hits,alpha_star_rad,d3_star_um,R_star,selected,contrast,"
                      "contrast_err,phase_rad\n";
    for (auto const& v : a.views) {
        out += strf("%zu,%zu,%.3f,%.3f,%zu,", v.ix, v.iy, v.X_center_um, v.Y_center_um, v.n_hits);
        if (v.searched)
            out += strf("%.8f,%.8f,%.8f,", v.rayleigh.alpha_star_rad, v.rayleigh.d3_star_um, v.rayleigh.R_star);
        else
            out += "nan,nan,nan,";
        out += strf("%d,%.8f,%.8f,%.8f\n", v.selected ? 1 : 0, v.contrast, v.contrast_err, v.phase_rad);
    }
    return out;
}

/// Ordered key-value report.
struct KeyValueReport {
    std::vector<std::pair<std::string, std::string>> entries;

    void add(std::string key, std::string value) { entries.emplace_back(std::move(key), std::move(value)); }
    void add(std::string key, double v, char const* fmt = "%.6f") { add(std::move(key), strf(fmt, v)); }

    std::string text(std::string const& title) const {
        std::string out = "# " + title + "\n";
        for (auto const& [k, v] : entries) out += k + " = " + v + "\n";
        return out;
    }

    bool has(std::string const& key) const {
        for (auto const& e : entries)
            if (e.first == key) return true;
        return false;
    }
    std::string const& get(std::string const& key) const {
        for (auto const& e : entries)
            if (e.first == key) return e.second;
        throw InputError("report has no key '" + key + "'");
    }
    double number(std::string const& key, std::string const& path = "<report>") const {
        std::string const& v = get(key);
        double d = 0.0;
        auto const r = std::from_chars(v.data(), v.data() + v.size(), d);
        if (r.ec != std::errc() || r.ptr != v.data() + v.size())
            throw InputError(path + ": key '" + key + "' is not a number");
        return d;
    }

    static KeyValueReport parse(std::string const& text, std::string const& path) {
        KeyValueReport r;
        std::istringstream in(text);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line[0] == '#') continue;
            auto const eq = line.find(" = ");
            if (eq == std::string::npos) throw ParseError(path, lineno, "expected 'key = value'");
            r.add(line.substr(0, eq), line.substr(eq + 3));
        }
        return r;
    }
    static KeyValueReport read(std::string const& path) { return parse(read_text_file(path), path); }
};

inline KeyValueReport summary_report(ExposureAnalysis const& a) {
    KeyValueReport r;
    std::size_t searched = 0, selected = 0;
    for (auto const& v : a.views) {
        searched += v.searched ? 1 : 0;
        selected += v.selected ? 1 : 0;
    }
    r.add("energy_kev", a.energy_kev, "%.4f");
    r.add("verdict", a.verdict);
    r.add("total_hits", std::to_string(a.total_hits));
    r.add("untiled_hits", std::to_string(a.untiled_hits));
    r.add("views", std::to_string(a.views.size()));
    r.add("views_x", std::to_string(a.nx));
    r.add("views_y", std::to_string(a.ny));
    r.add("views_searched", std::to_string(searched));
    r.add("views_selected", std::to_string(selected));
    r.add("bulk_density_per_1000um3", a.film_bulk_density_per_um3 * 1e3, "%.4f");
    if (!a.selection_note.empty()) r.add("selection_note", a.selection_note);
    if (a.selection) {
        auto const& s = *a.selection;
        r.add("alpha0_rad", s.alpha0_rad, "%.6f");
        r.add("alpha0_err_rad", s.alpha0_err_rad, "%.6f");
        r.add("ellipse_semi_alpha_rad", s.semi_alpha(), "%.6f");
        r.add("ellipse_semi_d3_um", s.semi_d(), "%.6f");
        r.add("ellipse_degenerate", s.degenerate ? "1" : "0");
        r.add("background_alpha_per_bin", s.background_alpha, "%.4f");
        r.add("background_d3_per_bin", s.background_d, "%.4f");
        r.add("d3_measured_um", a.d3_measured_um, "%.5f");
        r.add("d3_stat_um", a.d3_stat_um, "%.5f");
        r.add("d3_syst_um", a.d3_syst_um, "%.5f");
        r.add("mean_z_window_um", a.mean_window_width_um, "%.4f");
    }
    if (!a.profile_note.empty()) r.add("profile_note", a.profile_note);
    if (a.profile) {
        auto const& p = *a.profile;
        r.add("C_max", p.C_max, "%.5f");
        r.add("C_max_err", p.C_max_err, "%.5f");
        r.add("Y0_mm", p.Y0_mm, "%.4f");
        r.add("Y0_err_mm", p.Y0_err_mm, "%.4f");
        r.add("profile_baseline", p.baseline, "%.5f");
        r.add("profile_amplitude", p.amplitude, "%.5f");
        r.add("profile_width_mm", p.width_mm, "%.4f");
        r.add("profile_degenerate", p.degenerate ? "1" : "0");
        r.add("band_center_X_mm", a.band_center_X_mm, "%.4f");
        r.add("L2_peak_mm", a.L2_peak_mm, "%.4f");
        r.add("L2_peak_err_mm", a.L2_peak_err_mm, "%.4f");
    }
    return r;
}

inline std::string format_comparison_csv(Comparison const& c) {
    std::string out = "energy_kev,contrast,contrast_err,c_normalized,c_normalized_err,quantum,classical\n";
    for (auto const& r : c.rows)
        out += strf("%.4f,%.5f,%.5f,%.5f,%.5f,%.5f,%.5f\n", r.energy_kev, r.contrast, r.contrast_err, r.c_normalized,
                    r.c_normalized_err, r.quantum, r.classical);
    return out;
}

} // namespace talbot
