#pragma once
//
// Minimal static SVG plots: linear axes with ticks, points, polylines, error
// bars, ellipses and colour-mapped cells. Output is deterministic text.
//

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "talbot/io.hpp"

namespace talbot::svg {

inline std::string escape(std::string const& s) {
    std::string o;
    for (char c : s) {
        switch (c) {
        case '&': o += "&amp;"; break;
        case '<': o += "&lt;"; break;
        case '>': o += "&gt;"; break;
        case '"': o += "&quot;"; break;
        default: o += c;
        }
    }
    return o;
}

/// Perceptually ordered colour ramp (dark blue -> teal -> yellow), t in [0, 1].
inline std::string colormap(double t) {
    t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0);
    static double const stops[5][3] = {
        {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
    double const s = t * 4.0;
    int const i = std::min(3, static_cast<int>(s));
    double const f = s - i;
    int rgb[3];
    for (int k = 0; k < 3; ++k) rgb[k] = static_cast<int>(std::lround(stops[i][k] + f * (stops[i + 1][k] - stops[i][k])));
    return strf("#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
}

inline double nice_step(double range, int target) {
    double const raw = range / std::max(target, 1);
    double const mag = std::pow(10.0, std::floor(std::log10(raw)));
    double const f = raw / mag;
    double const nice = f < 1.5 ? 1.0 : f < 3.0 ? 2.0 : f < 7.0 ? 5.0 : 10.0;
    return nice * mag;
}

class Plot {
public:
    Plot(double x0, double x1, double y0, double y1, std::string title, std::string xlabel, std::string ylabel,
         int width = 640, int height = 480)
        : x0_(x0), x1_(x1), y0_(y0), y1_(y1), w_(width), h_(height) {
        if (!(x1_ > x0_)) { x0_ -= 0.5; x1_ += 0.5; }
        if (!(y1_ > y0_)) { y0_ -= 0.5; y1_ += 0.5; }
        body_ += strf("<text x=\"%d\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">%s</text>\n", w_ / 2,
                      escape(title).c_str());
        body_ += strf("<text x=\"%d\" y=\"%d\" text-anchor=\"middle\" font-size=\"13\">%s</text>\n", w_ / 2, h_ - 8,
                      escape(xlabel).c_str());
        body_ += strf("<text x=\"16\" y=\"%d\" text-anchor=\"middle\" font-size=\"13\" "
                      "transform=\"rotate(-90 16 %d)\">%s</text>\n",
                      h_ / 2, h_ / 2, escape(ylabel).c_str());
    }

    double px(double x) const { return left_ + (x - x0_) / (x1_ - x0_) * (w_ - left_ - right_); }
    double py(double y) const { return h_ - bottom_ - (y - y0_) / (y1_ - y0_) * (h_ - top_ - bottom_); }

    void point(double x, double y, double r = 2.5, std::string const& color = "#1f4e9c") {
        if (!std::isfinite(x) || !std::isfinite(y)) return;
        marks_ += strf("<circle cx=\"%.2f\" cy=\"%.2f\" r=\"%.2f\" fill=\"%s\"/>\n", px(x), py(y), r, color.c_str());
        ++count_;
    }
    void error_bar(double x, double y, double err, std::string const& color = "#1f4e9c") {
        if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(err)) return;
        marks_ += strf("<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"%s\"/>\n", px(x), py(y - err),
                       px(x), py(y + err), color.c_str());
        ++count_;
    }
    void polyline(std::vector<double> const& xs, std::vector<double> const& ys, std::string const& color = "#c0392b",
                  bool dashed = false) {
        std::string pts;
        for (std::size_t i = 0; i < xs.size() && i < ys.size(); ++i)
            if (std::isfinite(xs[i]) && std::isfinite(ys[i])) pts += strf("%.2f,%.2f ", px(xs[i]), py(ys[i]));
        if (pts.empty()) return;
        marks_ += strf("<polyline points=\"%s\" fill=\"none\" stroke=\"%s\" stroke-width=\"1.5\"%s/>\n", pts.c_str(),
                       color.c_str(), dashed ? " stroke-dasharray=\"5,4\"" : "");
        ++count_;
    }
    void ellipse(double cx, double cy, double rx, double ry, std::string const& color = "#000000") {
        double const sx = std::abs(px(cx + rx) - px(cx)), sy = std::abs(py(cy + ry) - py(cy));
        marks_ += strf("<ellipse cx=\"%.2f\" cy=\"%.2f\" rx=\"%.2f\" ry=\"%.2f\" fill=\"none\" stroke=\"%s\" "
                       "stroke-width=\"2\"/>\n",
                       px(cx), py(cy), sx, sy, color.c_str());
        ++count_;
    }
    void cell(double x0, double y0, double x1, double y1, std::string const& color) {
        double const a = px(x0), b = px(x1), c = py(y1), d = py(y0);
        marks_ += strf("<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" fill=\"%s\"/>\n", std::min(a, b),
                       std::min(c, d), std::abs(b - a), std::abs(d - c), color.c_str());
        ++count_;
    }
    void vline(double x, std::string const& color = "#555555") {
        marks_ += strf("<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"%s\" "
                       "stroke-dasharray=\"4,3\"/>\n",
                       px(x), py(y0_), px(x), py(y1_), color.c_str());
        ++count_;
    }
    void legend(std::string const& text, std::string const& color, int row) {
        double const x = w_ - right_ - 170, y = top_ + 16 + 16 * row;
        body_ += strf("<rect x=\"%.1f\" y=\"%.1f\" width=\"10\" height=\"10\" fill=\"%s\"/>\n", x, y - 9,
                      color.c_str());
        body_ += strf("<text x=\"%.1f\" y=\"%.1f\" font-size=\"12\">%s</text>\n", x + 14, y, escape(text).c_str());
    }
    void color_bar(double lo, double hi, std::string const& label) {
        double const x = w_ - right_ + 12, top = top_, bot = h_ - bottom_;
        for (int i = 0; i < 50; ++i) {
            double const y = bot - (bot - top) * (i + 1) / 50.0;
            body_ += strf("<rect x=\"%.1f\" y=\"%.2f\" width=\"14\" height=\"%.2f\" fill=\"%s\"/>\n", x, y,
                          (bot - top) / 50.0 + 0.5, colormap((i + 0.5) / 50.0).c_str());
        }
        body_ += strf("<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\">%.3g</text>\n", x, bot + 14, lo);
        body_ += strf("<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\">%.3g</text>\n", x, top - 4, hi);
        body_ += strf("<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\">%s</text>\n", x - 4, top - 16,
                      escape(label).c_str());
    }
    void set_right_margin(int m) { right_ = m; }

    std::size_t element_count() const { return count_; }

    std::string str() const {
        std::string out = strf("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
                               "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
                               "viewBox=\"0 0 %d %d\" font-family=\"sans-serif\">\n",
                               w_, h_, w_, h_);
        out += strf("<rect x=\"0\" y=\"0\" width=\"%d\" height=\"%d\" fill=\"#ffffff\"/>\n", w_, h_);
        out += strf("<clipPath id=\"plotarea\"><rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\"/></clipPath>\n",
                    left_, top_, w_ - left_ - right_, h_ - top_ - bottom_);
        out += "<g clip-path=\"url(#plotarea)\">\n" + marks_ + "</g>\n";
        out += axes();
        out += body_;
        out += "</svg>\n";
        return out;
    }

    void save(std::string const& path) const { write_text_file(path, str()); }

private:
    std::string axes() const {
        std::string a = strf("<rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" fill=\"none\" stroke=\"#000\"/>\n",
                             left_, top_, w_ - left_ - right_, h_ - top_ - bottom_);
        double const sx = nice_step(x1_ - x0_, 6), sy = nice_step(y1_ - y0_, 6);
        for (double t = std::ceil(x0_ / sx) * sx; t <= x1_ + 1e-9 * sx; t += sx) {
            double const v = std::abs(t) < 1e-12 * sx ? 0.0 : t;
            a += strf("<line x1=\"%.2f\" y1=\"%d\" x2=\"%.2f\" y2=\"%d\" stroke=\"#000\"/>\n", px(v), h_ - bottom_,
                      px(v), h_ - bottom_ + 5);
            a += strf("<text x=\"%.2f\" y=\"%d\" text-anchor=\"middle\" font-size=\"11\">%.4g</text>\n", px(v),
                      h_ - bottom_ + 18, v);
        }
        for (double t = std::ceil(y0_ / sy) * sy; t <= y1_ + 1e-9 * sy; t += sy) {
            double const v = std::abs(t) < 1e-12 * sy ? 0.0 : t;
            a += strf("<line x1=\"%d\" y1=\"%.2f\" x2=\"%d\" y2=\"%.2f\" stroke=\"#000\"/>\n", left_ - 5, py(v), left_,
                      py(v));
            a += strf("<text x=\"%d\" y=\"%.2f\" text-anchor=\"end\" font-size=\"11\">%.4g</text>\n", left_ - 8,
                      py(v) + 4, v);
        }
        return a;
    }

    double x0_, x1_, y0_, y1_;
    int w_, h_;
    int left_ = 70, right_ = 20, top_ = 32, bottom_ = 48;
    std::string body_;
    std::string marks_;
    std::size_t count_ = 0;
};

} // namespace talbot::svg
