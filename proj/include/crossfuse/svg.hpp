#pragma once

// Minimal byte-stable SVG plotting: fixed canvas, fixed-precision
// coordinates, no timestamps or random ids, so golden-file comparisons
// and cross-run byte equality hold.

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "errors.hpp"

namespace crossfuse::svg {

inline std::string num(double v) {
    if (!std::isfinite(v)) throw RangeViolation("non-finite coordinate in SVG output");
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

struct Series {
    std::string label;
    std::string color = "#1f77b4";
    bool points_only = false;  // scatter instead of polyline
    std::vector<double> x, y;
};

class Plot {
public:
    Plot(std::string title, std::string x_label, std::string y_label)
        : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

    void set_range(double x_lo, double x_hi, double y_lo, double y_hi) {
        x_lo_ = x_lo;
        x_hi_ = x_hi;
        y_lo_ = y_lo;
        y_hi_ = y_hi;
        fixed_range_ = true;
    }

    void add(Series s) {
        if (s.x.size() != s.y.size()) throw LengthMismatch("series x/y differ in length");
        series_.push_back(std::move(s));
    }

    // y = x reference line across the plotted range
    void add_diagonal() { diagonal_ = true; }

    std::string render() const {
        double x_lo = x_lo_, x_hi = x_hi_, y_lo = y_lo_, y_hi = y_hi_;
        if (!fixed_range_) {
            bool any = false;
            for (const auto& s : series_)
                for (std::size_t i = 0; i < s.x.size(); ++i) {
                    if (!any) {
                        x_lo = x_hi = s.x[i];
                        y_lo = y_hi = s.y[i];
                        any = true;
                    }
                    x_lo = std::min(x_lo, s.x[i]);
                    x_hi = std::max(x_hi, s.x[i]);
                    y_lo = std::min(y_lo, s.y[i]);
                    y_hi = std::max(y_hi, s.y[i]);
                }
            if (!any) {
                x_lo = y_lo = 0;
                x_hi = y_hi = 1;
            }
            if (x_lo == x_hi) {
                x_lo -= 0.5;
                x_hi += 0.5;
            }
            if (y_lo == y_hi) {
                y_lo -= 0.5;
                y_hi += 0.5;
            }
        }
        const double W = 640, H = 480, ml = 70, mr = 20, mt = 40, mb = 50;
        auto px = [&](double x) { return ml + (x - x_lo) / (x_hi - x_lo) * (W - ml - mr); };
        auto py = [&](double y) { return H - mb - (y - y_lo) / (y_hi - y_lo) * (H - mt - mb); };

        std::string out;
        out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" "
               "viewBox=\"0 0 640 480\">\n";
        out += "<rect width=\"640\" height=\"480\" fill=\"white\"/>\n";
        out += "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" + title_ +
               "</text>\n";
        // axes
        out += "<line x1=\"" + num(ml) + "\" y1=\"" + num(H - mb) + "\" x2=\"" + num(W - mr) +
               "\" y2=\"" + num(H - mb) + "\" stroke=\"black\"/>\n";
        out += "<line x1=\"" + num(ml) + "\" y1=\"" + num(mt) + "\" x2=\"" + num(ml) + "\" y2=\"" +
               num(H - mb) + "\" stroke=\"black\"/>\n";
        // ticks: 5 per axis with labels
        for (int t = 0; t <= 4; ++t) {
            double fx = x_lo + (x_hi - x_lo) * t / 4.0;
            double fy = y_lo + (y_hi - y_lo) * t / 4.0;
            out += "<line x1=\"" + num(px(fx)) + "\" y1=\"" + num(H - mb) + "\" x2=\"" +
                   num(px(fx)) + "\" y2=\"" + num(H - mb + 5) + "\" stroke=\"black\"/>\n";
            out += "<text x=\"" + num(px(fx)) + "\" y=\"" + num(H - mb + 20) +
                   "\" text-anchor=\"middle\" font-size=\"11\">" + fmt_tick(fx) + "</text>\n";
            out += "<line x1=\"" + num(ml - 5) + "\" y1=\"" + num(py(fy)) + "\" x2=\"" + num(ml) +
                   "\" y2=\"" + num(py(fy)) + "\" stroke=\"black\"/>\n";
            out += "<text x=\"" + num(ml - 8) + "\" y=\"" + num(py(fy) + 4) +
                   "\" text-anchor=\"end\" font-size=\"11\">" + fmt_tick(fy) + "</text>\n";
        }
        out += "<text x=\"" + num((ml + W - mr) / 2) + "\" y=\"" + num(H - 12) +
               "\" text-anchor=\"middle\" font-size=\"13\">" + x_label_ + "</text>\n";
        out += "<text x=\"16\" y=\"" + num((mt + H - mb) / 2) +
               "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 " +
               num((mt + H - mb) / 2) + ")\">" + y_label_ + "</text>\n";
        if (diagonal_) {
            double lo = std::max(x_lo, y_lo), hi = std::min(x_hi, y_hi);
            if (lo < hi)
                out += "<line x1=\"" + num(px(lo)) + "\" y1=\"" + num(py(lo)) + "\" x2=\"" +
                       num(px(hi)) + "\" y2=\"" + num(py(hi)) +
                       "\" stroke=\"#999999\" stroke-dasharray=\"4 3\"/>\n";
        }
        double legend_y = mt + 10;
        for (const auto& s : series_) {
            if (s.points_only) {
                for (std::size_t i = 0; i < s.x.size(); ++i)
                    out += "<circle cx=\"" + num(px(s.x[i])) + "\" cy=\"" + num(py(s.y[i])) +
                           "\" r=\"3\" fill=\"" + s.color + "\"/>\n";
            } else if (!s.x.empty()) {
                out += "<polyline fill=\"none\" stroke=\"" + s.color + "\" points=\"";
                for (std::size_t i = 0; i < s.x.size(); ++i) {
                    if (i) out += ' ';
                    out += num(px(s.x[i])) + "," + num(py(s.y[i]));
                }
                out += "\"/>\n";
            }
            if (!s.label.empty()) {
                out += "<rect x=\"" + num(W - mr - 150) + "\" y=\"" + num(legend_y - 8) +
                       "\" width=\"10\" height=\"10\" fill=\"" + s.color + "\"/>\n";
                out += "<text x=\"" + num(W - mr - 136) + "\" y=\"" + num(legend_y + 1) +
                       "\" font-size=\"11\">" + s.label + "</text>\n";
                legend_y += 16;
            }
        }
        out += "</svg>\n";
        return out;
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error("cannot write " + path);
        out << render();
    }

private:
    static std::string fmt_tick(double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3g", v);
        return buf;
    }

    std::string title_, x_label_, y_label_;
    std::vector<Series> series_;
    bool diagonal_ = false;
    bool fixed_range_ = false;
    double x_lo_ = 0, x_hi_ = 1, y_lo_ = 0, y_hi_ = 1;
};

}  // namespace crossfuse::svg
