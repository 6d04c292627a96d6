#pragma once

// Standalone SVG plots of angle fields and curve families. Output depends
// only on the input data.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "../errors.hpp"
#include "../field_core.hpp"
#include "csv.hpp"

namespace foliflow::io {

namespace detail {

inline std::string fixed(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6f", v == 0.0 ? 0.0 : v);
    return buf;
}

inline std::string hex_rgb(double r, double g, double b) {
    auto c = [](double v) { return static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); };
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c(r), c(g), c(b));
    return buf;
}

/// HSV with full value; hue in [0, 1).
inline std::string hue_color(double hue, double sat = 0.75) {
    const double h6 = 6.0 * (hue - std::floor(hue));
    const int sector = static_cast<int>(h6) % 6;
    const double f = h6 - std::floor(h6);
    const double p = 1.0 - sat, q = 1.0 - sat * f, t = 1.0 - sat * (1.0 - f);
    switch (sector) {
        case 0: return hex_rgb(1, t, p);
        case 1: return hex_rgb(q, 1, p);
        case 2: return hex_rgb(p, 1, t);
        case 3: return hex_rgb(p, q, 1);
        case 4: return hex_rgb(t, p, 1);
        default: return hex_rgb(1, p, q);
    }
}

/// Line angle in [0, pi) as a hue in [0, 1); theta and theta + pi get the same colour.
inline std::string angle_color(double theta) {
    double a = std::fmod(theta, pi);
    if (a < 0) a += pi;
    return hue_color(a / pi);
}

/// Blue (early) to red (late).
inline std::string time_color(double u) {
    u = std::clamp(u, 0.0, 1.0);
    return hex_rgb(0.1 + 0.8 * u, 0.2, 0.9 - 0.8 * u);
}

struct Box {
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    void add(double x, double y) {
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
    }
    bool empty() const { return !(xmax >= xmin); }
};

// y is negated so that the plot has +y up.
inline std::string header(const Box& b, double pad, int width_px) {
    const double w = std::max(b.xmax - b.xmin + 2 * pad, 1e-12);
    const double h = std::max(b.ymax - b.ymin + 2 * pad, 1e-12);
    const int height_px = std::max(1, static_cast<int>(std::lround(width_px * h / w)));
    return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
           "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
           std::to_string(width_px) + "\" height=\"" + std::to_string(height_px) + "\" viewBox=\"" +
           fixed(b.xmin - pad) + " " + fixed(-b.ymax - pad) + " " + fixed(w) + " " + fixed(h) + "\">\n";
}

}  // namespace detail

struct FieldNode {
    double x, y, theta;
    bool masked;
};

/// One square per node, edge = grid spacing (smallest positive gap between
/// distinct x values). Masked or NaN nodes are gray.
inline std::string render_field_svg(const std::vector<FieldNode>& nodes, int width_px = 800) {
    detail::Box box;
    std::vector<double> xs;
    for (const auto& n : nodes) {
        box.add(n.x, n.y);
        xs.push_back(n.x);
    }
    if (box.empty()) {
        box = {};
        box.add(0, 0);
        box.add(1, 1);
    }
    std::sort(xs.begin(), xs.end());
    double h = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < xs.size(); ++k)
        if (xs[k] - xs[k - 1] > 1e-12) h = std::min(h, xs[k] - xs[k - 1]);
    if (!std::isfinite(h)) h = 1.0;
    std::string out = detail::header(box, h / 2, width_px);
    out += "<g shape-rendering=\"crispEdges\" stroke=\"none\">\n";
    const std::string size = detail::fixed(h);
    for (const auto& n : nodes) {
        const bool gray = n.masked || !std::isfinite(n.theta);
        out += "<rect x=\"" + detail::fixed(n.x - h / 2) + "\" y=\"" + detail::fixed(-n.y - h / 2) +
               "\" width=\"" + size + "\" height=\"" + size + "\" fill=\"" +
               (gray ? std::string("#808080") : detail::angle_color(n.theta)) + "\"/>\n";
    }
    out += "</g>\n</svg>\n";
    return out;
}

struct Polyline {
    std::vector<Vec2> points;
    bool closed = false;
    double time = 0.0;
};

/// Polylines coloured by time. The view box is the data bounding box padded
/// by the stroke width.
inline std::string render_curves_svg(const std::vector<Polyline>& curves, int width_px = 800) {
    detail::Box box;
    double tmin = std::numeric_limits<double>::infinity(), tmax = -tmin;
    for (const auto& c : curves) {
        for (Vec2 p : c.points) box.add(p.x, p.y);
        tmin = std::min(tmin, c.time);
        tmax = std::max(tmax, c.time);
    }
    if (box.empty()) {
        box = {};
        box.add(0, 0);
        box.add(1, 1);
    }
    const double stroke = 0.004 * std::max(box.xmax - box.xmin, box.ymax - box.ymin);
    const double sw = stroke > 0 ? stroke : 0.004;
    std::string out = detail::header(box, sw, width_px);
    out += "<g fill=\"none\" stroke-width=\"" + detail::fixed(sw) +
           "\" stroke-linejoin=\"round\" stroke-linecap=\"round\">\n";
    for (const auto& c : curves) {
        if (c.points.empty()) continue;
        const double u = tmax > tmin ? (c.time - tmin) / (tmax - tmin) : 0.0;
        out += "<path stroke=\"" + detail::time_color(u) + "\" d=\"";
        for (std::size_t k = 0; k < c.points.size(); ++k) {
            out += k ? " L" : "M";
            out += detail::fixed(c.points[k].x) + " " + detail::fixed(-c.points[k].y);
        }
        if (c.closed) out += " Z";
        out += "\"/>\n";
    }
    out += "</g>\n</svg>\n";
    return out;
}

/// Field nodes from a CSV with x, y and an angle column; an optional
/// "covered" column (0/1) masks nodes.
inline std::vector<FieldNode> field_from_csv(const CsvTable& t, const std::string& column,
                                             const std::string& source) {
    const long ix = t.column("x"), iy = t.column("y"), ia = t.column(column), im = t.column("covered");
    if (ix < 0 || iy < 0) throw ConfigError(source + ":1: field input needs x and y columns");
    if (ia < 0) throw ConfigError(source + ":1: no column named '" + column + "'");
    std::vector<FieldNode> nodes;
    nodes.reserve(t.rows.size());
    for (const auto& r : t.rows)
        nodes.push_back({r[ix], r[iy], r[ia], im >= 0 && r[im] == 0.0});
    return nodes;
}

/// Polylines from a CSV with x, y columns. Consecutive rows sharing the
/// values of the grouping columns (t, label, seed; whichever exist) form one
/// polyline; a "closed" column marks closed curves.
inline std::vector<Polyline> curves_from_csv(const CsvTable& t, const std::string& source) {
    const long ix = t.column("x"), iy = t.column("y"), it = t.column("t"), ic = t.column("closed");
    if (ix < 0 || iy < 0) throw ConfigError(source + ":1: curve input needs x and y columns");
    std::vector<long> group;
    for (const char* g : {"t", "label", "seed"})
        if (t.column(g) >= 0) group.push_back(t.column(g));
    std::vector<Polyline> out;
    const std::vector<double>* prev = nullptr;
    for (const auto& r : t.rows) {
        bool same = prev != nullptr;
        for (long g : group) same = same && (*prev)[g] == r[g];
        if (!same) out.push_back({{}, ic >= 0 && r[ic] != 0.0, it >= 0 ? r[it] : 0.0});
        out.back().points.push_back({r[ix], r[iy]});
        prev = &r;
    }
    return out;
}

}  // namespace foliflow::io
