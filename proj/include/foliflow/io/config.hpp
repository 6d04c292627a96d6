#pragma once

// RunConfig: every numerical choice of a command-line run in one JSON
// document. Parsing reports the line of the offending key.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "../angle_pde.hpp"
#include "../catalog.hpp"
#include "../errors.hpp"
#include "../foliation.hpp"
#include "../pipelines.hpp"

namespace foliflow::io {

using Json = nlohmann::ordered_json;

struct Tolerances {
    double ode_tol = 1e-8;
    std::optional<double> residual_max{};  // default 10 h^2
    double defect_max = 5e-3;
    double heat_residual_max = 2e-2;
    double cross_max = 1e-2;
    double cross_l2 = 3e-3;
    double min_coverage = 0.8;
    friend bool operator==(const Tolerances&, const Tolerances&) = default;
};

struct ReconstructSettings {
    bool from_pde = true;          // false: exact catalog field
    double dt = 1e-3;              // base-curve step (exact source) / snapshot spacing (pde)
    std::optional<double> ds{};    // leaf step, default h / 2
    friend bool operator==(const ReconstructSettings&, const ReconstructSettings&) = default;
};

struct FlowSettings {
    double spacing = 1e-2;
    double dt = 1e-4;              // outer step; substeps obey the curve CFL bound
    std::size_t cadence = 100;     // outer steps between written snapshots
    friend bool operator==(const FlowSettings&, const FlowSettings&) = default;
};

struct CrossSettings {
    std::size_t leaf_count = 50;
    Vec2 seed_from{0, -1};
    Vec2 seed_to{0, 1};
    std::optional<Window> trace{};  // default: domain
    double leaf_extent = 3.0;
    double leaf_spacing = 1e-2;
    double outer_dt = 1e-3;
    std::optional<Region> compare{};  // default: domain
    friend bool operator==(const CrossSettings&, const CrossSettings&) = default;
};

struct RunConfig {
    Window domain{-1, 1, -1, 1};
    std::size_t nx = 129, ny = 129;
    InitialCondition initial{};
    BoundaryKind boundary = BoundaryKind::dirichlet_exact;
    double t_final = 0.0;
    std::optional<double> dt{};
    std::vector<Vec2> seeds{};
    double s_extent = 1.0;
    std::string output_dir = "out";
    std::optional<std::size_t> snapshot_cadence{};
    Tolerances tolerances{};
    std::optional<Region> residual_region{};  // default: whole grid
    ReconstructSettings reconstruct{};
    FlowSettings flow{};
    CrossSettings cross{};

    double spacing() const { return (domain.xmax - domain.xmin) / static_cast<double>(nx - 1); }
    Grid2D grid() const { return Grid2D({domain.xmin, domain.ymin}, spacing(), nx, ny); }
    BoundaryCondition boundary_condition() const {
        return boundary == BoundaryKind::periodic ? BoundaryCondition::periodic()
                                                  : BoundaryCondition::dirichlet(initial.base);
    }
    double residual_threshold() const {
        const double h = spacing();
        return tolerances.residual_max.value_or(10.0 * h * h);
    }
};

// ---------------------------------------------------------------------------
// Source positions
// ---------------------------------------------------------------------------

namespace detail {

/// Maps JSON pointers ("/grid/nx", "/seeds/2") to 1-based source lines. The
/// text has already been accepted by the JSON parser, so this scanner only
/// needs to follow structure.
class LineIndex {
public:
    explicit LineIndex(const std::string& text) : s_(text) {
        skip();
        value("");
    }
    int line_of(const std::string& pointer) const {
        std::string p = pointer;
        while (true) {
            if (auto it = lines_.find(p); it != lines_.end()) return it->second;
            const auto cut = p.rfind('/');
            if (cut == std::string::npos || p.empty()) return 1;
            p.erase(cut);
        }
    }

private:
    const std::string& s_;
    std::size_t i_ = 0;
    int line_ = 1;
    std::map<std::string, int> lines_;

    void skip() {
        while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) {
            if (s_[i_] == '\n') ++line_;
            ++i_;
        }
    }
    std::string string() {
        std::string out;
        ++i_;  // opening quote
        while (i_ < s_.size() && s_[i_] != '"') {
            if (s_[i_] == '\\') ++i_;
            if (i_ < s_.size()) out += s_[i_++];
        }
        ++i_;
        return out;
    }
    void value(const std::string& path) {
        skip();
        if (!lines_.count(path)) lines_[path] = line_;
        if (i_ >= s_.size()) return;
        const char c = s_[i_];
        if (c == '{') {
            ++i_;
            skip();
            while (i_ < s_.size() && s_[i_] != '}') {
                const int key_line = line_;
                const std::string key = string();
                lines_[path + "/" + key] = key_line;
                skip();
                ++i_;  // ':'
                value(path + "/" + key);
                skip();
                if (i_ < s_.size() && s_[i_] == ',') ++i_;
                skip();
            }
            ++i_;
        } else if (c == '[') {
            ++i_;
            skip();
            std::size_t k = 0;
            while (i_ < s_.size() && s_[i_] != ']') {
                value(path + "/" + std::to_string(k++));
                skip();
                if (i_ < s_.size() && s_[i_] == ',') ++i_;
                skip();
            }
            ++i_;
        } else if (c == '"') {
            string();
        } else {
            while (i_ < s_.size() && !std::strchr(",]} \t\r\n", s_[i_])) ++i_;
        }
    }
};

class Reader {
public:
    Reader(const Json& root, const LineIndex& lines, std::string source)
        : root_(root), lines_(lines), source_(std::move(source)) {}

    [[noreturn]] void fail(const std::string& pointer, const std::string& msg) const {
        throw ConfigError(source_ + ":" + std::to_string(lines_.line_of(pointer)) + ": " +
                          (pointer.empty() ? "/" : pointer) + ": " + msg);
    }

    const Json* find(const std::string& pointer) const {
        const Json::json_pointer p(pointer);
        return root_.contains(p) ? &root_.at(p) : nullptr;
    }
    bool has(const std::string& pointer) const { return find(pointer) != nullptr; }

    const Json& object(const std::string& pointer) const {
        const Json* j = find(pointer);
        if (!j) fail(pointer, "missing required section");
        if (!j->is_object()) fail(pointer, "expected an object");
        return *j;
    }

    double number(const std::string& pointer) const {
        const Json* j = find(pointer);
        if (!j) fail(pointer, "missing required number");
        if (!j->is_number()) fail(pointer, "expected a number");
        const double v = j->get<double>();
        if (!std::isfinite(v)) fail(pointer, "must be finite");
        return v;
    }
    double number(const std::string& pointer, double fallback) const {
        return has(pointer) ? number(pointer) : fallback;
    }
    std::optional<double> optional_number(const std::string& pointer) const {
        const Json* j = find(pointer);
        if (!j || j->is_null()) return std::nullopt;
        return number(pointer);
    }
    double positive(const std::string& pointer, double fallback) const {
        const double v = number(pointer, fallback);
        if (!(v > 0.0)) fail(pointer, "must be positive");
        return v;
    }
    std::size_t count(const std::string& pointer, std::size_t fallback, std::size_t minimum) const {
        const Json* j = find(pointer);
        if (!j) return fallback;
        if (!j->is_number_integer() || j->get<long long>() < static_cast<long long>(minimum))
            fail(pointer, "expected an integer >= " + std::to_string(minimum));
        return static_cast<std::size_t>(j->get<long long>());
    }
    std::string text(const std::string& pointer, const std::string& fallback) const {
        const Json* j = find(pointer);
        if (!j) return fallback;
        if (!j->is_string()) fail(pointer, "expected a string");
        return j->get<std::string>();
    }
    Vec2 point(const std::string& pointer) const {
        const Json* j = find(pointer);
        if (!j) fail(pointer, "missing required point");
        if (!j->is_array() || j->size() != 2 || !(*j)[0].is_number() || !(*j)[1].is_number())
            fail(pointer, "expected a point [x, y]");
        return {(*j)[0].get<double>(), (*j)[1].get<double>()};
    }
    Window window(const std::string& pointer) const {
        object(pointer);
        const Window w{number(pointer + "/xmin"), number(pointer + "/xmax"), number(pointer + "/ymin"),
                       number(pointer + "/ymax")};
        if (!(w.xmax > w.xmin)) fail(pointer + "/xmax", "must exceed xmin");
        if (!(w.ymax > w.ymin)) fail(pointer + "/ymax", "must exceed ymin");
        return w;
    }
    Region region(const std::string& pointer, const Window& fallback_box) const {
        object(pointer);
        Region r{has(pointer + "/window") ? window(pointer + "/window") : fallback_box};
        r.r_min = number(pointer + "/r_min", 0.0);
        if (r.r_min < 0.0) fail(pointer + "/r_min", "must be non-negative");
        if (has(pointer + "/r_max")) {
            r.r_max = number(pointer + "/r_max");
            if (!(r.r_max > r.r_min)) fail(pointer + "/r_max", "must exceed r_min");
        }
        return r;
    }

private:
    const Json& root_;
    const LineIndex& lines_;
    std::string source_;
};

inline CatalogSolution read_solution(const Reader& rd, const std::string& at) {
    rd.object(at);
    const std::string id = rd.text(at + "/id", "");
    if (id.empty()) rd.fail(at + "/id", "missing catalog id");
    SolutionKind kind;
    try {
        kind = solution_kind_from_string(id);
    } catch (const Error&) {
        rd.fail(at + "/id", "unknown catalog id '" + id + "' (constant, linear, polar, grim-reaper)");
    }
    switch (kind) {
        case SolutionKind::constant: return CatalogSolution::constant(rd.number(at + "/c"));
        case SolutionKind::linear:
            return CatalogSolution::linear(rd.number(at + "/a"), rd.number(at + "/b"), rd.number(at + "/c"));
        case SolutionKind::polar: return CatalogSolution::polar(rd.number(at + "/c"));
        case SolutionKind::grim_reaper: {
            const double a = rd.number(at + "/a");
            if (!(a > 0.0)) rd.fail(at + "/a", "grim reaper speed must be positive");
            return CatalogSolution::grim_reaper(a, rd.number(at + "/C", 0.0));
        }
    }
    rd.fail(at, "unsupported solution");
}

inline Json solution_json(const CatalogSolution& s) {
    Json j;
    j["id"] = to_string(s.kind);
    switch (s.kind) {
        case SolutionKind::constant:
        case SolutionKind::polar: j["c"] = s.c; break;
        case SolutionKind::linear:
            j["a"] = s.a;
            j["b"] = s.b;
            j["c"] = s.c;
            break;
        case SolutionKind::grim_reaper:
            j["a"] = s.a;
            j["C"] = s.C;
            break;
    }
    return j;
}

inline Json window_json(const Window& w) {
    return Json{{"xmin", w.xmin}, {"xmax", w.xmax}, {"ymin", w.ymin}, {"ymax", w.ymax}};
}

inline Json region_json(const Region& r) {
    Json j;
    j["window"] = window_json(r.box);
    j["r_min"] = r.r_min;
    if (std::isfinite(r.r_max)) j["r_max"] = r.r_max;
    return j;
}

inline Json point_json(Vec2 p) { return Json::array({p.x, p.y}); }

}  // namespace detail

/// Parses and validates a config document. `source` names it in messages.
inline RunConfig parse_config(const std::string& text, const std::string& source = "config") {
    Json root;
    try {
        root = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        // byte offset -> line
        const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
        const long line = 1 + std::count(text.begin(), text.begin() + static_cast<long>(upto), '\n');
        throw ConfigError(source + ":" + std::to_string(line) + ": malformed JSON: " + e.what());
    }
    if (!root.is_object()) throw ConfigError(source + ":1: top level must be an object");
    const detail::LineIndex lines(text);
    const detail::Reader rd(root, lines, source);

    static const char* known[] = {"domain", "grid", "initial_condition", "boundary", "t_final", "dt",
                                  "seeds", "s_extent", "output_dir", "snapshot_cadence", "tolerances",
                                  "residual_region", "reconstruct", "flow", "cross_validation"};
    for (const auto& [key, value] : root.items()) {
        (void)value;
        if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) ==
            std::end(known))
            rd.fail("/" + key, "unknown key");
    }

    RunConfig c;
    c.domain = rd.window("/domain");
    rd.object("/grid");
    c.nx = rd.count("/grid/nx", 0, 3);
    c.ny = rd.count("/grid/ny", 0, 3);
    if (!rd.has("/grid/nx")) rd.fail("/grid/nx", "missing required integer");
    if (!rd.has("/grid/ny")) rd.fail("/grid/ny", "missing required integer");
    {
        const double hx = (c.domain.xmax - c.domain.xmin) / static_cast<double>(c.nx - 1);
        const double hy = (c.domain.ymax - c.domain.ymin) / static_cast<double>(c.ny - 1);
        if (std::abs(hx - hy) > 1e-9 * hx)
            rd.fail("/grid/ny", "grid must be square: h_x = " + std::to_string(hx) + " but h_y = " +
                                    std::to_string(hy));
    }
    const double h = c.spacing();

    rd.object("/initial_condition");
    c.initial.base = detail::read_solution(rd, "/initial_condition/solution");
    if (rd.has("/initial_condition/perturbation")) {
        const std::string at = "/initial_condition/perturbation";
        rd.object(at);
        Perturbation p;
        p.amplitude = rd.number(at + "/amplitude");
        if (p.amplitude < 0.0) rd.fail(at + "/amplitude", "amplitude must be >= 0");
        try {
            p.bump = bump_kind_from_string(rd.text(at + "/bump", "sin-product"));
        } catch (const ConfigError&) {
            rd.fail(at + "/bump", "unknown bump id (sin-product, cosine-bump)");
        }
        p.support = rd.has(at + "/support") ? rd.window(at + "/support") : c.domain;
        if (p.support.xmin < c.domain.xmin || p.support.xmax > c.domain.xmax ||
            p.support.ymin < c.domain.ymin || p.support.ymax > c.domain.ymax)
            rd.fail(at + "/support", "bump support must lie inside the domain");
        c.initial.perturbation = p;
    }

    const std::string bc = rd.text("/boundary", "dirichlet-exact");
    if (bc == "dirichlet-exact")
        c.boundary = BoundaryKind::dirichlet_exact;
    else if (bc == "periodic")
        c.boundary = BoundaryKind::periodic;
    else
        rd.fail("/boundary", "expected 'dirichlet-exact' or 'periodic'");

    c.t_final = rd.number("/t_final", 0.0);
    if (c.t_final < 0.0) rd.fail("/t_final", "must be >= 0");
    c.dt = rd.optional_number("/dt");
    if (c.dt && !(*c.dt > 0.0)) rd.fail("/dt", "must be positive");
    if (c.dt && *c.dt > max_cfl_fraction * h * h * (1.0 + 1e-12))
        rd.fail("/dt", "violates dt <= 0.25 h^2 = " + std::to_string(max_cfl_fraction * h * h));

    if (rd.has("/seeds")) {
        const Json* s = rd.find("/seeds");
        if (!s->is_array()) rd.fail("/seeds", "expected a list of points");
        for (std::size_t k = 0; k < s->size(); ++k) c.seeds.push_back(rd.point("/seeds/" + std::to_string(k)));
    }
    for (std::size_t k = 0; k < c.seeds.size(); ++k)
        if (!c.domain.contains(c.seeds[k], 2.0 * h - 1e-12 * h))
            rd.fail("/seeds/" + std::to_string(k), "seed must lie inside the domain with a margin of 2h");

    c.s_extent = rd.positive("/s_extent", 1.0);
    c.output_dir = rd.text("/output_dir", "out");
    if (rd.has("/snapshot_cadence")) c.snapshot_cadence = rd.count("/snapshot_cadence", 1, 1);

    if (rd.has("/tolerances")) {
        rd.object("/tolerances");
        auto& t = c.tolerances;
        t.ode_tol = rd.positive("/tolerances/ode_tol", t.ode_tol);
        t.residual_max = rd.optional_number("/tolerances/residual_max");
        if (t.residual_max && *t.residual_max < 0.0) rd.fail("/tolerances/residual_max", "must be >= 0");
        t.defect_max = rd.positive("/tolerances/defect_max", t.defect_max);
        t.heat_residual_max = rd.positive("/tolerances/heat_residual_max", t.heat_residual_max);
        t.cross_max = rd.positive("/tolerances/cross_max", t.cross_max);
        t.cross_l2 = rd.positive("/tolerances/cross_l2", t.cross_l2);
        t.min_coverage = rd.number("/tolerances/min_coverage", t.min_coverage);
        if (t.min_coverage < 0.0 || t.min_coverage > 1.0)
            rd.fail("/tolerances/min_coverage", "must lie in [0, 1]");
    }
    if (rd.has("/residual_region")) c.residual_region = rd.region("/residual_region", c.domain);

    if (rd.has("/reconstruct")) {
        rd.object("/reconstruct");
        const std::string src = rd.text("/reconstruct/source", "pde");
        if (src != "pde" && src != "exact") rd.fail("/reconstruct/source", "expected 'pde' or 'exact'");
        c.reconstruct.from_pde = src == "pde";
        if (!c.reconstruct.from_pde && !c.initial.exact())
            rd.fail("/reconstruct/source", "an exact source needs an unperturbed catalog initial condition");
        c.reconstruct.dt = rd.positive("/reconstruct/dt", c.reconstruct.dt);
        c.reconstruct.ds = rd.optional_number("/reconstruct/ds");
        if (c.reconstruct.ds && !(*c.reconstruct.ds > 0.0)) rd.fail("/reconstruct/ds", "must be positive");
    }
    if (rd.has("/flow")) {
        rd.object("/flow");
        c.flow.spacing = rd.positive("/flow/spacing", c.flow.spacing);
        c.flow.dt = rd.positive("/flow/dt", c.flow.dt);
        c.flow.cadence = rd.count("/flow/cadence", c.flow.cadence, 1);
    }
    if (rd.has("/cross_validation")) {
        const std::string at = "/cross_validation";
        rd.object(at);
        auto& x = c.cross;
        x.leaf_count = rd.count(at + "/leaf_count", x.leaf_count, 2);
        if (rd.has(at + "/seed_from")) x.seed_from = rd.point(at + "/seed_from");
        if (rd.has(at + "/seed_to")) x.seed_to = rd.point(at + "/seed_to");
        if (distance(x.seed_from, x.seed_to) == 0.0) rd.fail(at + "/seed_to", "seed segment is degenerate");
        if (rd.has(at + "/trace_window")) x.trace = rd.window(at + "/trace_window");
        x.leaf_extent = rd.positive(at + "/leaf_extent", x.leaf_extent);
        x.leaf_spacing = rd.positive(at + "/leaf_spacing", x.leaf_spacing);
        x.outer_dt = rd.positive(at + "/outer_dt", x.outer_dt);
        if (rd.has(at + "/compare")) x.compare = rd.region(at + "/compare", c.domain);
    }
    return c;
}

/// Canonical JSON form; parse_config(to_json(c).dump()) reproduces c.
inline Json to_json(const RunConfig& c) {
    Json j;
    j["domain"] = detail::window_json(c.domain);
    j["grid"] = Json{{"nx", c.nx}, {"ny", c.ny}};
    Json ic;
    ic["solution"] = detail::solution_json(c.initial.base);
    if (c.initial.perturbation) {
        const auto& p = *c.initial.perturbation;
        ic["perturbation"] = Json{{"amplitude", p.amplitude},
                                  {"bump", to_string(p.bump)},
                                  {"support", detail::window_json(p.support)}};
    }
    j["initial_condition"] = ic;
    j["boundary"] = c.boundary == BoundaryKind::periodic ? "periodic" : "dirichlet-exact";
    j["t_final"] = c.t_final;
    if (c.dt) j["dt"] = *c.dt;
    j["seeds"] = Json::array();
    for (Vec2 s : c.seeds) j["seeds"].push_back(detail::point_json(s));
    j["s_extent"] = c.s_extent;
    j["output_dir"] = c.output_dir;
    if (c.snapshot_cadence) j["snapshot_cadence"] = *c.snapshot_cadence;
    Json t;
    t["ode_tol"] = c.tolerances.ode_tol;
    if (c.tolerances.residual_max) t["residual_max"] = *c.tolerances.residual_max;
    t["defect_max"] = c.tolerances.defect_max;
    t["heat_residual_max"] = c.tolerances.heat_residual_max;
    t["cross_max"] = c.tolerances.cross_max;
    t["cross_l2"] = c.tolerances.cross_l2;
    t["min_coverage"] = c.tolerances.min_coverage;
    j["tolerances"] = t;
    if (c.residual_region) j["residual_region"] = detail::region_json(*c.residual_region);
    Json r;
    r["source"] = c.reconstruct.from_pde ? "pde" : "exact";
    r["dt"] = c.reconstruct.dt;
    if (c.reconstruct.ds) r["ds"] = *c.reconstruct.ds;
    j["reconstruct"] = r;
    j["flow"] = Json{{"spacing", c.flow.spacing}, {"dt", c.flow.dt}, {"cadence", c.flow.cadence}};
    Json x;
    x["leaf_count"] = c.cross.leaf_count;
    x["seed_from"] = detail::point_json(c.cross.seed_from);
    x["seed_to"] = detail::point_json(c.cross.seed_to);
    if (c.cross.trace) x["trace_window"] = detail::window_json(*c.cross.trace);
    x["leaf_extent"] = c.cross.leaf_extent;
    x["leaf_spacing"] = c.cross.leaf_spacing;
    x["outer_dt"] = c.cross.outer_dt;
    if (c.cross.compare) x["compare"] = detail::region_json(*c.cross.compare);
    j["cross_validation"] = x;
    return j;
}

inline bool operator==(const InitialCondition& a, const InitialCondition& b) {
    auto same_pert = [](const std::optional<Perturbation>& p, const std::optional<Perturbation>& q) {
        if (p.has_value() != q.has_value()) return false;
        return !p || (p->amplitude == q->amplitude && p->bump == q->bump && p->support == q->support);
    };
    const auto& s = a.base;
    const auto& t = b.base;
    return s.kind == t.kind && s.a == t.a && s.b == t.b && s.c == t.c && s.C == t.C &&
           same_pert(a.perturbation, b.perturbation);
}

inline bool operator==(const RunConfig& a, const RunConfig& b) {
    return a.domain == b.domain && a.nx == b.nx && a.ny == b.ny && a.initial == b.initial &&
           a.boundary == b.boundary && a.t_final == b.t_final && a.dt == b.dt && a.seeds == b.seeds &&
           a.s_extent == b.s_extent && a.output_dir == b.output_dir &&
           a.snapshot_cadence == b.snapshot_cadence && a.tolerances == b.tolerances &&
           a.residual_region == b.residual_region && a.reconstruct == b.reconstruct && a.flow == b.flow &&
           a.cross == b.cross;
}

/// Cross-validation setup assembled from a run config.
inline CrossValidationSetup cross_setup(const RunConfig& c) {
    CrossValidationSetup s;
    s.domain = c.domain;
    s.h = c.spacing();
    s.initial = c.initial;
    s.boundary = c.boundary_condition();
    s.t_final = c.t_final;
    s.dt = c.dt;
    s.leaf_count = c.cross.leaf_count;
    s.seed_from = c.cross.seed_from;
    s.seed_to = c.cross.seed_to;
    s.trace = c.cross.trace.value_or(c.domain);
    s.leaf_extent = c.cross.leaf_extent;
    s.leaf_spacing = c.cross.leaf_spacing;
    s.outer_dt = c.cross.outer_dt;
    s.compare = c.cross.compare.value_or(Region{c.domain});
    s.tol_max = c.tolerances.cross_max;
    s.tol_l2 = c.tolerances.cross_l2;
    s.min_coverage = c.tolerances.min_coverage;
    return s;
}

}  // namespace foliflow::io
