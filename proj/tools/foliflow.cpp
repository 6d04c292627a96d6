// foliflow: command-line front end.
//
//   foliflow residual       --config run.json [--out DIR]
//   foliflow solve-pde      --config run.json
//   foliflow reconstruct    --config run.json [--seed x,y ...]
//   foliflow flow-curves    --config run.json [--seed x,y ...]
//   foliflow cross-validate --config run.json
//   foliflow plot FILE.csv ... [--out DIR] [--column NAME] [--combine NAME]
//
// Exit codes: 0 pass, 1 fail, 2 inconclusive, 3 usage/config error,
// 4 numerical abort.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "foliflow/angle_pde.hpp"
#include "foliflow/catalog.hpp"
#include "foliflow/csf.hpp"
#include "foliflow/foliation.hpp"
#include "foliflow/io/config.hpp"
#include "foliflow/io/csv.hpp"
#include "foliflow/io/svg.hpp"
#include "foliflow/parallel.hpp"
#include "foliflow/pipelines.hpp"

namespace fs = std::filesystem;
using namespace foliflow;
using io::Json;

namespace {

enum Exit { exit_pass = 0, exit_fail = 1, exit_inconclusive = 2, exit_usage = 3, exit_abort = 4 };

struct Common {
    std::string config;
    std::string out;
    std::vector<std::string> seeds;
    bool quiet = false;
};

struct Run {
    io::RunConfig cfg;
    fs::path out;
    bool quiet;
    std::vector<std::string> written;

    void log(const std::string& msg) const {
        if (!quiet) std::cerr << msg << '\n';
    }
    void save(const std::string& name, const std::string& content) {
        io::write_atomic(out / name, content);
        written.push_back(name);
    }
    void save_json(const std::string& name, const Json& j) { save(name, j.dump(2) + "\n"); }
};

std::string numbered(const char* stem, std::size_t k, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%04zu%s", stem, k, ext);
    return buf;
}

Vec2 parse_seed(const std::string& s) {
    const auto comma = s.find(',');
    try {
        if (comma == std::string::npos) throw std::invalid_argument("");
        std::size_t used = 0;
        const std::string xs = s.substr(0, comma), ys = s.substr(comma + 1);
        const double x = std::stod(xs, &used);
        if (used != xs.size()) throw std::invalid_argument("");
        const double y = std::stod(ys, &used);
        if (used != ys.size()) throw std::invalid_argument("");
        return {x, y};
    } catch (const std::logic_error&) {
        throw ConfigError("--seed '" + s + "': expected \"x,y\"");
    }
}

Run load(const Common& c) {
    Run r{io::parse_config(io::read_file(c.config), c.config), {}, c.quiet, {}};
    if (!c.seeds.empty()) {
        r.cfg.seeds.clear();
        const double h = r.cfg.spacing();
        for (const auto& s : c.seeds) {
            const Vec2 p = parse_seed(s);
            if (!r.cfg.domain.contains(p, 2.0 * h - 1e-12 * h))
                throw ConfigError("--seed '" + s + "': seed must lie inside the domain with a margin of 2h");
            r.cfg.seeds.push_back(p);
        }
    }
    r.out = c.out.empty() ? fs::path(r.cfg.output_dir) : fs::path(c.out);
    return r;
}

std::string utc_now() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Timestamps live only here.
void write_manifest(Run& r, const std::string& command, const Json& details) {
    Json m;
    m["tool"] = "foliflow";
    m["command"] = command;
    m["created"] = utc_now();
    m["workers"] = worker_count();
    m["config"] = io::to_json(r.cfg);
    m["run"] = details;
    m["outputs"] = r.written;
    io::write_atomic(r.out / "manifest.json", m.dump(2) + "\n");
}

io::CsvWriter field_csv(const AngleField& f) {
    io::CsvWriter w({"x", "y", "theta"});
    const auto& g = f.grid();
    for (std::size_t j = 0; j < g.ny(); ++j)
        for (std::size_t i = 0; i < g.nx(); ++i) {
            const Vec2 p = g.node(i, j);
            w.row(p.x, p.y, io::CsvWriter::Angle{f(i, j)});
        }
    return w;
}

io::CsvWriter family_csv(const CurveFamily& fam) {
    io::CsvWriter w({"t", "label", "index", "x", "y", "closed"});
    for (std::size_t l = 0; l < fam.leaves.size(); ++l) {
        const Curve& c = fam.leaves[l].curve;
        for (std::size_t k = 0; k < c.size(); ++k)
            w.row(fam.time, fam.labels[l], k, c[k].x, c[k].y, c.closed() ? 1 : 0);
    }
    return w;
}

// Nodes whose stencil would touch the polar singularity are never evaluated.
bool away_from_singularity(const io::RunConfig& cfg, Vec2 p) {
    return cfg.initial.base.kind != SolutionKind::polar || norm(p) > 2.0 * cfg.spacing();
}

const char* status_word(bool ok) { return ok ? "pass" : "fail"; }

// ---------------------------------------------------------------------------

int cmd_residual(Run& r) {
    const auto& cfg = r.cfg;
    const AngleField f = cfg.initial.sample(cfg.grid());
    const auto topo = cfg.boundary_condition().topology();
    const auto rep = stationary_residual(
        f,
        [&](Vec2 p) {
            return away_from_singularity(cfg, p) && (!cfg.residual_region || cfg.residual_region->contains(p));
        },
        topo);
    io::CsvWriter w({"x", "y", "residual"});
    const auto& g = f.grid();
    for (std::size_t j = 0; j < g.ny(); ++j)
        for (std::size_t i = 0; i < g.nx(); ++i)
            if (rep.used[g.index(i, j)]) {
                const Vec2 p = g.node(i, j);
                w.row(p.x, p.y, rep.values[g.index(i, j)]);
            }
    if (rep.count == 0) throw ConfigError("residual region contains no evaluable nodes");
    r.save("residual.csv", w.str());
    const double threshold = cfg.residual_threshold();
    const bool ok = rep.max <= threshold;
    Json s;
    s["max"] = rep.max;
    s["l2"] = rep.l2;
    s["nodes"] = rep.count;
    s["threshold"] = threshold;
    s["status"] = status_word(ok);
    r.save_json("summary.json", s);
    write_manifest(r, "residual", s);
    r.log("residual: max " + io::format_number(rep.max) + " over " + std::to_string(rep.count) +
          " nodes (threshold " + io::format_number(threshold) + ")");
    return ok ? exit_pass : exit_fail;
}

EvolveResult solve(const Run& r, std::optional<std::size_t> cadence) {
    const auto& cfg = r.cfg;
    if (!(cfg.t_final > 0.0)) throw ConfigError("t_final must be positive for time-dependent commands");
    auto state = make_state(cfg.initial.sample(cfg.grid()), cfg.boundary_condition(), cfg.dt);
    r.log("angle PDE: h = " + io::format_number(cfg.spacing()) + ", dt = " + io::format_number(state.dt) +
          ", CFL = " + io::format_number(state.cfl_number()));
    return evolve(std::move(state), cfg.t_final, cadence);
}

int cmd_solve_pde(Run& r) {
    const auto res = solve(r, r.cfg.snapshot_cadence);
    Json snaps = Json::array();
    for (std::size_t k = 0; k < res.snapshots.size(); ++k) {
        const std::string name = numbered("snapshot", k, ".csv");
        r.save(name, field_csv(res.snapshots[k]).str());
        snaps.push_back(Json{{"file", name}, {"time", res.snapshots[k].time()}});
    }
    Json d;
    d["steps"] = res.state.step_count;
    d["dt"] = res.state.dt;
    d["cfl"] = res.state.cfl_number();
    d["cfl_limit"] = max_cfl_fraction;
    d["cadence"] = res.cadence;
    d["snapshots"] = snaps;
    write_manifest(r, "solve-pde", d);
    r.log("solve-pde: " + std::to_string(res.state.step_count) + " steps, " +
          std::to_string(res.snapshots.size()) + " snapshots");
    return exit_pass;
}

template <class Source>
Json reconstruct_seed(Run& r, std::size_t k, const Source& src, const SheetOptions& opt) {
    const FoliationSheet sheet = build_sheet(src, r.cfg.seeds[k], opt);
    if (sheet.leaves.size() < 3)
        throw ConfigError("base curve left the domain before three time samples");
    const SheetDiagnostics d = sheet_diagnostics(sheet, src);

    io::CsvWriter leaves({"t", "s", "x", "y"});
    for (const auto& leaf : sheet.leaves)
        for (long s = leaf.first; s <= leaf.last(); ++s)
            leaves.row(leaf.time, static_cast<double>(s) * leaf.ds, leaf.at(s).x, leaf.at(s).y);
    io::CsvWriter base({"t", "x", "y"});
    for (std::size_t m = 0; m < sheet.base.times.size(); ++m)
        base.row(sheet.base.times[m], sheet.base.points[m].x, sheet.base.points[m].y);
    io::CsvWriter diag({"t", "s", "D", "eq42_residual"});
    for (const auto& smp : d.samples) diag.row(smp.t, smp.s, smp.defect, smp.heat_residual);

    char stem[32];
    std::snprintf(stem, sizeof stem, "sheet_%02zu", k);
    r.save(std::string(stem) + "_leaves.csv", leaves.str());
    r.save(std::string(stem) + "_base.csv", base.str());
    r.save(std::string(stem) + "_diagnostics.csv", diag.str());

    double tangency = 0.0;
    for (const auto& leaf : sheet.leaves) tangency = std::max(tangency, leaf.max_tangency_error);
    const double ode_err = leaf_richardson_error(src, opt.t0, r.cfg.seeds[k], opt.s_extent, opt.ds);
    Json j;
    j["seed"] = Json::array({r.cfg.seeds[k].x, r.cfg.seeds[k].y});
    j["time_samples"] = sheet.leaves.size();
    j["t_reached"] = sheet.base.times.back();
    j["truncated"] = sheet.truncated();
    j["max_defect"] = d.max_defect;
    j["max_base_defect"] = d.max_base_defect;
    j["max_eq42_residual"] = d.max_heat_residual;
    j["max_tangency_error"] = tangency;
    j["leaf_ode_error_estimate"] = ode_err;
    j["ode_tol_met"] = ode_err <= r.cfg.tolerances.ode_tol;
    j["status"] = status_word(d.max_defect <= r.cfg.tolerances.defect_max);
    return j;
}

int cmd_reconstruct(Run& r) {
    const auto& cfg = r.cfg;
    if (cfg.seeds.empty()) throw ConfigError("reconstruct needs at least one seed");
    if (!(cfg.t_final > 0.0)) throw ConfigError("t_final must be positive for reconstruct");
    const double h = cfg.spacing();
    SheetOptions opt;
    opt.s_extent = cfg.s_extent;
    opt.ds = cfg.reconstruct.ds.value_or(h / 2.0);
    opt.t_max = cfg.t_final;
    Json per_seed = Json::array();
    bool ok = true;
    auto run_all = [&](const auto& src) {
        for (std::size_t k = 0; k < cfg.seeds.size(); ++k) {
            try {
                per_seed.push_back(reconstruct_seed(r, k, src, opt));
            } catch (const NumericalAbort& e) {
                throw NumericalAbort("seed " + std::to_string(k) + ": " + e.what());
            } catch (const Error& e) {
                throw ConfigError("seed " + std::to_string(k) + ": " + e.what());
            }
            ok = ok && per_seed.back()["status"] == "pass";
        }
    };
    Json d;
    if (cfg.reconstruct.from_pde) {
        const double dt_pde = cfg.dt.value_or(default_cfl_fraction * h * h);
        const auto cadence = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(cfg.reconstruct.dt / dt_pde)));
        const auto res = solve(r, cadence);
        opt.dt = static_cast<double>(cadence) * res.state.dt;
        d["source"] = "pde";
        d["pde_steps"] = res.state.step_count;
        d["snapshot_spacing"] = opt.dt;
        run_all(GridSeries(res.snapshots, 2.0, cfg.boundary_condition().topology()));
    } else {
        opt.dt = cfg.reconstruct.dt;
        d["source"] = "exact";
        run_all(ExactSource{cfg.initial.base, cfg.domain});
    }
    d["ds"] = opt.ds;
    d["dt"] = opt.dt;
    d["defect_max"] = cfg.tolerances.defect_max;
    d["sheets"] = per_seed;
    d["status"] = status_word(ok);
    r.save_json("summary.json", d);
    write_manifest(r, "reconstruct", d);
    r.log(std::string("reconstruct: ") + status_word(ok));
    return ok ? exit_pass : exit_fail;
}

int cmd_flow_curves(Run& r) {
    const auto& cfg = r.cfg;
    if (cfg.seeds.empty()) throw ConfigError("flow-curves needs at least one seed");
    if (!(cfg.t_final > 0.0)) throw ConfigError("t_final must be positive for flow-curves");
    const CurveFamily fam = seed_family(cfg.initial, cfg.seeds, cfg.domain, cfg.s_extent, cfg.flow.spacing);
    const auto evo = evolve_family(fam, cfg.t_final, cfg.flow.dt, cfg.flow.cadence);

    io::CsvWriter dist({"t", "min_distance"});
    io::CsvWriter stats({"t", "label", "length", "centroid_x", "centroid_y", "mean_radius"});
    Json snaps = Json::array();
    for (std::size_t k = 0; k < evo.snapshots.size(); ++k) {
        const auto& f = evo.snapshots[k];
        const std::string name = numbered("family", k, ".csv");
        r.save(name, family_csv(f).str());
        snaps.push_back(Json{{"file", name}, {"time", f.time}, {"leaves", f.leaves.size()}});
        dist.row(f.time, evo.min_distance[k]);
        for (std::size_t l = 0; l < f.leaves.size(); ++l) {
            const Curve& c = f.leaves[l].curve;
            Vec2 centroid{0, 0};
            double radius = 0.0;
            for (std::size_t m = 0; m < c.size(); ++m) {
                centroid = centroid + c[m];
                radius += norm(c[m]);
            }
            const double n = static_cast<double>(c.size());
            stats.row(f.time, f.labels[l], c.length(), centroid.x / n, centroid.y / n, radius / n);
        }
    }
    r.save("leaf_distance.csv", dist.str());
    r.save("leaf_stats.csv", stats.str());
    Json ext = Json::array();
    for (const auto& e : evo.extinct) {
        ext.push_back(Json{{"label", e.label}, {"time", e.time}, {"reason", e.reason}});
        r.log("leaf " + std::to_string(e.label) + " extinct at t = " + io::format_number(e.time));
    }
    Json d;
    d["leaves"] = fam.leaves.size();
    d["snapshots"] = snaps;
    d["extinct"] = ext;
    d["min_leaf_distance"] = *std::min_element(evo.min_distance.begin(), evo.min_distance.end());
    d["status"] = "pass";
    r.save_json("summary.json", d);
    write_manifest(r, "flow-curves", d);
    r.log("flow-curves: " + std::to_string(evo.snapshots.size()) + " snapshots, " +
          std::to_string(evo.extinct.size()) + " extinctions");
    return exit_pass;
}

int cmd_cross_validate(Run& r) {
    const auto setup = io::cross_setup(r.cfg);
    const auto res = cross_validate(setup);
    io::CsvWriter w({"x", "y", "theta_pde", "theta_oracle", "error", "covered"});
    const auto& g = res.pde.grid();
    for (std::size_t j = 0; j < g.ny(); ++j)
        for (std::size_t i = 0; i < g.nx(); ++i) {
            const std::size_t k = g.index(i, j);
            const Vec2 p = g.node(i, j);
            const bool covered = res.oracle.mask[k] != 0;
            w.row(p.x, p.y, io::CsvWriter::Angle{res.pde(i, j)},
                  io::CsvWriter::Angle{covered ? res.oracle.field(i, j) : std::nan("")},
                  res.comparison.error[k], covered ? 1 : 0);
        }
    r.save("error_field.csv", w.str());
    r.save("leaves_initial.csv", family_csv(res.initial_leaves).str());
    r.save("leaves_final.csv", family_csv(res.final_leaves).str());
    Json ext = Json::array();
    for (const auto& e : res.extinct) ext.push_back(Json{{"label", e.label}, {"time", e.time}});
    Json s;
    s["max_error"] = res.comparison.max;
    s["l2_error"] = res.comparison.l2;
    s["coverage"] = res.comparison.coverage;
    s["compared_nodes"] = res.comparison.compared;
    s["window_nodes"] = res.comparison.window_nodes;
    s["tol_max"] = setup.tol_max;
    s["tol_l2"] = setup.tol_l2;
    s["min_coverage"] = setup.min_coverage;
    s["pde_steps"] = res.pde_steps;
    s["pde_dt"] = res.pde_dt;
    s["leaves"] = setup.leaf_count;
    s["extraction_reach"] = res.max_distance;
    s["extinct"] = ext;
    s["status"] = to_string(res.status);
    r.save_json("summary.json", s);
    write_manifest(r, "cross-validate", s);
    r.log("cross-validate: max " + io::format_number(res.comparison.max) + ", L2 " +
          io::format_number(res.comparison.l2) + ", coverage " + io::format_number(res.comparison.coverage) +
          " -> " + to_string(res.status));
    switch (res.status) {
        case Status::pass: return exit_pass;
        case Status::fail: return exit_fail;
        case Status::inconclusive: return exit_inconclusive;
    }
    return exit_fail;
}

struct PlotArgs {
    std::vector<std::string> inputs;
    std::string out = ".";
    std::string column = "theta";
    std::string kind = "auto";
    std::string combine;
    int width = 800;
    bool quiet = false;
};

int cmd_plot(const PlotArgs& a) {
    const fs::path out(a.out);
    std::vector<io::Polyline> combined;
    for (const auto& in : a.inputs) {
        const io::CsvTable t = io::parse_csv(io::read_file(in), in);
        // a field input is one with an angle column: --column, else the first theta*
        std::string column = a.column;
        if (t.column(column) < 0)
            for (const auto& h : t.header)
                if (h.rfind("theta", 0) == 0) {
                    column = h;
                    break;
                }
        const bool field = a.kind == "field" || (a.kind == "auto" && t.column(column) >= 0);
        const fs::path target = out / (fs::path(in).stem().string() + ".svg");
        if (field) {
            io::write_atomic(target, io::render_field_svg(io::field_from_csv(t, column, in), a.width));
        } else {
            auto curves = io::curves_from_csv(t, in);
            if (!a.combine.empty()) {
                combined.insert(combined.end(), curves.begin(), curves.end());
                continue;
            }
            io::write_atomic(target, io::render_curves_svg(curves, a.width));
        }
        if (!a.quiet) std::cerr << "wrote " << target.string() << '\n';
    }
    if (!a.combine.empty()) {
        const fs::path target = out / (a.combine + ".svg");
        io::write_atomic(target, io::render_curves_svg(combined, a.width));
        if (!a.quiet) std::cerr << "wrote " << target.string() << '\n';
    }
    return exit_pass;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"foliflow: angle-field evolution of foliations by curve shortening flow"};
    app.require_subcommand(1);
    Common common;
    PlotArgs plot;

    struct Entry {
        const char* name;
        const char* help;
        int (*fn)(Run&);
    };
    const Entry entries[] = {
        {"residual", "stationary residual of the configured field", cmd_residual},
        {"solve-pde", "evolve the angle field and write snapshots", cmd_solve_pde},
        {"reconstruct", "build foliation sheets and their diagnostics", cmd_reconstruct},
        {"flow-curves", "move a family of leaves by curve shortening", cmd_flow_curves},
        {"cross-validate", "compare the angle PDE with the curve-flow oracle", cmd_cross_validate},
    };
    std::vector<std::pair<CLI::App*, const Entry*>> subs;
    for (const auto& e : entries) {
        CLI::App* sub = app.add_subcommand(e.name, e.help);
        sub->add_option("--config", common.config, "run configuration (JSON)")->required();
        sub->add_option("--out", common.out, "output directory (default: output_dir from the config)");
        sub->add_option("--seed", common.seeds, "seed point \"x,y\"; repeatable, replaces config seeds");
        sub->add_flag("--quiet", common.quiet, "suppress progress messages");
        subs.emplace_back(sub, &e);
    }
    CLI::App* plot_cmd = app.add_subcommand("plot", "render CSV outputs as SVG");
    plot_cmd->add_option("inputs", plot.inputs, "CSV files")->required();
    plot_cmd->add_option("--out", plot.out, "output directory");
    plot_cmd->add_option("--column", plot.column, "angle column for field plots");
    plot_cmd->add_option("--kind", plot.kind, "auto, field or curves")
        ->check(CLI::IsMember({"auto", "field", "curves"}));
    plot_cmd->add_option("--combine", plot.combine, "draw all curve inputs into NAME.svg");
    plot_cmd->add_option("--width", plot.width, "image width in pixels")->check(CLI::PositiveNumber);
    plot_cmd->add_flag("--quiet", plot.quiet, "suppress progress messages");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_pass : exit_usage;
    }

    try {
        if (plot_cmd->parsed()) return cmd_plot(plot);
        for (const auto& [sub, e] : subs)
            if (sub->parsed()) {
                Run run = load(common);
                return e->fn(run);
            }
    } catch (const NumericalAbort& e) {
        std::cerr << "numerical abort: " << e.what() << '\n';
        return exit_abort;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    }
    return exit_usage;
}
