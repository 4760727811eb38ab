#include "wsub/cli.hpp"

#include "wsub/errors.hpp"
#include "wsub/flows.hpp"
#include "wsub/geodesics.hpp"
#include "wsub/io.hpp"
#include "wsub/ldp.hpp"
#include "wsub/suites.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>

namespace wsub {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// Every option is registered together with a getter of its resolved value,
// which is what resolved_config.json records.
struct Registry {
    std::vector<std::pair<std::string, std::function<json()>>> items;

    template <class T>
    CLI::Option* option(CLI::App* app, const std::string& name, T& var, const std::string& desc) {
        items.emplace_back(name, [&var] { return json(var); });
        return app->add_option("--" + name, var, desc);
    }
    CLI::Option* flag(CLI::App* app, const std::string& name, bool& var, const std::string& desc) {
        items.emplace_back(name, [&var] { return json(var); });
        return app->add_flag("--" + name, var, desc);
    }
    json resolved(const std::string& command) const {
        json opts = json::object();
        for (const auto& [name, get] : items) opts[name] = get();
        return json{{"command", command}, {"options", opts}};
    }
};

struct Common {
    std::string config;
    std::string out;
    std::uint64_t seed = 20240901;
    double tol = 0.0;
    bool quick = false;
};

void add_common(CLI::App* app, Registry& reg, Common& c, double default_tol, const std::string& tol_desc) {
    c.tol = default_tol;
    app->add_option("--config", c.config, "JSON file with option values; command-line flags override it");
    reg.option(app, "out", c.out, "Output directory (created if missing)");
    reg.option(app, "seed", c.seed, "Random seed");
    reg.option(app, "tol", c.tol, tol_desc)->check(CLI::PositiveNumber);
    reg.flag(app, "quick", c.quick, "Halved grids and sample counts with loosened tolerances");
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream os(p);
    if (!os) throw DomainError("cannot write " + p.string());
    os << content;
}

void finish_outputs(const Common& c, const Registry& reg, const std::string& command) {
    if (c.out.empty()) return;
    fs::create_directories(c.out);
    write_file(fs::path(c.out) / "resolved_config.json", reg.resolved(command).dump(2) + "\n");
}

std::string number(double v) { return format_double(v); }

// --------------------------------------------------------------------------
// dist

struct DistArgs {
    std::string kind = "w2";
    std::string a, b;
    double theta = 1.0;
    double u = 0.0;
    int d = 1;
};

int cmd_dist(const DistArgs& args, const Common& c, const Registry& reg, std::ostream& out) {
    double value = 0.0;
    if (args.kind == "w2-discrete") {
        value = w2_discrete(load_cloud(args.a), load_cloud(args.b));
    } else {
        const auto a = load_grid(args.a), b = load_grid(args.b);
        if (!(a.axis == b.axis)) throw DomainError("both measures must share one grid");
        if (args.kind == "w2") value = w2_1d(a, b);
        else if (args.kind == "w1") value = w1_1d(a, b);
        else {
            if (args.d != 1) throw DomainError("grid sphere distances are one-dimensional (use --d 1)");
            value = sphere_distance(a, b, args.theta, args.u);
        }
    }
    out << number(value) << '\n';
    if (!c.out.empty()) {
        fs::create_directories(c.out);
        json j{{"kind", args.kind}, {"value", value}, {"a", args.a}, {"b", args.b}};
        write_file(fs::path(c.out) / "dist.json", j.dump(2) + "\n");
    }
    finish_outputs(c, reg, "dist");
    return kPass;
}

// --------------------------------------------------------------------------
// flow

struct FlowArgs {
    std::string kind = "ou";
    std::string init;
    double init_mean = 0.5;
    double init_var = 1.0;
    long cells = 1000;
    double half_width = 10.0;
    double u = 0.0;
    double theta = 1.0;
    double lambda = 1.0;
    double t_end = 2.0;
    int steps = 2000;
    int record_every = 1;
    int particles = 32;
    std::vector<double> v1{0.0, 0.0, 0.5};
    std::vector<double> v2{0.0, 0.0, 0.5};
    std::vector<std::string> checks;
    bool states = false;
};

int cmd_flow(const FlowArgs& args, const Common& c, const Registry& reg, std::ostream& out) {
    const int steps = c.quick ? std::max(1, args.steps / 2) : args.steps;
    FlowTrace tr;
    ConstraintSet invariant;
    if (args.kind == "ou") {
        GridMeasure1D rho0 = args.init.empty()
                                 ? gaussian(Axis::symmetric(args.u, args.half_width, c.quick ? args.cells / 2 : args.cells),
                                            args.init_mean, args.init_var)
                                 : load_grid(args.init);
        tr = ou_flow_grid(rho0, args.u, args.theta, args.t_end, steps, {args.record_every});
        invariant = ConstraintSet::sphere(args.u, args.theta);
    } else if (args.kind == "dyson") {
        ParticleState p;
        p.lambda = args.lambda;
        if (args.init.empty()) {
            p.positions = Eigen::VectorXd::LinSpaced(args.particles, -1.0, 1.0) * args.half_width / 10.0;
        } else {
            const auto cloud = load_cloud(args.init);
            if (cloud.dim() != 1) throw DomainError("Dyson particles are one-dimensional");
            p.positions = cloud.points.col(0);
        }
        tr = dyson_ou(p, args.t_end, steps);
    } else {
        if (args.init.empty()) throw DomainError("product2d needs --init with a 2D grid CSV");
        const auto rho0 = load_grid2d(args.init);
        tr = product_ou_2d(rho0, args.v1, args.v2, args.t_end, steps, args.record_every);
        invariant = ConstraintSet::marginals_of(rho0);
    }

    std::vector<InequalityReport> reports;
    const double lam = args.kind == "dyson" ? args.lambda : 1.0 / args.theta;
    for (const auto& chk : args.checks) {
        const bool grid1d = !tr.states.empty();
        if (chk == "invariance") {
            if (args.kind == "dyson") throw DomainError("invariance check needs a grid flow");
            reports.push_back(invariance_check(tr, invariant, c.tol));
        } else if (chk == "energy") {
            reports.push_back(energy_identity_residual(tr, 0.1, 1.0, args.kind == "dyson" ? 0.05 : 0.02));
        } else if (!grid1d) {
            throw DomainError("check '" + chk + "' needs a 1D grid flow");
        } else if (chk == "evi") {
            reports.push_back(evi_residual(tr, tr.reference, lam, Functional::relative_entropy(tr.reference)));
        } else if (chk == "fisher") {
            reports.push_back(fisher_regularization_check(tr, lam));
        } else if (chk == "tail") {
            reports.push_back(flow_tail_length(tr, lam));
        } else if (chk == "hermite") {
            reports.push_back(hermite_decay_check(tr, 4, args.u, args.theta));
        }
    }

    if (!c.out.empty()) {
        fs::create_directories(c.out);
        write_file(fs::path(c.out) / "trace.csv", tr.to_csv());
        if (args.states) {
            const fs::path dir = fs::path(c.out) / "states";
            fs::create_directories(dir);
            for (std::size_t k = 0; k < tr.size(); ++k) {
                char name[32];
                std::snprintf(name, sizeof name, "state_%05zu.csv", k);
                if (!tr.states.empty()) save((dir / name).string(), tr.states[k]);
                else if (!tr.states2d.empty()) save((dir / name).string(), tr.states2d[k]);
                else save((dir / name).string(), PointCloud::uniform(Eigen::MatrixXd(tr.particles[k])));
            }
        }
        if (!reports.empty()) write_file(fs::path(c.out) / "reports.json", to_json(reports) + "\n");
    }
    finish_outputs(c, reg, "flow");

    json summary{{"kind", args.kind},
                 {"t_end", tr.times.back()},
                 {"records", tr.size()},
                 {"mean", tr.mean.back()},
                 {"m2", tr.m2.back()}};
    if (!tr.rel_entropy.empty()) summary["rel_entropy"] = tr.rel_entropy.back();
    if (!tr.energy.empty()) summary["energy"] = tr.energy.back();
    if (!tr.marginal0.empty())
        summary["marginal_drift"] = std::max((tr.marginal0.back() - tr.marginal0.front()).cwiseAbs().maxCoeff(),
                                             (tr.marginal1.back() - tr.marginal1.front()).cwiseAbs().maxCoeff());
    if (reports.empty()) {
        out << summary.dump(2) << '\n';
        return kPass;
    }
    out << to_json(reports) << '\n';
    return all_pass(reports) ? kPass : kVerificationFailure;
}

// --------------------------------------------------------------------------
// geodesic

struct GeodesicArgs {
    std::string a, b;
    std::string constraints = "none";
    int q = 4;
    double u = 0.0;
    double theta = 1.0;
    std::vector<double> moments;
    int T = 32;
    long max_iters = 40000;
    double gap_tol = 0.02;
    bool coupling = false;
    bool curve = false;
};

ConstraintSet make_constraints(const GeodesicArgs& g) {
    if (g.constraints == "none") return ConstraintSet{};
    if (g.constraints == "sphere") return ConstraintSet::sphere(g.u, g.theta);
    if (g.constraints == "hermite") return ConstraintSet::hermite(g.q, g.u, g.theta);
    if (g.moments.empty()) throw DomainError("--constraints moments needs --moments");
    return ConstraintSet::moments(Eigen::Map<const Eigen::VectorXd>(g.moments.data(), static_cast<Eigen::Index>(g.moments.size())));
}

int cmd_geodesic(const GeodesicArgs& args, const Common& c, const Registry& reg, std::ostream& out) {
    GeodesicOptions o;
    o.tol = c.tol;
    o.max_iters = args.max_iters;
    o.gap_tol = args.gap_tol;
    SpaceTimePath path;
    if (args.coupling) {
        path = coupling_geodesic(load_grid2d(args.a), load_grid2d(args.b), args.T, o);
    } else if (args.curve) {
        FlowCurveOptions fo;
        fo.u = args.u;
        fo.theta = args.theta;
        path = finite_length_curve(load_grid(args.a), load_grid(args.b), fo);
    } else {
        path = solve_geodesic(load_grid(args.a), load_grid(args.b), make_constraints(args), args.T, o);
    }
    if (!c.out.empty()) {
        save_path(path, (fs::path(c.out) / "path").string());
        write_file(fs::path(c.out) / "certificate.json", certificate_json(path.certificate) + "\n");
    }
    finish_outputs(c, reg, "geodesic");
    out << path_meta_json(path) << '\n';
    return path.converged ? kPass : kNotConverged;
}

// --------------------------------------------------------------------------
// check

struct CheckArgs {
    std::string suite = "all";
    double lambda_scale = 1.0;
};

int cmd_check(const CheckArgs& args, const Common& c, const Registry& reg, std::ostream& out) {
    SuiteOptions o;
    o.quick = c.quick;
    o.seed = c.seed;
    o.tol_scale = c.tol;
    o.lambda_scale = args.lambda_scale;
    const auto reports = run_suite(args.suite, o);
    if (!c.out.empty()) {
        fs::create_directories(c.out);
        write_file(fs::path(c.out) / "reports.json", to_json(reports) + "\n");
        write_file(fs::path(c.out) / "reports.csv", to_csv(reports));
    }
    finish_outputs(c, reg, "check");
    out << to_json(reports) << '\n';
    return all_pass(reports) ? kPass : kVerificationFailure;
}

// --------------------------------------------------------------------------
// ldp

struct LdpArgs {
    std::string kind = "tail";
    std::vector<int> n{100};
    std::vector<double> r{0.2};
    long replicates = 10000;
    double slack = 0.05;
    std::string f = "abs";
    std::vector<double> knots;
    std::vector<double> values;
    double left_slope = 0.0;
    double right_slope = 0.0;
};

PiecewiseLinear test_function(const LdpArgs& a) {
    if (!a.knots.empty()) return PiecewiseLinear{a.knots, a.values, a.left_slope, a.right_slope};
    if (a.f == "abs") return PiecewiseLinear{{0.0}, {0.0}, -1.0, 1.0};
    if (a.f == "identity") return PiecewiseLinear{{0.0}, {0.0}, 1.0, 1.0};
    if (a.f == "zero") return PiecewiseLinear{{0.0}, {0.0}, 0.0, 0.0};
    throw DomainError("unknown test function '" + a.f + "'");
}

int cmd_ldp(const LdpArgs& args, const Common& c, const Registry& reg, std::ostream& out) {
    const long reps = c.quick ? std::max(1L, args.replicates / 2) : args.replicates;
    if (args.kind == "gue") {
        const int n = args.n.front();
        const PointCloud s = gue_fixed_trace(n, c.seed);
        std::vector<double> x(s.points.data(), s.points.data() + s.size());
        json j{{"n", n}, {"seed", c.seed}, {"m2", s.second_moment()}, {"w1_semicircle", w1_to_semicircle(x)}};
        if (!c.out.empty()) {
            fs::create_directories(c.out);
            save((fs::path(c.out) / "spectrum.csv").string(), s);
        }
        finish_outputs(c, reg, "ldp");
        out << j.dump() << '\n';
        return kPass;
    }
    std::vector<TailEstimate> es;
    for (int n : args.n)
        for (double r : args.r) {
            if (args.kind == "tail") es.push_back(tail_estimate(n, r, reps, c.seed, 1, args.slack));
            else if (args.kind == "lipschitz") es.push_back(lipschitz_tail(n, test_function(args), r, reps, c.seed, args.slack));
            else es.push_back(gue_tail_probe(n, r, reps, c.seed));
        }
    if (!c.out.empty()) {
        fs::create_directories(c.out);
        write_file(fs::path(c.out) / "tails.jsonl", to_jsonl(es));
        write_file(fs::path(c.out) / "tails.csv", to_csv(es));
    }
    finish_outputs(c, reg, "ldp");
    out << to_jsonl(es);
    if (args.kind == "gue-probe") return kPass;
    return std::all_of(es.begin(), es.end(), [](const TailEstimate& e) { return e.pass; }) ? kPass
                                                                                         : kVerificationFailure;
}

// --------------------------------------------------------------------------
// Config expansion: option values from a JSON file become leading arguments,
// skipped for options also given on the command line.

const std::set<std::string> kCommands{"dist", "flow", "geodesic", "check", "ldp"};

std::vector<std::string> config_args(const json& cfg, const std::set<std::string>& given) {
    const json& opts = cfg.contains("options") ? cfg["options"] : cfg;
    std::vector<std::string> args;
    for (const auto& [key, val] : opts.items()) {
        if (key == "command" || given.count(key)) continue;
        auto scalar = [](const json& v) -> std::string {
            if (v.is_string()) return v.get<std::string>();
            if (v.is_number_integer()) return std::to_string(v.get<long long>());
            if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
            if (v.is_number()) return format_double(v.get<double>());
            throw DomainError("unsupported config value for a scalar option");
        };
        if (val.is_boolean()) {
            if (val.get<bool>()) args.push_back("--" + key);
        } else if (val.is_array()) {
            if (val.empty()) continue;
            args.push_back("--" + key);
            for (const auto& v : val) args.push_back(scalar(v));
        } else if (val.is_null()) {
            continue;
        } else {
            args.push_back("--" + key);
            args.push_back(scalar(val));
        }
    }
    return args;
}

std::vector<std::string> expand(const std::vector<std::string>& in) {
    std::string config;
    std::vector<std::string> rest;
    for (std::size_t i = 0; i < in.size(); ++i) {
        if (in[i] == "--config" && i + 1 < in.size()) {
            config = in[++i];
        } else if (in[i].rfind("--config=", 0) == 0) {
            config = in[i].substr(9);
        } else {
            rest.push_back(in[i]);
        }
    }
    if (config.empty()) return in;
    std::ifstream is(config);
    if (!is) throw DomainError("cannot read config file " + config);
    json cfg;
    try {
        cfg = json::parse(is);
    } catch (const json::parse_error& e) {
        throw DomainError(std::string("config file is not valid JSON: ") + e.what());
    }
    std::string command;
    auto pos = std::find_if(rest.begin(), rest.end(), [](const std::string& s) { return kCommands.count(s) > 0; });
    if (pos != rest.end()) {
        command = *pos;
        rest.erase(pos);
    } else if (cfg.contains("command")) {
        command = cfg["command"].get<std::string>();
    } else {
        throw DomainError("no subcommand given and the config names none");
    }
    std::set<std::string> given;
    for (const auto& a : rest)
        if (a.rfind("--", 0) == 0) given.insert(a.substr(2, a.find('=') == std::string::npos ? std::string::npos : a.find('=') - 2));
    std::vector<std::string> out{command};
    for (auto& a : config_args(cfg, given)) out.push_back(std::move(a));
    out.insert(out.end(), rest.begin(), rest.end());
    return out;
}

}  // namespace

int run_cli(const std::vector<std::string>& raw, std::ostream& out, std::ostream& err) {
    CLI::App app{"Constrained Wasserstein geometry: distances, flows, geodesics, verification suites"};
    app.require_subcommand(1);

    Registry rd, rf, rg, rc, rl;
    Common cd, cf, cg, cc, cl;

    DistArgs dist;
    auto* sd = app.add_subcommand("dist", "Distances between measures in CSV files");
    rd.option(sd, "kind", dist.kind, "w2 | w1 | sphere | w2-discrete")
        ->check(CLI::IsMember({"w2", "w1", "sphere", "w2-discrete"}));
    rd.option(sd, "a", dist.a, "First measure (CSV)")->required();
    rd.option(sd, "b", dist.b, "Second measure (CSV)")->required();
    rd.option(sd, "theta", dist.theta, "Sphere variance");
    rd.option(sd, "u", dist.u, "Sphere mean");
    rd.option(sd, "d", dist.d, "Dimension");
    add_common(sd, rd, cd, 1e-6, "Unused by dist; recorded for completeness");

    FlowArgs flow;
    auto* sf = app.add_subcommand("flow", "Gradient flows with diagnostics");
    rf.option(sf, "kind", flow.kind, "ou | dyson | product2d")->check(CLI::IsMember({"ou", "dyson", "product2d"}));
    rf.option(sf, "init", flow.init, "Initial data (grid CSV, point CSV for dyson, 2D grid CSV for product2d)");
    rf.option(sf, "init-mean", flow.init_mean, "Gaussian initial mean when --init is absent");
    rf.option(sf, "init-var", flow.init_var, "Gaussian initial variance when --init is absent");
    rf.option(sf, "cells", flow.cells, "Cells of the default grid");
    rf.option(sf, "half-width", flow.half_width, "Half-width of the default grid around u");
    rf.option(sf, "u", flow.u, "OU center");
    rf.option(sf, "theta", flow.theta, "OU variance");
    rf.option(sf, "lambda", flow.lambda, "Dyson confinement");
    rf.option(sf, "t-end", flow.t_end, "Final time");
    rf.option(sf, "steps", flow.steps, "Time steps");
    rf.option(sf, "record-every", flow.record_every, "Record every k-th step");
    rf.option(sf, "particles", flow.particles, "Dyson particle count when --init is absent");
    rf.option(sf, "v1", flow.v1, "Axis-0 potential coefficients c0 c1 c2 ...");
    rf.option(sf, "v2", flow.v2, "Axis-1 potential coefficients");
    rf.option(sf, "check", flow.checks, "invariance | evi | energy | fisher | tail | hermite")
        ->check(CLI::IsMember({"invariance", "evi", "energy", "fisher", "tail", "hermite"}));
    rf.flag(sf, "states", flow.states, "Also write every recorded state");
    add_common(sf, rf, cf, 1e-5, "Invariance tolerance");

    GeodesicArgs geo;
    auto* sg = app.add_subcommand("geodesic", "Constrained dynamic transport between two measures");
    rg.option(sg, "a", geo.a, "Initial measure (CSV)")->required();
    rg.option(sg, "b", geo.b, "Final measure (CSV)")->required();
    rg.option(sg, "constraints", geo.constraints, "none | sphere | hermite | moments")
        ->check(CLI::IsMember({"none", "sphere", "hermite", "moments"}));
    rg.option(sg, "q", geo.q, "Hermite degree");
    rg.option(sg, "u", geo.u, "Constraint mean");
    rg.option(sg, "theta", geo.theta, "Constraint variance");
    rg.option(sg, "moments", geo.moments, "Raw moment targets m1 m2 ...");
    rg.option(sg, "T", geo.T, "Time steps");
    rg.option(sg, "max-iters", geo.max_iters, "Iteration cap");
    rg.option(sg, "gap-tol", geo.gap_tol, "Relative duality gap for convergence");
    rg.flag(sg, "coupling", geo.coupling, "2D endpoints with pinned marginals");
    rg.flag(sg, "curve", geo.curve, "Concatenated flow curve instead of the solver");
    add_common(sg, rg, cg, 1e-5, "Solver residual tolerance");

    CheckArgs chk;
    auto* sc = app.add_subcommand("check", "Run a verification suite");
    sc->add_option("suite_name", chk.suite, "Suite name (positional)");
    rc.option(sc, "suite", chk.suite, "evi | talagrand | hwi | convexity | fisher-reg | duality | envelope | all");
    rc.option(sc, "lambda-scale", chk.lambda_scale, "Multiply every convexity constant (failure injection)");
    add_common(sc, rc, cc, 1.0, "Multiplier on declared tolerances");

    LdpArgs ldp;
    auto* sl = app.add_subcommand("ldp", "Monte Carlo tail estimates");
    rl.option(sl, "kind", ldp.kind, "tail | lipschitz | gue | gue-probe")
        ->check(CLI::IsMember({"tail", "lipschitz", "gue", "gue-probe"}));
    rl.option(sl, "n", ldp.n, "Block counts / matrix sizes");
    rl.option(sl, "r", ldp.r, "Thresholds");
    rl.option(sl, "replicates", ldp.replicates, "Replicates per (n, r)");
    rl.option(sl, "slack", ldp.slack, "Allowed excess of the log-frequency per unit n");
    rl.option(sl, "f", ldp.f, "Test function: abs | identity | zero");
    rl.option(sl, "knots", ldp.knots, "Knots of a piecewise-linear test function");
    rl.option(sl, "values", ldp.values, "Values at the knots");
    rl.option(sl, "left-slope", ldp.left_slope, "Slope left of the first knot");
    rl.option(sl, "right-slope", ldp.right_slope, "Slope right of the last knot");
    add_common(sl, rl, cl, 1e-6, "Unused by ldp; recorded for completeness");

    try {
        std::vector<std::string> args = expand(raw);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kUsageError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kUsageError;
    }

    try {
        if (sd->parsed()) return cmd_dist(dist, cd, rd, out);
        if (sf->parsed()) return cmd_flow(flow, cf, rf, out);
        if (sg->parsed()) return cmd_geodesic(geo, cg, rg, out);
        if (sc->parsed()) return cmd_check(chk, cc, rc, out);
        if (sl->parsed()) return cmd_ldp(ldp, cl, rl, out);
    } catch (const Infeasible& e) {
        err << "infeasible: " << e.what() << '\n';
        return kInfeasible;
    } catch (const ParseError& e) {
        err << "input error: " << e.what() << '\n';
        return kUsageError;
    } catch (const BoundaryMassError& e) {
        err << "grid too small: " << e.what() << '\n';
        return kUsageError;
    } catch (const SizeError& e) {
        err << "too large: " << e.what() << '\n';
        return kUsageError;
    } catch (const DomainError& e) {
        err << "invalid input: " << e.what() << '\n';
        return kUsageError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kUsageError;
    }
    return kUsageError;
}

int run_cli(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run_cli(args, std::cout, std::cerr);
}

}  // namespace wsub
