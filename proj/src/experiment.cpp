#include "sshape/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "sshape/analytic.hpp"
#include "sshape/pinn.hpp"
#include "sshape/smp.hpp"

namespace sshape {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool closed_form_available(const ExperimentConfig& cfg) {
    return cfg.utility.scalable() && cfg.utility.u1.coef == 1.0 && std::abs(cfg.market.rho) == 1.0;
}

json terms_json(const pinn::LossTerms& t, const std::array<double, 3>& w) {
    return {{"residual", t.residual}, {"terminal", t.terminal}, {"boundary", t.boundary}, {"total", t.total(w)},
            {"clamps", t.clamps}, {"worst_residual", t.worst_residual}, {"worst_point", t.worst_point}};
}

void stamp(ValueGrid& g, const std::string& method, std::uint64_t seed, const std::string& hash) {
    g.method = method;
    g.seed = seed;
    g.config_hash = hash;
}

SolverRun run_solution(const ExperimentConfig& cfg, std::uint64_t seed) {
    SolverRun out;
    out.solver = "solution";
    const auto values = solution_values(cfg, cfg.rows);
    if (!values) throw std::invalid_argument("solution: no closed form for an incomplete market (|rho| < 1)");
    std::optional<ClosedFormDual> cf;
    if (closed_form_available(cfg)) cf.emplace(cfg.market, cfg.utility);
    auto control = [&](double x, double r) {
        if (!cf) return kNaN;
        return primal_from_dual(0.0, find_y0(x / r, *cf), *cf).control;
    };
    for (std::size_t i = 0; i < cfg.rows.size(); ++i) {
        const auto [x, r] = cfg.rows[i];
        out.rows.push(x, r, (*values)[i], control(x, r));
    }
    out.rows.v_solution = *values;
    std::vector<std::pair<double, double>> pts;
    for (int i = 0; i < cfg.grid_points; ++i) {
        const double z = cfg.domains.state.lo + (cfg.domains.state.hi - cfg.domains.state.lo) * i / (cfg.grid_points - 1);
        pts.emplace_back(cfg.market.r0 * z, cfg.market.r0);
    }
    const auto native_v = solution_values(cfg, pts);
    ValueGrid native;
    for (std::size_t i = 0; i < pts.size(); ++i) native.push(pts[i].first, pts[i].second, (*native_v)[i], control(pts[i].first, pts[i].second));
    stamp(native, "solution", seed, cfg.hash());
    out.native = native;
    stamp(out.rows, "solution", seed, cfg.hash());
    out.report_json = json{{"solver", "solution"}, {"closed_form", cf.has_value()}}.dump(2);
    return out;
}

SolverRun run_pinn(const ExperimentConfig& cfg, const std::string& solver, std::uint64_t seed) {
    const pinn::ProblemKind kind = pinn::problem_kind_from_string(solver);
    const pinn::PinnProblem pb = pinn::make_problem(kind, cfg.market, cfg.utility, cfg.domains, cfg.clamp_delta);
    pinn::TrainConfig tc = cfg.train;
    tc.seed = seed;
    const pinn::TrainResult res = pinn::pinn_train(pb, pinn::make_network(pb, tc), tc);
    const double p = cfg.utility.u1.p;
    SolverRun out;
    out.solver = solver;
    out.rows = pinn::outputs_at(pb, res.net, cfg.market, p, cfg.rows);
    out.native = pinn::is_dual(kind) ? pinn::outputs_dual(pb, res.net, cfg.market, p, cfg.market.r0, cfg.grid_points)
                                     : pinn::outputs_primal(pb, res.net, cfg.market, p, cfg.market.r0, cfg.grid_points);
    stamp(out.rows, solver, seed, cfg.hash());
    stamp(*out.native, solver, seed, cfg.hash());
    const auto& rep = res.report;
    out.report_json = json{{"solver", solver},
                           {"seed", seed},
                           {"iterations_run", rep.iterations_run},
                           {"early_stopped", rep.early_stopped},
                           {"seconds", rep.seconds},
                           {"clamp_activations", rep.clamp_activations},
                           {"final", terms_json(rep.final_terms, pb.weights)},
                           {"loss_history", rep.loss_history}}
                          .dump(1);
    return out;
}

SolverRun run_smp(const ExperimentConfig& cfg, std::uint64_t seed) {
    SolverRun out;
    out.solver = "smp";
    std::map<double, std::vector<std::size_t>> by_r;
    for (std::size_t i = 0; i < cfg.rows.size(); ++i) by_r[cfg.rows[i].second].push_back(i);
    std::vector<double> v(cfg.rows.size()), pi(cfg.rows.size()), se(cfg.rows.size());
    json reports = json::array();
    for (const auto& [r, idx] : by_r) {
        smp::SmpConfig sc = cfg.smp;
        sc.r0 = r;
        sc.seed = seed;
        const smp::SmpResult res = smp::smp_train(sc, cfg.market, cfg.utility);
        std::vector<double> xs;
        for (std::size_t i : idx) xs.push_back(cfg.rows[i].first);
        const ValueGrid g = smp::smp_evaluate(res.nets.control, cfg.market, cfg.utility, r, xs, sc.eval_paths, sc.steps,
                                              seed + 1000);
        for (std::size_t k = 0; k < idx.size(); ++k) {
            v[idx[k]] = g.v[k];
            pi[idx[k]] = g.pi[k];
            se[idx[k]] = (*g.se)[k];
        }
        reports.push_back({{"r0", r},
                           {"iterations_run", res.report.iterations_run},
                           {"seconds", res.report.seconds},
                           {"loss_history", res.report.loss_history},
                           {"adjoint_history", res.report.adjoint_history},
                           {"gains_history", res.report.gains_history}});
    }
    for (std::size_t i = 0; i < cfg.rows.size(); ++i) out.rows.push(cfg.rows[i].first, cfg.rows[i].second, v[i], pi[i]);
    out.rows.se = se;
    stamp(out.rows, "smp", seed, cfg.hash());
    out.report_json = json{{"solver", "smp"}, {"seed", seed}, {"runs", reports}}.dump(1);
    return out;
}

ValueGrid mean_grid(const std::vector<ValueGrid>& runs) {
    ValueGrid g = runs.front();
    const std::size_t n = g.size(), k = runs.size();
    std::vector<double> se(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double sv = 0.0, spi = 0.0, sq = 0.0;
        for (const auto& r : runs) {
            sv += r.v[i];
            spi += r.pi[i];
        }
        const double mv = sv / k;
        for (const auto& r : runs) sq += (r.v[i] - mv) * (r.v[i] - mv);
        g.v[i] = mv;
        g.pi[i] = spi / k;
        g.Pi[i] = g.pi[i] * g.x[i];
        se[i] = k > 1 ? std::sqrt(sq / (k - 1) / k) : 0.0;
    }
    g.se = se;
    return g;
}

void write_run(const SolverRun& run, const std::string& dir) {
    fs::create_directories(dir);
    run.rows.write_csv(dir + "/t0_grid.csv");
    if (run.native) run.native->write_csv(dir + "/t0_native.csv");
    write_file(dir + "/train_report.json", run.report_json + "\n");
}

}  // namespace

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << body;
    if (!out) throw std::runtime_error("write failed for " + path);
}

std::optional<std::vector<double>> solution_values(const ExperimentConfig& cfg,
                                                   const std::vector<std::pair<double, double>>& points) {
    if (std::abs(cfg.market.rho) != 1.0) return std::nullopt;
    std::vector<double> out;
    if (closed_form_available(cfg)) {
        const ClosedFormDual cf(cfg.market, cfg.utility);
        for (const auto& [x, r] : points) out.push_back(solve_value(x, r, cf));
        return out;
    }
    const DualUtility dual{ConcaveEnvelope(cfg.utility)};
    for (const auto& [x, r] : points) out.push_back(complete_market_value(x, r, cfg.market, dual));
    return out;
}

SolverRun run_solver(const ExperimentConfig& cfg, const std::string& solver, std::uint64_t seed) {
    SolverRun out;
    if (solver == "solution") out = run_solution(cfg, seed);
    else if (solver == "smp") out = run_smp(cfg, seed);
    else out = run_pinn(cfg, solver, seed);
    if (solver != "solution") {
        if (auto sol = solution_values(cfg, cfg.rows)) out.rows.v_solution = *sol;
    }
    return out;
}

void run(const ExperimentConfig& cfg, const std::string& out_dir, const RunOptions& options) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    fs::create_directories(out_dir);
    std::vector<std::string> solvers = cfg.solvers;
    if (solvers.empty()) solvers = {"solution"};
    std::vector<std::uint64_t> seeds;
    for (int k = 0; k < cfg.repeats; ++k) seeds.push_back(cfg.seed + static_cast<std::uint64_t>(k));

    auto one = [&](const std::string& solver) {
        const std::string base = out_dir + "/" + solver;
        if (cfg.repeats == 1 || solver == "solution") {
            write_run(run_solver(cfg, solver, cfg.seed), base);
            return;
        }
        std::vector<ValueGrid> rows;
        for (int k = 0; k < cfg.repeats; ++k) {
            const SolverRun r = run_solver(cfg, solver, seeds[k]);
            write_run(r, base + "/run_" + std::to_string(k));
            rows.push_back(r.rows);
        }
        ValueGrid mean = mean_grid(rows);
        mean.method = solver + "-mean";
        fs::create_directories(base);
        mean.write_csv(base + "/t0_grid.csv");
    };

    if (options.parallel && solvers.size() > 1) {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(solvers.size());
        for (std::size_t i = 0; i < solvers.size(); ++i)
            pool.emplace_back([&, i] {
                try {
                    one(solvers[i]);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            });
        for (auto& t : pool) t.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    } else {
        for (const auto& s : solvers) one(s);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_file(out_dir + "/config.cfg", cfg.canonical());
    write_file(out_dir + "/manifest.json", manifest_json(out_dir, cfg.hash(), seeds, secs));
}

std::string tables(const std::vector<ValueGrid>& grids) {
    if (grids.empty()) throw std::invalid_argument("tables: no grids");
    const ValueGrid& ref = grids.front();
    for (const auto& g : grids) {
        if (g.size() != ref.size()) throw std::invalid_argument("tables: grids differ in length");
        for (std::size_t i = 0; i < g.size(); ++i)
            if (std::abs(g.x[i] - ref.x[i]) > 1e-9 || std::abs(g.r[i] - ref.r[i]) > 1e-9)
                throw std::invalid_argument("tables: grids do not share abscissae");
    }
    const std::vector<double>* sol = nullptr;
    for (const auto& g : grids)
        if (g.v_solution) {
            sol = &*g.v_solution;
            break;
        }
    auto f = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f", v);
        return std::string(buf);
    };
    std::ostringstream out;
    out << "x,r";
    for (const auto& g : grids) out << "," << g.method;
    if (sol) out << ",Solution";
    out << "\n";
    for (std::size_t i = 0; i < ref.size(); ++i) {
        out << ref.x[i] << "," << ref.r[i];
        for (const auto& g : grids) out << "," << f(g.v[i]);
        if (sol) out << "," << f((*sol)[i]);
        out << "\n";
    }
    if (sol) {
        for (const auto& g : grids) {
            double mx = 0.0;
            for (std::size_t i = 0; i < ref.size(); ++i) mx = std::max(mx, std::abs(g.v[i] - (*sol)[i]));
            out << "# max_abs_dev " << g.method << " " << f(mx) << "\n";
        }
    }
    return out.str();
}

std::string DualityReport::to_json() const {
    json pts = json::array();
    for (const auto& p : points)
        pts.push_back({{"x", p.x}, {"r", p.r}, {"primal", p.primal}, {"concave", p.concave}, {"dual", p.dual}});
    return json{{"points", pts},
                {"max_concave_dual_gap", max_concave_dual_gap},
                {"mean_concave_dual_gap", mean_concave_dual_gap},
                {"max_primal_concave_gap", max_primal_concave_gap},
                {"max_ordering_violation", max_ordering_violation},
                {"tolerance", tolerance},
                {"pass", pass}}
        .dump(2);
}

DualityReport duality_report(const ValueGrid& primal, const ValueGrid& concave, const ValueGrid& dual,
                             double tolerance) {
    const std::size_t n = concave.size();
    if (primal.size() != n || dual.size() != n) throw std::invalid_argument("duality_report: grids differ in length");
    DualityReport rep;
    rep.tolerance = tolerance;
    rep.max_primal_concave_gap = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(primal.x[i] - concave.x[i]) > 1e-9 || std::abs(dual.x[i] - concave.x[i]) > 1e-9 ||
            std::abs(primal.r[i] - concave.r[i]) > 1e-9 || std::abs(dual.r[i] - concave.r[i]) > 1e-9)
            throw std::invalid_argument("duality_report: grids do not share abscissae");
        DualityPoint p{concave.x[i], concave.r[i], primal.v[i], concave.v[i], dual.v[i]};
        const double cd = std::abs(p.concave - p.dual);
        rep.max_concave_dual_gap = std::max(rep.max_concave_dual_gap, cd);
        rep.mean_concave_dual_gap += cd / static_cast<double>(n);
        rep.max_primal_concave_gap = std::max(rep.max_primal_concave_gap, p.primal - p.concave);
        rep.max_ordering_violation =
            std::max({rep.max_ordering_violation, p.primal - p.concave, p.concave - p.dual});
        rep.points.push_back(p);
    }
    if (n == 0) rep.max_primal_concave_gap = 0.0;
    rep.pass = rep.max_ordering_violation <= tolerance;
    return rep;
}

std::string manifest_json(const std::string& dir, const std::string& config_hash,
                          const std::vector<std::uint64_t>& seeds, double seconds) {
    std::vector<std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().filename() != "manifest.json")
            files.push_back(fs::relative(e.path(), dir).generic_string());
    std::sort(files.begin(), files.end());
    json list = json::array();
    for (const auto& f : files) list.push_back({{"path", f}, {"fnv1a64", fnv1a_hex(read_file(dir + "/" + f))}});
    return json{{"config_hash", config_hash}, {"seeds", seeds}, {"wall_clock_seconds", seconds}, {"files", list}}
               .dump(2) +
           "\n";
}

}  // namespace sshape
