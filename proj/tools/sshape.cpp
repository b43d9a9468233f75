// Command-line runner. Exit codes: 0 ok, 1 other failure, 2 bad config or arguments,
// 3 solver divergence, 4 file I/O.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "sshape/analytic.hpp"
#include "sshape/config.hpp"
#include "sshape/experiment.hpp"
#include "sshape/mc.hpp"
#include "sshape/nn.hpp"

namespace fs = std::filesystem;
using namespace sshape;

namespace {

enum Exit { kOk = 0, kOther = 1, kConfig = 2, kDiverged = 3, kIo = 4 };

struct Common {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> repeats;
    std::optional<int> iterations;
    bool parallel = false;
};

std::string output_root() {
    const char* env = std::getenv("SSHAPE_OUTPUT_ROOT");
    return env && *env ? env : "runs";
}

ExperimentConfig load(const Common& c) {
    ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_config(c.config);
    if (c.seed) cfg.seed = *c.seed;
    if (c.repeats) cfg.repeats = *c.repeats;
    if (c.iterations) {
        cfg.train.iterations = *c.iterations;
        cfg.smp.iterations = *c.iterations;
    }
    cfg.validate();
    return cfg;
}

std::string out_dir(const Common& c, const ExperimentConfig& cfg) {
    return c.out.empty() ? output_root() + "/" + cfg.name : c.out;
}

void add_common(CLI::App* sub, Common& c, bool solver_opts) {
    sub->add_option("-c,--config", c.config, "experiment config file");
    sub->add_option("-o,--out", c.out, "output directory (default $SSHAPE_OUTPUT_ROOT/<name>)");
    sub->add_option("--seed", c.seed, "override the config seed");
    if (solver_opts) {
        sub->add_option("--repeats", c.repeats, "independent runs with consecutive seeds");
        sub->add_option("--iterations", c.iterations, "override training iterations");
        sub->add_flag("--parallel", c.parallel, "run solvers concurrently");
    }
}

std::vector<ValueGrid> grids_from(const std::vector<std::string>& dirs) {
    std::vector<ValueGrid> grids;
    for (const auto& d : dirs) grids.push_back(ValueGrid::read_csv(fs::is_directory(d) ? d + "/t0_grid.csv" : d));
    return grids;
}

}  // namespace

int main(int argc, char** argv) {
    nn::keep_large_buffers();
    CLI::App app{"S-shaped utility portfolio solvers"};
    app.require_subcommand(1);
    Common common;

    auto* solution = app.add_subcommand("solution", "closed-form values at the configured rows");
    add_common(solution, common, false);

    std::vector<std::string> pinn_names{"pinn-scaled-primal", "pinn-scaled-primal-nonconcave", "pinn-scaled-dual",
                                        "pinn-general-primal", "pinn-general-primal-nonconcave", "pinn-general-dual"};
    std::vector<CLI::App*> pinn_cmds;
    for (const auto& n : pinn_names) {
        auto* s = app.add_subcommand(n, "train and evaluate " + n);
        add_common(s, common, true);
        pinn_cmds.push_back(s);
    }

    std::optional<double> smp_r0, smp_rho;
    auto* smp = app.add_subcommand("smp", "deep stochastic maximum principle solver");
    add_common(smp, common, true);
    smp->add_option("--r0", smp_r0, "evaluate only rows with this benchmark start");
    smp->add_option("--rho", smp_rho, "override the correlation");

    int mc_paths = 1000000;
    auto* mccheck = app.add_subcommand("mc-check", "measure-change sanity checks and Monte Carlo dual values");
    add_common(mccheck, common, false);
    mccheck->add_option("--paths", mc_paths, "sample size");

    std::vector<std::string> table_dirs;
    auto* tab = app.add_subcommand("tables", "align t0_grid.csv files into one comparison table");
    tab->add_option("dirs", table_dirs, "run directories or CSV files")->required();

    std::string dr_primal, dr_concave, dr_dual;
    double dr_tol = 0.02;
    auto* dual = app.add_subcommand("duality-report", "weak-duality gaps between three runs");
    dual->add_option("primal", dr_primal)->required();
    dual->add_option("concave", dr_concave)->required();
    dual->add_option("dual", dr_dual)->required();
    dual->add_option("--tol", dr_tol);

    auto* runcmd = app.add_subcommand("run", "run every solver listed in the config");
    add_common(runcmd, common, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        if (tab->parsed()) {
            std::cout << tables(grids_from(table_dirs));
            return kOk;
        }
        if (dual->parsed()) {
            const auto g = grids_from({dr_primal, dr_concave, dr_dual});
            const DualityReport rep = duality_report(g[0], g[1], g[2], dr_tol);
            std::cout << rep.to_json() << "\n";
            return kOk;
        }

        ExperimentConfig cfg = load(common);
        const std::string dir = out_dir(common, cfg);
        RunOptions opts;
        opts.parallel = common.parallel;

        if (solution->parsed()) {
            cfg.solvers = {"solution"};
            run(cfg, dir, opts);
            std::cout << read_file(dir + "/solution/t0_grid.csv");
            return kOk;
        }
        for (std::size_t i = 0; i < pinn_cmds.size(); ++i)
            if (pinn_cmds[i]->parsed()) {
                cfg.solvers = {pinn_names[i]};
                run(cfg, dir, opts);
                std::cout << read_file(dir + "/" + pinn_names[i] + "/t0_grid.csv");
                return kOk;
            }
        if (smp->parsed()) {
            if (smp_rho) cfg.market.rho = *smp_rho;
            if (smp_r0) {
                std::vector<std::pair<double, double>> keep;
                for (const auto& row : cfg.rows)
                    if (row.second == *smp_r0) keep.push_back(row);
                if (keep.empty())
                    for (double x : {0.5, 1.0, 5.0}) keep.emplace_back(x, *smp_r0);
                cfg.rows = keep;
            }
            cfg.solvers = {"smp"};
            cfg.validate();
            run(cfg, dir, opts);
            std::cout << read_file(dir + "/smp/t0_grid.csv");
            return kOk;
        }
        if (mccheck->parsed()) {
            const mc::GirsanovReport g = mc::girsanov_check(cfg.market, cfg.utility.u1.p, mc_paths, cfg.seed);
            auto est = [](const mc::Estimate& e) { return nlohmann::json{{"mean", e.mean}, {"se", e.se}, {"n", e.n}}; };
            std::cout << nlohmann::json{{"density", est(g.density)},
                                        {"q_mean", est(g.q_mean)},
                                        {"q_second_moment", est(g.q_second_moment)},
                                        {"discounted_zeta", est(g.discounted_zeta)}}
                             .dump(2)
                      << "\n";
            return kOk;
        }
        if (runcmd->parsed()) {
            run(cfg, dir, opts);
            std::cout << dir << "\n";
            return kOk;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid argument: " << e.what() << "\n";
        return kConfig;
    } catch (const DivergenceError& e) {
        std::cerr << "diverged: " << e.what() << "\n";
        return kDiverged;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kIo;
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        std::cerr << "error: " << msg << "\n";
        return msg.rfind("cannot ", 0) == 0 || msg.rfind("write failed", 0) == 0 ? kIo : kOther;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kOther;
    }
    return kOther;
}
