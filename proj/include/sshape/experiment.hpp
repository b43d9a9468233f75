// Experiment plumbing: per-solver runs, artifact directories, comparison tables and
// duality-gap reports.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sshape/config.hpp"
#include "sshape/value_grid.hpp"

namespace sshape {

/// Analytic values at the given points when the market is complete (|rho| = 1);
/// empty otherwise.
std::optional<std::vector<double>> solution_values(const ExperimentConfig& cfg,
                                                   const std::vector<std::pair<double, double>>& points);

struct SolverRun {
    std::string solver;
    ValueGrid rows;                   // values at cfg.rows
    std::optional<ValueGrid> native;  // B-point output grid where the solver has one
    std::string report_json;          // train_report.json body
};

/// Runs one solver with the given seed; throws DivergenceError on blow-up.
SolverRun run_solver(const ExperimentConfig& cfg, const std::string& solver, std::uint64_t seed);

struct RunOptions {
    bool parallel = false;
};

/// Writes <out_dir>/<solver>/{t0_grid.csv, t0_native.csv, train_report.json} (per repeat
/// under run_<k>/ when repeats > 1, with the mean grid on top) and <out_dir>/manifest.json.
void run(const ExperimentConfig& cfg, const std::string& out_dir, const RunOptions& options = {});

/// One row per (x, r), one value column per grid, plus Solution when any grid carries it,
/// followed by "# max_abs_dev" summary lines. Grids must share abscissae.
std::string tables(const std::vector<ValueGrid>& grids);

struct DualityPoint {
    double x = 0.0;
    double r = 0.0;
    double primal = 0.0;
    double concave = 0.0;
    double dual = 0.0;
};

struct DualityReport {
    std::vector<DualityPoint> points;
    double max_concave_dual_gap = 0.0;   // max |concave - dual|
    double mean_concave_dual_gap = 0.0;
    double max_primal_concave_gap = 0.0;  // max (primal - concave), positive means ordering violated
    double max_ordering_violation = 0.0;  // max over g - g_bar and g_bar - dual, floored at 0
    bool pass = false;                    // ordering holds within tolerance
    double tolerance = 0.02;

    [[nodiscard]] std::string to_json() const;
};

DualityReport duality_report(const ValueGrid& primal, const ValueGrid& concave, const ValueGrid& dual,
                             double tolerance = 0.02);

/// Hash-listed manifest of every regular file under dir (except the manifest itself).
std::string manifest_json(const std::string& dir, const std::string& config_hash,
                          const std::vector<std::uint64_t>& seeds, double seconds);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& body);

}  // namespace sshape
