// Flat sectioned key = value experiment configs with strict key checking.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sshape/model.hpp"
#include "sshape/pinn.hpp"
#include "sshape/smp.hpp"
#include "sshape/utility.hpp"

namespace sshape {

/// Invalid config; the message carries "source:line: ..." when a line is to blame.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    MarketParams market{};
    UtilitySpec utility = UtilitySpec::power_pair(0.5, 0.5);
    pinn::Domains domains{};
    pinn::TrainConfig train{};
    double clamp_delta = 1e-6;
    smp::SmpConfig smp{};

    std::vector<std::string> solvers;  // "solution", six pinn-* names, "smp"
    std::vector<std::pair<double, double>> rows{{0.5, 1.0}, {1.0, 1.0}, {5.0, 1.0}, {1.0, 0.5}, {1.0, 5.0}};
    int grid_points = 50;  // native output grid size
    std::uint64_t seed = 1;
    int repeats = 1;
    std::string name = "experiment";

    /// Canonical key = value text of every field; hashing it identifies the run.
    [[nodiscard]] std::string canonical() const;
    [[nodiscard]] std::string hash() const;
    void validate() const;
};

ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);

/// 64-bit FNV-1a as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace sshape
