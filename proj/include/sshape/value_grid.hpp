// Time-zero output grids shared by all solvers, with CSV I/O.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sshape {

struct ValueGrid {
    std::vector<double> x;
    std::vector<double> r;
    std::vector<double> v;
    std::vector<double> pi;  // proportion of wealth in the stock
    std::vector<double> Pi;  // amount invested, pi * x
    std::optional<std::vector<double>> se;
    std::optional<std::vector<double>> v_solution;

    std::string method;
    std::uint64_t seed = 0;
    std::string config_hash;

    [[nodiscard]] std::size_t size() const { return x.size(); }
    void push(double x_i, double r_i, double v_i, double pi_i);
    /// Throws std::logic_error if columns differ in length or provenance is missing.
    void validate() const;

    /// Columns x,r,v,pi,Pi[,se][,v_solution] with 12 significant digits.
    void write_csv(const std::string& path) const;
    [[nodiscard]] std::string to_csv() const;
    static ValueGrid read_csv(const std::string& path);
};

}  // namespace sshape
