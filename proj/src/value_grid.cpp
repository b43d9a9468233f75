#include "sshape/value_grid.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sshape {

namespace {

std::string fmt12(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(item);
    return out;
}

}  // namespace

void ValueGrid::push(double x_i, double r_i, double v_i, double pi_i) {
    x.push_back(x_i);
    r.push_back(r_i);
    v.push_back(v_i);
    pi.push_back(pi_i);
    Pi.push_back(pi_i * x_i);
}

void ValueGrid::validate() const {
    const std::size_t n = x.size();
    if (r.size() != n || v.size() != n || pi.size() != n || Pi.size() != n || (se && se->size() != n) ||
        (v_solution && v_solution->size() != n))
        throw std::logic_error("ValueGrid: columns differ in length");
    if (method.empty() || config_hash.empty()) throw std::logic_error("ValueGrid: provenance incomplete");
}

std::string ValueGrid::to_csv() const {
    validate();
    std::ostringstream out;
    out << "# method=" << method << " seed=" << seed << " config_hash=" << config_hash << "\n";
    out << "x,r,v,pi,Pi";
    if (se) out << ",se";
    if (v_solution) out << ",v_solution";
    out << "\n";
    for (std::size_t i = 0; i < x.size(); ++i) {
        out << fmt12(x[i]) << ',' << fmt12(r[i]) << ',' << fmt12(v[i]) << ',' << fmt12(pi[i]) << ',' << fmt12(Pi[i]);
        if (se) out << ',' << fmt12((*se)[i]);
        if (v_solution) out << ',' << fmt12((*v_solution)[i]);
        out << "\n";
    }
    return out.str();
}

void ValueGrid::write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << to_csv();
}

ValueGrid ValueGrid::read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    ValueGrid grid;
    std::string line;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::stringstream ss(line.substr(1));
            std::string tok;
            while (ss >> tok) {
                const auto eq = tok.find('=');
                if (eq == std::string::npos) continue;
                const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
                if (key == "method") grid.method = val;
                if (key == "seed") grid.seed = std::stoull(val);
                if (key == "config_hash") grid.config_hash = val;
            }
            continue;
        }
        if (header.empty()) {
            header = split(line, ',');
            for (const auto& h : header) {
                if (h == "se") grid.se.emplace();
                if (h == "v_solution") grid.v_solution.emplace();
            }
            continue;
        }
        const auto cells = split(line, ',');
        if (cells.size() != header.size()) throw std::runtime_error(path + ": ragged row");
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const double val = std::stod(cells[c]);
            const std::string& h = header[c];
            if (h == "x") grid.x.push_back(val);
            else if (h == "r") grid.r.push_back(val);
            else if (h == "v") grid.v.push_back(val);
            else if (h == "pi") grid.pi.push_back(val);
            else if (h == "Pi") grid.Pi.push_back(val);
            else if (h == "se") grid.se->push_back(val);
            else if (h == "v_solution") grid.v_solution->push_back(val);
        }
    }
    return grid;
}

}  // namespace sshape
