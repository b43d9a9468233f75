#include "sshape/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace sshape {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double to_double(const std::string& v) {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return d;
}

long to_long(const std::string& v) {
    std::size_t pos = 0;
    const long n = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return n;
}

bool to_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("expected true or false");
}

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string join(const std::vector<std::string>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? ", " : "") + xs[i];
    return out;
}

// Utility keys are collected flat and assembled after parsing.
struct UtilityKeys {
    double u1_coef = 1.0;
    double p = 0.5;
    std::string u2 = "power";
    double u2_coef = 0.5;

    static UtilityKeys from(const UtilitySpec& s) {
        UtilityKeys k;
        k.u1_coef = s.u1.coef;
        k.p = s.u1.p;
        if (const auto* lg = std::get_if<LogUtility>(&s.u2)) {
            k.u2 = "log";
            k.u2_coef = lg->coef;
        } else {
            k.u2_coef = std::get<PowerUtility>(s.u2).coef;
        }
        return k;
    }
    [[nodiscard]] UtilitySpec build() const {
        if (u2 == "power") return UtilitySpec::power_pair(p, u2_coef, u1_coef);
        if (u2 == "log") return UtilitySpec::log_pair(p, u2_coef, u1_coef);
        throw std::invalid_argument("u2 must be power or log");
    }
};

struct Field {
    std::string section;
    std::string key;
    std::function<void(const std::string&)> set;
    std::function<std::string()> get;
};

Field dbl(const char* sec, const char* key, double& ref) {
    return {sec, key, [&ref](const std::string& v) { ref = to_double(v); }, [&ref] { return num(ref); }};
}

template <typename I>
Field integer(const char* sec, const char* key, I& ref) {
    return {sec, key, [&ref](const std::string& v) { ref = static_cast<I>(to_long(v)); },
            [&ref] { return std::to_string(ref); }};
}

Field widths(const char* sec, const char* key, std::vector<int>& ref) {
    return {sec, key,
            [&ref](const std::string& v) {
                ref.clear();
                for (const auto& w : split_list(v)) ref.push_back(static_cast<int>(to_long(w)));
            },
            [&ref] {
                std::vector<std::string> s;
                for (int w : ref) s.push_back(std::to_string(w));
                return join(s);
            }};
}

std::vector<Field> schema(ExperimentConfig& c, UtilityKeys& u) {
    return {
        dbl("market", "alpha", c.market.alpha),
        dbl("market", "sigma", c.market.sigma),
        dbl("market", "theta", c.market.theta),
        dbl("market", "rho", c.market.rho),
        dbl("market", "a", c.market.a),
        dbl("market", "b", c.market.b),
        dbl("market", "T", c.market.T),
        dbl("market", "x0", c.market.x0),
        dbl("market", "r0", c.market.r0),
        dbl("utility", "u1_coef", u.u1_coef),
        dbl("utility", "p", u.p),
        {"utility", "u2",
         [&u](const std::string& v) {
             if (v != "power" && v != "log") throw std::invalid_argument("expected power or log");
             u.u2 = v;
         },
         [&u] { return u.u2; }},
        dbl("utility", "u2_coef", u.u2_coef),
        dbl("domain", "z_lo", c.domains.state.lo),
        dbl("domain", "z_hi", c.domains.state.hi),
        dbl("domain", "y_lo", c.domains.dual.lo),
        dbl("domain", "y_hi", c.domains.dual.hi),
        dbl("domain", "r_lo", c.domains.benchmark.lo),
        dbl("domain", "r_hi", c.domains.benchmark.hi),
        integer("pinn", "collocation", c.train.collocation),
        integer("pinn", "terminal", c.train.terminal),
        integer("pinn", "boundary", c.train.boundary),
        integer("pinn", "iterations", c.train.iterations),
        dbl("pinn", "learning_rate", c.train.learning_rate),
        dbl("pinn", "early_stop", c.train.early_stop),
        {"pinn", "resample", [&c](const std::string& v) { c.train.resample = to_bool(v); },
         [&c] { return std::string(c.train.resample ? "true" : "false"); }},
        widths("pinn", "hidden", c.train.hidden),
        dbl("pinn", "clamp_delta", c.clamp_delta),
        {"pinn", "optimizer",
         [&c](const std::string& v) {
             if (v == "adam") c.train.optimizer = nn::OptimizerKind::Adam;
             else if (v == "sgd") c.train.optimizer = nn::OptimizerKind::Sgd;
             else throw std::invalid_argument("expected adam or sgd");
         },
         [&c] { return std::string(c.train.optimizer == nn::OptimizerKind::Adam ? "adam" : "sgd"); }},
        integer("pinn", "log_every", c.train.log_every),
        integer("smp", "batch", c.smp.batch),
        integer("smp", "steps", c.smp.steps),
        integer("smp", "iterations", c.smp.iterations),
        dbl("smp", "learning_rate", c.smp.learning_rate),
        dbl("smp", "x_lo", c.smp.x_lo),
        dbl("smp", "x_hi", c.smp.x_hi),
        integer("smp", "eval_paths", c.smp.eval_paths),
        widths("smp", "hidden", c.smp.hidden),
        integer("smp", "log_every", c.smp.log_every),
        {"run", "name", [&c](const std::string& v) { c.name = v; }, [&c] { return c.name; }},
        {"run", "solvers", [&c](const std::string& v) { c.solvers = split_list(v); }, [&c] { return join(c.solvers); }},
        {"run", "rows",
         [&c](const std::string& v) {
             c.rows.clear();
             for (const auto& item : split_list(v)) {
                 const auto colon = item.find(':');
                 if (colon == std::string::npos) throw std::invalid_argument("rows are x:r pairs");
                 c.rows.emplace_back(to_double(trim(item.substr(0, colon))), to_double(trim(item.substr(colon + 1))));
             }
         },
         [&c] {
             std::vector<std::string> s;
             for (const auto& [x, r] : c.rows) s.push_back(num(x) + ":" + num(r));
             return join(s);
         }},
        integer("run", "grid_points", c.grid_points),
        integer("run", "seed", c.seed),
        integer("run", "repeats", c.repeats),
    };
}

const std::set<std::string>& known_solvers() {
    static const std::set<std::string> s{"solution",
                                         "pinn-scaled-primal",
                                         "pinn-scaled-primal-nonconcave",
                                         "pinn-scaled-dual",
                                         "pinn-general-primal",
                                         "pinn-general-primal-nonconcave",
                                         "pinn-general-dual",
                                         "smp"};
    return s;
}

}  // namespace

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string ExperimentConfig::canonical() const {
    ExperimentConfig copy = *this;
    UtilityKeys u = UtilityKeys::from(utility);
    std::ostringstream out;
    std::string section;
    for (const Field& f : schema(copy, u)) {
        if (f.section != section) {
            section = f.section;
            out << "[" << section << "]\n";
        }
        out << f.key << " = " << f.get() << "\n";
    }
    return out.str();
}

std::string ExperimentConfig::hash() const { return fnv1a_hex(canonical()); }

void ExperimentConfig::validate() const {
    market.validate();
    utility.validate();
    train.validate();
    smp.validate();
    if (!(clamp_delta > 0.0)) throw std::invalid_argument("clamp_delta must be > 0");
    for (const pinn::Interval& iv : {domains.state, domains.dual, domains.benchmark})
        if (!(iv.lo > 0.0 && iv.hi > iv.lo)) throw std::invalid_argument("sampling ranges need 0 < lo < hi");
    for (const auto& s : solvers)
        if (!known_solvers().count(s)) throw std::invalid_argument("unknown solver '" + s + "'");
    for (const auto& [x, r] : rows)
        if (!(x > 0.0 && r > 0.0)) throw std::invalid_argument("rows need x > 0 and r > 0");
    if (grid_points < 2) throw std::invalid_argument("grid_points must be >= 2");
    if (repeats < 1) throw std::invalid_argument("repeats must be >= 1");
    if (name.empty()) throw std::invalid_argument("name must be non-empty");
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
    ExperimentConfig cfg;
    UtilityKeys u = UtilityKeys::from(cfg.utility);
    const std::vector<Field> fields = schema(cfg, u);
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    auto fail = [&](const std::string& msg) {
        throw ConfigError(source + ":" + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++lineno;
        const auto hashpos = line.find('#');
        if (hashpos != std::string::npos) line.erase(hashpos);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail("unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (std::none_of(fields.begin(), fields.end(), [&](const Field& f) { return f.section == section; }))
                fail("unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail("expected key = value");
        if (section.empty()) fail("key outside of a section");
        const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        auto it = std::find_if(fields.begin(), fields.end(),
                               [&](const Field& f) { return f.section == section && f.key == key; });
        if (it == fields.end()) fail("unknown key '" + key + "' in [" + section + "]");
        if (!seen.insert(section + "." + key).second) fail("duplicate key '" + key + "'");
        if (value.empty() && key != "solvers") fail("empty value for '" + key + "'");
        try {
            it->set(value);
        } catch (const std::exception& e) {
            fail("bad value for '" + key + "': " + e.what());
        }
    }
    try {
        cfg.utility = u.build();
        cfg.validate();
    } catch (const std::exception& e) {
        throw ConfigError(source + ": " + e.what());
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

}  // namespace sshape
