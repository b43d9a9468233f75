#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "sshape/config.hpp"

using namespace sshape;

namespace {

std::string error_of(const std::string& text) {
    try {
        parse_config(text, "t.cfg");
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("defaults") {
    const ExperimentConfig c = parse_config("");
    CHECK(c.market.alpha == 0.05);
    CHECK(c.market.theta == 0.5);
    CHECK(c.utility.u1.p == 0.5);
    CHECK(c.utility.loss_scale() == 0.5);
    CHECK(c.train.iterations == 20000);
    CHECK(c.train.learning_rate == 1e-3);
    CHECK(c.train.collocation == 1000);
    CHECK(c.smp.iterations == 1000);
    CHECK(c.smp.learning_rate == 0.01);
    CHECK(c.smp.eval_paths == 200000);
    CHECK(c.domains.dual.lo == 0.25);
    CHECK(c.rows.size() == 5);
    CHECK(c.solvers.empty());
}

TEST_CASE("parsing every section") {
    const std::string text = R"(# experiment
[market]
alpha = 0.04   # trailing comment
theta = 0.25
rho = 0
[utility]
u2 = log
u2_coef = 0.5
[domain]
y_lo = 0.2
[pinn]
hidden = 20, 30, 40
optimizer = sgd
resample = false
iterations = 10
[smp]
batch = 64
x_hi = 4
[run]
name = demo
solvers = solution, smp
rows = 1:1, 2.5:0.5
seed = 42
repeats = 3
)";
    const ExperimentConfig c = parse_config(text);
    CHECK(c.market.alpha == 0.04);
    CHECK(c.market.rho == 0.0);
    CHECK(std::holds_alternative<LogUtility>(c.utility.u2));
    CHECK(c.domains.dual.lo == 0.2);
    CHECK(c.train.hidden == std::vector<int>{20, 30, 40});
    CHECK(c.train.optimizer == nn::OptimizerKind::Sgd);
    CHECK_FALSE(c.train.resample);
    CHECK(c.train.iterations == 10);
    CHECK(c.smp.batch == 64);
    CHECK(c.smp.x_hi == 4.0);
    CHECK(c.name == "demo");
    CHECK(c.solvers == std::vector<std::string>{"solution", "smp"});
    REQUIRE(c.rows.size() == 2);
    CHECK(c.rows[1] == std::pair{2.5, 0.5});
    CHECK(c.seed == 42);
    CHECK(c.repeats == 3);
}

TEST_CASE("errors name the line") {
    CHECK(error_of("[market]\nalpha = 0.05\nbogus = 1\n").find("t.cfg:3:") == 0);
    CHECK(error_of("[nowhere]\n").find("t.cfg:1: unknown section") == 0);
    CHECK(error_of("alpha = 1\n").find("outside of a section") != std::string::npos);
    CHECK(error_of("[market]\nalpha = 1\nalpha = 2\n").find("t.cfg:3: duplicate") == 0);
    CHECK(error_of("[market]\nalpha =\n").find("empty value") != std::string::npos);
    CHECK(error_of("[market]\nalpha = 1x\n").find("t.cfg:2: bad value") == 0);
    CHECK(error_of("[market\n").find("unterminated") != std::string::npos);
    CHECK(error_of("[market]\nalpha\n").find("expected key = value") != std::string::npos);
    CHECK(error_of("[utility]\nu2 = exp\n").find("bad value") != std::string::npos);
    CHECK(error_of("[run]\nrows = 1-1\n").find("x:r") != std::string::npos);
    CHECK(error_of("[pinn]\nresample = maybe\n").find("bad value") != std::string::npos);
}

TEST_CASE("semantic validation") {
    CHECK(error_of("[market]\nsigma = 0\n").find("sigma") != std::string::npos);
    CHECK(error_of("[market]\nrho = 1.5\n").find("rho") != std::string::npos);
    CHECK(error_of("[utility]\np = 1\n") != "");
    CHECK(error_of("[run]\nsolvers = solution, magic\n").find("unknown solver") != std::string::npos);
    CHECK(error_of("[run]\nrows = 0:1\n").find("rows") != std::string::npos);
    CHECK(error_of("[run]\nrepeats = 0\n").find("repeats") != std::string::npos);
    CHECK(error_of("[domain]\nz_lo = 6\n").find("ranges") != std::string::npos);
    CHECK(error_of("[pinn]\nclamp_delta = 0\n").find("clamp_delta") != std::string::npos);
    CHECK(error_of("[pinn]\nhidden = 10, 0\n") != "");
    CHECK(error_of("[smp]\nbatch = 0\n") != "");
    CHECK(error_of("[run]\nsolvers =\n") == "");  // empty list means solution only
}

TEST_CASE("canonical form and hash") {
    const ExperimentConfig a = parse_config("[market]\ntheta = 0.25\n");
    const ExperimentConfig b = parse_config("# same thing\n[market]\ntheta=0.250\n\n");
    CHECK(a.canonical() == b.canonical());
    CHECK(a.hash() == b.hash());
    CHECK(a.hash().size() == 16);
    const ExperimentConfig c = parse_config("[market]\ntheta = 0.26\n");
    CHECK(a.hash() != c.hash());
    // canonical text parses back to the same config
    const ExperimentConfig round = parse_config(a.canonical());
    CHECK(round.canonical() == a.canonical());
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("shipped configs load") {
    const std::filesystem::path dir = std::filesystem::path(SSHAPE_SOURCE_DIR) / "configs";
    int count = 0;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() != ".cfg") continue;
        ++count;
        const ExperimentConfig c = load_config(entry.path().string());
        CHECK(c.name == entry.path().stem().string());
        CHECK(c.market.theta == 0.25);
        CHECK_FALSE(c.solvers.empty());
    }
    CHECK(count == 5);
    CHECK_THROWS_AS(load_config((dir / "missing.cfg").string()), ConfigError);
}
