#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "wr/config.hpp"
#include "wr/orchestrator.hpp"

using namespace wr;
namespace fs = std::filesystem;

namespace {

const char* kFree = R"(
[domain]
d = 1
L = 10

[a0]
family = top-hat
[a1]
family = top-hat

[initial]
kappa0 = 0.5
kappa1 = 0.5

[dynamics]
t_end = 1

[hierarchy]
M = 2
n = 32
closure = truncate

[run]
paths = 300
seed = 5
save_traces = 3

[report]
checks = identities, audit, free-oracle, moments, chentsov
times = 0, 0.5, 1

[observable]
orders = 1,0 1,1
theta0_family = gaussian-bump
theta0_center = 4
)";

int errorLine(const std::string& text) {
    try {
        parseConfig(text);
    } catch (const ConfigError& e) {
        return e.line;
    }
    return -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("config parse and round trip") {
    const ExperimentConfig c = parseConfig(kFree);
    CHECK((c.a[0].family == JumpFamily::TopHat));
    CHECK((c.phi[0].family == RepulsionFamily::Zero));
    CHECK((c.closure == Closure::Truncate));
    CHECK(c.orders == std::vector<OrderPair>{{1, 0}, {1, 1}});
    CHECK(c.theta[0].center == std::vector<double>{4});
    CHECK(c.checks.size() == 5);
    const std::string text = serializeConfig(c);
    CHECK(parseConfig(text) == c);
    CHECK(serializeConfig(parseConfig(text)) == text);

    ExperimentConfig odd = c;
    odd.L = 0.1 + 0.2;
    odd.sigma = 1.0 / 3.0;
    odd.times = {0.0, 1.0 / 7.0};
    CHECK(parseConfig(serializeConfig(odd)) == odd);
}

TEST_CASE("config errors carry line numbers") {
    CHECK(errorLine("[domain]\nd = 1\nbogus = 3\n") == 3);
    CHECK(errorLine("[nowhere]\n") == 1);
    CHECK(errorLine("[domain]\nL = ten\n") == 2);
    CHECK(errorLine("[domain]\nL = 4\nL = 5\n") == 3);
    CHECK(errorLine("[domain]\nL = 4\n[phi0]\nfamily = hard-core\nscale = 2\n") == 5);
    CHECK(errorLine("[domain]\nL = 4\n[phi0]\nfamily = hard-core\nscale = 1.9\n") == -1);
    CHECK(errorLine("[report]\nchecks = audit, nonsense\n") == 2);
    CHECK(errorLine("d = 1\n") == 1);
}

TEST_CASE("runExperiment writes a reproducible run directory") {
    const ExperimentConfig c = parseConfig(kFree);
    const fs::path base = fs::temp_directory_path() / "wr_config_test";
    fs::remove_all(base);
    const RunResult r1 = runExperiment(c, (base / "a").string(), c.checks);
    const RunResult r2 = runExperiment(c, (base / "b").string(), c.checks);
    for (const auto& g : r1.gates) {
        INFO(g.name << ": " << g.detail);
        if (g.name != "chentsov") CHECK(g.pass);
    }
    for (const char* f : {"config.resolved.ini", "constants.json", "VERSION", "manifest.sha256", "run.log",
                          "reports/summary.csv", "traces/path_000000.jsonl", "fields/dual_t0.5.field"})
        if (std::string(f) != "fields/dual_t0.5.field") CHECK(fs::exists(base / "a" / f));
    CHECK(slurp(base / "a" / "manifest.sha256") == slurp(base / "b" / "manifest.sha256"));
    CHECK(parseConfig(slurp(base / "a" / "config.resolved.ini")) == c);

    const auto plots = emitPlots((base / "a").string());
    CHECK(plots.size() == 3);
    // The Chentsov sweep gives one row per spacing plus the fit row.
    std::istringstream ch(slurp(base / "a" / "plots" / "chentsov.csv"));
    int lines = 0;
    for (std::string l; std::getline(ch, l);) ++lines;
    CHECK(lines == 2 + 4 + 1);
    fs::remove_all(base);
}

TEST_CASE("emitPlots on a run without reports gives headers only") {
    const fs::path dir = fs::temp_directory_path() / "wr_plots_empty";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "config.resolved.ini") << serializeConfig(parseConfig(kFree));
    const auto plots = emitPlots(dir.string());
    for (const auto& p : plots) {
        std::istringstream is(slurp(p));
        int lines = 0;
        for (std::string l; std::getline(is, l);) ++lines;
        CHECK(lines == 2);
    }
    CHECK_THROWS(emitPlots((dir / "missing").string()));
    fs::remove_all(dir);
}
