#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "wr/config.hpp"
#include "wr/estimators.hpp"
#include "wr/hierarchy.hpp"

namespace wr {

struct GateResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct RunResult {
    std::string dir;
    std::vector<GateResult> gates;
    bool pass() const;
};

// Timestamped sidecar log; the only place where wall-clock time is recorded.
class RunLog {
public:
    explicit RunLog(const std::string& path, bool echo = false);
    void operator()(const std::string& msg);

private:
    std::ofstream out_;
    bool echo_;
};

// G^(m) = Π θ0(x_j) Π θ1(y_j) on the grid, for a single order m.
MultiField observableField(const ExperimentConfig& cfg, const TorusGrid& grid, OrderPair m);

struct CompareRow {
    OrderPair order;
    double t = 0;
    double dual = 0;
    double budget = 0;
    EstimateWithError mc;
    double z = 0;
    std::string error;  // non-empty when the dual value could not be produced
};

// Dual-evolved expectation of each configured order against the Monte Carlo estimate;
// z = (dual - MC) / SE.
std::vector<CompareRow> compareDualVsMC(const ExperimentConfig& cfg, const std::vector<EventTrace>& traces,
                                        const std::vector<double>& times);

// Runs the named gates and writes the run directory (traces/, fields/, reports/, manifest).
RunResult runExperiment(const ExperimentConfig& cfg, const std::string& outDir, const std::vector<std::string>& gates,
                        bool echo = false);

// Plot-ready CSVs under <runDir>/plots from the reports and fields of a completed run.
std::vector<std::string> emitPlots(const std::string& runDir);

// Hex SHA-256 of a file's bytes.
std::string sha256File(const std::string& path);

std::string versionStamp();

}  // namespace wr
