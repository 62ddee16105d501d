#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "wr/geometry.hpp"
#include "wr/hierarchy.hpp"
#include "wr/kernels.hpp"
#include "wr/simulator.hpp"

namespace wr {

// Parse or validation failure; line is 0 when the problem is not tied to a single line.
struct ConfigError : std::runtime_error {
    ConfigError(int line, const std::string& msg);
    int line;
};

std::string toString(JumpFamily f);
JumpFamily jumpFamilyFromString(const std::string& s);
std::string toString(RepulsionFamily f);
RepulsionFamily repulsionFamilyFromString(const std::string& s);
std::string toString(ThetaFamily f);

struct JumpSpec {
    JumpFamily family = JumpFamily::Gaussian;
    double mass = 1.0;
    double scale = 1.0;
    bool operator==(const JumpSpec&) const = default;
};

struct RepulsionSpec {
    RepulsionFamily family = RepulsionFamily::Zero;
    double amp = 0.0;
    double scale = 1.0;
    bool operator==(const RepulsionSpec&) const = default;
};

// θ given by family and parameters: gaussian-bump (amp, width, center), cosine-bump (amp, radius, center),
// scaled-psi (amp).
struct ThetaSpec {
    ThetaFamily family = ThetaFamily::GaussianBump;
    double amp = 0.5;
    double width = 1.0;
    std::vector<double> center;  // empty means the box center
    bool operator==(const ThetaSpec&) const = default;
};

struct ExperimentConfig {
    // [domain]
    int d = 1;
    double L = 10.0;
    PsiMode psi = PsiMode::Centered;
    // [a0] [a1] [phi0] [phi1]
    std::array<JumpSpec, 2> a{};
    std::array<RepulsionSpec, 2> phi{};
    // [initial]
    std::string law = "poisson";  // poisson | file
    double kappa0 = 0.5;
    double kappa1 = 0.5;
    std::string file;
    // [dynamics]
    double sigma = 0.0;
    double tEnd = 1.0;
    // [hierarchy]
    int M = 2;
    int n = 32;
    int nMax = 3;
    Closure closure = Closure::PoissonProduct;
    double theta0 = 0.0;
    double safety = 0.5;
    int termCap = 80;
    // [run]
    std::uint64_t paths = 1000;
    std::uint64_t seed = 1;
    std::uint64_t saveTraces = 10;  // number of traces written to disk
    // [report]
    std::vector<std::string> checks{"audit"};
    std::vector<double> times{0.0, 0.25, 0.5};
    double chentsovCenter = 0.5;
    std::vector<double> chentsovSpacings{0.02, 0.04, 0.08, 0.16};
    std::vector<double> sigmas{1.0, 0.3, 0.1, 0.03};
    double sweepTime = 0.5;
    // [observable]
    std::vector<OrderPair> orders{{1, 0}};
    std::array<ThetaSpec, 2> theta{};

    bool operator==(const ExperimentConfig&) const = default;

    Domain domain() const;
    KernelSet kernels() const;
    HierarchyParams hierarchy() const;
    Theta makeTheta(int i) const;
    // Poisson sampler for law = poisson; for law = file the stored configuration for every path.
    InitialSampler sampler() const;
    std::string label;  // file stem, not serialized
};

ExperimentConfig parseConfig(const std::string& text);
ExperimentConfig loadConfig(const std::string& path);
// Canonical text form; parseConfig(serializeConfig(c)) == c.
std::string serializeConfig(const ExperimentConfig& c);

// Gate names accepted in [report] checks.
const std::vector<std::string>& knownChecks();

}  // namespace wr
