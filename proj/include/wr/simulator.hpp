#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <stdexcept>
#include <optional>
#include <string>
#include <vector>

#include "wr/geometry.hpp"
#include "wr/kernels.hpp"
#include "wr/rng.hpp"

namespace wr {

// Raised when a runtime structural assertion (simplicity, hard core, conservation) fails.
struct InvariantViolation : std::logic_error {
    using std::logic_error::logic_error;
};

struct Event {
    double t = 0;
    std::uint64_t id = 0;
    int type = 0;
    std::uint32_t index = 0;  // slot of the particle within its type block
    Point from{};
    Point to{};
};

struct TraceMeta {
    std::uint64_t seed = 0;
    double sigma = 0;
    std::string kernels;
    KernelConstants constants;
    std::uint64_t tentative = 0;
    std::uint64_t accepted = 0;
};

struct EventTrace {
    Domain dom;
    Configuration initial;
    std::vector<Event> events;
    double tEnd = 0;
    TraceMeta meta;
};

Configuration samplePoissonInitial(double kappa0, double kappa1, const Domain& dom, CounterRng& rng);

// Inhomogeneous Poisson law by thinning a homogeneous one at intensity bound lambdaMax[i].
Configuration samplePoissonInhomogeneous(const std::array<std::function<double(const Point&)>, 2>& intensity,
                                         std::array<double, 2> lambdaMax, const Domain& dom, CounterRng& rng);

// Uniform cell grid over the torus for neighbour queries within a fixed radius.
class CellList {
public:
    CellList() = default;
    CellList(const Domain& dom, double radius);
    void rebuild(const std::vector<Particle>& pts);
    void move(std::size_t index, const Point& from, const Point& to);
    // Calls f(index) for every particle possibly within `radius` of y (a superset).
    template <class F>
    void forNear(const Point& y, F&& f) const;
    bool usesCells() const { return perAxis_ >= 3; }
    bool consistent(const std::vector<Particle>& pts) const;

private:
    std::size_t cellOf(const Point& x) const;

    Domain dom_;
    int perAxis_ = 1;
    double side_ = 0;
    std::vector<std::vector<std::size_t>> cells_;
    std::size_t count_ = 0;
};

enum class StepKind { Accepted, Rejected, Horizon, Empty };

struct StepOutcome {
    StepKind kind;
    Event event;
};

class SimulationState {
public:
    SimulationState(const KernelSet& ks, Configuration initial, double sigma, CounterRng rng);

    // Draws one tentative event at the envelope rate Σ_i N_i ā_i^(0) and accepts it with
    // probability ψ_σ(x) exp(-Σ φ_i(z - y)). Tentative times beyond `horizon` are not applied.
    StepOutcome stepEvent(double horizon = std::numeric_limits<double>::infinity());

    const Configuration& configuration() const { return g_; }
    double time() const { return t_; }
    double sigma() const { return sigma_; }
    std::uint64_t tentative() const { return tentative_; }
    std::uint64_t accepted() const { return accepted_; }
    double envelopeRate() const;
    void checkInvariants() const;

private:
    double repulsionSum(int i, const Point& y) const;

    const KernelSet* ks_;
    Configuration g_;
    double sigma_;
    CounterRng rng_;
    double t_ = 0;
    std::array<std::size_t, 2> counts_{};
    std::array<CellList, 2> cells_;
    std::uint64_t tentative_ = 0;
    std::uint64_t accepted_ = 0;
};

EventTrace simulatePath(const KernelSet& ks, const Configuration& g0, double tEnd, double sigma, std::uint64_t seed);

// Right-continuous evaluation: the configuration after all events with time ≤ t.
Configuration sampleAt(const EventTrace& trace, double t);
Configuration finalConfiguration(const EventTrace& trace);

// Monotone replay for repeated evaluation at increasing times.
class TraceCursor {
public:
    explicit TraceCursor(const EventTrace& trace);
    const Configuration& advanceTo(double t);
    const Configuration& current() const { return g_; }
    // Time of the next event strictly after the current position (infinity if none).
    double nextEventTime() const;
    std::size_t position() const { return next_; }

private:
    const EventTrace* trace_;
    Configuration g_;
    std::size_t next_ = 0;
    double t_ = 0;
};

using InitialSampler = std::function<Configuration(CounterRng&)>;

// Path p uses stream split(masterSeed, p): sub-stream 0 draws the initial state, 1 drives the dynamics.
std::uint64_t pathSeed(std::uint64_t masterSeed, std::size_t path);

std::vector<EventTrace> batchSimulate(const KernelSet& ks, const InitialSampler& sampler, std::size_t nPaths,
                                      double tEnd, double sigma, std::uint64_t masterSeed, int workers = 0);

// JSON-lines trace format: one header record, then one record per event.
void writeTrace(std::ostream& os, const EventTrace& trace, PsiMode mode = PsiMode::Centered);
EventTrace readTrace(std::istream& is);
constexpr const char* kTraceSchema = "wr-trace/1";

// Exact structural checks over a trace: counts, simplicity after every event, strict time order,
// and replay consistency. Returns an empty string when all hold.
std::string auditTrace(const EventTrace& trace, const KernelSet* ks = nullptr);

template <class F>
void CellList::forNear(const Point& y, F&& f) const {
    if (!usesCells()) {
        for (std::size_t j = 0; j < count_; ++j) f(j);
        return;
    }
    std::array<int, kMaxDim> c{};
    for (int k = 0; k < dom_.d; ++k) c[k] = std::min(perAxis_ - 1, int(y[k] / side_));
    const int total = dom_.d == 1 ? 3 : (dom_.d == 2 ? 9 : 27);
    for (int j = 0; j < total; ++j) {
        int r = j;
        std::size_t idx = 0;
        for (int k = 0; k < dom_.d; ++k) {
            int off = r % 3 - 1;
            r /= 3;
            idx = idx * perAxis_ + std::size_t((c[k] + off + perAxis_) % perAxis_);
        }
        for (std::size_t p : cells_[idx]) f(p);
    }
}

}  // namespace wr
