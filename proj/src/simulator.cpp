#include "wr/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "wr/parallel.hpp"

namespace wr {

namespace {

Point uniformPoint(const Domain& dom, CounterRng& rng) {
    Point p{};
    for (int k = 0; k < dom.d; ++k) p[k] = dom.L * rng.uniform();
    return dom.wrap(p);
}

bool coincides(const Configuration& g, const Point& x) {
    for (int i = 0; i < 2; ++i)
        for (const auto& p : g.type[i])
            if (p.x == x) return true;
    return false;
}

}  // namespace

Configuration samplePoissonInitial(double kappa0, double kappa1, const Domain& dom, CounterRng& rng) {
    if (kappa0 < 0 || kappa1 < 0) throw std::invalid_argument("intensities must be nonnegative");
    Configuration g;
    std::uint64_t id = 0;
    const double kappa[2] = {kappa0, kappa1};
    for (int i = 0; i < 2; ++i) {
        long n = kappa[i] > 0 ? std::poisson_distribution<long>(kappa[i] * dom.volume())(rng) : 0;
        for (long j = 0; j < n; ++j) {
            Point x = uniformPoint(dom, rng);
            while (coincides(g, x)) x = uniformPoint(dom, rng);
            g.type[i].push_back({id++, x});
        }
    }
    return g;
}

Configuration samplePoissonInhomogeneous(const std::array<std::function<double(const Point&)>, 2>& intensity,
                                         std::array<double, 2> lambdaMax, const Domain& dom, CounterRng& rng) {
    Configuration g;
    std::uint64_t id = 0;
    for (int i = 0; i < 2; ++i) {
        long n = lambdaMax[i] > 0 ? std::poisson_distribution<long>(lambdaMax[i] * dom.volume())(rng) : 0;
        for (long j = 0; j < n; ++j) {
            Point x = uniformPoint(dom, rng);
            double keep = intensity[i](x) / lambdaMax[i];
            if (keep > 1 + 1e-12) throw std::invalid_argument("intensity exceeds its declared bound");
            if (rng.uniform() < keep && !coincides(g, x)) g.type[i].push_back({id++, x});
        }
    }
    return g;
}

CellList::CellList(const Domain& dom, double radius) : dom_(dom) {
    perAxis_ = radius > 0 ? int(std::floor(dom.L / radius)) : 1;
    perAxis_ = std::clamp(perAxis_, 1, 64);
    side_ = dom.L / perAxis_;
    std::size_t total = 1;
    for (int k = 0; k < dom.d; ++k) total *= std::size_t(perAxis_);
    cells_.assign(usesCells() ? total : 1, {});
}

std::size_t CellList::cellOf(const Point& x) const {
    if (!usesCells()) return 0;
    std::size_t idx = 0;
    for (int k = 0; k < dom_.d; ++k) idx = idx * perAxis_ + std::size_t(std::min(perAxis_ - 1, int(x[k] / side_)));
    return idx;
}

void CellList::rebuild(const std::vector<Particle>& pts) {
    for (auto& c : cells_) c.clear();
    count_ = pts.size();
    for (std::size_t j = 0; j < pts.size(); ++j) cells_[cellOf(pts[j].x)].push_back(j);
}

void CellList::move(std::size_t index, const Point& from, const Point& to) {
    auto& src = cells_[cellOf(from)];
    auto it = std::find(src.begin(), src.end(), index);
    if (it == src.end()) throw InvariantViolation("cell list out of sync");
    src.erase(it);
    cells_[cellOf(to)].push_back(index);
}

bool CellList::consistent(const std::vector<Particle>& pts) const {
    std::size_t seen = 0;
    for (std::size_t c = 0; c < cells_.size(); ++c)
        for (std::size_t j : cells_[c]) {
            if (j >= pts.size() || cellOf(pts[j].x) != c) return false;
            ++seen;
        }
    return seen == pts.size();
}

SimulationState::SimulationState(const KernelSet& ks, Configuration initial, double sigma, CounterRng rng)
    : ks_(&ks), g_(std::move(initial)), sigma_(sigma), rng_(rng) {
    if (sigma < 0 || sigma > 1) throw std::invalid_argument("sigma must lie in [0, 1]");
    const double radius = std::max(ks.phi[0].cutoff(), ks.phi[1].cutoff());
    for (int i = 0; i < 2; ++i) {
        for (auto& p : g_.type[i]) p.x = ks.dom.wrap(p.x);
        counts_[i] = g_.type[i].size();
        cells_[i] = CellList(ks.dom, radius);
        cells_[i].rebuild(g_.type[i]);
    }
    if (!g_.isSimple(ks.dom)) throw InvariantViolation("initial configuration is not simple");
}

double SimulationState::envelopeRate() const {
    return counts_[0] * ks_->a[0].mass() + counts_[1] * ks_->a[1].mass();
}

double SimulationState::repulsionSum(int i, const Point& y) const {
    const RepulsionKernel& phi = ks_->phi[i];
    if (phi.isZero() && !phi.isHardCore()) return 0.0;
    const auto& opp = g_.type[1 - i];
    double s = 0;
    bool blocked = false;
    cells_[1 - i].forNear(y, [&](std::size_t j) {
        if (blocked) return;
        Point u = ks_->dom.displacement(y, opp[j].x);
        if (phi.isHardCore()) {
            if (phi.boltzmann(u) == 0.0) blocked = true;
        } else {
            s += phi(u);
        }
    });
    return blocked ? std::numeric_limits<double>::infinity() : s;
}

StepOutcome SimulationState::stepEvent(double horizon) {
    StepOutcome out{StepKind::Empty, {}};
    const double rate = envelopeRate();
    if (rate <= 0) {
        if (std::isfinite(horizon)) t_ = std::max(t_, horizon);
        return out;
    }
    const double dt = exponentialDraw(rng_, rate);
    if (t_ + dt > horizon) {
        // Memorylessness makes discarding the overshooting clock exact.
        t_ = horizon;
        out.kind = StepKind::Horizon;
        return out;
    }
    t_ += dt;
    ++tentative_;
    double u = rng_.uniform() * rate;
    const double w0 = counts_[0] * ks_->a[0].mass();
    const int i = (u < w0 || counts_[1] == 0) ? 0 : 1;
    if (i == 1) u -= w0;
    std::size_t idx = std::min(counts_[i] - 1, std::size_t(u / ks_->a[i].mass()));
    Particle& p = g_.type[i][idx];
    const Point x = p.x;
    Point y = x;
    const Point disp = ks_->a[i].sampleDisplacement(rng_);
    for (int k = 0; k < ks_->dom.d; ++k) y[k] += disp[k];
    y = ks_->dom.wrap(y);
    const double s = repulsionSum(i, y);
    const double accept = psiSigma(ks_->dom, x, sigma_) * (std::isinf(s) ? 0.0 : std::exp(-s));
    const double v = rng_.uniform();
    out.event = {t_, p.id, i, static_cast<std::uint32_t>(idx), x, y};
    if (!(v < accept)) {
        out.kind = StepKind::Rejected;
        return out;
    }
    if (coincides(g_, y)) throw InvariantViolation("jump destination coincides with an occupied point");
    if (ks_->phi[i].isHardCore())
        for (const auto& z : g_.type[1 - i])
            if (ks_->dom.dist(y, z.x) <= ks_->phi[i].scale()) throw InvariantViolation("hard-core exclusion violated");
    p.x = y;
    cells_[i].move(idx, x, y);
    ++accepted_;
    out.kind = StepKind::Accepted;
    return out;
}

void SimulationState::checkInvariants() const {
    for (int i = 0; i < 2; ++i) {
        if (g_.type[i].size() != counts_[i]) throw InvariantViolation("particle count changed");
        if (!cells_[i].consistent(g_.type[i])) throw InvariantViolation("cell list does not mirror configuration");
    }
    if (!g_.isSimple(ks_->dom)) throw InvariantViolation("configuration lost simplicity");
}

EventTrace simulatePath(const KernelSet& ks, const Configuration& g0, double tEnd, double sigma, std::uint64_t seed) {
    if (!(tEnd > 0)) throw std::invalid_argument("tEnd must be positive");
    EventTrace tr;
    tr.dom = ks.dom;
    tr.tEnd = tEnd;
    SimulationState st(ks, g0, sigma, CounterRng(seed).split(1));
    tr.initial = st.configuration();
    while (true) {
        StepOutcome o = st.stepEvent(tEnd);
        if (o.kind == StepKind::Accepted) tr.events.push_back(o.event);
        else if (o.kind != StepKind::Rejected) break;
    }
    tr.meta.seed = seed;
    tr.meta.sigma = sigma;
    tr.meta.kernels = ks.describe();
    tr.meta.constants = ks.c;
    tr.meta.tentative = st.tentative();
    tr.meta.accepted = st.accepted();
    return tr;
}

namespace {

void applyEvent(Configuration& g, const Event& e) {
    auto& block = g.type[e.type];
    if (e.index >= block.size() || block[e.index].id != e.id) throw InvariantViolation("event refers to unknown particle");
    block[e.index].x = e.to;
}

}  // namespace

Configuration sampleAt(const EventTrace& trace, double t) {
    if (t < 0 || t > trace.tEnd) throw std::out_of_range("sampleAt: time outside the trace");
    Configuration g = trace.initial;
    for (const auto& e : trace.events) {
        if (e.t > t) break;
        applyEvent(g, e);
    }
    return g;
}

Configuration finalConfiguration(const EventTrace& trace) { return sampleAt(trace, trace.tEnd); }

TraceCursor::TraceCursor(const EventTrace& trace) : trace_(&trace), g_(trace.initial) {}

const Configuration& TraceCursor::advanceTo(double t) {
    if (t < t_) throw std::invalid_argument("TraceCursor only moves forward");
    while (next_ < trace_->events.size() && trace_->events[next_].t <= t) applyEvent(g_, trace_->events[next_++]);
    t_ = t;
    return g_;
}

double TraceCursor::nextEventTime() const {
    return next_ < trace_->events.size() ? trace_->events[next_].t : std::numeric_limits<double>::infinity();
}

std::uint64_t pathSeed(std::uint64_t masterSeed, std::size_t path) { return CounterRng(masterSeed).split(path).key(); }

std::vector<EventTrace> batchSimulate(const KernelSet& ks, const InitialSampler& sampler, std::size_t nPaths,
                                      double tEnd, double sigma, std::uint64_t masterSeed, int workers) {
    if (nPaths < 1) throw std::invalid_argument("nPaths must be at least 1");
    std::vector<EventTrace> out(nPaths);
    parallelFor(
        nPaths,
        [&](std::size_t p) {
            const std::uint64_t seed = pathSeed(masterSeed, p);
            CounterRng init = CounterRng(seed).split(0);
            out[p] = simulatePath(ks, sampler(init), tEnd, sigma, seed);
        },
        workers);
    return out;
}

std::string auditTrace(const EventTrace& trace, const KernelSet* ks) {
    std::ostringstream err;
    Configuration g = trace.initial;
    if (!g.isSimple(trace.dom)) return "initial configuration not simple";
    const std::size_t n0 = g.type[0].size(), n1 = g.type[1].size();
    double last = 0;
    for (std::size_t k = 0; k < trace.events.size(); ++k) {
        const Event& e = trace.events[k];
        if (!(e.t > last) || e.t > trace.tEnd) {
            err << "event " << k << ": time not strictly increasing within [0, tEnd]";
            return err.str();
        }
        last = e.t;
        const auto& block = g.type[e.type];
        if (e.index >= block.size() || block[e.index].id != e.id || block[e.index].x != e.from) {
            err << "event " << k << ": source does not match replayed state";
            return err.str();
        }
        applyEvent(g, e);
        if (g.type[0].size() != n0 || g.type[1].size() != n1) return "particle count changed";
        if (!g.isSimple(trace.dom)) {
            err << "event " << k << ": simplicity lost";
            return err.str();
        }
        if (ks && ks->phi[e.type].isHardCore())
            for (const auto& z : g.type[1 - e.type])
                if (trace.dom.dist(e.to, z.x) <= ks->phi[e.type].scale()) {
                    err << "event " << k << ": hard-core exclusion violated";
                    return err.str();
                }
    }
    return {};
}

}  // namespace wr
