#include "wr/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "wr/parallel.hpp"

namespace wr {

std::string toString(Closure c) {
    switch (c) {
        case Closure::Truncate: return "truncate";
        case Closure::PoissonProduct: return "poisson-product";
        case Closure::RuelleCap: return "ruelle-cap";
    }
    return "?";
}

Closure closureFromString(const std::string& s) {
    if (s == "truncate") return Closure::Truncate;
    if (s == "poisson-product") return Closure::PoissonProduct;
    if (s == "ruelle-cap") return Closure::RuelleCap;
    throw std::invalid_argument("unknown closure '" + s + "'");
}

namespace {

constexpr std::size_t kChunk = 2048;

std::vector<std::size_t> powers(std::size_t N, int upTo) {
    std::vector<std::size_t> pw(upTo + 1, 1);
    for (int r = 1; r <= upTo; ++r) pw[r] = pw[r - 1] * N;
    return pw;
}

// Runs f(begin, end) over [0, n) in fixed chunks; each chunk writes a disjoint output range.
template <class F>
void chunked(std::size_t n, F&& f) {
    const std::size_t chunks = (n + kChunk - 1) / kChunk;
    parallelFor(chunks, [&](std::size_t c) { f(c * kChunk, std::min(n, (c + 1) * kChunk)); });
}

// Contract slot `pos` of a rank-`len` tensor against vec.
std::vector<double> contractSlot(const std::vector<double>& T, int len, int pos, const double* vec, std::size_t N) {
    std::size_t post = 1;
    for (int r = pos + 1; r < len; ++r) post *= N;
    const std::size_t pre = T.size() / (post * N);
    std::vector<double> out(pre * post, 0.0);
    for (std::size_t a = 0; a < pre; ++a)
        for (std::size_t w = 0; w < N; ++w) {
            const double v = vec[w];
            if (v == 0.0) continue;
            const double* src = T.data() + (a * N + w) * post;
            double* dst = out.data() + a * post;
            for (std::size_t b = 0; b < post; ++b) dst[b] += v * src[b];
        }
    return out;
}

// Index of the difference node (k - j) per axis.
std::size_t diffIndex(std::size_t j, std::size_t k, int n, int d) {
    std::size_t idx = 0, pj = 1, pk = 1;
    std::array<std::size_t, kMaxDim> dj{}, dk{};
    for (int a = d - 1; a >= 0; --a) {
        dj[a] = (j / pj) % n;
        dk[a] = (k / pk) % n;
        pj *= n;
        pk *= n;
    }
    for (int a = 0; a < d; ++a) idx = idx * n + (dk[a] + n - dj[a]) % n;
    return idx;
}

std::array<int, kMaxDim> signedFreq(std::size_t f, int n, int d) {
    std::array<int, kMaxDim> out{};
    for (int a = d - 1; a >= 0; --a) {
        int v = int(f % n);
        f /= n;
        out[a] = v >= n / 2 + (n % 2) ? v - n : v;
    }
    return out;
}

double freqNorm(const std::array<int, kMaxDim>& f, int d, double L) {
    double s = 0;
    for (int a = 0; a < d; ++a) s += double(f[a]) * f[a];
    return 2 * std::numbers::pi * std::sqrt(s) / L;
}

}  // namespace

CorrelationField poissonField(const TorusGrid& grid, int M, double kappa0, double kappa1) {
    CorrelationField f{MultiField(grid, M), 0.0};
    for (const auto& m : MultiField::orders(M)) {
        const double v = std::pow(kappa0, m.m0) * std::pow(kappa1, m.m1);
        std::fill(f.k.at(m).begin(), f.k.at(m).end(), v);
    }
    const double kmax = std::max(kappa0, kappa1);
    f.theta = kmax > 0 ? std::log(kmax) : 0.0;
    return f;
}

CorrelationField poissonField(const TorusGrid& grid, int M, const ScalarFn& rho0, const ScalarFn& rho1) {
    CorrelationField f{MultiField(grid, M), 0.0};
    std::vector<double> r0(grid.nodes()), r1(grid.nodes());
    double kmax = 0;
    for (std::size_t j = 0; j < grid.nodes(); ++j) {
        r0[j] = rho0(grid.node(j));
        r1[j] = rho1(grid.node(j));
        kmax = std::max({kmax, r0[j], r1[j]});
    }
    const std::size_t N = grid.nodes();
    for (const auto& m : MultiField::orders(M)) {
        auto& v = f.k.at(m);
        std::vector<std::size_t> dig(m.total());
        for (std::size_t idx = 0; idx < v.size(); ++idx) {
            decodeIndex(idx, N, m.total(), dig.data());
            double p = 1;
            for (int s = 0; s < m.total(); ++s) p *= s < m.m0 ? r0[dig[s]] : r1[dig[s]];
            v[idx] = p;
        }
    }
    f.theta = kmax > 0 ? std::log(kmax) : 0.0;
    return f;
}

HierarchyOperators::HierarchyOperators(const KernelSet& ks, const TorusGrid& grid, double sigma)
    : ks_(&ks), grid_(grid), sigma_(sigma), N_(grid.nodes()) {
    if (sigma < 0 || sigma > 1) throw std::invalid_argument("sigma must lie in [0, 1]");
    const Domain& dom = ks.dom;
    const int d = dom.d, n = grid.n();
    const double hd = grid.cellVolume();
    psiS_.resize(N_);
    for (std::size_t j = 0; j < N_; ++j) psiS_[j] = psiSigma(dom, grid.node(j), sigma);

    std::vector<std::array<int, kMaxDim>> freqs(N_);
    for (std::size_t f = 0; f < N_; ++f) freqs[f] = signedFreq(f, n, d);
    auto phase = [&](std::size_t f, std::size_t j) {
        Point x = grid.node(j);
        double s = 0;
        for (int a = 0; a < d; ++a) s += freqs[f][a] * x[a];
        return 2 * std::numbers::pi * s / dom.L;
    };

    double tail = 0;
    for (int i = 0; i < 2; ++i) {
        // Band-limited kernel: Σ_f â(ξ_f) e^{iξ_f·u} / L^d on the node differences.
        std::vector<double> symbol(N_);
        for (std::size_t f = 0; f < N_; ++f) symbol[f] = ks.a[i].fourier(freqNorm(freqs[f], d, dom.L));
        std::vector<double> circ(N_, 0.0);
        for (std::size_t j = 0; j < N_; ++j) {
            double s = 0;
            for (std::size_t f = 0; f < N_; ++f) s += symbol[f] * std::cos(phase(f, j));
            circ[j] = s * hd / dom.volume();
        }
        A_[i].resize(N_ * N_);
        for (std::size_t j = 0; j < N_; ++j)
            for (std::size_t k = 0; k < N_; ++k) A_[i][j * N_ + k] = circ[diffIndex(j, k, n, d)];
        mass_[i] = 0;
        for (std::size_t k = 0; k < N_; ++k) mass_[i] += A_[i][k];
        if (ks.a[i].mass() > 0) {
            std::array<int, kMaxDim> half{};
            half[0] = n / 2;
            tail = std::max(tail, std::abs(ks.a[i].fourier(freqNorm(half, d, dom.L))) / ks.a[i].mass());
        }

        const RepulsionKernel& phi = ks.phi[i];
        interacting_[i] = !phi.isZero() || phi.isHardCore();
        tau_[i].assign(N_ * N_, 1.0);
        t_[i].assign(N_ * N_, 0.0);
        tl1_[i] = 0;
        if (!interacting_[i]) continue;
        std::vector<double> row(N_);
        for (std::size_t k = 0; k < N_; ++k) row[k] = phi.boltzmann(dom.displacement(grid.node(0), grid.node(k)));
        for (std::size_t y = 0; y < N_; ++y)
            for (std::size_t z = 0; z < N_; ++z) {
                const double v = row[diffIndex(y, z, n, d)];
                tau_[i][y * N_ + z] = v;
                t_[i][y * N_ + z] = v - 1.0;
            }
        for (std::size_t k = 0; k < N_; ++k) tl1_[i] += std::abs(row[k] - 1.0) * hd;
        // Aliasing indicator: Fourier mass of t above half the band.
        double total = 0, high = 0;
        for (std::size_t f = 0; f < N_; ++f) {
            double re = 0, im = 0;
            for (std::size_t k = 0; k < N_; ++k) {
                re += (row[k] - 1.0) * std::cos(phase(f, k));
                im -= (row[k] - 1.0) * std::sin(phase(f, k));
            }
            const double mag = std::hypot(re, im);
            total += mag;
            bool hi = false;
            for (int a = 0; a < d; ++a) hi = hi || std::abs(freqs[f][a]) > n / 4;
            if (hi) high += mag;
        }
        if (total > 0) tail = std::max(tail, high / total);
    }
    tail_ = tail;
}

double fieldNorm(const MultiField& k, double theta) {
    double s = 0;
    for (const auto& m : MultiField::orders(k.maxOrder())) s = std::max(s, std::exp(-theta * m.total()) * k.maxAbs(m));
    return s;
}

double quasiNorm(const MultiField& G, double theta) {
    const double h = G.grid().cellVolume();
    double s = 0;
    for (const auto& m : MultiField::orders(G.maxOrder())) {
        double a = 0;
        for (double v : G.at(m)) a += std::abs(v);
        s += std::exp(theta * m.total()) / (factorial(m.m0) * factorial(m.m1)) * a * std::pow(h, m.total());
    }
    return s;
}

double ruelleViolation(const MultiField& k, double theta) {
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& m : MultiField::orders(k.maxOrder())) {
        const double cap = std::exp(theta * m.total());
        for (double v : k.at(m)) worst = std::max({worst, -v, v - cap});
    }
    return worst;
}

namespace {

// Position of the last slot of block o within order m's index layout.
int lastSlotOf(OrderPair m, int o) { return o == 0 ? m.m0 - 1 : m.total() - 1; }

// Ruelle-cap half-width of Υ at order q for mover type i.
double ruelleRadius(const HierarchyOperators& ops, int i, OrderPair q, int M, int nMax, double theta) {
    double r = 0;
    for (int s = 1; s <= nMax; ++s)
        if (q.total() + s > M) r += std::exp(theta * (q.total() + s)) * std::pow(ops.tL1(i), s) / factorial(s);
    return r;
}

// Mean one-point density integral c_y = ∫ ρ_o(w) t^i_y(w) dw for every node y.
std::vector<double> closureWeights(const HierarchyOperators& ops, const MultiField& base, int i) {
    const std::size_t N = ops.nodes();
    const int o = 1 - i;
    std::vector<double> c(N, 0.0);
    if (base.maxOrder() < 1) return c;
    const auto& rho = base.at(o == 0 ? OrderPair{1, 0} : OrderPair{0, 1});
    const double hd = ops.grid().cellVolume();
    for (std::size_t y = 0; y < N; ++y) {
        const double* t = ops.tRow(i, y);
        double s = 0;
        for (std::size_t w = 0; w < N; ++w) s += rho[w] * t[w];
        c[y] = s * hd;
    }
    return c;
}

// U[y * size + J] = (Υ^i_y k)^(q)(J) for all nodes y.
std::vector<double> upsilonAll(const HierarchyOperators& ops, const MultiField& k, const MultiField& base, int i,
                               OrderPair q, int nMax, Closure closure) {
    const std::size_t N = ops.nodes();
    const int M = k.maxOrder();
    const int o = 1 - i;
    const std::size_t size = k.sizeOf(q);
    const double hd = ops.grid().cellVolume();
    std::vector<double> U(N * size);
    std::vector<double> cy;
    if (closure == Closure::PoissonProduct) cy = closureWeights(ops, base, i);
    parallelFor(N, [&](std::size_t y) {
        double* u = U.data() + y * size;
        const auto& kq = k.at(q);
        std::copy(kq.begin(), kq.end(), u);
        const double* t = ops.tRow(i, y);
        for (int s = 1; s <= nMax; ++s) {
            const double w = std::pow(hd, s) / factorial(s);
            if (q.total() + s <= M) {
                OrderPair full = q;
                (o == 0 ? full.m0 : full.m1) += s;
                std::vector<double> T = k.at(full);
                OrderPair cur = full;
                for (int r = 0; r < s; ++r) {
                    T = contractSlot(T, cur.total(), lastSlotOf(cur, o), t, N);
                    (o == 0 ? cur.m0 : cur.m1) -= 1;
                }
                for (std::size_t J = 0; J < size; ++J) u[J] += w * T[J];
            } else if (closure == Closure::PoissonProduct && M >= 1) {
                const double f = std::pow(cy[y], s) / factorial(s);
                for (std::size_t J = 0; J < size; ++J) u[J] += f * kq[J];
            }
        }
    });
    return U;
}

MultiField generatorImpl(const HierarchyOperators& ops, const MultiField& k, const MultiField& base,
                         const HierarchyParams& p, double theta, double* closureRadius) {
    const std::size_t N = ops.nodes();
    const int M = k.maxOrder();
    MultiField out(k.grid(), M);
    const auto pw = powers(N, M);
    double radius = 0;
    std::array<double, 2> arow{};
    for (int i = 0; i < 2; ++i) {
        const double* A = ops.jumpRow(i, 0);
        for (std::size_t y = 0; y < N; ++y) arow[i] += std::abs(A[y]);
    }
    for (const auto& q : MultiField::orders(M)) {
        if (q.total() == 0) continue;
        auto& dst = out.at(q);
        const auto& kq = k.at(q);
        const int len = q.total();
        const std::size_t size = dst.size();
        double rq = 0;
        for (int i = 0; i < 2; ++i) {
            if (q[i] == 0 || ops.jumpMass(i) == 0.0) continue;
            const int o = 1 - i;
            const bool inter = ops.interacting(i);
            std::vector<double> U;
            if (inter) U = upsilonAll(ops, k, base, i, q, p.nMax, p.closure);
            if (inter && p.closure == Closure::RuelleCap)
                rq += q[i] * 2 * arow[i] * ruelleRadius(ops, i, q, M, p.nMax, theta);
            const int firstI = i == 0 ? 0 : q.m0;
            const int firstO = o == 0 ? 0 : q.m0;
            const int qo = q[o];
            const double mass = ops.jumpMass(i);
            chunked(size, [&](std::size_t begin, std::size_t end) {
                std::vector<std::size_t> dig(len);
                for (std::size_t J = begin; J < end; ++J) {
                    decodeIndex(J, N, len, dig.data());
                    double acc = 0;
                    for (int s = firstI; s < firstI + q[i]; ++s) {
                        const std::size_t xj = dig[s];
                        const std::size_t stride = pw[len - 1 - s];
                        const std::size_t base0 = J - xj * stride;
                        const double* A = ops.jumpRow(i, xj);
                        if (!inter) {
                            double g = 0;
                            for (std::size_t x = 0; x < N; ++x) g += A[x] * ops.psiS(x) * kq[base0 + x * stride];
                            acc += g - ops.psiS(xj) * mass * kq[J];
                            continue;
                        }
                        const double* Uy = U.data() + xj * size;
                        double g = 0;
                        for (std::size_t x = 0; x < N; ++x) g += A[x] * ops.psiS(x) * Uy[base0 + x * stride];
                        const double* tauX = ops.tauRow(i, xj);
                        for (int r = firstO; r < firstO + qo; ++r) g *= tauX[dig[r]];
                        double l = 0;
                        for (std::size_t y = 0; y < N; ++y) {
                            const double* tauY = ops.tauRow(i, y);
                            double w = A[y];
                            for (int r = firstO; r < firstO + qo; ++r) w *= tauY[dig[r]];
                            l += w * U[y * size + J];
                        }
                        acc += g - ops.psiS(xj) * l;
                    }
                    dst[J] += acc;
                }
            });
        }
        radius = std::max(radius, std::exp(-theta * q.total()) * rq);
    }
    if (closureRadius) *closureRadius = radius;
    return out;
}

}  // namespace

double upsilonApply(const HierarchyOperators& ops, const MultiField& k, std::size_t y, int i, OrderPair m,
                    std::size_t idx, int nMax, Closure closure, double theta, double* radius) {
    if (nMax < 0) throw std::invalid_argument("nMax must be nonnegative");
    const std::size_t N = ops.nodes();
    const int M = k.maxOrder();
    const int o = 1 - i;
    const double hd = ops.grid().cellVolume();
    const double* t = ops.tRow(i, y);
    double value = k.at(m)[idx];
    double rad = 0;
    std::vector<double> cy;
    for (int s = 1; s <= nMax; ++s) {
        if (!ops.interacting(i)) break;
        const double w = std::pow(hd, s) / factorial(s);
        if (m.total() + s <= M) {
            OrderPair full = m;
            (o == 0 ? full.m0 : full.m1) += s;
            // Embed idx into the larger layout with the s extra slots at the end of block o.
            std::vector<std::size_t> dig(m.total());
            decodeIndex(idx, N, m.total(), dig.data());
            const int insertAt = o == 0 ? m.m0 : m.total();
            std::vector<std::size_t> big(full.total());
            double sum = 0;
            std::vector<std::size_t> wv(s, 0);
            while (true) {
                int pos = 0;
                for (int r = 0; r < insertAt; ++r) big[pos++] = dig[r];
                for (int r = 0; r < s; ++r) big[pos++] = wv[r];
                for (int r = insertAt; r < m.total(); ++r) big[pos++] = dig[r];
                std::size_t J = 0;
                for (int r = 0; r < full.total(); ++r) J = J * N + big[r];
                double prod = 1;
                for (int r = 0; r < s; ++r) prod *= t[wv[r]];
                sum += prod * k.at(full)[J];
                int r = s - 1;
                while (r >= 0 && ++wv[r] == N) wv[r--] = 0;
                if (r < 0) break;
            }
            value += w * sum;
        } else if (closure == Closure::PoissonProduct && M >= 1) {
            if (cy.empty()) cy = closureWeights(ops, k, i);
            value += std::pow(cy[y], s) / factorial(s) * k.at(m)[idx];
        } else if (closure == Closure::RuelleCap) {
            rad += std::exp(theta * (m.total() + s)) * std::pow(ops.tL1(i), s) / factorial(s);
        }
    }
    if (radius) *radius = rad;
    return value;
}

MultiField forwardGenerator(const HierarchyOperators& ops, const MultiField& k, const HierarchyParams& p, double theta,
                            double* closureRadius) {
    return generatorImpl(ops, k, k, p, theta, closureRadius);
}

MultiField dualGenerator(const HierarchyOperators& ops, const MultiField& G) {
    const std::size_t N = ops.nodes();
    const int M = G.maxOrder();
    MultiField out(G.grid(), M);
    const auto pw = powers(N, M);
    for (const auto& m : MultiField::orders(M)) {
        if (m.total() == 0) continue;
        auto& dst = out.at(m);
        const int len = m.total();
        for (int i = 0; i < 2; ++i) {
            if (m[i] == 0 || ops.jumpMass(i) == 0.0) continue;
            const int o = 1 - i;
            const bool inter = ops.interacting(i);
            const int firstI = i == 0 ? 0 : m.m0;
            const int firstO = o == 0 ? 0 : m.m0;
            const int mo = m[o];
            const int masks = inter ? 1 << mo : 1;
            const double mass = ops.jumpMass(i);
            chunked(dst.size(), [&](std::size_t begin, std::size_t end) {
                std::vector<std::size_t> dig(len), red(len);
                std::vector<const double*> src(masks);
                std::vector<std::size_t> base(masks), stride(masks), self(masks);
                std::vector<double> tv(mo), uv(mo);
                for (std::size_t I = begin; I < end; ++I) {
                    decodeIndex(I, N, len, dig.data());
                    double acc = 0;
                    for (int s = firstI; s < firstI + m[i]; ++s) {
                        const std::size_t xj = dig[s];
                        const double* A = ops.jumpRow(i, xj);
                        if (!inter) {
                            const auto& g = G.at(m);
                            const std::size_t st = pw[len - 1 - s];
                            const std::size_t b = I - xj * st;
                            double sum = 0;
                            for (std::size_t y = 0; y < N; ++y) sum += A[y] * g[b + y * st];
                            acc += ops.psiS(xj) * (sum - mass * g[I]);
                            continue;
                        }
                        // For each subset ξ of the opposite block: the reduced index with ξ removed.
                        for (int mask = 0; mask < masks; ++mask) {
                            OrderPair mr = m;
                            int rl = 0, sPos = -1;
                            for (int r = 0; r < len; ++r) {
                                const bool inO = r >= firstO && r < firstO + mo;
                                if (inO && (mask >> (r - firstO) & 1)) continue;
                                if (r == s) sPos = rl;
                                red[rl++] = dig[r];
                            }
                            (o == 0 ? mr.m0 : mr.m1) -= __builtin_popcount(unsigned(mask));
                            std::size_t J = 0;
                            for (int r = 0; r < rl; ++r) J = J * N + red[r];
                            src[mask] = G.at(mr).data();
                            stride[mask] = pw[rl - 1 - sPos];
                            self[mask] = J;
                            base[mask] = J - xj * stride[mask];
                        }
                        double sum = 0;
                        for (std::size_t y = 0; y < N; ++y) {
                            const double* tauY = ops.tauRow(i, y);
                            const double* tY = ops.tRow(i, y);
                            for (int r = 0; r < mo; ++r) {
                                uv[r] = tauY[dig[firstO + r]];
                                tv[r] = tY[dig[firstO + r]];
                            }
                            double inner = 0;
                            for (int mask = 0; mask < masks; ++mask) {
                                double w = 1;
                                for (int r = 0; r < mo; ++r) w *= (mask >> r & 1) ? tv[r] : uv[r];
                                if (w == 0.0) continue;
                                inner += w * (src[mask][base[mask] + y * stride[mask]] - src[mask][self[mask]]);
                            }
                            sum += A[y] * inner;
                        }
                        acc += ops.psiS(xj) * sum;
                    }
                    dst[I] += acc;
                }
            });
        }
    }
    return out;
}

SubStep plannedStep(const KernelConstants& c, double theta, const HierarchyParams& p) {
    SubStep s{0, p.stepCap, theta, theta, std::numeric_limits<double>::infinity(), 0, 0};
    if (!(c.alpha > 0)) return s;
    if (c.phiBar > 0) {
        const TStar ts = tStar(c, theta);
        s.thetaPrime = theta + ts.delta;
        s.horizon = ts.T;
    } else {
        s.thetaPrime = theta + 1;
    }
    s.h = std::min(p.safety * s.horizon, p.stepCap);
    return s;
}

namespace {

struct SeriesOut {
    MultiField sum;
    int terms = 0;
    double remainder = 0;
    double firstRatio = 0;
    bool converged = true;
};

template <class Apply, class Norm>
SeriesOut runSeries(const MultiField& x0, double h, const HierarchyParams& p, Apply apply, Norm norm) {
    SeriesOut out{x0};
    MultiField term = x0;
    double prev = norm(term);
    const double n0 = prev;
    if (h == 0.0 || n0 == 0.0) return out;
    for (int n = 1; n <= p.termCap; ++n) {
        term = apply(term);
        term *= h / n;
        out.sum.axpy(1.0, term);
        out.terms = n;
        const double cur = norm(term);
        if (n == 1) out.firstRatio = cur / (h * n0);
        const double r = prev > 0 ? cur / prev : 0.0;
        if (cur <= p.tol * norm(out.sum) || cur == 0.0) {
            out.remainder = r < 1 ? cur * r / (1 - r) : cur;
            return out;
        }
        prev = cur;
        if (n == p.termCap) {
            out.converged = false;
            out.remainder = r < 1 ? cur * r / (1 - r) : std::numeric_limits<double>::infinity();
        }
    }
    return out;
}

void checkHorizon(const KernelConstants& c, double theta, double h, const HierarchyParams& p) {
    const SubStep plan = plannedStep(c, theta, p);
    if (h > plan.h * (1 + 1e-12)) {
        std::ostringstream os;
        os << "series step " << h << " exceeds the admissible horizon " << plan.h << " at theta=" << theta;
        throw HorizonError(os.str());
    }
}

}  // namespace

EvolutionReport seriesForward(const HierarchyOperators& ops, const CorrelationField& k0, double h,
                              const HierarchyParams& p) {
    const KernelConstants& c = ops.kernels().c;
    checkHorizon(c, k0.theta, h, p);
    const SubStep plan = plannedStep(c, k0.theta, p);
    double rad0 = 0;
    const MultiField& base = k0.k;
    auto apply = [&](const MultiField& x) { return generatorImpl(ops, x, base, p, k0.theta, nullptr); };
    auto norm = [&](const MultiField& x) { return fieldNorm(x, k0.theta); };
    if (p.closure == Closure::RuelleCap) generatorImpl(ops, k0.k, base, p, k0.theta, &rad0);
    SeriesOut s = runSeries(k0.k, h, p, apply, norm);
    EvolutionReport rep;
    rep.field = std::move(s.sum);
    rep.theta = k0.theta + c.alpha * h;
    rep.remainder = s.remainder;
    rep.converged = s.converged;
    rep.closureRadius = h * rad0 * std::exp(h * s.firstRatio);
    rep.ledger.push_back({0, h, k0.theta, plan.thetaPrime, plan.horizon, s.terms, s.remainder});
    return rep;
}

EvolutionReport seriesDual(const HierarchyOperators& ops, const MultiField& G0, double h, double theta,
                           const HierarchyParams& p) {
    const KernelConstants& c = ops.kernels().c;
    checkHorizon(c, theta, h, p);
    const SubStep plan = plannedStep(c, theta, p);
    auto apply = [&](const MultiField& x) { return dualGenerator(ops, x); };
    auto norm = [&](const MultiField& x) { return quasiNorm(x, p.theta0); };
    SeriesOut s = runSeries(G0, h, p, apply, norm);
    EvolutionReport rep;
    rep.field = std::move(s.sum);
    rep.theta = theta + c.alpha * h;
    rep.remainder = s.remainder;
    rep.converged = s.converged;
    rep.ledger.push_back({0, h, theta, plan.thetaPrime, plan.horizon, s.terms, s.remainder});
    return rep;
}

EvolutionReport evolveForward(const HierarchyOperators& ops, const CorrelationField& k0, double t,
                              const HierarchyParams& p) {
    if (t < 0) throw std::invalid_argument("evolveForward: negative time");
    EvolutionReport rep;
    rep.field = k0.k;
    rep.theta = k0.theta;
    CorrelationField cur = k0;
    double done = 0;
    while (done < t) {
        const SubStep plan = plannedStep(ops.kernels().c, cur.theta, p);
        const double h = std::min(plan.h, t - done);
        EvolutionReport step = seriesForward(ops, cur, h, p);
        step.ledger[0].t0 = done;
        rep.ledger.push_back(step.ledger[0]);
        rep.remainder += step.remainder;
        rep.closureRadius += step.closureRadius;
        rep.converged = rep.converged && step.converged;
        cur.k = std::move(step.field);
        cur.theta = step.theta;
        done = (t - done - h <= 1e-15 * t) ? t : done + h;
    }
    rep.field = std::move(cur.k);
    rep.theta = cur.theta;
    return rep;
}

std::vector<EvolutionReport> evolveDualGrid(const HierarchyOperators& ops, const MultiField& G0,
                                            const std::vector<double>& times, const HierarchyParams& p) {
    std::vector<EvolutionReport> out;
    MultiField G = G0;
    double theta = p.theta0, done = 0, remainder = 0;
    bool converged = true;
    std::vector<SubStep> ledger;
    for (double t : times) {
        if (t < done) throw std::invalid_argument("evolveDualGrid: times must be nondecreasing");
        while (done < t) {
            const SubStep plan = plannedStep(ops.kernels().c, theta, p);
            const double h = std::min(plan.h, t - done);
            EvolutionReport step = seriesDual(ops, G, h, theta, p);
            step.ledger[0].t0 = done;
            ledger.push_back(step.ledger[0]);
            remainder += step.remainder;
            converged = converged && step.converged;
            G = std::move(step.field);
            theta = step.theta;
            done = (t - done - h <= 1e-15 * t) ? t : done + h;
        }
        EvolutionReport rep;
        rep.field = G;
        rep.theta = theta;
        rep.remainder = remainder;
        rep.converged = converged;
        rep.ledger = ledger;
        out.push_back(std::move(rep));
    }
    return out;
}

EvolutionReport evolveDual(const HierarchyOperators& ops, const MultiField& G0, double t, const HierarchyParams& p) {
    if (t < 0) throw std::invalid_argument("evolveDual: negative time");
    return evolveDualGrid(ops, G0, {t}, p).front();
}

DualExpectation pairWithBudget(const HierarchyOperators& ops, const CorrelationField& k0, const EvolutionReport& dual) {
    DualExpectation e;
    const MultiField& G = dual.field;
    e.value = pairKG(k0.k, G);
    const double kn = fieldNorm(k0.k, k0.theta);
    e.seriesRemainder = kn * dual.remainder;
    e.quadrature = ops.quadratureTail() * kn * quasiNorm(G, k0.theta);
    // Top stored order's contribution, scaled by one more interaction factor.
    const int M = G.maxOrder();
    MultiField top(G.grid(), M);
    for (const auto& m : MultiField::orders(M))
        if (m.total() == M) top.at(m) = G.at(m);
    const double tmax = std::max(ops.tL1(0), ops.tL1(1));
    e.truncation = std::abs(pairKG(k0.k, top)) * std::exp(k0.theta) * tmax;
    return e;
}

DualExpectation expectationViaDual(const HierarchyOperators& ops, const CorrelationField& k0, const MultiField& G,
                                   double t, const HierarchyParams& p) {
    HierarchyParams q = p;
    q.theta0 = k0.theta;
    return pairWithBudget(ops, k0, evolveDual(ops, G, t, q));
}

FreeSpectralSolution::FreeSpectralSolution(const TorusGrid& grid, const JumpKernel& a, const std::vector<double>& f0)
    : grid_(grid) {
    const Domain& dom = grid.domain();
    const std::size_t N = grid.nodes();
    if (f0.size() != N) throw std::invalid_argument("FreeSpectralSolution: size mismatch");
    const double a0 = a.fourier(0.0);
    for (std::size_t f = 0; f < N; ++f) {
        auto fr = signedFreq(f, grid.n(), dom.d);
        std::complex<double> c = 0;
        for (std::size_t j = 0; j < N; ++j) {
            Point x = grid.node(j);
            double ph = 0;
            for (int k = 0; k < dom.d; ++k) ph += fr[k] * x[k];
            c += f0[j] * std::polar(1.0, -2 * std::numbers::pi * ph / dom.L);
        }
        coef_.push_back(c / double(N));
        freq_.push_back(fr);
        symbol_.push_back(a.fourier(freqNorm(fr, dom.d, dom.L)) - a0);
    }
}

double FreeSpectralSolution::operator()(const Point& x, double t) const {
    const Domain& dom = grid_.domain();
    std::complex<double> s = 0;
    for (std::size_t f = 0; f < coef_.size(); ++f) {
        double ph = 0;
        for (int k = 0; k < dom.d; ++k) ph += freq_[f][k] * x[k];
        s += coef_[f] * std::exp(t * symbol_[f]) * std::polar(1.0, 2 * std::numbers::pi * ph / dom.L);
    }
    return s.real();
}

std::vector<double> FreeSpectralSolution::atNodes(double t) const {
    std::vector<double> out(grid_.nodes());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = (*this)(grid_.node(j), t);
    return out;
}

void writeField(std::ostream& os, const MultiField& k, double theta, const std::string& label) {
    const auto& g = k.grid();
    os.precision(17);
    os << "wr-field/1 label=" << label << " d=" << g.domain().d << " L=" << g.domain().L << " n=" << g.n()
       << " M=" << k.maxOrder() << " theta=" << theta << "\n";
    for (const auto& m : MultiField::orders(k.maxOrder())) {
        const auto& v = k.at(m);
        os.write(reinterpret_cast<const char*>(v.data()), std::streamsize(v.size() * sizeof(double)));
    }
}

MultiField readField(std::istream& is, const Domain& dom, double* theta, std::string* label) {
    std::string header;
    if (!std::getline(is, header)) throw std::runtime_error("field: missing header");
    std::istringstream hs(header);
    std::string tag, tok;
    hs >> tag;
    if (tag != "wr-field/1") throw std::runtime_error("field: unsupported format");
    int d = 0, n = 0, M = 0;
    double L = 0, th = 0;
    std::string lab;
    while (hs >> tok) {
        auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "label") lab = val;
        else if (key == "d") d = std::stoi(val);
        else if (key == "L") L = std::stod(val);
        else if (key == "n") n = std::stoi(val);
        else if (key == "M") M = std::stoi(val);
        else if (key == "theta") th = std::stod(val);
    }
    if (d != dom.d || std::abs(L - dom.L) > 1e-12 * dom.L) throw std::runtime_error("field: domain mismatch");
    MultiField k(TorusGrid(dom, n), M);
    for (const auto& m : MultiField::orders(M)) {
        auto& v = k.at(m);
        is.read(reinterpret_cast<char*>(v.data()), std::streamsize(v.size() * sizeof(double)));
        if (!is) throw std::runtime_error("field: truncated data");
    }
    if (theta) *theta = th;
    if (label) *label = lab;
    return k;
}

}  // namespace wr
