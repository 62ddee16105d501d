#include "wr/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace wr {

TorusGrid::TorusGrid(const Domain& dom, int n) : dom_(dom), n_(n) {
    if (n < 2) throw std::invalid_argument("grid needs at least 2 nodes per axis");
    nodes_ = 1;
    for (int k = 0; k < dom.d; ++k) nodes_ *= std::size_t(n);
    h_ = dom.L / n;
    cellVol_ = std::pow(h_, dom.d);
}

Point TorusGrid::node(std::size_t j) const {
    Point p{};
    for (int k = dom_.d - 1; k >= 0; --k) {
        p[k] = double(j % n_) * h_;
        j /= n_;
    }
    return p;
}

std::vector<double> TorusGrid::interpWeights(const Point& x) const {
    // Per-axis periodic Dirichlet kernel, with the Nyquist mode split evenly for even n.
    std::vector<std::vector<double>> axis(dom_.d, std::vector<double>(n_));
    const double w = 2 * std::numbers::pi / dom_.L;
    const int kmax = (n_ % 2 == 0) ? n_ / 2 - 1 : (n_ - 1) / 2;
    for (int k = 0; k < dom_.d; ++k) {
        for (int j = 0; j < n_; ++j) {
            double u = x[k] - j * h_;
            double s = 1;
            for (int f = 1; f <= kmax; ++f) s += 2 * std::cos(w * f * u);
            if (n_ % 2 == 0) s += std::cos(w * (n_ / 2) * u);
            axis[k][j] = s / n_;
        }
    }
    std::vector<double> out(nodes_);
    for (std::size_t j = 0; j < nodes_; ++j) {
        std::size_t r = j;
        double v = 1;
        for (int k = dom_.d - 1; k >= 0; --k) {
            v *= axis[k][r % n_];
            r /= n_;
        }
        out[j] = v;
    }
    return out;
}

MultiField::MultiField(const TorusGrid& grid, int M) : grid_(grid), M_(M) {
    if (M < 0) throw std::invalid_argument("negative maximal order");
    for (const auto& m : orders(M)) data_.emplace_back(sizeOf(m), 0.0);
}

std::vector<OrderPair> MultiField::orders(int M) {
    std::vector<OrderPair> out;
    for (int s = 0; s <= M; ++s)
        for (int m1 = 0; m1 <= s; ++m1) out.push_back({s - m1, m1});
    return out;
}

std::size_t MultiField::orderIndex(OrderPair m) {
    const std::size_t s = m.total();
    return s * (s + 1) / 2 + m.m1;
}

std::size_t MultiField::sizeOf(OrderPair m) const {
    std::size_t sz = 1;
    for (int j = 0; j < m.total(); ++j) sz *= grid_.nodes();
    return sz;
}

void MultiField::setZero() {
    for (auto& v : data_) std::fill(v.begin(), v.end(), 0.0);
}

void MultiField::axpy(double a, const MultiField& x) {
    if (x.M_ != M_) throw std::invalid_argument("axpy: order mismatch");
    for (std::size_t o = 0; o < data_.size(); ++o)
        for (std::size_t j = 0; j < data_[o].size(); ++j) data_[o][j] += a * x.data_[o][j];
}

MultiField& MultiField::operator*=(double a) {
    for (auto& v : data_)
        for (double& e : v) e *= a;
    return *this;
}

double MultiField::maxAbs(OrderPair m) const {
    double s = 0;
    for (double v : at(m)) s = std::max(s, std::abs(v));
    return s;
}

bool MultiField::isZero(OrderPair m) const {
    return std::all_of(at(m).begin(), at(m).end(), [](double v) { return v == 0.0; });
}

void decodeIndex(std::size_t idx, std::size_t N, int len, std::size_t* out) {
    for (int j = len - 1; j >= 0; --j) {
        out[j] = idx % N;
        idx /= N;
    }
}

double MultiField::symmetryDefect() const {
    const std::size_t N = grid_.nodes();
    double worst = 0;
    std::vector<std::size_t> dig(M_ + 1);
    for (const auto& m : orders(M_)) {
        const auto& f = at(m);
        const int len = m.total();
        for (std::size_t idx = 0; idx < f.size(); ++idx) {
            decodeIndex(idx, N, len, dig.data());
            for (int s = 0; s + 1 < len; ++s) {
                if (s + 1 == m.m0) continue;  // slots s and s+1 straddle the type boundary
                std::swap(dig[s], dig[s + 1]);
                std::size_t j = 0;
                for (int q = 0; q < len; ++q) j = j * N + dig[q];
                std::swap(dig[s], dig[s + 1]);
                worst = std::max(worst, std::abs(f[idx] - f[j]));
            }
        }
    }
    return worst;
}

void MultiField::fill(OrderPair m,
                      const std::function<double(const std::vector<Point>&, const std::vector<Point>&)>& fn) {
    auto& f = at(m);
    const std::size_t N = grid_.nodes();
    std::vector<std::size_t> dig(m.total());
    std::vector<Point> x0(m.m0), x1(m.m1);
    for (std::size_t idx = 0; idx < f.size(); ++idx) {
        decodeIndex(idx, N, m.total(), dig.data());
        for (int j = 0; j < m.m0; ++j) x0[j] = grid_.node(dig[j]);
        for (int j = 0; j < m.m1; ++j) x1[j] = grid_.node(dig[m.m0 + j]);
        f[idx] = fn(x0, x1);
    }
}

double factorial(int n) { return std::tgamma(n + 1.0); }

namespace {

// Contract the leading slot of T (rank r) against weight vector w.
std::vector<double> contractLead(const std::vector<double>& T, const std::vector<double>& w, std::size_t N) {
    const std::size_t rest = T.size() / N;
    std::vector<double> out(rest, 0.0);
    for (std::size_t j = 0; j < N; ++j) {
        const double wj = w[j];
        if (wj == 0.0) continue;
        const double* src = T.data() + j * rest;
        for (std::size_t r = 0; r < rest; ++r) out[r] += wj * src[r];
    }
    return out;
}

double contractTuples(const std::vector<double>& T, OrderPair m, int slot,
                      const std::array<std::vector<std::vector<double>>, 2>& W,
                      std::array<std::vector<char>, 2>& used, std::size_t N) {
    if (slot == m.total()) return T[0];
    const int type = slot < m.m0 ? 0 : 1;
    double s = 0;
    for (std::size_t p = 0; p < W[type].size(); ++p) {
        if (used[type][p]) continue;
        used[type][p] = 1;
        s += contractTuples(contractLead(T, W[type][p], N), m, slot + 1, W, used, N);
        used[type][p] = 0;
    }
    return s;
}

}  // namespace

double kTransform(const QuasiObservable& G, const Configuration& g) {
    const auto& grid = G.grid();
    const std::size_t N = grid.nodes();
    std::array<std::vector<std::vector<double>>, 2> W;
    for (int i = 0; i < 2; ++i)
        for (const auto& p : g.type[i]) W[i].push_back(grid.interpWeights(p.x));
    double total = 0;
    for (const auto& m : MultiField::orders(G.maxOrder())) {
        if (m.m0 > int(W[0].size()) || m.m1 > int(W[1].size())) continue;
        if (G.isZero(m)) continue;
        double work = std::pow(double(g.type[0].size()), m.m0) * std::pow(double(g.type[1].size()), m.m1);
        if (work > kTupleBudget) throw BudgetError("kTransform: tuple budget exceeded");
        std::array<std::vector<char>, 2> used{std::vector<char>(W[0].size(), 0), std::vector<char>(W[1].size(), 0)};
        total += contractTuples(G.at(m), m, 0, W, used, N) / (factorial(m.m0) * factorial(m.m1));
    }
    return total;
}

double pairKG(const MultiField& k, const MultiField& G) {
    if (k.grid().nodes() != G.grid().nodes()) throw std::invalid_argument("pairKG: grid mismatch");
    const int M = std::min(k.maxOrder(), G.maxOrder());
    const double h = k.grid().cellVolume();
    double total = 0;
    for (const auto& m : MultiField::orders(M)) {
        const auto& a = k.at(m);
        const auto& b = G.at(m);
        double s = 0;
        for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
        total += s * std::pow(h, m.total()) / (factorial(m.m0) * factorial(m.m1));
    }
    return total;
}

}  // namespace wr
