#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "wr/geometry.hpp"

namespace wr {

// Uniform periodic node grid x_j = j h, h = L/n, per axis.
class TorusGrid {
public:
    TorusGrid() = default;
    TorusGrid(const Domain& dom, int n);

    const Domain& domain() const { return dom_; }
    int n() const { return n_; }
    std::size_t nodes() const { return nodes_; }
    double h() const { return h_; }
    double cellVolume() const { return cellVol_; }
    Point node(std::size_t j) const;
    // Trigonometric interpolation weights: f(x) ≈ Σ_j w_j f(x_j); exact at nodes.
    std::vector<double> interpWeights(const Point& x) const;

private:
    Domain dom_;
    int n_ = 0;
    std::size_t nodes_ = 0;
    double h_ = 0.0;
    double cellVol_ = 0.0;
};

// A family {F^(m)}_{|m| ≤ M} of grid functions on (grid)^{m0} x (grid)^{m1}.
// Index layout: x_1, ..., x_{m0}, y_1, ..., y_{m1}, with x_1 most significant.
class MultiField {
public:
    MultiField() = default;
    MultiField(const TorusGrid& grid, int M);

    static std::vector<OrderPair> orders(int M);
    static std::size_t orderIndex(OrderPair m);

    const TorusGrid& grid() const { return grid_; }
    int maxOrder() const { return M_; }
    std::size_t sizeOf(OrderPair m) const;
    bool has(OrderPair m) const { return m.m0 >= 0 && m.m1 >= 0 && m.total() <= M_; }
    std::vector<double>& at(OrderPair m) { return data_[orderIndex(m)]; }
    const std::vector<double>& at(OrderPair m) const { return data_[orderIndex(m)]; }

    void setZero();
    void axpy(double a, const MultiField& x);
    MultiField& operator*=(double a);
    double maxAbs(OrderPair m) const;
    bool isZero(OrderPair m) const;
    // Largest deviation under transpositions within each type block.
    double symmetryDefect() const;

    // Fill order m from a callable of (type-0 points, type-1 points).
    void fill(OrderPair m, const std::function<double(const std::vector<Point>&, const std::vector<Point>&)>& f);

private:
    TorusGrid grid_;
    int M_ = 0;
    std::vector<std::vector<double>> data_;
};

using QuasiObservable = MultiField;

// Decompose a flat multi-index into its node digits (base N).
void decodeIndex(std::size_t idx, std::size_t N, int len, std::size_t* out);

double factorial(int n);

// (KG)(γ) with G^(m) interpolated from its grid values.
double kTransform(const QuasiObservable& G, const Configuration& g);

// ⟨⟨k, G⟩⟩ = Σ_m 1/(m0! m1!) ∫ k^(m) G^(m), trapezoid product rule.
double pairKG(const MultiField& k, const MultiField& G);

}  // namespace wr
