#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "plurima/common.hpp"

namespace plurima {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    double len() const { return hi - lo; }
};

/// Uniform cell-centered grid over a box in C^n (n in {1,2,3}).
///
/// Real axes are ordered [Re z1, Im z1, Re z2, Im z2, ...]. Each axis carries
/// `res` cells; nodes sit at cell centers, so the dual cells tile the box
/// exactly. Measures live on cells, sampled fields on nodes. Linear indices
/// run with axis 0 slowest and the last axis fastest.
class GridDomain {
  public:
    /// Build a grid. bounds has one interval per real axis (2n entries).
    /// Requires n in {1,2,3}, res >= 8, nondegenerate intervals, and equal
    /// Re/Im lengths per complex coordinate (square cells).
    static GridDomain make(int n, std::span<const Interval> bounds, int res);

    int n() const { return n_; }
    int res() const { return res_; }
    int axes() const { return 2 * n_; }
    double h(int axis) const { return h_[static_cast<std::size_t>(axis)]; }
    const Interval& bound(int axis) const { return bounds_[static_cast<std::size_t>(axis)]; }
    double cell_volume() const { return cell_vol_; }

    std::int64_t node_count() const;
    /// Nodes per axis-0 slab (= res^(axes-1)).
    std::int64_t plane_size() const;

    double coord(int axis, int i) const {
        return bounds_[static_cast<std::size_t>(axis)].lo + (i + 0.5) * h_[static_cast<std::size_t>(axis)];
    }

    void index_of(std::int64_t linear, std::span<int> idx) const;
    std::int64_t linear_of(std::span<const int> idx) const;
    CPoint point_at(std::span<const int> idx) const;
    CPoint point_linear(std::int64_t linear) const;

    /// All index components in [1, res-2] (one stencil ring inside).
    bool interior(std::span<const int> idx) const;

    /// True if the closed Euclidean ball B(x, r) lies inside the box.
    bool contains_ball(const CPoint& x, double r) const;
    bool contains_point(const CPoint& x, double margin = 0.0) const;

    /// Largest h over all axes.
    double hmax() const;

  private:
    int n_ = 0;
    int res_ = 0;
    std::array<Interval, 2 * kMaxDim> bounds_{};
    std::array<double, 2 * kMaxDim> h_{};
    double cell_vol_ = 0.0;
};

/// Convenience: box [-a,a]^(2n) in C^n.
GridDomain symmetric_grid(int n, double a, int res);

/// [OP] make_grid
GridDomain make_grid(int n, std::span<const Interval> bounds, int res);

/// Real samples on grid nodes. Values are finite wherever a stencil reads
/// them; +-inf is tolerated only in cells never consumed.
struct ScalarField {
    GridDomain dom;
    std::vector<double> v;

    static ScalarField sample(const GridDomain& g, const std::function<double(const CPoint&)>& f);
    double at(std::span<const int> idx) const { return v[static_cast<std::size_t>(dom.linear_of(idx))]; }
};

/// Packed n x n Hermitian matrix (n <= 3): real diagonal plus the upper
/// triangle in the order (0,1), (0,2), (1,2).
struct Herm {
    int n = 0;
    std::array<double, kMaxDim> d{};
    std::array<cplx, kMaxDim> o{};

    static Herm identity(int n) {
        Herm h;
        h.n = n;
        for (int i = 0; i < n; ++i) h.d[static_cast<std::size_t>(i)] = 1.0;
        return h;
    }
    cplx off(int a, int b) const;  // entry (a,b), a != b
    double max_abs() const;
};

/// Complex Hessian samples on the interior nodes (domain shrunk one ring).
class HermitianField {
  public:
    explicit HermitianField(const GridDomain& g);
    const GridDomain& domain() const { return dom_; }
    /// idx are full-grid indices; must be interior.
    Herm at(std::span<const int> idx) const;
    void set(std::span<const int> idx, const Herm& h);
    std::int64_t interior_count() const { return count_; }

  private:
    std::int64_t interior_linear(std::span<const int> idx) const;
    GridDomain dom_;
    int stride_ = 0;  // doubles per node
    std::int64_t count_ = 0;
    std::vector<double> data_;
};

/// Nonnegative cell masses approximating a Radon measure. `stride` > 1 means
/// masses were aggregated onto blocks of stride^axes fine cells (used when a
/// fine field would not fit in memory); centers are then block centers.
struct MeasureField {
    GridDomain dom;
    int stride = 1;
    std::vector<double> masses;
    double clipped_negative_total = 0.0;

    int cells_per_axis() const { return (dom.res() + stride - 1) / stride; }
    std::int64_t cell_count() const;
    CPoint cell_center(std::int64_t linear) const;
    double total() const;
};

/// Polynomial bump (1 - |z-center|^2/r^2)^3 supported on B(center, r).
struct TestFunction {
    CPoint center;
    double radius = 1.0;

    double value(const CPoint& z) const {
        double t = 1.0 - dist2(z, center) / (radius * radius);
        return t > 0.0 ? t * t * t : 0.0;
    }
};

using RegionPred = std::function<bool(const CPoint&)>;

struct Region {
    std::string name;
    RegionPred pred;
};

Region region_all();
Region region_ball(const CPoint& c, double r, std::string name = "");
/// Polydisk {|z_i - c_i| < r for all i}.
Region region_polydisk(const CPoint& c, double r, std::string name = "");
Region region_complement(const Region& r);

/// [OP] integrate: sum of masses over cells whose centers satisfy the
/// region. Exact accumulation, so the result is order-independent and
/// additive over disjoint regions up to one final rounding.
double integrate(const MeasureField& m, const RegionPred& region);

/// [OP] pair: sum of mass * phi(cell center). Throws if the support of phi
/// escapes the grid box.
double pair(const MeasureField& m, const TestFunction& phi);

/// [OP] ball_mass: integrate over the Euclidean ball B(x, r). Throws if the
/// ball escapes the grid box.
double ball_mass(const MeasureField& m, const CPoint& x, double r);

}  // namespace plurima
