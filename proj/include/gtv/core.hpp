#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace gtv {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Maximum Hermite degree served by hermite_eval; raw H_k values at the far
// nodes of large grids overflow double well before k reaches 128.
inline constexpr int kMaxHermiteDegree = 64;

// Thrown when inputs violate a documented precondition.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thrown when a request exceeds the memory budget or the precision floor of
// double arithmetic (for example quadrature weights that underflow to zero).
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class GridScheme { gauss_hermite, uniform_truncated };

struct GridSpec {
  int dimension = 1;
  int nodes_per_axis = 129;
  GridScheme scheme = GridScheme::gauss_hermite;
  double truncation_radius = 6.0;  // uniform_truncated only
  std::int64_t max_nodes = std::int64_t{1} << 23;
};

// One-dimensional quadrature rule; every axis of a grid shares one rule.
//
// nodes are strictly increasing and symmetric about 0; weights are positive
// and sum to the rule's total mass (1 for gauss_hermite, slightly less for a
// truncated uniform rule).
//
// face j is the gap between nodes j and j+1 (j = 0..n-2). face_flux[j] is the
// tail first moment sum_{k>j} weights[k]*nodes[k]; it is positive, symmetric,
// and approximates the standard Gaussian density at the face midpoint to
// second order in the spacing. face_mass[j] = spacing[j]*face_flux[j] is the
// quadrature mass attached to the face. Pairing one-sided differences with
// face_mass makes the discrete divergence the exact negative adjoint of the
// gradient and keeps div(c*e_d) = -c*x_d exact at every node, because the
// tail moments telescope: face_flux[j-1] - face_flux[j] = weights[j]*nodes[j].
struct AxisRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  std::vector<double> log_weights;
  std::vector<double> face_flux;
  std::vector<double> face_mass;
  std::vector<double> spacing;

  int size() const { return static_cast<int>(nodes.size()); }
};

class GaussianGrid {
 public:
  explicit GaussianGrid(const GridSpec& spec);

  const GridSpec& spec() const { return spec_; }
  int dimension() const { return spec_.dimension; }
  GridScheme scheme() const { return spec_.scheme; }
  int nodes_per_axis() const { return axis_.size(); }
  std::int64_t node_count() const { return node_count_; }
  const AxisRule& axis() const { return axis_; }

  // Flat index layout: axis 0 varies fastest.
  std::int64_t stride(int d) const { return strides_[d]; }
  int axis_index(std::int64_t i, int d) const {
    return static_cast<int>((i / strides_[d]) % axis_.size());
  }
  double coord(std::int64_t i, int d) const {
    return axis_.nodes[axis_index(i, d)];
  }
  void point(std::int64_t i, double* out) const {
    for (int d = 0; d < spec_.dimension; ++d) out[d] = coord(i, d);
  }
  double weight(std::int64_t i) const { return node_weights_[i]; }
  const std::vector<double>& weights() const { return node_weights_; }

  double total_mass() const { return total_mass_; }
  bool uniform() const { return spec_.scheme == GridScheme::uniform_truncated; }
  // Constant spacing of a uniform axis; ValidationError on gauss_hermite.
  double uniform_spacing() const;
  double max_spacing() const { return max_spacing_; }

 private:
  GridSpec spec_;
  AxisRule axis_;
  std::vector<std::int64_t> strides_;
  std::vector<double> node_weights_;
  std::int64_t node_count_ = 0;
  double total_mass_ = 0.0;
  double max_spacing_ = 0.0;
};

using GridPtr = std::shared_ptr<const GaussianGrid>;

GridPtr build_grid(const GridSpec& spec);

// True when the two grids are the same object or have identical axes.
bool grids_compatible(const GridPtr& a, const GridPtr& b);

struct ScalarField {
  GridPtr grid;
  std::vector<double> values;

  ScalarField() = default;
  explicit ScalarField(GridPtr g)
      : grid(std::move(g)), values(grid->node_count(), 0.0) {}

  double& operator[](std::int64_t i) { return values[i]; }
  double operator[](std::int64_t i) const { return values[i]; }
  std::int64_t size() const { return static_cast<std::int64_t>(values.size()); }
};

// H-valued field. Component d at node i lives at comps[d*N + i] and is
// attached to the face between node i and its +d neighbor; the last node
// along d has no face, so that slot carries face weight zero in every
// pairing (the gradient still stores a backward difference there).
struct VectorField {
  GridPtr grid;
  std::vector<double> comps;

  VectorField() = default;
  explicit VectorField(GridPtr g)
      : grid(std::move(g)),
        comps(static_cast<std::size_t>(grid->node_count()) *
                  static_cast<std::size_t>(grid->dimension()),
              0.0) {}

  double& at(int d, std::int64_t i) {
    return comps[static_cast<std::size_t>(d) * grid->node_count() + i];
  }
  double at(int d, std::int64_t i) const {
    return comps[static_cast<std::size_t>(d) * grid->node_count() + i];
  }
};

// Builds a field by evaluating f at every node; F is (const double* x)->double.
template <typename F>
ScalarField make_field(const GridPtr& grid, F&& f) {
  ScalarField out(grid);
  std::vector<double> x(grid->dimension());
  for (std::int64_t i = 0; i < grid->node_count(); ++i) {
    grid->point(i, x.data());
    out.values[i] = f(x.data());
  }
  return out;
}

double integrate(const ScalarField& f);
double inner_product(const ScalarField& a, const ScalarField& b);
// Face-weighted pairing sum_d sum_faces face_weight * a_d * b_d; the metric
// under which the divergence is the exact negative adjoint of the gradient.
double inner_product(const VectorField& a, const VectorField& b);
double l2_norm(const ScalarField& a);
double l2_norm(const VectorField& a);

// Probabilists' Hermite polynomial H_k of the coordinate along `axis`.
ScalarField hermite_eval(int k, const GridPtr& grid, int axis = 0);
// Scalar H_k(x) by the raw three-term recurrence.
double hermite_value(int k, double x);
// Orthonormal h_k(x) = H_k(x)/sqrt(k!) by the normalized recurrence; stable
// for degrees far beyond kMaxHermiteDegree.
double hermite_normalized(int k, double x);

// Multilinear interpolation of u at an arbitrary point, clamped to the node
// hull coordinatewise.
double interp_multilinear(const ScalarField& u, const double* x);

// Standard normal density, cdf and quantile.
double gaussian_pdf(double x);
double gaussian_cdf(double x);
double gaussian_quantile(double p);

}  // namespace gtv
