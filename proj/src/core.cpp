#include "gtv/core.hpp"

#include <eigen3/Eigen/Dense>
#include <eigen3/Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace gtv {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Gauss-Hermite rule for the standard normal weight via the symmetric
// tridiagonal Jacobi matrix (zero diagonal, off-diagonal sqrt(k)). Nodes are
// the eigenvalues; the weight of node i is the squared first component of the
// i-th normalized eigenvector (total mass of the weight is 1).
void golub_welsch(int n, std::vector<double>* nodes, std::vector<double>* weights) {
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(n - 1);
  for (int k = 1; k < n; ++k) sub[k - 1] = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success)
    throw ResourceError("Gauss-Hermite eigensolve failed at n=" + std::to_string(n));
  nodes->resize(n);
  weights->resize(n);
  for (int i = 0; i < n; ++i) {
    (*nodes)[i] = es.eigenvalues()[i];
    const double v0 = es.eigenvectors()(0, i);
    (*weights)[i] = v0 * v0;
  }
  // Eigenvalues come back sorted ascending; enforce exact +/- symmetry so the
  // face arrays mirror cleanly, then renormalize the total mass to 1.
  for (int i = 0, j = n - 1; i < j; ++i, --j) {
    const double x = 0.5 * ((*nodes)[j] - (*nodes)[i]);
    (*nodes)[j] = x;
    (*nodes)[i] = -x;
    const double w = 0.5 * ((*weights)[i] + (*weights)[j]);
    (*weights)[i] = w;
    (*weights)[j] = w;
  }
  if (n % 2 == 1) (*nodes)[n / 2] = 0.0;
  long double total = 0.0L;
  for (double w : *weights) total += w;
  for (double& w : *weights) w = static_cast<double>(w / total);
}

void uniform_rule(int n, double radius, std::vector<double>* nodes,
                  std::vector<double>* weights) {
  nodes->resize(n);
  weights->resize(n);
  const double h = 2.0 * radius / (n - 1);
  for (int i = 0; i < n; ++i) {
    // Symmetric construction: exact mirror pairs, exact 0 for odd n.
    const double x = (2 * i - (n - 1)) * (radius / (n - 1));
    (*nodes)[i] = x;
    const double c = (i == 0 || i == n - 1) ? 0.5 : 1.0;
    (*weights)[i] = c * h * gaussian_pdf(x);
  }
}

// Tail first moments M_j = sum_{k>j} w_k x_k, accumulated entirely within one
// sign class so no cancellation occurs: the right half sums positive terms
// from the outermost node inward and the left half mirrors it.
std::vector<double> tail_first_moments(const std::vector<double>& nodes,
                                       const std::vector<double>& weights) {
  const int n = static_cast<int>(nodes.size());
  std::vector<double> flux(n - 1, 0.0);
  long double acc = 0.0L;
  for (int j = n - 2; j >= 0; --j) {
    if (nodes[j + 1] <= 0.0) break;
    acc += static_cast<long double>(weights[j + 1]) * nodes[j + 1];
    flux[j] = static_cast<double>(acc);
  }
  acc = 0.0L;
  for (int j = 0; j <= n - 2; ++j) {
    if (nodes[j + 1] > 0.0) break;
    acc += static_cast<long double>(weights[j]) * (-nodes[j]);
    flux[j] = static_cast<double>(acc);
  }
  return flux;
}

AxisRule build_axis(const GridSpec& spec) {
  AxisRule axis;
  const int n = spec.nodes_per_axis;
  if (spec.scheme == GridScheme::gauss_hermite) {
    golub_welsch(n, &axis.nodes, &axis.weights);
  } else {
    uniform_rule(n, spec.truncation_radius, &axis.nodes, &axis.weights);
  }
  for (int i = 0; i + 1 < n; ++i) {
    if (!(axis.nodes[i] < axis.nodes[i + 1]))
      throw ResourceError("axis nodes not strictly increasing at n=" + std::to_string(n));
  }
  double wmin = kInf;
  for (double w : axis.weights) wmin = std::min(wmin, w);
  if (!(wmin > 0.0))
    throw ResourceError(
        "quadrature weights underflow to zero at nodes_per_axis=" + std::to_string(n) +
        "; reduce the node count");
  axis.log_weights.resize(n);
  for (int i = 0; i < n; ++i) axis.log_weights[i] = std::log(axis.weights[i]);
  axis.spacing.resize(n - 1);
  for (int i = 0; i + 1 < n; ++i) axis.spacing[i] = axis.nodes[i + 1] - axis.nodes[i];
  axis.face_flux = tail_first_moments(axis.nodes, axis.weights);
  axis.face_mass.resize(n - 1);
  for (int i = 0; i + 1 < n; ++i) {
    if (!(axis.face_flux[i] > 0.0))
      throw ResourceError("face density underflow at face " + std::to_string(i));
    axis.face_mass[i] = axis.spacing[i] * axis.face_flux[i];
  }
  return axis;
}

}  // namespace

GaussianGrid::GaussianGrid(const GridSpec& spec) : spec_(spec) {
  if (spec.dimension < 1 || spec.dimension > 6)
    throw ValidationError("grid dimension must be between 1 and 6, got " +
                          std::to_string(spec.dimension));
  if (spec.nodes_per_axis < 2)
    throw ValidationError("nodes_per_axis must be at least 2, got " +
                          std::to_string(spec.nodes_per_axis));
  if (spec.scheme == GridScheme::uniform_truncated && !(spec.truncation_radius > 0.0))
    throw ValidationError("truncation_radius must be positive for the uniform scheme");
  if (spec.max_nodes < 2) throw ValidationError("max_nodes budget too small");

  std::int64_t count = 1;
  for (int d = 0; d < spec.dimension; ++d) {
    if (count > spec.max_nodes / spec.nodes_per_axis)
      throw ResourceError("grid exceeds the node budget: " +
                          std::to_string(spec.nodes_per_axis) + "^" +
                          std::to_string(spec.dimension) + " > " +
                          std::to_string(spec.max_nodes));
    count *= spec.nodes_per_axis;
  }
  node_count_ = count;

  axis_ = build_axis(spec);

  strides_.resize(spec.dimension);
  std::int64_t s = 1;
  for (int d = 0; d < spec.dimension; ++d) {
    strides_[d] = s;
    s *= spec.nodes_per_axis;
  }

  node_weights_.resize(node_count_);
  for (std::int64_t i = 0; i < node_count_; ++i) {
    double w = 1.0;
    for (int d = 0; d < spec.dimension; ++d) w *= axis_.weights[axis_index(i, d)];
    if (!(w > 0.0))
      throw ResourceError("tensor node weight underflows to zero; reduce the node "
                          "count or the dimension");
    node_weights_[i] = w;
  }
  long double total = 0.0L;
  for (double w : node_weights_) total += w;
  total_mass_ = static_cast<double>(total);

  max_spacing_ = 0.0;
  for (double h : axis_.spacing) max_spacing_ = std::max(max_spacing_, h);

  if (spec.scheme == GridScheme::gauss_hermite) {
    if (std::abs(total_mass_ - 1.0) > 1e-8)
      throw ResourceError("gauss_hermite total mass deviates from 1 beyond 1e-8");
  } else {
    // Per-axis deficit = truncated tail + trapezoid error, the latter bounded
    // by (h^2/12) * E|x^2-1| < 0.1 h^2.
    const double h = axis_.spacing[0];
    const double deficit = spec.dimension * (std::erfc(spec.truncation_radius /
                                                       std::sqrt(2.0)) +
                                             0.1 * h * h);
    if (total_mass_ > 1.0 + deficit + 1e-12 || total_mass_ < 1.0 - deficit - 1e-9)
      throw ResourceError("uniform_truncated total mass outside [1 - tail, 1]");
  }
}

double GaussianGrid::uniform_spacing() const {
  if (!uniform())
    throw ValidationError("uniform_spacing requires a uniform_truncated grid");
  return axis_.spacing[0];
}

GridPtr build_grid(const GridSpec& spec) {
  return std::make_shared<const GaussianGrid>(spec);
}

bool grids_compatible(const GridPtr& a, const GridPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  const GridSpec &sa = a->spec(), &sb = b->spec();
  return sa.dimension == sb.dimension && sa.nodes_per_axis == sb.nodes_per_axis &&
         sa.scheme == sb.scheme &&
         (sa.scheme == GridScheme::gauss_hermite ||
          sa.truncation_radius == sb.truncation_radius);
}

namespace {
void require_same_grid(const GridPtr& a, const GridPtr& b, const char* what) {
  if (!grids_compatible(a, b))
    throw ValidationError(std::string("mismatched grids in ") + what);
}
}  // namespace

double integrate(const ScalarField& f) {
  if (!f.grid) throw ValidationError("integrate: field has no grid");
  const auto& w = f.grid->weights();
  long double acc = 0.0L;
  for (std::int64_t i = 0; i < f.size(); ++i)
    acc += static_cast<long double>(w[i]) * f.values[i];
  return static_cast<double>(acc);
}

double inner_product(const ScalarField& a, const ScalarField& b) {
  require_same_grid(a.grid, b.grid, "inner_product");
  const auto& w = a.grid->weights();
  long double acc = 0.0L;
  for (std::int64_t i = 0; i < a.size(); ++i)
    acc += static_cast<long double>(w[i]) * a.values[i] * b.values[i];
  return static_cast<double>(acc);
}

double inner_product(const VectorField& a, const VectorField& b) {
  require_same_grid(a.grid, b.grid, "inner_product");
  const GaussianGrid& grid = *a.grid;
  const auto& axis = grid.axis();
  const int n = grid.nodes_per_axis();
  const std::int64_t N = grid.node_count();
  long double acc = 0.0L;
  for (int d = 0; d < grid.dimension(); ++d) {
    const double* pa = a.comps.data() + static_cast<std::size_t>(d) * N;
    const double* pb = b.comps.data() + static_cast<std::size_t>(d) * N;
    for (std::int64_t i = 0; i < N; ++i) {
      const int k = grid.axis_index(i, d);
      if (k == n - 1) continue;  // no face beyond the last node
      const double fw = axis.face_mass[k] * (grid.weight(i) / axis.weights[k]);
      acc += static_cast<long double>(fw) * pa[i] * pb[i];
    }
  }
  return static_cast<double>(acc);
}

double l2_norm(const ScalarField& a) { return std::sqrt(std::max(0.0, inner_product(a, a))); }
double l2_norm(const VectorField& a) { return std::sqrt(std::max(0.0, inner_product(a, a))); }

double hermite_value(int k, double x) {
  double hm = 0.0, h = 1.0;  // H_{-1}, H_0
  for (int j = 0; j < k; ++j) {
    const double hn = x * h - j * hm;
    hm = h;
    h = hn;
  }
  return h;
}

double hermite_normalized(int k, double x) {
  double hm = 0.0, h = 1.0;
  for (int j = 0; j < k; ++j) {
    const double hn = (x * h - std::sqrt(static_cast<double>(j)) * hm) /
                      std::sqrt(static_cast<double>(j + 1));
    hm = h;
    h = hn;
  }
  return h;
}

ScalarField hermite_eval(int k, const GridPtr& grid, int axis) {
  if (k < 0 || k > kMaxHermiteDegree)
    throw ValidationError("hermite degree out of range [0, " +
                          std::to_string(kMaxHermiteDegree) + "]: " + std::to_string(k));
  if (axis < 0 || axis >= grid->dimension())
    throw ValidationError("hermite_eval: axis out of range");
  ScalarField out(grid);
  // Evaluate once per axis node, then broadcast along the other axes.
  const int n = grid->nodes_per_axis();
  std::vector<double> vals(n);
  for (int j = 0; j < n; ++j) vals[j] = hermite_value(k, grid->axis().nodes[j]);
  for (std::int64_t i = 0; i < out.size(); ++i)
    out.values[i] = vals[grid->axis_index(i, axis)];
  return out;
}

double interp_multilinear(const ScalarField& u, const double* x) {
  const GaussianGrid& grid = *u.grid;
  const auto& nodes = grid.axis().nodes;
  const int n = grid.nodes_per_axis();
  const int m = grid.dimension();
  int base[6];
  double frac[6];
  for (int d = 0; d < m; ++d) {
    double xd = std::min(std::max(x[d], nodes.front()), nodes.back());
    auto it = std::upper_bound(nodes.begin(), nodes.end(), xd);
    int hi = static_cast<int>(it - nodes.begin());
    hi = std::min(std::max(hi, 1), n - 1);
    base[d] = hi - 1;
    frac[d] = (xd - nodes[hi - 1]) / (nodes[hi] - nodes[hi - 1]);
  }
  double acc = 0.0;
  for (int corner = 0; corner < (1 << m); ++corner) {
    double coef = 1.0;
    std::int64_t idx = 0;
    for (int d = 0; d < m; ++d) {
      const int up = (corner >> d) & 1;
      coef *= up ? frac[d] : 1.0 - frac[d];
      idx += grid.stride(d) * (base[d] + up);
    }
    acc += coef * u.values[idx];
  }
  return acc;
}

double gaussian_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi); }

double gaussian_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double gaussian_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw ValidationError("gaussian_quantile requires p in (0,1)");
  // Newton on the cdf from a crude log-based start; quadratic convergence and
  // the monotone residual make this safe over the full open interval.
  double x = 0.0;
  if (p < 0.02 || p > 0.98) {
    const double q = std::min(p, 1.0 - p);
    x = -std::sqrt(std::max(0.0, -2.0 * std::log(q)));
    if (p > 0.5) x = -x;
  }
  for (int it = 0; it < 80; ++it) {
    const double err = gaussian_cdf(x) - p;
    const double step = err / std::max(gaussian_pdf(x), 1e-300);
    x -= step;
    if (std::abs(step) < 1e-14 * (1.0 + std::abs(x))) break;
  }
  return x;
}

}  // namespace gtv
