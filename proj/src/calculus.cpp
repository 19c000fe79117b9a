#include "gtv/calculus.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

namespace gtv {

VectorField gradient(const ScalarField& u) {
  if (!u.grid) throw ValidationError("gradient: field has no grid");
  const GaussianGrid& grid = *u.grid;
  const auto& spacing = grid.axis().spacing;
  const int n = grid.nodes_per_axis();
  const std::int64_t N = grid.node_count();
  VectorField out(u.grid);
  for (int d = 0; d < grid.dimension(); ++d) {
    const std::int64_t s = grid.stride(d);
    double* g = out.comps.data() + static_cast<std::size_t>(d) * N;
    for (std::int64_t i = 0; i < N; ++i) {
      const int k = grid.axis_index(i, d);
      if (k < n - 1)
        g[i] = (u.values[i + s] - u.values[i]) / spacing[k];
      else
        g[i] = (u.values[i] - u.values[i - s]) / spacing[k - 1];
    }
  }
  return out;
}

ScalarField divergence_gamma(const VectorField& phi) {
  if (!phi.grid) throw ValidationError("divergence_gamma: field has no grid");
  const GaussianGrid& grid = *phi.grid;
  const auto& axis = grid.axis();
  const int n = grid.nodes_per_axis();
  const std::int64_t N = grid.node_count();
  ScalarField out(phi.grid);
  for (int d = 0; d < grid.dimension(); ++d) {
    const std::int64_t s = grid.stride(d);
    const double* p = phi.comps.data() + static_cast<std::size_t>(d) * N;
    for (std::int64_t i = 0; i < N; ++i) {
      const int k = grid.axis_index(i, d);
      double acc = 0.0;
      if (k < n - 1) acc += axis.face_flux[k] * p[i];
      if (k > 0) acc -= axis.face_flux[k - 1] * p[i - s];
      out.values[i] += acc / axis.weights[k];
    }
  }
  return out;
}

double adjoint_residual(const ScalarField& u, const VectorField& phi) {
  if (!grids_compatible(u.grid, phi.grid))
    throw ValidationError("adjoint_residual: mismatched grids");
  return std::abs(inner_product(gradient(u), phi) +
                  inner_product(u, divergence_gamma(phi)));
}

namespace {

// Dense one-axis transition matrix for time t, row-stochastic with weighted
// column sums equal to the node weights (up to the balancing tolerance).
// Built from the Gaussian transition kernel in log space and rebalanced by a
// damped symmetric scaling iteration; rows are renormalized at the end so
// each is exactly a probability vector.
struct OuKernel {
  int n = 0;
  std::vector<double> mat;  // row-major, mat[i*n+j]
};

using OuKey = std::tuple<int, int, double, double>;  // scheme, n, radius, t

std::shared_ptr<const OuKernel> build_ou_kernel(const GaussianGrid& grid, double t) {
  const auto& axis = grid.axis();
  const int n = axis.size();
  if (static_cast<std::int64_t>(n) * n > (std::int64_t{1} << 25))
    throw ResourceError("ou_semigroup: axis too large for a dense kernel");
  const double a = std::exp(-t);
  const double s2 = -std::expm1(-2.0 * t);  // 1 - a^2, accurate for small t
  auto out = std::make_shared<OuKernel>();
  out->n = n;
  out->mat.resize(static_cast<std::size_t>(n) * n);

  // log of the symmetric kernel S_ij = w_i w_j M_t(x_i, x_j), where M_t is
  // the transition density relative to the Gaussian measure.
  std::vector<double> sigma(static_cast<std::size_t>(n) * n);
  const double lognorm = -0.5 * std::log(s2);
  for (int i = 0; i < n; ++i) {
    const double xi = axis.nodes[i];
    for (int j = 0; j <= i; ++j) {
      const double xj = axis.nodes[j];
      const double expo =
          -(a * a * (xi * xi + xj * xj) - 2.0 * a * xi * xj) / (2.0 * s2);
      const double v = axis.log_weights[i] + axis.log_weights[j] + lognorm + expo;
      sigma[static_cast<std::size_t>(i) * n + j] = v;
      sigma[static_cast<std::size_t>(j) * n + i] = v;
    }
  }

  // Damped symmetric scaling: find lambda with row sums of
  // exp(lambda_i + sigma_ij + lambda_j) equal to w_i.
  std::vector<double> lambda(n, 0.0), target(n), lse(n);
  for (int i = 0; i < n; ++i) target[i] = axis.log_weights[i];
  double resid = kInf;
  for (int sweep = 0; sweep < 1000 && resid > 1e-13; ++sweep) {
    resid = 0.0;
    for (int i = 0; i < n; ++i) {
      const double* row = sigma.data() + static_cast<std::size_t>(i) * n;
      double mx = -kInf;
      for (int j = 0; j < n; ++j) mx = std::max(mx, row[j] + lambda[j]);
      long double acc = 0.0L;
      for (int j = 0; j < n; ++j) acc += std::exp(row[j] + lambda[j] - mx);
      lse[i] = mx + std::log(static_cast<double>(acc));
      resid = std::max(resid, std::abs(target[i] - lambda[i] - lse[i]));
    }
    for (int i = 0; i < n; ++i)
      lambda[i] = 0.5 * (lambda[i] + target[i] - lse[i]);
  }
  if (resid > 1e-6)
    throw ResourceError("ou_semigroup: kernel balancing failed to converge");

  for (int i = 0; i < n; ++i) {
    double* row = out->mat.data() + static_cast<std::size_t>(i) * n;
    const double* srow = sigma.data() + static_cast<std::size_t>(i) * n;
    long double acc = 0.0L;
    for (int j = 0; j < n; ++j) {
      row[j] = std::exp(lambda[i] + srow[j] + lambda[j] - axis.log_weights[i]);
      acc += row[j];
    }
    const double inv = static_cast<double>(1.0L / acc);
    for (int j = 0; j < n; ++j) row[j] *= inv;
  }
  return out;
}

std::shared_ptr<const OuKernel> ou_kernel(const GridPtr& grid, double t) {
  static std::map<OuKey, std::shared_ptr<const OuKernel>> cache;
  const GridSpec& spec = grid->spec();
  const double radius =
      spec.scheme == GridScheme::uniform_truncated ? spec.truncation_radius : 0.0;
  const OuKey key{static_cast<int>(spec.scheme), spec.nodes_per_axis, radius, t};
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto kernel = build_ou_kernel(*grid, t);
  if (cache.size() >= 24) cache.erase(cache.begin());
  cache.emplace(key, kernel);
  return kernel;
}

}  // namespace

ScalarField ou_semigroup(const ScalarField& u, double t) {
  if (!u.grid) throw ValidationError("ou_semigroup: field has no grid");
  if (!(t >= 0.0)) throw ValidationError("ou_semigroup requires t >= 0");
  if (t == 0.0) return u;
  const GaussianGrid& grid = *u.grid;
  const int n = grid.nodes_per_axis();
  const std::int64_t N = grid.node_count();
  auto kernel = ou_kernel(u.grid, t);
  ScalarField cur = u;
  std::vector<double> line(n), res(n);
  for (int d = 0; d < grid.dimension(); ++d) {
    const std::int64_t s = grid.stride(d);
    ScalarField next(u.grid);
    // Walk every 1D line along axis d once.
    for (std::int64_t base = 0; base < N; ++base) {
      if (grid.axis_index(base, d) != 0) continue;
      for (int k = 0; k < n; ++k) line[k] = cur.values[base + s * k];
      for (int i = 0; i < n; ++i) {
        const double* row = kernel->mat.data() + static_cast<std::size_t>(i) * n;
        long double acc = 0.0L;
        for (int j = 0; j < n; ++j) acc += row[j] * line[j];
        res[i] = static_cast<double>(acc);
      }
      for (int k = 0; k < n; ++k) next.values[base + s * k] = res[k];
    }
    cur = std::move(next);
  }
  return cur;
}

ScalarField cylindrical_projection(const ScalarField& u, int k) {
  if (!u.grid) throw ValidationError("cylindrical_projection: field has no grid");
  const GaussianGrid& grid = *u.grid;
  const int m = grid.dimension();
  if (k < 1 || k >= m)
    throw ValidationError("cylindrical_projection requires 1 <= k < dimension");
  GridSpec head_spec = grid.spec();
  head_spec.dimension = k;
  auto head = build_grid(head_spec);
  const std::int64_t nh = head->node_count();
  const std::int64_t nt = grid.node_count() / nh;

  // Tail weight of block t is the product of trailing-axis weights; the same
  // for every head index because the grid is a tensor product.
  std::vector<double> tail_w(nt);
  long double tail_mass = 0.0L;
  for (std::int64_t t = 0; t < nt; ++t) {
    double w = 1.0;
    std::int64_t rest = t;
    for (int d = k; d < m; ++d) {
      w *= grid.axis().weights[rest % grid.nodes_per_axis()];
      rest /= grid.nodes_per_axis();
    }
    tail_w[t] = w;
    tail_mass += w;
  }
  ScalarField out(head);
  for (std::int64_t j = 0; j < nh; ++j) {
    long double acc = 0.0L;
    for (std::int64_t t = 0; t < nt; ++t)
      acc += static_cast<long double>(tail_w[t]) * u.values[j + nh * t];
    out.values[j] = static_cast<double>(acc / tail_mass);
  }
  return out;
}

}  // namespace gtv
