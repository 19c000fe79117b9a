#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "gtv/calculus.hpp"
#include "gtv/core.hpp"
#include "gtv/integrand.hpp"
#include "gtv/solver.hpp"

using namespace gtv;

namespace {

GridPtr gh(int n, int dim = 1) {
  GridSpec spec;
  spec.dimension = dim;
  spec.nodes_per_axis = n;
  spec.scheme = GridScheme::gauss_hermite;
  return build_grid(spec);
}

GridPtr uni(int n, double radius, int dim = 1) {
  GridSpec spec;
  spec.dimension = dim;
  spec.nodes_per_axis = n;
  spec.scheme = GridScheme::uniform_truncated;
  spec.truncation_radius = radius;
  return build_grid(spec);
}

bool interior(const GaussianGrid& grid, std::int64_t i, double radius = 3.0) {
  for (int d = 0; d < grid.dimension(); ++d) {
    if (std::abs(grid.coord(i, d)) > radius) return false;
  }
  return true;
}

double max_interior_diff(const ScalarField& u, const ScalarField& ref,
                         double radius = 3.0) {
  double worst = 0.0;
  for (std::int64_t i = 0; i < u.size(); ++i) {
    if (!interior(*u.grid, i, radius)) continue;
    worst = std::max(worst, std::abs(u[i] - ref[i]));
  }
  return worst;
}

double second_moment(const GaussianGrid& grid) {
  double s = 0.0;
  for (std::int64_t i = 0; i < grid.node_count(); ++i) {
    double x = grid.coord(i, 0);
    s += grid.weight(i) * x * x;
  }
  return s;
}

Solution tight_solve(const ConvexIntegrand& F, const ScalarField& g,
                     double gap_tol = 1e-10) {
  SolverParams p = default_params(g.grid, gap_tol, 400000);
  return solve(F, g, p);
}

bool line_convex(const ScalarField& u, double tol) {
  const GaussianGrid& grid = *u.grid;
  const AxisRule& ax = grid.axis();
  for (int d = 0; d < grid.dimension(); ++d) {
    std::int64_t s = grid.stride(d);
    for (std::int64_t i = 0; i < grid.node_count(); ++i) {
      int k = grid.axis_index(i, d);
      if (k == 0 || k == grid.nodes_per_axis() - 1) continue;
      double theta = (ax.nodes[k + 1] - ax.nodes[k]) /
                     (ax.nodes[k + 1] - ax.nodes[k - 1]);
      if (theta * u[i - s] + (1.0 - theta) * u[i + s] - u[i] < -tol) {
        return false;
      }
    }
  }
  return true;
}

}  // namespace

TEST_CASE("operator norm is positive, deterministic, and scales like 1/h") {
  GridPtr a = uni(129, 6.0);
  double l1 = operator_norm(a);
  double l2 = operator_norm(a);
  CHECK(l1 == l2);  // fresh estimate, fixed seed
  CHECK(l1 > 0.0);
  GridPtr b = uni(257, 6.0);
  double l3 = operator_norm(b);
  CHECK(l3 > l1);           // finer grid, stiffer operator
  CHECK(l3 < 4.0 * l1);     // roughly doubles with 1/h
  SolverParams p = default_params(a);
  CHECK(p.step_primal * p.step_dual * p.operator_norm_estimate *
            p.operator_norm_estimate <=
        1.0 + 1e-12);
}

TEST_CASE("solver parameter validation") {
  GridPtr grid = gh(17);
  ScalarField g = make_field(grid, [](const double* x) { return x[0]; });
  SolverParams p = default_params(grid);
  SolverParams bad = p;
  bad.step_primal = 10.0 / p.operator_norm_estimate;
  bad.step_dual = 10.0 / p.operator_norm_estimate;
  CHECK_THROWS_AS(solve(ConvexIntegrand::euclidean_norm(), g, bad),
                  ValidationError);
  bad = p;
  bad.gap_tol = 0.0;
  CHECK_THROWS_AS(solve(ConvexIntegrand::euclidean_norm(), g, bad),
                  ValidationError);
  bad = p;
  bad.max_iters = 0;
  CHECK_THROWS_AS(solve(ConvexIntegrand::euclidean_norm(), g, bad),
                  ValidationError);
  // delta-regularized integrands carry no proximal map
  ConvexIntegrand fd =
      delta_regularize(ConvexIntegrand::euclidean_norm(), 0.5);
  CHECK_THROWS_AS(solve(fd, g, p), ValidationError);
  // anisotropic weights pin the dimension
  ConvexIntegrand fa = ConvexIntegrand::anisotropic_norm({1.0, 4.0});
  CHECK_THROWS_AS(solve(fa, g, p), ValidationError);
}

TEST_CASE("quadratic integrand with linear data halves the slope") {
  for (GridPtr grid : {gh(257), uni(257, 6.0)}) {
    ScalarField g = make_field(grid, [](const double* x) { return x[0]; });
    Solution sol = tight_solve(ConvexIntegrand::quadratic(1.0), g);
    CHECK(sol.converged);
    CHECK(sol.gap <= 1e-10 * (1.0 + std::abs(sol.primal_value)));
    CHECK(sol.gap >= -1e-10);
    ScalarField ref = make_field(grid, [](const double* x) { return x[0] / 2; });
    CHECK(max_interior_diff(sol.u, ref) < 1e-4);
    // u = x/2, phi = 1/2 is an exact discrete saddle point: the optimal
    // value is s2/4 with s2 the grid's second moment.
    double s2 = second_moment(*grid);
    CHECK(std::abs(sol.primal_value - s2 / 4.0) < 1e-8);
  }
}

TEST_CASE("total variation with subcritical linear data returns zero") {
  GridPtr grid = uni(257, 6.0);
  for (double c : {0.25, 0.5, 0.9}) {
    ScalarField g = make_field(grid, [c](const double* x) { return c * x[0]; });
    Solution sol = tight_solve(ConvexIntegrand::euclidean_norm(), g);
    CHECK(sol.converged);
    double worst = 0.0;
    for (std::int64_t i = 0; i < sol.u.size(); ++i) {
      worst = std::max(worst, std::abs(sol.u[i]));
    }
    CHECK(worst < 1e-4);
    double s2 = second_moment(*grid);
    CHECK(std::abs(sol.primal_value - 0.5 * c * c * s2) < 1e-8);
  }
}

TEST_CASE("total variation with supercritical linear data shifts the slope") {
  GridPtr grid = uni(257, 6.0);
  for (double c : {1.5, 2.0}) {
    ScalarField g = make_field(grid, [c](const double* x) { return c * x[0]; });
    Solution sol = tight_solve(ConvexIntegrand::euclidean_norm(), g);
    CHECK(sol.converged);
    ScalarField ref =
        make_field(grid, [c](const double* x) { return (c - 1.0) * x[0]; });
    CHECK(max_interior_diff(sol.u, ref) < 1e-3);
    double s2 = second_moment(*grid);
    CHECK(std::abs(sol.primal_value - ((c - 1.0) * s2 + 0.5 * s2)) < 1e-8);
  }
}

TEST_CASE("constant data is an exact fixed point") {
  GridPtr grid = gh(65);
  ScalarField g = make_field(grid, [](const double*) { return 0.7; });
  Solution sol = tight_solve(ConvexIntegrand::euclidean_norm(), g);
  CHECK(sol.converged);
  for (std::int64_t i = 0; i < g.size(); ++i) {
    CHECK(sol.u[i] == 0.7);
  }
  CHECK(sol.gap == 0.0);
}

TEST_CASE("weak duality: random feasible dual fields never beat the primal") {
  GridPtr grid = gh(65);
  ScalarField g =
      make_field(grid, [](const double* x) { return x[0] * x[0] - 1.0; });
  ConvexIntegrand F = ConvexIntegrand::euclidean_norm();
  Solution sol = tight_solve(F, g);
  std::mt19937_64 rng(2026);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    VectorField phi(grid);
    for (auto& v : phi.comps) v = unif(rng);  // inside the unit dual band
    double d = dual_energy(F, phi, g);
    CHECK(d <= sol.primal_value + 1e-10);
  }
  // dual value of the returned certificate matches the reported one
  CHECK(std::abs(dual_energy(F, sol.phi, g) - sol.dual_value) < 1e-12);
  CHECK(std::abs(primal_energy(F, sol.u, g) - sol.primal_value) < 1e-12);
}

TEST_CASE("KKT residual is controlled by the gap") {
  GridPtr grid = uni(129, 6.0);
  ScalarField g = make_field(
      grid, [](const double* x) { return std::abs(x[0] - 0.3) + 0.1 * x[0]; });
  for (auto kind : {0, 1, 2}) {
    ConvexIntegrand F = kind == 0   ? ConvexIntegrand::euclidean_norm()
                        : kind == 1 ? ConvexIntegrand::quadratic(0.8)
                                    : ConvexIntegrand::power_p(1.5, 1.0);
    Solution sol = tight_solve(F, g);
    REQUIRE(sol.converged);
    ScalarField dv = divergence_gamma(sol.phi);
    ScalarField r(grid);
    for (std::int64_t i = 0; i < g.size(); ++i) {
      r[i] = sol.u[i] - g[i] - dv[i];
    }
    CHECK(l2_norm(r) <= 10.0 * std::sqrt(std::max(sol.gap, 0.0)) + 1e-12);
  }
}

TEST_CASE("solution norm never exceeds twice the data norm") {
  GridPtr grid = uni(257, 6.0);
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int trial = 0; trial < 6; ++trial) {
    double a = unif(rng), b = unif(rng), c = unif(rng);
    ScalarField g = make_field(grid, [&](const double* x) {
      return a * std::abs(x[0] - b) + 0.4 * c * x[0] * x[0];
    });
    ConvexIntegrand F = trial % 2 == 0 ? ConvexIntegrand::euclidean_norm()
                                       : ConvexIntegrand::power_p(1.5, 1.0);
    Solution sol = tight_solve(F, g);
    REQUIRE(sol.converged);
    CHECK(l2_norm(sol.u) <= 2.0 * l2_norm(g) + 1e-8);
  }
}

TEST_CASE("adding a constant to the data shifts the solution by it") {
  GridPtr grid = uni(129, 6.0);
  ScalarField g1 = make_field(
      grid, [](const double* x) { return std::abs(x[0]) + 0.2 * x[0]; });
  ScalarField g2 = g1;
  for (auto& v : g2.values) v += 0.5;
  SolverParams p = default_params(grid, 1e-11, 400000);
  ConvexIntegrand F = ConvexIntegrand::euclidean_norm();
  Solution s1 = solve(F, g1, p);
  Solution s2 = solve(F, g2, p);
  for (std::int64_t i = 0; i < g1.size(); ++i) {
    CHECK(s1.u[i] <= s2.u[i] + 1e-8);  // monotone data dependence
    CHECK(std::abs(s2.u[i] - s1.u[i] - 0.5) < 1e-8);
  }
}

TEST_CASE("pointwise larger data gives a pointwise larger solution") {
  GridPtr grid = uni(65, 5.0);
  ScalarField g1 =
      make_field(grid, [](const double* x) { return 0.5 * x[0] * x[0]; });
  ScalarField g2 = make_field(grid, [](const double* x) {
    return 0.5 * x[0] * x[0] + 0.3 * std::abs(x[0]);
  });
  SolverParams p = default_params(grid, 1e-12, 50000);
  ConvexIntegrand F = ConvexIntegrand::euclidean_norm();
  Solution s1 = solve(F, g1, p);
  Solution s2 = solve(F, g2, p);
  REQUIRE(s1.converged);
  REQUIRE(s2.converged);
  double worst = 0.0;
  for (std::int64_t i = 0; i < g1.size(); ++i) {
    worst = std::max(worst, s1.u[i] - s2.u[i]);
  }
  // both active-set solutions sit at their exact discrete minimizers, so the
  // comparison holds to solver roundoff, far inside this bound
  CHECK(worst <= 2e-5);
}

TEST_CASE("two dimensional anisotropic instance converges with a convex output") {
  GridPtr grid = uni(33, 5.0, 2);
  ScalarField g = make_field(grid, [](const double* x) {
    return x[0] * x[0] - 1.0 + 0.5 * std::abs(x[1]);
  });
  ConvexIntegrand F = ConvexIntegrand::anisotropic_norm({1.0, 4.0});
  Solution sol = tight_solve(F, g, 1e-8);
  CHECK(sol.converged);
  CHECK(sol.gap <= 1e-8 * (1.0 + std::abs(sol.primal_value)));
  CHECK(sol.gap >= -1e-10);
  double gmax = 0.0;
  for (double v : g.values) gmax = std::max(gmax, std::abs(v));
  double h = grid->max_spacing();
  CHECK(line_convex(sol.u, 1e-6 + 4.0 * h * h * gmax));
  CHECK(l2_norm(sol.u) <= 2.0 * l2_norm(g) + 1e-8);
}

TEST_CASE("euler lagrange residual vanishes at the exact quadratic solution") {
  GridPtr grid = gh(257);
  ScalarField u = make_field(grid, [](const double* x) { return x[0] / 2; });
  ScalarField g = make_field(grid, [](const double* x) { return x[0]; });
  ScalarField r = el_residual(ConvexIntegrand::quadratic(1.0), u, g);
  // Pointwise exactness holds where the measure lives; far tail nodes see
  // flux-difference rounding divided by weights below 1e-30, so the residual
  // is checked inside |x| <= 3 and in the weighted norm overall.
  for (std::int64_t i = 0; i < r.size(); ++i) {
    if (std::abs(grid->coord(i, 0)) > 3.0) continue;
    CHECK(std::abs(r[i]) < 1e-12);
  }
  CHECK(l2_norm(r) < 1e-12);
}

TEST_CASE("euler lagrange residual of a solver output is gap-small") {
  GridPtr grid = uni(257, 6.0);
  ScalarField g =
      make_field(grid, [](const double* x) { return x[0] * x[0] - 1.0; });
  SolverParams p = default_params(grid, 1e-12, 800000);
  Solution sol = solve(ConvexIntegrand::quadratic(1.0), g, p);
  REQUIRE(sol.converged);
  ScalarField r = el_residual(ConvexIntegrand::quadratic(1.0), sol.u, g);
  CHECK(l2_norm(r) <= 10.0 * std::sqrt(std::max(sol.gap, 0.0)) + 1e-12);
}

TEST_CASE("euler lagrange residual reports a pure data offset") {
  GridPtr grid = gh(65);
  ScalarField u = make_field(grid, [](const double*) { return 0.4; });
  ScalarField g = u;
  for (auto& v : g.values) v += 0.25;
  ScalarField r = el_residual(ConvexIntegrand::quadratic(1.0), u, g);
  for (std::int64_t i = 0; i < r.size(); ++i) {
    CHECK(r[i] == doctest::Approx(-0.25).epsilon(1e-12));
  }
  ConvexIntegrand fn = smooth_approx(ConvexIntegrand::euclidean_norm(), 4);
  ScalarField r2 = el_residual(fn, u, g);  // smoothed kinds are differentiable
  for (std::int64_t i = 0; i < r2.size(); ++i) {
    CHECK(r2[i] == doctest::Approx(-0.25).epsilon(1e-12));
  }
  CHECK_THROWS_AS(el_residual(ConvexIntegrand::euclidean_norm(), u, g),
                  ValidationError);
  CHECK_THROWS_AS(el_residual(ConvexIntegrand::power_p(1.0, 1.0), u, g),
                  ValidationError);
}

TEST_CASE("spectral reference solves the quadratic problem exactly on polynomials") {
  GridPtr grid = gh(129);
  ScalarField h1 = hermite_eval(1, grid);
  ScalarField h2 = hermite_eval(2, grid);
  ScalarField s1 = spectral_solve_quadratic(h1, 1.0);
  ScalarField s2 = spectral_solve_quadratic(h2, 1.0);
  ScalarField ones = make_field(grid, [](const double*) { return 1.0; });
  ScalarField s0 = spectral_solve_quadratic(ones, 3.0);
  for (std::int64_t i = 0; i < grid->node_count(); ++i) {
    double x = grid->coord(i, 0);
    CHECK(std::abs(s1[i] - x / 2) < 1e-12 * (1.0 + std::abs(x)));
    CHECK(std::abs(s2[i] - (x * x - 1.0) / 3.0) < 1e-8);
    CHECK(std::abs(s0[i] - 1.0) < 1e-12);
  }
}

TEST_CASE("spectral reference handles two dimensions and rejects the rest") {
  GridPtr grid = gh(33, 2);
  ScalarField g = make_field(grid, [](const double* x) {
    return x[0] + (x[1] * x[1] - 1.0);
  });
  ScalarField s = spectral_solve_quadratic(g, 1.0);
  for (std::int64_t i = 0; i < grid->node_count(); ++i) {
    double x = grid->coord(i, 0), y = grid->coord(i, 1);
    double ref = x / 2 + (y * y - 1.0) / 3.0;
    CHECK(std::abs(s[i] - ref) < 1e-8);
  }
  GridPtr u = uni(33, 5.0);
  ScalarField gu = make_field(u, [](const double* x) { return x[0]; });
  CHECK_THROWS_AS(spectral_solve_quadratic(gu, 1.0), ValidationError);
  GridPtr g3 = gh(5, 3);
  ScalarField g3f = make_field(g3, [](const double* x) { return x[0]; });
  CHECK_THROWS_AS(spectral_solve_quadratic(g3f, 1.0), ValidationError);
  ScalarField gg = make_field(grid, [](const double* x) { return x[0]; });
  CHECK_THROWS_AS(spectral_solve_quadratic(gg, -1.0), ValidationError);
}

TEST_CASE("spectral reference agrees with the iterative solver") {
  GridPtr grid = gh(65);
  ScalarField g = hermite_eval(1, grid);
  Solution sol = tight_solve(ConvexIntegrand::quadratic(1.0), g, 1e-12);
  REQUIRE(sol.converged);
  ScalarField s = spectral_solve_quadratic(g, 1.0);
  CHECK(max_interior_diff(sol.u, s) < 1e-5);
}

TEST_CASE("implicit flow keeps constants fixed") {
  GridPtr grid = uni(65, 5.0);
  ScalarField u0 = make_field(grid, [](const double*) { return -1.3; });
  auto traj = gradient_flow(ConvexIntegrand::euclidean_norm(), u0, 0.7, 4);
  REQUIRE(traj.size() == 5);
  for (const auto& u : traj) {
    for (std::int64_t i = 0; i < u.size(); ++i) CHECK(u[i] == -1.3);
  }
}

TEST_CASE("implicit flow flattens linear fields at unit speed") {
  GridPtr grid = uni(257, 6.0);
  ScalarField u0 = make_field(grid, [](const double* x) { return 2.0 * x[0]; });
  auto traj = gradient_flow(ConvexIntegrand::euclidean_norm(), u0, 1.0, 1);
  REQUIRE(traj.size() == 2);
  ScalarField ref = make_field(grid, [](const double* x) { return x[0]; });
  CHECK(max_interior_diff(traj[1], ref) < 1e-3);
  auto traj2 = gradient_flow(ConvexIntegrand::euclidean_norm(), u0, 0.1, 1);
  ScalarField ref2 = make_field(grid, [](const double* x) { return 1.9 * x[0]; });
  CHECK(max_interior_diff(traj2[1], ref2) < 1e-3);
}

TEST_CASE("implicit flow preserves convexity of the iterates") {
  GridPtr grid = uni(257, 6.0);
  ScalarField u0 = make_field(grid, [](const double* x) {
    return std::abs(x[0]) + 0.3 * x[0];
  });
  auto traj = gradient_flow(ConvexIntegrand::euclidean_norm(), u0, 0.5, 3);
  double h = grid->max_spacing();
  for (const auto& u : traj) {
    double umax = 0.0;
    for (double v : u.values) umax = std::max(umax, std::abs(v));
    CHECK(line_convex(u, 1e-6 + 4.0 * h * h * std::max(1.0, umax)));
  }
  CHECK_THROWS_AS(gradient_flow(ConvexIntegrand::euclidean_norm(), u0, 0.0, 1),
                  ValidationError);
}

TEST_CASE("dimension sweep detects data that only uses the leading coordinate") {
  GridPtr grid = gh(33, 2);
  ScalarField g = make_field(grid, [](const double* x) {
    return std::abs(x[0]) + 0.1 * x[0];
  });
  SweepReport rep =
      dimension_sweep(ConvexIntegrand::euclidean_norm(), g, {1, 2});
  REQUIRE(rep.dims.size() == 2);
  // projecting onto the first axis changes nothing
  CHECK(std::abs(rep.distance_to_full[0] - rep.distance_to_full[1]) < 1e-9);
  double worst = 0.0;
  for (std::int64_t i = 0; i < g.size(); ++i) {
    worst = std::max(worst, std::abs(rep.solutions[0][i] - rep.solutions[1][i]));
  }
  CHECK(worst < 1e-9);
  CHECK(rep.convex[0]);
  CHECK(rep.convex[1]);
}

TEST_CASE("dimension sweep measures the missing coordinate of additive data") {
  GridPtr grid = gh(33, 2);
  ScalarField g =
      make_field(grid, [](const double* x) { return x[0] + x[1]; });
  SweepReport rep = dimension_sweep(ConvexIntegrand::quadratic(1.0), g, {1, 2});
  // full solution is (x1+x2)/2; projected data x1 gives x1/2, so the
  // distance is ||x2/2|| = 1/2
  CHECK(std::abs(rep.distance_to_full[0] - 0.5) < 1e-3);
  CHECK(rep.distance_to_full[1] < 1e-6);
  CHECK(rep.distance_to_full[0] >= rep.distance_to_full[1]);
  CHECK_THROWS_AS(
      dimension_sweep(ConvexIntegrand::quadratic(1.0), g, {}),
      ValidationError);
  CHECK_THROWS_AS(
      dimension_sweep(ConvexIntegrand::quadratic(1.0), g, {2, 1}),
      ValidationError);
  CHECK_THROWS_AS(
      dimension_sweep(ConvexIntegrand::quadratic(1.0), g, {1, 3}),
      ValidationError);
}
