#pragma once

#include <vector>

#include "gtv/calculus.hpp"
#include "gtv/core.hpp"
#include "gtv/integrand.hpp"

namespace gtv {

// Primal-dual solve of  min_u  TV_F(u) + (1/2) ||u - g||_w^2  on a grid,
// where TV_F(u) = sum_d sum_faces face_mass_k * (w_i / w_axis_k) * S_d((du)_d,i)
// and S_d is the axis section of F.  divergence_gamma is the exact negative
// adjoint of the face pairing, so primal and dual energies share one geometry.

struct SolverParams {
  double step_primal = 0.0;           // tau > 0
  double step_dual = 0.0;             // sigma > 0
  int max_iters = 200000;
  double gap_tol = 1e-8;              // converged iff gap <= gap_tol*(1+|primal|)
  double operator_norm_estimate = 0;  // L with tau*sigma*L^2 <= 1
};

struct Solution {
  ScalarField u;
  VectorField phi;       // dual certificate; diagnostic, top axis slots zero
  double primal_value = 0.0;
  double dual_value = 0.0;
  double gap = 0.0;      // primal - dual, >= -1e-10
  int iterations = 0;
  bool converged = false;
};

// Largest singular value of u -> grad u under the face pairing, by power
// iteration on -div(grad .); re-estimated per call, never cached.
double operator_norm(const GridPtr& grid);

// Steps tau = sigma = 0.99/L from a fresh operator_norm estimate.
SolverParams default_params(const GridPtr& grid, double gap_tol = 1e-8,
                            int max_iters = 200000);

double primal_energy(const ConvexIntegrand& F, const ScalarField& u,
                     const ScalarField& g);

// -sum fw S_d*(phi) - (1/2)||div phi||_w^2 - <div phi, g>_w; -inf if any
// section conjugate is infinite at phi.
double dual_energy(const ConvexIntegrand& F, const VectorField& phi,
                   const ScalarField& g);

Solution solve(const ConvexIntegrand& F, const ScalarField& g,
               const SolverParams& params);
Solution solve(const ConvexIntegrand& F, const ScalarField& g);

// Euler-Lagrange residual -div(dF(grad u)) + u - g for differentiable F
// (quadratic, power with p > 1, smoothed). Zero at the exact minimizer.
ScalarField el_residual(const ConvexIntegrand& F, const ScalarField& u,
                        const ScalarField& g);

// Exact solve of the quadratic-integrand problem
//   min_u  (mu/2) ||grad u||^2 + (1/2)||u - g||^2
// by Hermite transform: coefficient of total degree k scales by 1/(1+mu*k).
// Gauss-Hermite grids of dimension <= 2 only.
ScalarField spectral_solve_quadratic(const ScalarField& g, double mu);

// Implicit Euler for the TV_F flow: step k solves with data u_k and data
// weight 1/dt. Returns the trajectory starting with u0 (steps+1 fields).
std::vector<ScalarField> gradient_flow(const ConvexIntegrand& F,
                                       const ScalarField& u0, double dt,
                                       int steps);

struct SweepReport {
  std::vector<int> dims;
  std::vector<ScalarField> solutions;      // one per entry of dims
  std::vector<double> distance_to_full;    // ||u_k - u_full||_w
  std::vector<double> energies;            // primal energy of u_k
  std::vector<bool> convex;                // axis-line convexity of u_k
  ScalarField u_full;
};

// Solves with data replaced by its conditional expectation on the first k
// coordinates (lifted back to the full grid), for each k in dims, against
// the full-data solve.
SweepReport dimension_sweep(const ConvexIntegrand& F, const ScalarField& g,
                            const std::vector<int>& dims);
SweepReport dimension_sweep(const ConvexIntegrand& F, const ScalarField& g,
                            const std::vector<int>& dims,
                            const SolverParams& params);

}  // namespace gtv
