#pragma once

#include "gtv/core.hpp"

namespace gtv {

// One-sided finite-difference gradient. Component d at node i is the forward
// difference toward the +d neighbor (the face the slot is attached to); the
// last node along d stores the backward difference, a slot every face-weighted
// pairing ignores. Exact for affine fields.
VectorField gradient(const ScalarField& u);

// Discrete Gaussian divergence, defined as the exact negative adjoint of
// gradient under the face-weighted pairing: <gradient(u), phi> =
// -<u, divergence_gamma(phi)> for every u, to machine precision. On fine
// grids it approximates div(phi) - <x, phi>; for a constant field c*e_d the
// value is exactly -c*x_d at every node because the face fluxes telescope.
ScalarField divergence_gamma(const VectorField& phi);

// |<gradient(u), phi> + <u, divergence_gamma(phi)>|, the discrete
// integration-by-parts defect. Stays below 1e-12 * (1 + |u| |phi|).
double adjoint_residual(const ScalarField& u, const VectorField& phi);

// Ornstein-Uhlenbeck semigroup T_t: averages u under the OU transition kernel
// with time parameter t >= 0. Implemented per axis as a dense collocation of
// the Gaussian transition kernel, rebalanced so every row is a probability
// vector and the weighted column sums reproduce the node weights; this keeps
// constants exactly fixed, preserves [min u, max u], and makes the weighted
// value of any convex function of the field non-increasing in t. T_0 is the
// identity. Kernels are cached per (grid, t).
ScalarField ou_semigroup(const ScalarField& u, double t);

// Conditional expectation onto the leading k coordinates: averages u over the
// trailing axes with their quadrature weights (normalized by their total
// mass) and returns a field on the k-dimensional grid with the same axis
// rule. Requires 1 <= k < dimension.
ScalarField cylindrical_projection(const ScalarField& u, int k);

}  // namespace gtv
