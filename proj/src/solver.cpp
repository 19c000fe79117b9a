#include "gtv/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include <utility>
#include <vector>

namespace gtv {

namespace {

void require_field(const ScalarField& f, const char* where) {
  if (!f.grid) {
    throw ValidationError(std::string(where) + ": field has no grid");
  }
}

void require_same_grid(const ScalarField& a, const ScalarField& b,
                       const char* where) {
  require_field(a, where);
  require_field(b, where);
  if (!grids_compatible(a.grid, b.grid)) {
    throw ValidationError(std::string(where) + ": fields live on different grids");
  }
}

// Per-axis ratio face_mass[k]/w_axis[k]; multiplied by the node weight this
// gives the face weight of slot (d, i), the same weight the vector
// inner_product uses. Top slots (k = n-1) carry no face.
std::vector<double> face_ratios(const GaussianGrid& grid) {
  const AxisRule& ax = grid.axis();
  std::vector<double> ratio(static_cast<std::size_t>(ax.size() - 1));
  for (int k = 0; k + 1 < ax.size(); ++k) {
    ratio[static_cast<std::size_t>(k)] = ax.face_mass[k] / ax.weights[k];
  }
  return ratio;
}

std::vector<AxisSection> make_sections(const ConvexIntegrand& F, int m,
                                       const char* where) {
  int pinned = F.pinned_dimension();
  if (pinned > 0 && pinned != m) {
    throw ValidationError(std::string(where) +
                          ": integrand dimension does not match the grid");
  }
  std::vector<AxisSection> secs;
  secs.reserve(static_cast<std::size_t>(m));
  for (int d = 0; d < m; ++d) secs.emplace_back(F, d);
  return secs;
}

double tv_term(const std::vector<AxisSection>& secs,
               const std::vector<double>& ratio, const VectorField& grad) {
  const GaussianGrid& grid = *grad.grid;
  const int m = grid.dimension();
  const int n = grid.nodes_per_axis();
  const std::int64_t N = grid.node_count();
  double total = 0.0;
  for (int d = 0; d < m; ++d) {
    for (std::int64_t i = 0; i < N; ++i) {
      int k = grid.axis_index(i, d);
      if (k == n - 1) continue;
      total += ratio[static_cast<std::size_t>(k)] * grid.weight(i) *
               secs[static_cast<std::size_t>(d)].value(grad.at(d, i));
    }
  }
  return total;
}

double conjugate_term(const std::vector<AxisSection>& secs,
                      const std::vector<double>& ratio,
                      const VectorField& phi) {
  const GaussianGrid& grid = *phi.grid;
  const int m = grid.dimension();
  const int n = grid.nodes_per_axis();
  const std::int64_t N = grid.node_count();
  double total = 0.0;
  for (int d = 0; d < m; ++d) {
    for (std::int64_t i = 0; i < N; ++i) {
      int k = grid.axis_index(i, d);
      if (k == n - 1) continue;
      double star = secs[static_cast<std::size_t>(d)].conjugate(phi.at(d, i));
      if (star == kInf) return kInf;
      total += ratio[static_cast<std::size_t>(k)] * grid.weight(i) * star;
    }
  }
  return total;
}

double primal_weighted(const std::vector<AxisSection>& secs,
                       const std::vector<double>& ratio, const ScalarField& u,
                       const ScalarField& g, double rho) {
  double tv = tv_term(secs, ratio, gradient(u));
  double data = 0.0;
  const GaussianGrid& grid = *u.grid;
  for (std::int64_t i = 0; i < grid.node_count(); ++i) {
    double r = u[i] - g[i];
    data += grid.weight(i) * r * r;
  }
  return tv + 0.5 * rho * data;
}

double dual_weighted(const std::vector<AxisSection>& secs,
                     const std::vector<double>& ratio, const VectorField& phi,
                     const ScalarField& g, double rho) {
  double star = conjugate_term(secs, ratio, phi);
  if (star == kInf) return -kInf;
  ScalarField dv = divergence_gamma(phi);
  const GaussianGrid& grid = *g.grid;
  double quad = 0.0;
  double lin = 0.0;
  for (std::int64_t i = 0; i < grid.node_count(); ++i) {
    quad += grid.weight(i) * dv[i] * dv[i];
    lin += grid.weight(i) * dv[i] * g[i];
  }
  return -star - 0.5 * quad / rho - lin;
}

void validate_params(const SolverParams& p, const char* where) {
  if (!(p.step_primal > 0.0) || !(p.step_dual > 0.0)) {
    throw ValidationError(std::string(where) + ": steps must be positive");
  }
  if (!(p.gap_tol > 0.0)) {
    throw ValidationError(std::string(where) + ": gap_tol must be positive");
  }
  if (p.max_iters < 1) {
    throw ValidationError(std::string(where) + ": max_iters must be >= 1");
  }
  if (!(p.operator_norm_estimate > 0.0)) {
    throw ValidationError(std::string(where) +
                          ": operator_norm_estimate must be positive");
  }
  double prod = p.step_primal * p.step_dual * p.operator_norm_estimate *
                p.operator_norm_estimate;
  if (prod > 1.0 + 1e-9) {
    throw ValidationError(std::string(where) +
                          ": step invariant tau*sigma*L^2 <= 1 violated");
  }
}

void finalize(Solution& out, const std::vector<AxisSection>& secs,
              const std::vector<double>& ratio, const ScalarField& g,
              double rho, double gap_tol) {
  out.primal_value = primal_weighted(secs, ratio, out.u, g, rho);
  out.dual_value = dual_weighted(secs, ratio, out.phi, g, rho);
  out.gap = out.primal_value - out.dual_value;
  out.converged = out.gap <= gap_tol * (1.0 + std::abs(out.primal_value));
}

// Accelerated primal-dual iteration on the saddle form of
//   min_u TV_F(u) + (rho/2)||u - g||_w^2,
// using the data term's strong convexity rho to shrink the primal step.
// Handles every proximable section; O(1/m^2) in the gap.
Solution solve_cp(const std::vector<AxisSection>& secs,
                  const std::vector<double>& ratio, const ScalarField& g,
                  double rho, const SolverParams& params) {
  const GridPtr& grid = g.grid;
  const int m = grid->dimension();
  const int n = grid->nodes_per_axis();
  const std::int64_t N = grid->node_count();

  Solution out;
  out.u = g;  // warm start at the data
  out.phi = VectorField(grid);
  ScalarField ubar = out.u;
  ScalarField uprev = out.u;
  double tau = params.step_primal;
  double sigma = params.step_dual;

  const int check_every = 16;
  for (int iter = 1; iter <= params.max_iters; ++iter) {
    VectorField gb = gradient(ubar);
    for (int d = 0; d < m; ++d) {
      const AxisSection& sec = secs[static_cast<std::size_t>(d)];
      for (std::int64_t i = 0; i < N; ++i) {
        if (grid->axis_index(i, d) == n - 1) {
          out.phi.at(d, i) = 0.0;
          continue;
        }
        out.phi.at(d, i) =
            sec.prox_conjugate(sigma, out.phi.at(d, i) + sigma * gb.at(d, i));
      }
    }
    ScalarField dv = divergence_gamma(out.phi);
    uprev.values = out.u.values;
    const double denom = 1.0 + tau * rho;
    for (std::int64_t i = 0; i < N; ++i) {
      // Incremental form keeps u = g an exact fixed point for constant data.
      out.u[i] += (tau * dv[i] + tau * rho * (g[i] - out.u[i])) / denom;
    }
    const double theta = 1.0 / std::sqrt(1.0 + 2.0 * rho * tau);
    tau *= theta;
    sigma /= theta;
    for (std::int64_t i = 0; i < N; ++i) {
      ubar[i] = out.u[i] + theta * (out.u[i] - uprev[i]);
    }
    out.iterations = iter;
    if (iter % check_every == 0 || iter == params.max_iters) {
      finalize(out, secs, ratio, g, rho, params.gap_tol);
      if (out.converged) break;
    }
  }
  return out;
}

// Conjugate gradient in the w-metric for a SPD operator on scalar fields.
template <typename Op>
int cg_scalar(const Op& apply, const ScalarField& b, ScalarField& x,
              double tol_rel, int max_iters) {
  ScalarField ax = apply(x);
  ScalarField r = b;
  for (std::int64_t i = 0; i < r.size(); ++i) r[i] -= ax[i];
  ScalarField p = r;
  double rr = inner_product(r, r);
  double target = tol_rel * (1.0 + std::sqrt(inner_product(b, b)));
  int it = 0;
  while (it < max_iters && std::sqrt(rr) > target) {
    ScalarField ap = apply(p);
    double pap = inner_product(p, ap);
    if (!(pap > 0.0)) break;
    double alpha = rr / pap;
    for (std::int64_t i = 0; i < x.size(); ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    double rr_next = inner_product(r, r);
    double beta = rr_next / rr;
    rr = rr_next;
    for (std::int64_t i = 0; i < p.size(); ++i) p[i] = r[i] + beta * p[i];
    ++it;
  }
  return it;
}

// Same iteration on face fields under the face-weighted pairing. Runs to the
// roundoff floor: exits when the residual stops improving for a stretch.
template <typename Op>
int cg_faces(const Op& apply, const VectorField& b, VectorField& x,
             double tol_rel, int max_iters) {
  VectorField ax = apply(x);
  VectorField r = b;
  for (std::size_t i = 0; i < r.comps.size(); ++i) r.comps[i] -= ax.comps[i];
  VectorField p = r;
  double rr = inner_product(r, r);
  double target = tol_rel * (1.0 + std::sqrt(inner_product(b, b)));
  double best = rr;
  int stalled = 0;
  int it = 0;
  while (it < max_iters && std::sqrt(rr) > target && stalled < 100) {
    VectorField ap = apply(p);
    double pap = inner_product(p, ap);
    if (!(pap > 0.0)) break;
    double alpha = rr / pap;
    for (std::size_t i = 0; i < x.comps.size(); ++i) {
      x.comps[i] += alpha * p.comps[i];
      r.comps[i] -= alpha * ap.comps[i];
    }
    double rr_next = inner_product(r, r);
    double beta = rr_next / rr;
    rr = rr_next;
    if (rr < 0.9 * best) {
      best = rr;
      stalled = 0;
    } else {
      ++stalled;
    }
    for (std::size_t i = 0; i < p.comps.size(); ++i) {
      p.comps[i] = r.comps[i] + beta * p.comps[i];
    }
    ++it;
  }
  return it;
}

// The quadratic kind makes the problem linear: rho(u - g) - mu div grad u = 0.
// Conjugate gradient on (I + (mu/rho) A) u = g with A = -div grad reaches
// machine-precision gaps; phi = mu grad u is the matching dual certificate.
Solution solve_quadratic_direct(const std::vector<AxisSection>& secs,
                                const std::vector<double>& ratio, double mu,
                                const ScalarField& g, double rho,
                                const SolverParams& params) {
  const GridPtr& grid = g.grid;
  const double c = mu / rho;
  auto apply = [&](const ScalarField& v) {
    ScalarField av = divergence_gamma(gradient(v));
    ScalarField outv = v;
    for (std::int64_t i = 0; i < v.size(); ++i) outv[i] = v[i] - c * av[i];
    return outv;
  };
  Solution out;
  out.u = g;
  out.iterations = cg_scalar(apply, g, out.u, 1e-15, 200000);
  out.phi = gradient(out.u);
  const int n = grid->nodes_per_axis();
  for (int d = 0; d < grid->dimension(); ++d) {
    for (std::int64_t i = 0; i < grid->node_count(); ++i) {
      out.phi.at(d, i) =
          grid->axis_index(i, d) == n - 1 ? 0.0 : mu * out.phi.at(d, i);
    }
  }
  finalize(out, secs, ratio, g, rho, params.gap_tol);
  if (!out.converged) {
    Solution cp = solve_cp(secs, ratio, g, rho, params);
    if (cp.gap < out.gap) return cp;
  }
  return out;
}

std::uint64_t fnv1a(const std::vector<std::uint8_t>& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  return h;
}

// One-homogeneous sections have box dual domains |phi| <= r_d, so the dual is
// a box-constrained quadratic in phi. A primal-dual active-set iteration
// (classify faces against the slope of u(phi) = g + div(phi)/rho, then solve
// the interior first-order system by conjugate gradient) reaches the exact
// discrete minimizer in a handful of set updates; the generic iteration is
// the fallback when the sets fail to settle.
Solution solve_box_active_set(const std::vector<AxisSection>& secs,
                              const std::vector<double>& ratio,
                              const ScalarField& g, double rho,
                              const SolverParams& params) {
  const GridPtr& grid = g.grid;
  const int m = grid->dimension();
  const int n = grid->nodes_per_axis();
  const std::int64_t N = grid->node_count();
  std::vector<double> radius(static_cast<std::size_t>(m));
  for (int d = 0; d < m; ++d) {
    radius[static_cast<std::size_t>(d)] =
        secs[static_cast<std::size_t>(d)].dual_radius();
  }

  enum : std::uint8_t { kInactive = 0, kUpper = 1, kLower = 2, kTop = 3 };
  const std::size_t slots = static_cast<std::size_t>(m) * static_cast<std::size_t>(N);
  std::vector<std::uint8_t> cls(slots, kInactive);
  VectorField phi(grid);
  const double lam = params.operator_norm_estimate * params.operator_norm_estimate;
  const double ridge = 1e-14 * (lam / rho + 1.0);

  // Classification step sized by the reduced Hessian diagonal: for face k the
  // diagonal of -grad div / rho in face coordinates is
  // ratio[k] * (1 + w_k / w_{k+1}) / (h_k^2 rho). A unit step would predict
  // bound-to-bound jumps of size 2r * diag and chatter; the scaled prediction
  // phi + step * slope is the Jacobi step and settles.
  const AxisRule& ax = grid->axis();
  std::vector<double> cstep(static_cast<std::size_t>(n - 1));
  for (int k = 0; k + 1 < n; ++k) {
    double h = ax.spacing[static_cast<std::size_t>(k)];
    double diag = ratio[static_cast<std::size_t>(k)] *
                  (1.0 + ax.weights[k] / ax.weights[k + 1]) / (h * h * rho);
    cstep[static_cast<std::size_t>(k)] = 1.0 / (diag + ridge);
  }

  auto classify = [&](const std::vector<std::uint8_t>& prev,
                      std::vector<std::uint8_t>& out_cls) {
    ScalarField dv = divergence_gamma(phi);
    ScalarField u(grid);
    for (std::int64_t i = 0; i < N; ++i) u[i] = g[i] + dv[i] / rho;
    VectorField s = gradient(u);
    for (int d = 0; d < m; ++d) {
      double r = radius[static_cast<std::size_t>(d)];
      for (std::int64_t i = 0; i < N; ++i) {
        std::size_t slot = static_cast<std::size_t>(d) * N + i;
        int k = grid->axis_index(i, d);
        if (k == n - 1) {
          out_cls[slot] = kTop;
          continue;
        }
        double pred = phi.at(d, i) +
                      cstep[static_cast<std::size_t>(k)] * s.at(d, i);
        std::uint8_t want = pred > r ? kUpper : (pred < -r ? kLower : kInactive);
        // never hop bound to bound in one round; release through the
        // interior so the inner solve can absorb the change
        if ((prev[slot] == kUpper && want == kLower) ||
            (prev[slot] == kLower && want == kUpper)) {
          want = kInactive;
        }
        out_cls[slot] = want;
      }
    }
  };

  auto apply_interior = [&](const VectorField& v) {
    ScalarField dv = divergence_gamma(v);
    for (std::int64_t i = 0; i < N; ++i) dv[i] /= rho;
    VectorField gv = gradient(dv);
    VectorField outv(grid);
    for (std::size_t slot = 0; slot < slots; ++slot) {
      if (cls[slot] != kInactive) continue;
      int d = static_cast<int>(slot / static_cast<std::size_t>(N));
      std::int64_t i = static_cast<std::int64_t>(slot % static_cast<std::size_t>(N));
      outv.at(d, i) = -gv.at(d, i) + ridge * v.at(d, i);
    }
    return outv;
  };

  {
    std::vector<std::uint8_t> fresh(slots, kInactive);
    classify(fresh, cls);
  }
  std::vector<std::uint64_t> seen;
  std::vector<std::uint8_t> cls_next(slots);
  int inner_total = 0;
  bool settled = false;
  for (int as_iter = 0; as_iter < 100; ++as_iter) {
    // pin active faces, zero the rest into the affine right-hand side
    VectorField pinned(grid);
    for (std::size_t slot = 0; slot < slots; ++slot) {
      int d = static_cast<int>(slot / static_cast<std::size_t>(N));
      std::int64_t i = static_cast<std::int64_t>(slot % static_cast<std::size_t>(N));
      double r = radius[static_cast<std::size_t>(d)];
      if (cls[slot] == kUpper) {
        phi.at(d, i) = r;
        pinned.at(d, i) = r;
      } else if (cls[slot] == kLower) {
        phi.at(d, i) = -r;
        pinned.at(d, i) = -r;
      } else if (cls[slot] == kTop) {
        phi.at(d, i) = 0.0;
      }
    }
    ScalarField t = divergence_gamma(pinned);
    for (std::int64_t i = 0; i < N; ++i) t[i] = t[i] / rho + g[i];
    VectorField rhs_full = gradient(t);
    VectorField rhs(grid);
    VectorField x(grid);
    for (std::size_t slot = 0; slot < slots; ++slot) {
      if (cls[slot] != kInactive) continue;
      int d = static_cast<int>(slot / static_cast<std::size_t>(N));
      std::int64_t i = static_cast<std::int64_t>(slot % static_cast<std::size_t>(N));
      rhs.at(d, i) = rhs_full.at(d, i);
      x.at(d, i) = phi.at(d, i);  // warm start from the previous sets
    }
    inner_total += cg_faces(apply_interior, rhs, x, 3e-15, 20000);
    for (std::size_t slot = 0; slot < slots; ++slot) {
      if (cls[slot] != kInactive) continue;
      int d = static_cast<int>(slot / static_cast<std::size_t>(N));
      std::int64_t i = static_cast<std::int64_t>(slot % static_cast<std::size_t>(N));
      phi.at(d, i) = x.at(d, i);
    }
    classify(cls, cls_next);
    if (cls_next == cls) {
      settled = true;
      break;
    }
    std::uint64_t sig = fnv1a(cls_next);
    bool cycled = std::find(seen.begin(), seen.end(), sig) != seen.end();
    cls.swap(cls_next);
    if (cycled) break;
    seen.push_back(sig);
  }

  // Clamp into the exact dual box so the conjugate stays finite.
  for (int d = 0; d < m; ++d) {
    double r = radius[static_cast<std::size_t>(d)];
    for (std::int64_t i = 0; i < N; ++i) {
      if (grid->axis_index(i, d) == n - 1) {
        phi.at(d, i) = 0.0;
      } else {
        phi.at(d, i) = std::clamp(phi.at(d, i), -r, r);
      }
    }
  }
  Solution out;
  out.phi = phi;
  ScalarField dv = divergence_gamma(phi);
  out.u = ScalarField(grid);
  for (std::int64_t i = 0; i < N; ++i) out.u[i] = g[i] + dv[i] / rho;
  out.iterations = inner_total;
  finalize(out, secs, ratio, g, rho, params.gap_tol);
  if (!settled || !out.converged) {
    Solution cp = solve_cp(secs, ratio, g, rho, params);
    if (cp.gap < out.gap) return cp;
  }
  return out;
}

bool box_dual_kind(const ConvexIntegrand& F) {
  switch (F.kind()) {
    case IntegrandKind::euclidean_norm:
    case IntegrandKind::anisotropic_norm:
      return true;
    case IntegrandKind::power_p:
      return F.exponent() == 1.0;
    default:
      return false;
  }
}

Solution solve_weighted(const ConvexIntegrand& F, const ScalarField& g,
                        double rho, const SolverParams& params,
                        const char* where) {
  require_field(g, where);
  validate_params(params, where);
  if (F.kind() == IntegrandKind::delta_regularized) {
    throw ValidationError(std::string(where) +
                          ": delta-regularized integrands have no proximal "
                          "map; solve the base integrand instead");
  }
  std::vector<double> ratio = face_ratios(*g.grid);
  std::vector<AxisSection> secs = make_sections(F, g.grid->dimension(), where);
  if (F.kind() == IntegrandKind::quadratic) {
    return solve_quadratic_direct(secs, ratio, F.param(), g, rho, params);
  }
  if (box_dual_kind(F)) {
    return solve_box_active_set(secs, ratio, g, rho, params);
  }
  return solve_cp(secs, ratio, g, rho, params);
}

bool axis_line_convex(const ScalarField& u, double tol) {
  const GaussianGrid& grid = *u.grid;
  const AxisRule& ax = grid.axis();
  const int m = grid.dimension();
  const int n = grid.nodes_per_axis();
  const std::int64_t N = grid.node_count();
  for (int d = 0; d < m; ++d) {
    const std::int64_t s = grid.stride(d);
    for (std::int64_t i = 0; i < N; ++i) {
      int k = grid.axis_index(i, d);
      if (k == 0 || k == n - 1) continue;
      double span = ax.nodes[k + 1] - ax.nodes[k - 1];
      double theta = (ax.nodes[k + 1] - ax.nodes[k]) / span;
      double chord = theta * u[i - s] + (1.0 - theta) * u[i + s];
      if (chord - u[i] < -tol) return false;
    }
  }
  return true;
}

}  // namespace

double operator_norm(const GridPtr& grid) {
  if (!grid) throw ValidationError("operator_norm: null grid");
  ScalarField v(grid);
  std::mt19937_64 rng(0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (auto& x : v.values) x = unif(rng);
  double nv = l2_norm(v);
  for (auto& x : v.values) x /= nv;
  double lambda = 0.0;
  for (int it = 0; it < 50; ++it) {
    ScalarField av = divergence_gamma(gradient(v));
    for (auto& x : av.values) x = -x;
    lambda = inner_product(v, av);  // Rayleigh quotient, v has unit w-norm
    double na = l2_norm(av);
    if (na < 1e-300) break;
    for (std::int64_t i = 0; i < v.size(); ++i) v[i] = av[i] / na;
  }
  return std::sqrt(std::max(lambda, 1e-12));
}

SolverParams default_params(const GridPtr& grid, double gap_tol,
                            int max_iters) {
  SolverParams p;
  p.operator_norm_estimate = operator_norm(grid);
  p.step_primal = 0.99 / p.operator_norm_estimate;
  p.step_dual = p.step_primal;
  p.gap_tol = gap_tol;
  p.max_iters = max_iters;
  return p;
}

double primal_energy(const ConvexIntegrand& F, const ScalarField& u,
                     const ScalarField& g) {
  require_same_grid(u, g, "primal_energy");
  std::vector<double> ratio = face_ratios(*u.grid);
  std::vector<AxisSection> secs =
      make_sections(F, u.grid->dimension(), "primal_energy");
  return primal_weighted(secs, ratio, u, g, 1.0);
}

double dual_energy(const ConvexIntegrand& F, const VectorField& phi,
                   const ScalarField& g) {
  require_field(g, "dual_energy");
  if (!phi.grid || !grids_compatible(phi.grid, g.grid)) {
    throw ValidationError("dual_energy: fields live on different grids");
  }
  std::vector<double> ratio = face_ratios(*g.grid);
  std::vector<AxisSection> secs =
      make_sections(F, g.grid->dimension(), "dual_energy");
  return dual_weighted(secs, ratio, phi, g, 1.0);
}

Solution solve(const ConvexIntegrand& F, const ScalarField& g,
               const SolverParams& params) {
  return solve_weighted(F, g, 1.0, params, "solve");
}

Solution solve(const ConvexIntegrand& F, const ScalarField& g) {
  require_field(g, "solve");
  return solve_weighted(F, g, 1.0, default_params(g.grid), "solve");
}

ScalarField el_residual(const ConvexIntegrand& F, const ScalarField& u,
                        const ScalarField& g) {
  require_same_grid(u, g, "el_residual");
  const bool differentiable =
      F.kind() == IntegrandKind::quadratic ||
      (F.kind() == IntegrandKind::power_p && F.exponent() > 1.0) || F.smooth();
  if (!differentiable) {
    throw ValidationError(
        "el_residual: integrand is not differentiable (quadratic, power with "
        "p > 1, or smoothed required)");
  }
  const GridPtr& grid = u.grid;
  const int m = grid->dimension();
  const int n = grid->nodes_per_axis();
  const std::int64_t N = grid->node_count();
  int pinned = F.pinned_dimension();
  if (pinned > 0 && pinned != m) {
    throw ValidationError("el_residual: integrand dimension does not match");
  }
  VectorField grad = gradient(u);
  VectorField psi(grid);
  const int embed_dim = pinned > 0 ? pinned : 1;
  std::vector<double> x(static_cast<std::size_t>(embed_dim), 0.0);
  for (int d = 0; d < m; ++d) {
    const int slot = pinned > 0 ? d : 0;
    for (std::int64_t i = 0; i < N; ++i) {
      if (grid->axis_index(i, d) == n - 1) continue;
      double t = grad.at(d, i);
      double w = 0.0;
      switch (F.kind()) {
        case IntegrandKind::quadratic:
          w = F.param() * t;
          break;
        case IntegrandKind::power_p: {
          double p = F.exponent();
          w = t == 0.0 ? 0.0
                       : F.param() * p * std::pow(std::abs(t), p - 1.0) *
                             (t > 0.0 ? 1.0 : -1.0);
          break;
        }
        default: {  // moreau_regularized
          std::fill(x.begin(), x.end(), 0.0);
          x[static_cast<std::size_t>(slot)] = t;
          w = smooth_gradient(F, x)[static_cast<std::size_t>(slot)];
          break;
        }
      }
      psi.at(d, i) = w;
    }
  }
  ScalarField dv = divergence_gamma(psi);
  ScalarField r(grid);
  for (std::int64_t i = 0; i < N; ++i) r[i] = -dv[i] + u[i] - g[i];
  return r;
}

ScalarField spectral_solve_quadratic(const ScalarField& g, double mu) {
  require_field(g, "spectral_solve_quadratic");
  const GridPtr& grid = g.grid;
  if (grid->scheme() != GridScheme::gauss_hermite) {
    throw ValidationError(
        "spectral_solve_quadratic: Gauss-Hermite grid required");
  }
  const int m = grid->dimension();
  if (m > 2) {
    throw ValidationError("spectral_solve_quadratic: dimension <= 2 required");
  }
  if (!(mu >= 0.0)) {
    throw ValidationError("spectral_solve_quadratic: mu must be >= 0");
  }
  const AxisRule& ax = grid->axis();
  const int n = ax.size();
  // H[k*n + j] = orthonormal Hermite h_k at node j. The far-tail quadrature
  // weights are only accurate down to a precision floor (about 1e-33, from
  // squaring eigenvector components), so degrees whose squared values at the
  // extreme nodes overwhelm that floor lose discrete orthonormality. Keep
  // degrees only while the measured norm defect |<h_k,h_k>_w - 1| stays
  // below 1e-10; by Cauchy-Schwarz the same bound controls cross terms.
  const int K_cap = std::min(n - 1, kMaxHermiteDegree);
  std::vector<double> H;
  H.reserve(static_cast<std::size_t>(K_cap + 1) * n);
  int K = -1;
  for (int k = 0; k <= K_cap; ++k) {
    double norm2 = 0.0;
    for (int j = 0; j < n; ++j) {
      double h = hermite_normalized(k, ax.nodes[j]);
      H.push_back(h);
      norm2 += ax.weights[j] * h * h;
    }
    if (std::abs(norm2 - 1.0) > 1e-10) {
      H.resize(static_cast<std::size_t>(k) * n);
      break;
    }
    K = k;
  }
  if (K < 0) {
    throw ResourceError(
        "spectral_solve_quadratic: quadrature weights cannot resolve even "
        "degree zero on this grid");
  }
  // Coefficients below the roundoff floor of the transform are dropped:
  // reconstructing them through the huge far-node values of high-degree
  // polynomials would amplify pure noise.
  auto clip = [](std::vector<double>& c) {
    double cmax = 0.0;
    for (double v : c) cmax = std::max(cmax, std::abs(v));
    double floor_ = 1e-13 * cmax;
    for (double& v : c) {
      if (std::abs(v) < floor_) v = 0.0;
    }
  };
  ScalarField out(grid);
  if (m == 1) {
    std::vector<double> c(static_cast<std::size_t>(K + 1), 0.0);
    for (int k = 0; k <= K; ++k) {
      double acc = 0.0;
      for (int j = 0; j < n; ++j) {
        acc += ax.weights[j] * H[static_cast<std::size_t>(k) * n + j] * g[j];
      }
      c[static_cast<std::size_t>(k)] = acc;
    }
    clip(c);
    for (int k = 0; k <= K; ++k) c[static_cast<std::size_t>(k)] /= 1.0 + mu * k;
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int k = 0; k <= K; ++k) {
        acc += c[static_cast<std::size_t>(k)] *
               H[static_cast<std::size_t>(k) * n + j];
      }
      out[j] = acc;
    }
    return out;
  }
  // Two separable passes: transform axis 0, then axis 1, scale, invert.
  std::vector<double> a(static_cast<std::size_t>(K + 1) * n, 0.0);  // (k1, j2)
  for (int k1 = 0; k1 <= K; ++k1) {
    for (int j2 = 0; j2 < n; ++j2) {
      double acc = 0.0;
      for (int j1 = 0; j1 < n; ++j1) {
        acc += ax.weights[j1] * H[static_cast<std::size_t>(k1) * n + j1] *
               g[j1 + static_cast<std::int64_t>(n) * j2];
      }
      a[static_cast<std::size_t>(k1) * n + j2] = acc;
    }
  }
  std::vector<double> c(static_cast<std::size_t>(K + 1) * (K + 1), 0.0);
  for (int k1 = 0; k1 <= K; ++k1) {
    for (int k2 = 0; k2 <= K; ++k2) {
      double acc = 0.0;
      for (int j2 = 0; j2 < n; ++j2) {
        acc += ax.weights[j2] * H[static_cast<std::size_t>(k2) * n + j2] *
               a[static_cast<std::size_t>(k1) * n + j2];
      }
      c[static_cast<std::size_t>(k1) * (K + 1) + k2] = acc;
    }
  }
  clip(c);
  for (int k1 = 0; k1 <= K; ++k1) {
    for (int k2 = 0; k2 <= K; ++k2) {
      c[static_cast<std::size_t>(k1) * (K + 1) + k2] /= 1.0 + mu * (k1 + k2);
    }
  }
  std::vector<double> b(static_cast<std::size_t>(K + 1) * n, 0.0);  // (k1, j2)
  for (int k1 = 0; k1 <= K; ++k1) {
    for (int j2 = 0; j2 < n; ++j2) {
      double acc = 0.0;
      for (int k2 = 0; k2 <= K; ++k2) {
        acc += c[static_cast<std::size_t>(k1) * (K + 1) + k2] *
               H[static_cast<std::size_t>(k2) * n + j2];
      }
      b[static_cast<std::size_t>(k1) * n + j2] = acc;
    }
  }
  for (int j2 = 0; j2 < n; ++j2) {
    for (int j1 = 0; j1 < n; ++j1) {
      double acc = 0.0;
      for (int k1 = 0; k1 <= K; ++k1) {
        acc += H[static_cast<std::size_t>(k1) * n + j1] *
               b[static_cast<std::size_t>(k1) * n + j2];
      }
      out[j1 + static_cast<std::int64_t>(n) * j2] = acc;
    }
  }
  return out;
}

std::vector<ScalarField> gradient_flow(const ConvexIntegrand& F,
                                       const ScalarField& u0, double dt,
                                       int steps) {
  require_field(u0, "gradient_flow");
  if (!(dt > 0.0)) throw ValidationError("gradient_flow: dt must be positive");
  if (steps < 0) throw ValidationError("gradient_flow: steps must be >= 0");
  SolverParams params = default_params(u0.grid, 1e-9, 200000);
  std::vector<ScalarField> traj;
  traj.reserve(static_cast<std::size_t>(steps) + 1);
  traj.push_back(u0);
  for (int s = 0; s < steps; ++s) {
    Solution sol =
        solve_weighted(F, traj.back(), 1.0 / dt, params, "gradient_flow");
    traj.push_back(std::move(sol.u));
  }
  return traj;
}

SweepReport dimension_sweep(const ConvexIntegrand& F, const ScalarField& g,
                            const std::vector<int>& dims,
                            const SolverParams& params) {
  require_field(g, "dimension_sweep");
  const GridPtr& grid = g.grid;
  const int m = grid->dimension();
  if (dims.empty()) {
    throw ValidationError("dimension_sweep: dims must be nonempty");
  }
  for (std::size_t j = 0; j < dims.size(); ++j) {
    if (dims[j] < 1 || dims[j] > m) {
      throw ValidationError("dimension_sweep: dims entries must lie in [1, m]");
    }
    if (j > 0 && dims[j] <= dims[j - 1]) {
      throw ValidationError("dimension_sweep: dims must be strictly increasing");
    }
  }
  SweepReport report;
  report.dims = dims;
  Solution full = solve_weighted(F, g, 1.0, params, "dimension_sweep");
  report.u_full = std::move(full.u);
  double gmax = 0.0;
  for (double v : g.values) gmax = std::max(gmax, std::abs(v));
  // Solutions obey the maximum principle, so max|g| bounds max|u|.
  const double tol = 1e-6 + 4.0 * grid->max_spacing() * grid->max_spacing() *
                                std::max(1.0, gmax);
  for (int k : dims) {
    ScalarField gk(grid);
    if (k == m) {
      gk = g;
    } else {
      ScalarField head = cylindrical_projection(g, k);
      const std::int64_t head_n = head.size();
      for (std::int64_t i = 0; i < grid->node_count(); ++i) {
        gk[i] = head[i % head_n];
      }
    }
    Solution sol = solve_weighted(F, gk, 1.0, params, "dimension_sweep");
    ScalarField diff(grid);
    for (std::int64_t i = 0; i < grid->node_count(); ++i) {
      diff[i] = sol.u[i] - report.u_full[i];
    }
    report.distance_to_full.push_back(l2_norm(diff));
    report.energies.push_back(sol.primal_value);
    report.convex.push_back(axis_line_convex(sol.u, tol));
    report.solutions.push_back(std::move(sol.u));
  }
  return report;
}

SweepReport dimension_sweep(const ConvexIntegrand& F, const ScalarField& g,
                            const std::vector<int>& dims) {
  require_field(g, "dimension_sweep");
  return dimension_sweep(F, g, dims, default_params(g.grid));
}

}  // namespace gtv
