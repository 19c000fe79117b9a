#pragma once

#include "gtv/core.hpp"

#include <span>
#include <utility>
#include <vector>

namespace gtv {

enum class IntegrandKind {
  euclidean_norm,
  power_p,
  quadratic,
  anisotropic_norm,
  moreau_regularized,
  delta_regularized,
};

// Growth envelope: alpha2*|h|^p - beta2 <= F(h) <= alpha1*|h|^p + beta1.
struct Growth {
  double p = 1.0;
  double alpha1 = 1.0;
  double beta1 = 0.0;
  double alpha2 = 1.0;
  double beta2 = 0.0;
};

// Immutable descriptor of a convex integrand F with F(0) = 0 and F >= 0.
// Radial kinds accept arguments of any dimension; anisotropic_norm fixes the
// dimension through its per-axis weights. The two regularized kinds wrap a
// base integrand: moreau_regularized is the Moreau envelope at parameter 1/n
// plus (1/2n)|h|^2 (smooth and uniformly convex), delta_regularized is
// delta|h| + inf-convolution of the base with |.|/delta (linear growth).
class ConvexIntegrand {
 public:
  static ConvexIntegrand euclidean_norm();
  static ConvexIntegrand power_p(double p, double scale);
  static ConvexIntegrand quadratic(double mu);
  static ConvexIntegrand anisotropic_norm(std::vector<double> axis_weights);

  IntegrandKind kind() const { return kind_; }
  const Growth& growth() const { return growth_; }
  // scale for power_p, mu for quadratic, n for moreau_regularized,
  // delta for delta_regularized; unused otherwise.
  double param() const { return param_; }
  double exponent() const { return exponent_; }  // power_p only
  const std::vector<double>& axis_weights() const { return axis_weights_; }
  const ConvexIntegrand& base() const;
  bool smooth() const { return kind_ == IntegrandKind::moreau_regularized; }
  // True when the value depends on the argument only through its length.
  bool radial() const;
  // Dimension pinned by anisotropic weights anywhere in the composition,
  // or 0 when the integrand accepts any dimension.
  int pinned_dimension() const;

  friend ConvexIntegrand delta_regularize(const ConvexIntegrand& F, double delta);
  friend ConvexIntegrand smooth_approx(const ConvexIntegrand& F, int n);

 private:
  ConvexIntegrand() = default;

  IntegrandKind kind_ = IntegrandKind::euclidean_norm;
  double param_ = 0.0;
  double exponent_ = 1.0;
  std::vector<double> axis_weights_;
  std::shared_ptr<const ConvexIntegrand> base_;
  Growth growth_;
};

// F(h). +infinity never occurs for the built-in kinds.
double evaluate(const ConvexIntegrand& F, std::span<const double> h);

// F*(q) = sup_h <q,h> - F(h); +infinity outside the dual domain.
double conjugate(const ConvexIntegrand& F, std::span<const double> q);

// F^inf(h) = lim_{t->inf} F(t h)/t; +infinity for superlinear kinds.
double recession(const ConvexIntegrand& F, std::span<const double> h);

// argmin_z 1/2 |z-h|^2 + tau F(z). Closed form except power_p with a general
// exponent, which uses a safeguarded Newton solve. delta_regularized kinds
// have no proximal map here and raise ValidationError.
std::vector<double> prox_primal(const ConvexIntegrand& F, double tau,
                                std::span<const double> h);

// argmin_z 1/2 |z-q|^2 + sigma F*(z), through the Moreau identity
// prox_{sigma F*}(q) = q - sigma prox_{F/sigma}(q/sigma).
std::vector<double> prox_conjugate(const ConvexIntegrand& F, double sigma,
                                   std::span<const double> q);

// Gradient of a moreau_regularized integrand (the only differentiable kind):
// (p - prox_{1/n}(p)) * n + p/n.
std::vector<double> smooth_gradient(const ConvexIntegrand& F,
                                    std::span<const double> p);

// delta|h| + inf-convolution of F with |.|/delta. The inf-convolution is
// sampled on a lattice with golden-section refinement, so the base must be
// radial or at most two-dimensional.
ConvexIntegrand delta_regularize(const ConvexIntegrand& F, double delta);

// Moreau envelope at parameter 1/n plus (1/2n)|h|^2: smooth, uniformly
// convex, quadratic growth, and F_n -> F locally uniformly as n grows.
ConvexIntegrand smooth_approx(const ConvexIntegrand& F, int n);

// Classical subsolution pair for the data g at slope parameter eps:
//   g_eps = max(g, -1/eps) + eps|x|^2 + F_n*(eps x)/eps
//   u_eps = F_n*(eps x)/eps + m*eps - 1/eps          (m = grid dimension)
// u_eps is convex and satisfies -div_gamma grad F_n(grad u_eps) + u_eps
// - g_eps <= 0 up to discretization slack. Requires a smooth integrand.
std::pair<ScalarField, ScalarField> make_subsolution(const ConvexIntegrand& Fn,
                                                     const ScalarField& g,
                                                     double eps);

// Scalar restriction t -> F(t e_axis) of an integrand along one coordinate
// axis, with conjugate and proximal maps of the restriction in closed form.
// Valid for every built-in kind because they are all axis-solid: the
// minimizers involved stay on the axis.
class AxisSection {
 public:
  AxisSection(const ConvexIntegrand& F, int axis);

  double value(double t) const;
  double conjugate(double q) const;
  double prox_primal(double tau, double t) const;
  // Via the scalar Moreau identity; exact for the listed kinds.
  double prox_conjugate(double sigma, double q) const;
  // Largest |q| with finite conjugate (kInf when the domain is all of R).
  double dual_radius() const { return dual_radius_; }

 private:
  enum class Tag { scaled_abs, scaled_power, scaled_quad, moreau, delta };
  Tag tag_ = Tag::scaled_abs;
  double c_ = 1.0;      // scaled_abs slope / power scale / quad mu
  double p_ = 2.0;      // power exponent
  double reg_ = 0.0;    // moreau n / delta delta
  std::shared_ptr<const AxisSection> base_;
  double dual_radius_ = kInf;
};

}  // namespace gtv
