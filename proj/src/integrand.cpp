#include "gtv/integrand.hpp"

#include <algorithm>
#include <cmath>

namespace gtv {

namespace {

double norm2(std::span<const double> h) {
  double acc = 0.0;
  for (double v : h) acc += v * v;
  return std::sqrt(acc);
}

bool is_primitive(IntegrandKind k) {
  return k != IntegrandKind::moreau_regularized &&
         k != IntegrandKind::delta_regularized;
}

// Conjugate of r -> s r^p on r >= 0, evaluated at |q| (p > 1).
double power_conj(double p, double s, double absq) {
  if (absq == 0.0) return 0.0;
  return (1.0 - 1.0 / p) * absq * std::pow(absq / (p * s), 1.0 / (p - 1.0));
}

// argmin_{r>=0} 1/2 (r-a)^2 + tau s r^p for a >= 0, p > 1.
double power_prox_radial(double p, double s, double tau, double a) {
  if (a <= 0.0) return 0.0;
  if (p == 2.0) return a / (1.0 + 2.0 * tau * s);
  if (p == 1.5) {
    const double b = 1.5 * tau * s;
    const double y = 0.5 * (-b + std::sqrt(b * b + 4.0 * a));
    return y * y;
  }
  // psi(r) = r + tau s p r^{p-1} - a is increasing with psi(0) <= 0 <= psi(a);
  // bisection-safeguarded Newton.
  double lo = 0.0, hi = a, r = a;
  for (int it = 0; it < 200; ++it) {
    const double psi = r + tau * s * p * std::pow(r, p - 1.0) - a;
    if (psi > 0.0)
      hi = r;
    else
      lo = r;
    const double dpsi = 1.0 + tau * s * p * (p - 1.0) * std::pow(r, p - 2.0);
    double next = r - psi / dpsi;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - r) <= 1e-16 * (1.0 + a)) {
      r = next;
      break;
    }
    r = next;
  }
  return r;
}

// Golden-section minimization of a convex scalar function on [lo, hi].
template <typename F>
double golden_min(F&& f, double lo, double hi, double* arg = nullptr) {
  const double phi = 0.6180339887498949;
  double a = lo, b = hi;
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 120 && b - a > 1e-14 * (1.0 + std::abs(a) + std::abs(b));
       ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = f(x2);
    }
  }
  const double x = f1 <= f2 ? x1 : x2;
  if (arg) *arg = x;
  return std::min(f1, f2);
}

// Euclidean projection onto the ellipsoid sum z_j^2 / a_j <= 1.
std::vector<double> project_ellipsoid(std::span<const double> z0,
                                      const std::vector<double>& a) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += z0[j] * z0[j] / a[j];
  std::vector<double> z(z0.begin(), z0.end());
  if (s <= 1.0) return z;
  // z_j = z0_j / (1 + nu / a_j); h(nu) decreasing convex with h(0) > 0.
  double nu = 0.0, h = s - 1.0;
  for (int it = 0; it < 200 && std::abs(h) > 1e-14; ++it) {
    double dh = 0.0;
    h = -1.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
      const double d = a[j] + nu;
      h += a[j] * z0[j] * z0[j] / (d * d);
      dh -= 2.0 * a[j] * z0[j] * z0[j] / (d * d * d);
    }
    double next = nu - h / dh;
    if (!(next > 0.0) || !std::isfinite(next)) next = nu > 0 ? 2.0 * nu : 1.0;
    nu = next;
  }
  for (std::size_t j = 0; j < a.size(); ++j) z[j] = z0[j] / (1.0 + nu / a[j]);
  return z;
}

void require_dim(const ConvexIntegrand& F, std::span<const double> h,
                 const char* what) {
  const int pinned = F.pinned_dimension();
  if (pinned > 0 && static_cast<int>(h.size()) != pinned)
    throw ValidationError(std::string(what) +
                          ": argument dimension does not match the integrand");
  if (h.empty()) throw ValidationError(std::string(what) + ": empty argument");
}

// Sampled inf-convolution inf_q F(q) + |p-q|/delta. Radial bases reduce to a
// scalar problem along p; two-dimensional bases use a lattice plus
// coordinatewise golden refinement. The candidate q = p is always included.
double sampled_infconv(const ConvexIntegrand& base, double delta,
                       std::span<const double> p);

}  // namespace

ConvexIntegrand ConvexIntegrand::euclidean_norm() {
  ConvexIntegrand F;
  F.kind_ = IntegrandKind::euclidean_norm;
  F.growth_ = {1.0, 1.0, 0.0, 1.0, 0.0};
  return F;
}

ConvexIntegrand ConvexIntegrand::power_p(double p, double scale) {
  if (!(p >= 1.0)) throw ValidationError("power_p requires exponent p >= 1");
  if (!(scale > 0.0)) throw ValidationError("power_p requires scale > 0");
  ConvexIntegrand F;
  F.kind_ = IntegrandKind::power_p;
  F.exponent_ = p;
  F.param_ = scale;
  F.growth_ = {p, scale, 0.0, scale, 0.0};
  return F;
}

ConvexIntegrand ConvexIntegrand::quadratic(double mu) {
  if (!(mu > 0.0)) throw ValidationError("quadratic requires mu > 0");
  ConvexIntegrand F;
  F.kind_ = IntegrandKind::quadratic;
  F.param_ = mu;
  F.growth_ = {2.0, 0.5 * mu, 0.0, 0.5 * mu, 0.0};
  return F;
}

ConvexIntegrand ConvexIntegrand::anisotropic_norm(std::vector<double> axis_weights) {
  if (axis_weights.empty() || axis_weights.size() > 6)
    throw ValidationError("anisotropic_norm requires 1 to 6 axis weights");
  for (double a : axis_weights)
    if (!(a > 0.0)) throw ValidationError("anisotropic_norm weights must be positive");
  ConvexIntegrand F;
  F.kind_ = IntegrandKind::anisotropic_norm;
  F.axis_weights_ = std::move(axis_weights);
  const auto [lo, hi] = std::minmax_element(F.axis_weights_.begin(),
                                            F.axis_weights_.end());
  F.growth_ = {1.0, std::sqrt(*hi), 0.0, std::sqrt(*lo), 0.0};
  return F;
}

const ConvexIntegrand& ConvexIntegrand::base() const {
  if (!base_) throw ValidationError("integrand has no base kind");
  return *base_;
}

bool ConvexIntegrand::radial() const {
  switch (kind_) {
    case IntegrandKind::anisotropic_norm:
      return false;
    case IntegrandKind::moreau_regularized:
    case IntegrandKind::delta_regularized:
      return base_->radial();
    default:
      return true;
  }
}

int ConvexIntegrand::pinned_dimension() const {
  switch (kind_) {
    case IntegrandKind::anisotropic_norm:
      return static_cast<int>(axis_weights_.size());
    case IntegrandKind::moreau_regularized:
    case IntegrandKind::delta_regularized:
      return base_->pinned_dimension();
    default:
      return 0;
  }
}

ConvexIntegrand delta_regularize(const ConvexIntegrand& F, double delta) {
  if (!(delta > 0.0)) throw ValidationError("delta_regularize requires delta > 0");
  if (!is_primitive(F.kind_))
    throw ValidationError("delta_regularize requires a primitive base kind");
  if (!F.radial() && F.pinned_dimension() > 2)
    throw ValidationError(
        "delta_regularize: sampled inf-convolution needs a radial or at most "
        "two-dimensional base");
  ConvexIntegrand out;
  out.kind_ = IntegrandKind::delta_regularized;
  out.param_ = delta;
  out.base_ = std::make_shared<const ConvexIntegrand>(F);
  out.growth_ = {1.0, delta + 1.0 / delta, 0.0, delta, 0.0};
  return out;
}

ConvexIntegrand smooth_approx(const ConvexIntegrand& F, int n) {
  if (n < 1) throw ValidationError("smooth_approx requires n >= 1");
  if (!is_primitive(F.kind_))
    throw ValidationError("smooth_approx requires a primitive base kind");
  ConvexIntegrand out;
  out.kind_ = IntegrandKind::moreau_regularized;
  out.param_ = static_cast<double>(n);
  out.base_ = std::make_shared<const ConvexIntegrand>(F);
  const double nn = n;
  out.growth_ = {2.0, 0.5 * (nn + 1.0 / nn), 0.0, 0.5 / nn, 0.0};
  return out;
}

double evaluate(const ConvexIntegrand& F, std::span<const double> h) {
  require_dim(F, h, "evaluate");
  switch (F.kind()) {
    case IntegrandKind::euclidean_norm:
      return norm2(h);
    case IntegrandKind::power_p:
      return F.param() * std::pow(norm2(h), F.exponent());
    case IntegrandKind::quadratic: {
      double acc = 0.0;
      for (double v : h) acc += v * v;
      return 0.5 * F.param() * acc;
    }
    case IntegrandKind::anisotropic_norm: {
      double acc = 0.0;
      for (std::size_t j = 0; j < h.size(); ++j)
        acc += F.axis_weights()[j] * h[j] * h[j];
      return std::sqrt(acc);
    }
    case IntegrandKind::moreau_regularized: {
      const double n = F.param(), lambda = 1.0 / n;
      auto z = prox_primal(F.base(), lambda, h);
      double dist2 = 0.0, h2 = 0.0;
      for (std::size_t j = 0; j < h.size(); ++j) {
        dist2 += (h[j] - z[j]) * (h[j] - z[j]);
        h2 += h[j] * h[j];
      }
      return evaluate(F.base(), z) + 0.5 * dist2 / lambda + 0.5 * h2 / n;
    }
    case IntegrandKind::delta_regularized: {
      const double delta = F.param();
      return delta * norm2(h) + sampled_infconv(F.base(), delta, h);
    }
  }
  throw ValidationError("evaluate: unknown integrand kind");
}

namespace {

double sampled_infconv(const ConvexIntegrand& base, double delta,
                       std::span<const double> p) {
  const double radius = 20.0 / delta;
  if (base.radial()) {
    const double a = norm2(p);
    if (a == 0.0) return 0.0;
    std::vector<double> dir(p.size());
    for (std::size_t j = 0; j < p.size(); ++j) dir[j] = p[j] / a;
    auto psi = [&](double r) {
      std::vector<double> q(dir.size());
      for (std::size_t j = 0; j < dir.size(); ++j) q[j] = r * dir[j];
      return evaluate(base, q) + std::abs(a - r) / delta;
    };
    // Convex in r; scan candidates, then refine around the best one.
    std::vector<double> cand;
    for (int k = 0; k <= 200; ++k) cand.push_back(radius * k / 200.0);
    cand.push_back(a);
    std::sort(cand.begin(), cand.end());
    std::size_t best = 0;
    double fbest = kInf;
    for (std::size_t k = 0; k < cand.size(); ++k) {
      const double f = psi(cand[k]);
      if (f < fbest) {
        fbest = f;
        best = k;
      }
    }
    const double lo = best > 0 ? cand[best - 1] : cand[0];
    const double hi = best + 1 < cand.size() ? cand[best + 1] : cand.back();
    return std::min(fbest, golden_min(psi, lo, hi));
  }
  if (p.size() != 2)
    throw ValidationError(
        "delta_regularized: non-radial base requires two-dimensional arguments");
  auto psi = [&](double q0, double q1) {
    const double q[2] = {q0, q1};
    const double d0 = p[0] - q0, d1 = p[1] - q1;
    return evaluate(base, std::span<const double>(q, 2)) +
           std::sqrt(d0 * d0 + d1 * d1) / delta;
  };
  double b0 = p[0], b1 = p[1], fbest = psi(b0, b1);
  const double step = radius / 100.0;
  for (int i = -100; i <= 100; ++i) {
    for (int j = -100; j <= 100; ++j) {
      const double f = psi(step * i, step * j);
      if (f < fbest) {
        fbest = f;
        b0 = step * i;
        b1 = step * j;
      }
    }
  }
  // Coordinatewise golden refinement around the best candidate.
  double gap = step;
  for (int sweep = 0; sweep < 6; ++sweep) {
    golden_min([&](double t) { return psi(t, b1); }, b0 - gap, b0 + gap, &b0);
    fbest = golden_min([&](double t) { return psi(b0, t); }, b1 - gap, b1 + gap, &b1);
    gap *= 0.35;
  }
  return std::min(fbest, psi(p[0], p[1]));
}

// min_z base*(z) + (lambda/2)|z|^2 + (n/2)|q - z|^2 for a primitive base:
// the conjugate of a moreau_regularized integrand.
double moreau_conjugate(const ConvexIntegrand& base, double n,
                        std::span<const double> q) {
  const double lambda = 1.0 / n;
  const double aq = norm2(q);
  auto quad_cost = [&](double r) {
    // cost of z = r * qhat: (lambda/2) r^2 + (n/2)(aq - r)^2
    return 0.5 * lambda * r * r + 0.5 * n * (aq - r) * (aq - r);
  };
  switch (base.kind()) {
    case IntegrandKind::euclidean_norm:
    case IntegrandKind::anisotropic_norm:
    case IntegrandKind::quadratic:
    case IntegrandKind::power_p:
      break;
    default:
      throw ValidationError("moreau conjugate: base must be primitive");
  }
  if (base.kind() == IntegrandKind::anisotropic_norm) {
    std::vector<double> z0(q.size());
    for (std::size_t j = 0; j < q.size(); ++j) z0[j] = n * q[j] / (lambda + n);
    auto z = project_ellipsoid(z0, base.axis_weights());
    double zz = 0.0, dz = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) {
      zz += z[j] * z[j];
      dz += (q[j] - z[j]) * (q[j] - z[j]);
    }
    return 0.5 * lambda * zz + 0.5 * n * dz;
  }
  const double z0 = n * aq / (lambda + n);
  switch (base.kind()) {
    case IntegrandKind::euclidean_norm:
      return quad_cost(std::min(z0, 1.0));
    case IntegrandKind::quadratic: {
      const double c = 1.0 / base.param() + lambda;
      const double z = n * aq / (c + n);
      return 0.5 * z * z / base.param() + quad_cost(z);
    }
    case IntegrandKind::power_p: {
      const double p = base.exponent(), s = base.param();
      if (p == 1.0) return quad_cost(std::min(z0, s));
      if (aq == 0.0) return 0.0;
      auto phi = [&](double r) { return power_conj(p, s, r) + quad_cost(r); };
      return golden_min(phi, 0.0, z0);
    }
    default:
      throw ValidationError("moreau conjugate: unsupported base");
  }
}

}  // namespace

double conjugate(const ConvexIntegrand& F, std::span<const double> q) {
  require_dim(F, q, "conjugate");
  switch (F.kind()) {
    case IntegrandKind::euclidean_norm:
      return norm2(q) <= 1.0 + 1e-10 ? 0.0 : kInf;
    case IntegrandKind::power_p: {
      const double p = F.exponent(), s = F.param();
      if (p == 1.0) return norm2(q) <= s + 1e-10 ? 0.0 : kInf;
      return power_conj(p, s, norm2(q));
    }
    case IntegrandKind::quadratic: {
      double acc = 0.0;
      for (double v : q) acc += v * v;
      return 0.5 * acc / F.param();
    }
    case IntegrandKind::anisotropic_norm: {
      double acc = 0.0;
      for (std::size_t j = 0; j < q.size(); ++j)
        acc += q[j] * q[j] / F.axis_weights()[j];
      return acc <= 1.0 + 1e-10 ? 0.0 : kInf;
    }
    case IntegrandKind::moreau_regularized:
      return moreau_conjugate(F.base(), F.param(), q);
    case IntegrandKind::delta_regularized: {
      const double delta = F.param();
      const ConvexIntegrand& base = F.base();
      if (base.radial() || base.pinned_dimension() != 2 || q.size() != 2) {
        // Radially increasing base conjugate: the feasible point of smallest
        // length is the clipped q, at distance (|q| - delta)+ from 0.
        const double t = std::max(norm2(q) - delta, 0.0);
        if (t > 1.0 / delta + 1e-10) return kInf;
        if (t == 0.0) return conjugate(base, std::vector<double>(q.size(), 0.0));
        std::vector<double> z(q.size());
        for (std::size_t j = 0; j < q.size(); ++j) z[j] = t * q[j] / norm2(q);
        return conjugate(base, z);
      }
      // Anisotropic base: feasibility of ellipsoid + two balls by alternating
      // projections.
      std::vector<double> z(q.begin(), q.end());
      for (int it = 0; it < 2000; ++it) {
        z = project_ellipsoid(z, base.axis_weights());
        double r = norm2(z);
        if (r > 1.0 / delta)
          for (auto& v : z) v *= (1.0 / delta) / r;
        double d0 = z[0] - q[0], d1 = z[1] - q[1];
        const double dist = std::sqrt(d0 * d0 + d1 * d1);
        if (dist > delta) {
          z[0] = q[0] + d0 * delta / dist;
          z[1] = q[1] + d1 * delta / dist;
        }
      }
      double viol = std::max(norm2(z) - 1.0 / delta, 0.0);
      double e = 0.0;
      for (std::size_t j = 0; j < 2; ++j)
        e += z[j] * z[j] / base.axis_weights()[j];
      viol = std::max(viol, e - 1.0);
      const double d0 = z[0] - q[0], d1 = z[1] - q[1];
      viol = std::max(viol, std::sqrt(d0 * d0 + d1 * d1) - delta);
      return viol <= 1e-7 ? 0.0 : kInf;
    }
  }
  throw ValidationError("conjugate: unknown integrand kind");
}

double recession(const ConvexIntegrand& F, std::span<const double> h) {
  require_dim(F, h, "recession");
  const double a = norm2(h);
  if (a == 0.0) return 0.0;
  switch (F.kind()) {
    case IntegrandKind::euclidean_norm:
      return a;
    case IntegrandKind::power_p:
      return F.exponent() == 1.0 ? F.param() * a : kInf;
    case IntegrandKind::quadratic:
      return kInf;
    case IntegrandKind::anisotropic_norm:
      return evaluate(F, h);
    case IntegrandKind::moreau_regularized:
      return kInf;
    case IntegrandKind::delta_regularized: {
      const double delta = F.param();
      const double rec_base = recession(F.base(), h);
      return delta * a + std::min(rec_base, a / delta);
    }
  }
  throw ValidationError("recession: unknown integrand kind");
}

std::vector<double> prox_primal(const ConvexIntegrand& F, double tau,
                                std::span<const double> h) {
  require_dim(F, h, "prox_primal");
  if (!(tau > 0.0)) throw ValidationError("prox_primal requires tau > 0");
  std::vector<double> z(h.begin(), h.end());
  switch (F.kind()) {
    case IntegrandKind::euclidean_norm: {
      const double a = norm2(h);
      const double f = a <= tau ? 0.0 : 1.0 - tau / a;
      for (auto& v : z) v *= f;
      return z;
    }
    case IntegrandKind::power_p: {
      const double p = F.exponent(), s = F.param();
      const double a = norm2(h);
      double r;
      if (p == 1.0)
        r = std::max(a - tau * s, 0.0);
      else
        r = power_prox_radial(p, s, tau, a);
      const double f = a > 0.0 ? r / a : 0.0;
      for (auto& v : z) v *= f;
      return z;
    }
    case IntegrandKind::quadratic: {
      const double f = 1.0 / (1.0 + tau * F.param());
      for (auto& v : z) v *= f;
      return z;
    }
    case IntegrandKind::anisotropic_norm: {
      const auto& a = F.axis_weights();
      double inside = 0.0;
      for (std::size_t j = 0; j < h.size(); ++j) inside += h[j] * h[j] / a[j];
      if (inside <= tau * tau) {
        std::fill(z.begin(), z.end(), 0.0);
        return z;
      }
      // z_j = h_j rho/(rho + tau a_j) with G(rho) = sum a_j h_j^2/(rho+tau a_j)^2 = 1.
      double rho = 0.0;
      for (std::size_t j = 0; j < h.size(); ++j) rho += a[j] * h[j] * h[j];
      rho = std::sqrt(rho);
      for (int it = 0; it < 200; ++it) {
        double G = -1.0, dG = 0.0;
        for (std::size_t j = 0; j < h.size(); ++j) {
          const double d = rho + tau * a[j];
          G += a[j] * h[j] * h[j] / (d * d);
          dG -= 2.0 * a[j] * h[j] * h[j] / (d * d * d);
        }
        if (std::abs(G) <= 1e-15) break;
        double next = rho - G / dG;
        if (!(next > 0.0) || !std::isfinite(next)) next = 0.5 * rho;
        if (std::abs(next - rho) <= 1e-17 * (1.0 + rho)) {
          rho = next;
          break;
        }
        rho = next;
      }
      for (std::size_t j = 0; j < h.size(); ++j)
        z[j] = h[j] * rho / (rho + tau * a[j]);
      return z;
    }
    case IntegrandKind::moreau_regularized: {
      const double n = F.param(), lambda = 1.0 / n;
      const double beta = 1.0 + tau / n;
      const double s = tau / beta;
      std::vector<double> x(h.size());
      for (std::size_t j = 0; j < h.size(); ++j) x[j] = h[j] / beta;
      auto inner = prox_primal(F.base(), lambda + s, x);
      const double w = s / (lambda + s);
      for (std::size_t j = 0; j < h.size(); ++j)
        z[j] = x[j] + w * (inner[j] - x[j]);
      return z;
    }
    case IntegrandKind::delta_regularized:
      throw ValidationError("delta_regularized integrands have no proximal map");
  }
  throw ValidationError("prox_primal: unknown integrand kind");
}

std::vector<double> prox_conjugate(const ConvexIntegrand& F, double sigma,
                                   std::span<const double> q) {
  if (!(sigma > 0.0)) throw ValidationError("prox_conjugate requires sigma > 0");
  std::vector<double> x(q.begin(), q.end());
  for (auto& v : x) v /= sigma;
  auto p = prox_primal(F, 1.0 / sigma, x);
  std::vector<double> z(q.begin(), q.end());
  for (std::size_t j = 0; j < z.size(); ++j) z[j] -= sigma * p[j];
  return z;
}

std::vector<double> smooth_gradient(const ConvexIntegrand& F,
                                    std::span<const double> p) {
  if (F.kind() != IntegrandKind::moreau_regularized)
    throw ValidationError("smooth_gradient requires a moreau_regularized integrand");
  const double n = F.param(), lambda = 1.0 / n;
  auto z = prox_primal(F.base(), lambda, p);
  std::vector<double> g(p.size());
  for (std::size_t j = 0; j < p.size(); ++j)
    g[j] = (p[j] - z[j]) * n + p[j] / n;
  return g;
}

std::pair<ScalarField, ScalarField> make_subsolution(const ConvexIntegrand& Fn,
                                                     const ScalarField& g,
                                                     double eps) {
  if (!Fn.smooth())
    throw ValidationError("make_subsolution requires a smooth integrand");
  if (!(eps > 0.0)) throw ValidationError("make_subsolution requires eps > 0");
  if (!g.grid) throw ValidationError("make_subsolution: data field has no grid");
  const GaussianGrid& grid = *g.grid;
  const int m = grid.dimension();
  ScalarField geps(g.grid), ueps(g.grid);
  std::vector<double> x(m), q(m);
  for (std::int64_t i = 0; i < grid.node_count(); ++i) {
    grid.point(i, x.data());
    double x2 = 0.0;
    for (int d = 0; d < m; ++d) {
      q[d] = eps * x[d];
      x2 += x[d] * x[d];
    }
    const double cstar = conjugate(Fn, q) / eps;
    geps[i] = std::max(g[i], -1.0 / eps) + eps * x2 + cstar;
    ueps[i] = cstar + m * eps - 1.0 / eps;
  }
  return {std::move(geps), std::move(ueps)};
}

AxisSection::AxisSection(const ConvexIntegrand& F, int axis) {
  switch (F.kind()) {
    case IntegrandKind::euclidean_norm:
      tag_ = Tag::scaled_abs;
      c_ = 1.0;
      break;
    case IntegrandKind::power_p:
      if (F.exponent() == 1.0) {
        tag_ = Tag::scaled_abs;
        c_ = F.param();
      } else {
        tag_ = Tag::scaled_power;
        p_ = F.exponent();
        c_ = F.param();
      }
      break;
    case IntegrandKind::quadratic:
      tag_ = Tag::scaled_quad;
      c_ = F.param();
      break;
    case IntegrandKind::anisotropic_norm: {
      const auto& a = F.axis_weights();
      if (axis < 0 || axis >= static_cast<int>(a.size()))
        throw ValidationError("AxisSection: axis outside the integrand dimension");
      tag_ = Tag::scaled_abs;
      c_ = std::sqrt(a[axis]);
      break;
    }
    case IntegrandKind::moreau_regularized:
      tag_ = Tag::moreau;
      reg_ = F.param();
      base_ = std::make_shared<const AxisSection>(F.base(), axis);
      break;
    case IntegrandKind::delta_regularized:
      tag_ = Tag::delta;
      reg_ = F.param();
      base_ = std::make_shared<const AxisSection>(F.base(), axis);
      break;
  }
  switch (tag_) {
    case Tag::scaled_abs:
      dual_radius_ = c_;
      break;
    case Tag::delta:
      dual_radius_ = reg_ + std::min(1.0 / reg_, base_->dual_radius_);
      break;
    default:
      dual_radius_ = kInf;
  }
}

double AxisSection::value(double t) const {
  switch (tag_) {
    case Tag::scaled_abs:
      return c_ * std::abs(t);
    case Tag::scaled_power:
      return c_ * std::pow(std::abs(t), p_);
    case Tag::scaled_quad:
      return 0.5 * c_ * t * t;
    case Tag::moreau: {
      const double n = reg_, lambda = 1.0 / n;
      const double z = base_->prox_primal(lambda, t);
      return base_->value(z) + 0.5 * (t - z) * (t - z) / lambda + 0.5 * t * t / n;
    }
    case Tag::delta: {
      const double delta = reg_;
      const double a = std::abs(t);
      double env;
      switch (base_->tag_) {
        case Tag::scaled_abs:
          env = std::min(base_->c_, 1.0 / delta) * a;
          break;
        case Tag::scaled_quad: {
          const double knee = 1.0 / (base_->c_ * delta);
          env = a <= knee ? 0.5 * base_->c_ * a * a
                          : a / delta - 0.5 / (base_->c_ * delta * delta);
          break;
        }
        case Tag::scaled_power: {
          const double p = base_->p_, s = base_->c_;
          const double knee = std::pow(1.0 / (delta * s * p), 1.0 / (p - 1.0));
          env = a <= knee ? s * std::pow(a, p)
                          : s * std::pow(knee, p) + (a - knee) / delta;
          break;
        }
        default:
          throw ValidationError("AxisSection: nested regularized base");
      }
      return delta * a + env;
    }
  }
  throw ValidationError("AxisSection::value: bad tag");
}

double AxisSection::conjugate(double q) const {
  const double a = std::abs(q);
  switch (tag_) {
    case Tag::scaled_abs:
      return a <= c_ + 1e-10 ? 0.0 : kInf;
    case Tag::scaled_power:
      return power_conj(p_, c_, a);
    case Tag::scaled_quad:
      return 0.5 * q * q / c_;
    case Tag::moreau: {
      const double n = reg_, lambda = 1.0 / n;
      auto quad_cost = [&](double r) {
        return 0.5 * lambda * r * r + 0.5 * n * (a - r) * (a - r);
      };
      const double z0 = n * a / (lambda + n);
      switch (base_->tag_) {
        case Tag::scaled_abs:
          return quad_cost(std::min(z0, base_->c_));
        case Tag::scaled_quad: {
          const double c = 1.0 / base_->c_ + lambda;
          const double z = n * a / (c + n);
          return 0.5 * z * z / base_->c_ + quad_cost(z);
        }
        case Tag::scaled_power: {
          if (a == 0.0) return 0.0;
          auto phi = [&](double r) {
            return power_conj(base_->p_, base_->c_, r) + quad_cost(r);
          };
          return golden_min(phi, 0.0, z0);
        }
        default:
          throw ValidationError("AxisSection: nested regularized base");
      }
    }
    case Tag::delta: {
      const double t = std::max(a - reg_, 0.0);
      if (t > 1.0 / reg_ + 1e-10) return kInf;
      return base_->conjugate(t);
    }
  }
  throw ValidationError("AxisSection::conjugate: bad tag");
}

double AxisSection::prox_primal(double tau, double t) const {
  switch (tag_) {
    case Tag::scaled_abs: {
      const double s = std::abs(t) - tau * c_;
      return s > 0.0 ? (t > 0 ? s : -s) : 0.0;
    }
    case Tag::scaled_power: {
      const double r = power_prox_radial(p_, c_, tau, std::abs(t));
      return t >= 0.0 ? r : -r;
    }
    case Tag::scaled_quad:
      return t / (1.0 + tau * c_);
    case Tag::moreau: {
      const double n = reg_, lambda = 1.0 / n;
      const double beta = 1.0 + tau / n;
      const double x = t / beta;
      const double s = tau / beta;
      const double inner = base_->prox_primal(lambda + s, x);
      return x + s / (lambda + s) * (inner - x);
    }
    case Tag::delta:
      throw ValidationError("delta_regularized sections have no proximal map");
  }
  throw ValidationError("AxisSection::prox_primal: bad tag");
}

double AxisSection::prox_conjugate(double sigma, double q) const {
  return q - sigma * prox_primal(1.0 / sigma, q / sigma);
}

}  // namespace gtv
