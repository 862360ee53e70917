#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

namespace dampflow {

/// Parameters of x'' + (r / t^alpha) x' + grad f(x) = 0 started at t0.
struct DampedFlowParams
{
  double alpha = 1.0;
  double r = 3.0;
  double t0 = 1.0;

  void validate() const
  {
    if (!(alpha >= 0.0 && alpha <= 1.0))
      throw std::invalid_argument("DampedFlowParams: alpha must lie in [0, 1]");
    if (!(r > 0.0)) throw std::invalid_argument("DampedFlowParams: r must be > 0");
    if (!(t0 > 0.0)) throw std::invalid_argument("DampedFlowParams: t0 must be > 0");
  }
};

/// Polynomial subfamily of the Euclidean Bregman Lagrangian, indexed by p and C.
struct BregmanPolyParams
{
  double p = 2.0;
  double C = 0.25;

  void validate() const
  {
    if (!(p >= 2.0)) throw std::invalid_argument("BregmanPolyParams: p must be >= 2");
    if (!(C > 0.0)) throw std::invalid_argument("BregmanPolyParams: C must be > 0");
  }
};

/**
 * Damping potential xi(t) with xi'(t) = r t^-alpha, and its derivatives.
 *
 * order 0: r t^(1-alpha) / (1-alpha) for alpha < 1, r ln t for alpha = 1.
 * order 1..3: r t^-alpha, -r alpha t^(-alpha-1), r alpha (alpha+1) t^(-alpha-2).
 */
inline double xi(const DampedFlowParams& params, double t, int order = 0)
{
  if (!(t > 0.0)) throw std::domain_error("xi: t must be > 0");
  const double a = params.alpha;
  const double r = params.r;
  switch (order) {
    case 0:
      return a == 1.0 ? r * std::log(t) : r * std::pow(t, 1.0 - a) / (1.0 - a);
    case 1:
      return r * std::pow(t, -a);
    case 2:
      return -r * a * std::pow(t, -a - 1.0);
    case 3:
      return r * a * (a + 1.0) * std::pow(t, -a - 2.0);
    default:
      throw std::invalid_argument("xi: order must be 0, 1, 2 or 3, got " + std::to_string(order));
  }
}

/// Coefficients of H(x, y, t) = k(t)/2 |y|^2 + u(t) f(x).
struct HamiltonianCoeffs
{
  double k;
  double u;
};

/// Largest exponent for which e^x is finite.
inline constexpr double max_exp_argument = 709.782712893384;

/// k(t) = e^-xi(t), u(t) = e^xi(t). Throws std::overflow_error once e^xi is
/// no longer representable; use the velocity-form stepper past that point.
inline HamiltonianCoeffs hamiltonian_coeffs(const DampedFlowParams& params, double t)
{
  const double x = xi(params, t);
  if (std::abs(x) >= max_exp_argument)
    throw std::overflow_error("hamiltonian_coeffs: e^xi(t) overflows at t = " + std::to_string(t) +
                              " (xi = " + std::to_string(x) +
                              "); switch to the velocity-form stepper");
  return {std::exp(-x), std::exp(x)};
}

/// d/dt of (k, u): (-xi' e^-xi, xi' e^xi).
inline HamiltonianCoeffs hamiltonian_coeff_rates(const DampedFlowParams& params, double t)
{
  const auto [k, u] = hamiltonian_coeffs(params, t);
  const double d = xi(params, t, 1);
  return {-d * k, d * u};
}

/// Mass and potential weights of the Lagrangian a(t)/2 |v|^2 - b(t) f(x).
struct LagrangianCoeffs
{
  double a;
  double b;
};

/// a(t) = t^(p+1) / p, b(t) = C p t^(2p-1); so b/a = C p^2 t^(p-2).
inline LagrangianCoeffs bregman_coeffs(const BregmanPolyParams& params, double t)
{
  if (!(t > 0.0)) throw std::domain_error("bregman_coeffs: t must be > 0");
  const double p = params.p;
  return {std::pow(t, p + 1.0) / p, params.C * p * std::pow(t, 2.0 * p - 1.0)};
}

/// Hamiltonian form of the Bregman coefficients: k = 1/a, u = b.
inline HamiltonianCoeffs bregman_hamiltonian_coeffs(const BregmanPolyParams& params, double t)
{
  const auto [a, b] = bregman_coeffs(params, t);
  return {1.0 / a, b};
}

/// The Bregman scaling functions of the polynomial subfamily,
///   alpha(t) = ln p - ln t, beta(t) = p ln t + ln C, gamma(t) = p ln t,
/// named with a bregman_ prefix to keep them apart from the damping
/// exponent alpha and the Lyapunov fraction beta.
struct BregmanScaling
{
  double bregman_alpha;
  double bregman_beta;
  double bregman_gamma;
  double bregman_beta_rate;   // d/dt bregman_beta
  double bregman_gamma_rate;  // d/dt bregman_gamma
};

inline BregmanScaling bregman_scaling(const BregmanPolyParams& params, double t)
{
  if (!(t > 0.0)) throw std::domain_error("bregman_scaling: t must be > 0");
  const double lt = std::log(t);
  return {std::log(params.p) - lt, params.p * lt + std::log(params.C), params.p * lt,
          params.p / t, params.p / t};
}

}  // namespace dampflow
