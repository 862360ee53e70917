#pragma once

#include "dampflow/problems.hpp"
#include "dampflow/schedules.hpp"
#include "dampflow/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dampflow {

/**
 * Lyapunov certificate for the (alpha, r)-damped flow on a mu-strongly
 * convex objective:
 *
 *   L(t) = 1/2 |A x' + B (x - x*)|^2 + 1/2 C |x'|^2 + D (f(x) - f*)
 *
 * with D = e^(beta xi), A B = D', D = A^2 + C. L is nonincreasing for
 * t >= T, where T is the largest root of poly_P (or 0).
 */
struct LyapunovCertificate
{
  double alpha;
  double r;
  double beta;
  double mu;
  double T;

  DampedFlowParams flow(double t0 = 1.0) const { return {alpha, r, t0}; }
};

/// Upper admissible beta: 1/2 for alpha < 1, min(2/3, (1+r)/(2r)) for alpha = 1.
inline double max_lyap_beta(double alpha, double r)
{
  return alpha < 1.0 ? 0.5 : std::min(2.0 / 3.0, (1.0 + r) / (2.0 * r));
}

/// The beta used by the convergence-rate statements: 1/2 for alpha < 1,
/// (1+r)/(2r) for alpha = 1 with r > 3, 2/3 for alpha = 1 with r <= 3.
inline double default_lyap_beta(double alpha, double r)
{
  if (alpha < 1.0) return 0.5;
  return r > 3.0 ? (1.0 + r) / (2.0 * r) : 2.0 / 3.0;
}

/// P(t) = mu t^2 - (1-beta) beta r^2 t^(2(1-alpha)) + (2-3 beta) r alpha t^(1-alpha) + alpha (alpha+1)
inline double poly_P(double mu, double alpha, double r, double beta, double t)
{
  const double s = std::pow(t, 1.0 - alpha);
  return mu * t * t - (1.0 - beta) * beta * r * r * s * s + (2.0 - 3.0 * beta) * r * alpha * s +
         alpha * (alpha + 1.0);
}

/// Closed form of the largest root of P at alpha = 1:
/// 0 if beta r <= 2, else sqrt((beta r - 2)(r + 1 - beta r) / mu).
inline double threshold_T_alpha1(double mu, double r, double beta)
{
  const double k = beta * r;
  if (k <= 2.0) return 0.0;
  return std::sqrt((k - 2.0) * (r + 1.0 - k) / mu);
}

/**
 * Largest positive root of P for alpha in (0, 1], by a geometric scan over
 * [1e-6, 1e6 * max(1, (r^2/mu)^(1/(2 alpha)))] for the last sign change,
 * refined by bisection to relative width 1e-12. Returns 0 when P > 0 on the
 * whole scan.
 */
inline double largest_root_P(double mu, double alpha, double r, double beta)
{
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw std::domain_error("largest_root_P: alpha must lie in (0, 1]");
  if (!(mu > 0.0)) throw std::domain_error("largest_root_P: mu must be > 0");

  auto P = [&](double t) { return poly_P(mu, alpha, r, beta, t); };
  const double hint = std::pow(r * r / mu, 1.0 / (2.0 * alpha));
  const double lo_end = 1e-6;
  const double hi_end = 1e6 * std::max(1.0, hint);
  if (!std::isfinite(hi_end)) throw std::range_error("largest_root_P: scan range overflows");

  constexpr int points_per_decade = 64;
  const int n = static_cast<int>(std::ceil(std::log10(hi_end / lo_end) * points_per_decade));
  const double ratio = std::pow(hi_end / lo_end, 1.0 / n);

  if (P(hi_end) <= 0.0)
    throw std::range_error("largest_root_P: P is not positive at the end of the scan range");

  // walk down from the top to the first grid point where P <= 0
  double hi = hi_end;
  double lo = -1.0;
  for (int i = n - 1; i >= 0; --i) {
    const double t = lo_end * std::pow(ratio, i);
    if (P(t) <= 0.0) {
      lo = t;
      break;
    }
    hi = t;
  }
  if (lo < 0.0) return 0.0;

  while (hi - lo > 1e-12 * hi) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (P(mid) <= 0.0 ? lo : hi) = mid;
  }
  return hi;
}

/// Decrease threshold T(mu, alpha, r, beta).
inline double threshold_T(double mu, double alpha, double r, double beta)
{
  if (alpha == 0.0) return 0.0;
  if (alpha == 1.0) return threshold_T_alpha1(mu, r, beta);
  return largest_root_P(mu, alpha, r, beta);
}

/// Validates (alpha, r, beta, mu) and attaches T.
inline LyapunovCertificate certificate(double alpha, double r, double beta, double mu)
{
  constexpr double rel = 1e-12;
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("certificate: alpha must lie in [0, 1]");
  if (!(r > 0.0)) throw std::invalid_argument("certificate: r must be > 0");
  if (!(mu > 0.0)) throw std::invalid_argument("certificate: mu must be > 0");
  if (!(beta > 0.0)) throw std::invalid_argument("certificate: beta must be > 0");

  const double bmax = max_lyap_beta(alpha, r);
  if (beta > bmax * (1.0 + rel)) {
    std::ostringstream msg;
    msg << "certificate: beta = " << beta << " exceeds the admissible bound "
        << (alpha < 1.0 ? "1/2 (alpha < 1)" : "min{2/3, (1+r)/(2r)} (alpha = 1)") << " = " << bmax;
    throw std::invalid_argument(msg.str());
  }
  if (alpha == 0.0) {
    const double rmax = std::sqrt(mu / (beta * (1.0 - beta)));
    if (r > rmax * (1.0 + rel)) {
      std::ostringstream msg;
      msg << "certificate: alpha = 0 requires r <= sqrt(mu / (beta (1 - beta))) = " << rmax
          << ", got r = " << r;
      throw std::invalid_argument(msg.str());
    }
  }
  return {alpha, r, beta, mu, threshold_T(mu, alpha, r, beta)};
}

struct CertificateCoeffs
{
  double A, B, C, D;
};

/// A, B, C, D divided by e^(beta xi / 2), e^(beta xi / 2), e^(beta xi),
/// e^(beta xi) respectively, plus the common log scale beta xi(t).
struct NormalizedCoeffs
{
  double A, B, C, D;
  double log_scale;
};

inline NormalizedCoeffs normalized_coeffs(const LyapunovCertificate& cert, double t)
{
  if (!(t > 0.0)) throw std::domain_error("coeffs: t must be > 0");
  const double s = std::pow(t, 1.0 - cert.alpha);
  const double br = cert.beta * cert.r;
  const double den = (1.0 - cert.beta) * cert.r * s + cert.alpha;
  const double a2 = br * s / den;
  return {std::sqrt(a2), std::sqrt(br * den * std::pow(t, -cert.alpha - 1.0)), 1.0 - a2, 1.0,
          cert.beta * xi(cert.flow(), t)};
}

inline CertificateCoeffs coeffs(const LyapunovCertificate& cert, double t)
{
  const NormalizedCoeffs n = normalized_coeffs(cert, t);
  if (n.log_scale >= max_exp_argument)
    throw std::overflow_error("coeffs: e^(beta xi) overflows at t = " + std::to_string(t));
  const double e = std::exp(n.log_scale);
  const double h = std::exp(0.5 * n.log_scale);
  return {n.A * h, n.B * h, n.C * e, n.D * e};
}

/// f(x) - f_ref, requiring nothing of the problem beyond value().
inline double energy(const ObjectiveProblem& problem, const Vector& x, const Vector& v, double f_ref)
{
  return 0.5 * v.squaredNorm() + problem.gap(x, f_ref);
}

/// 1/2 |v|^2 + f(x) - f*, with the problem's exact minimum.
inline double energy(const ObjectiveProblem& problem, const Vector& x, const Vector& v)
{
  if (!problem.min_value) throw std::invalid_argument("energy: problem has no known minimum");
  return energy(problem, x, v, *problem.min_value);
}

/// log L(t), evaluated without forming e^(beta xi).
inline double log_lyapunov_value(const LyapunovCertificate& cert, const ObjectiveProblem& problem,
                                 const Vector& x, const Vector& v, double t)
{
  if (!problem.minimizer || !problem.min_value)
    throw std::invalid_argument("lyapunov_value: the problem's minimizer must be known exactly");
  const NormalizedCoeffs c = normalized_coeffs(cert, t);
  const Vector e = x - *problem.minimizer;
  const double body = 0.5 * (c.A * v + c.B * e).squaredNorm() + 0.5 * c.C * v.squaredNorm() +
                      c.D * std::max(0.0, problem.gap(x, *problem.min_value));
  return c.log_scale + std::log(body);
}

inline double lyapunov_value(const LyapunovCertificate& cert, const ObjectiveProblem& problem,
                             const Vector& x, const Vector& v, double t)
{
  const double lv = log_lyapunov_value(cert, problem, x, v, t);
  if (lv >= max_exp_argument)
    throw std::overflow_error("lyapunov_value: L(t) overflows; use log_lyapunov_value");
  return std::exp(lv);
}

enum class RateCase { alpha0, alpha_mid, alpha1_high_r, alpha1_low_r };

/// Quantities of one trajectory that fix an envelope's constant.
struct RateConstants
{
  double t0 = 1.0;        ///< start time, with x'(t0) = 0
  double dist0_sq = 0.0;  ///< |x0 - x*|^2
  double gap0 = 0.0;      ///< f(x0) - f*
  /// For the alpha_mid and alpha1_high_r cases: a time >= T and log L there.
  std::optional<double> anchor_t;
  std::optional<double> log_lyap_anchor;
};

/// Upper bound t -> f(x(t)) - f* valid for t >= valid_from.
struct RateEnvelope
{
  RateCase rate_case;
  LyapunovCertificate cert;
  double log_constant;
  double valid_from;
  double t0;

  double log_bound(double t) const
  {
    switch (rate_case) {
      case RateCase::alpha0:
        // autonomous flow: the envelope runs in elapsed time t - t0
        return log_constant - std::sqrt(cert.mu) * (t - t0);
      case RateCase::alpha_mid:
        return log_constant - 0.5 * xi(cert.flow(), t);
      case RateCase::alpha1_high_r:
        return log_constant - 0.5 * (1.0 + cert.r) * std::log(t);
      case RateCase::alpha1_low_r:
        return log_constant - (2.0 * cert.r / 3.0) * std::log(t);
    }
    return log_constant;
  }

  double operator()(double t) const { return std::exp(log_bound(t)); }
};

/**
 * Convergence envelopes for mu-strongly convex objectives:
 *   alpha0:        [mu/2 |x0-x*|^2 + gap0] e^(-sqrt(mu) (t - t0)),      r = 2 sqrt(mu), beta = 1/2
 *   alpha_mid:     L(T) e^(-r t^(1-alpha) / (2(1-alpha))),  t >= T,     beta = 1/2
 *   alpha1_high_r: L(T) t^(-(1+r)/2),                       t >= T,     r > 3, beta = (1+r)/(2r)
 *   alpha1_low_r:  [r/3 (r/3+1) t0^(2r/3-2) |x0-x*|^2 + t0^(2r/3) gap0] t^(-2r/3),  r <= 3
 */
inline RateEnvelope rate_bound(const LyapunovCertificate& cert, RateCase rate_case,
                               const RateConstants& k)
{
  constexpr double rel = 1e-12;
  auto near = [](double a, double b) { return std::abs(a - b) <= rel * std::max(1.0, std::abs(b)); };
  auto need_anchor = [&]() {
    if (!k.anchor_t || !k.log_lyap_anchor)
      throw std::invalid_argument("rate_bound: this case needs L sampled at a time >= T");
    if (*k.anchor_t < cert.T * (1.0 - rel))
      throw std::invalid_argument("rate_bound: anchor time precedes T");
  };

  switch (rate_case) {
    case RateCase::alpha0: {
      if (cert.alpha != 0.0 || !near(cert.r, 2.0 * std::sqrt(cert.mu)) || !near(cert.beta, 0.5))
        throw std::invalid_argument("rate_bound: alpha0 case needs alpha = 0, r = 2 sqrt(mu), beta = 1/2");
      const double c = 0.5 * cert.mu * k.dist0_sq + k.gap0;
      return {rate_case, cert, std::log(c), k.t0, k.t0};
    }
    case RateCase::alpha_mid: {
      if (!(cert.alpha > 0.0 && cert.alpha < 1.0) || !near(cert.beta, 0.5))
        throw std::invalid_argument("rate_bound: alpha_mid case needs 0 < alpha < 1, beta = 1/2");
      need_anchor();
      return {rate_case, cert, *k.log_lyap_anchor, *k.anchor_t, k.t0};
    }
    case RateCase::alpha1_high_r: {
      if (cert.alpha != 1.0 || !(cert.r > 3.0) || !near(cert.beta, (1.0 + cert.r) / (2.0 * cert.r)))
        throw std::invalid_argument("rate_bound: alpha1_high_r case needs alpha = 1, r > 3, beta = (1+r)/(2r)");
      need_anchor();
      return {rate_case, cert, *k.log_lyap_anchor, *k.anchor_t, k.t0};
    }
    case RateCase::alpha1_low_r: {
      if (cert.alpha != 1.0 || !(cert.r <= 3.0) || !near(cert.beta, 2.0 / 3.0))
        throw std::invalid_argument("rate_bound: alpha1_low_r case needs alpha = 1, r <= 3, beta = 2/3");
      const double q = cert.r / 3.0;
      const double c = q * (q + 1.0) * std::pow(k.t0, 2.0 * q - 2.0) * k.dist0_sq +
                       std::pow(k.t0, 2.0 * q) * k.gap0;
      return {rate_case, cert, std::log(c), k.t0, k.t0};
    }
  }
  throw std::invalid_argument("rate_bound: unknown case");
}

struct MonitorRow
{
  double t;
  double log_L;
  double increment;
  bool violation;
};

struct MonitorReport
{
  std::vector<MonitorRow> rows;
  double max_increment = -std::numeric_limits<double>::infinity();
  std::optional<double> first_violation_t;
  std::size_t violations = 0;

  bool ok() const { return violations == 0; }
};

/**
 * Checks that log L is nonincreasing over the trajectory's state samples
 * with t >= cert.T. An increment above `slack` between consecutive samples
 * is a violation.
 */
inline MonitorReport monitor_decrease(const TrajectoryRecord& trajectory,
                                      const LyapunovCertificate& cert,
                                      const ObjectiveProblem& problem, double slack = 1e-8)
{
  if (trajectory.samples.empty() || trajectory.samples.back().t < cert.T)
    throw std::invalid_argument("monitor_decrease: trajectory too short to reach T = " +
                                std::to_string(cert.T));
  MonitorReport report;
  std::optional<double> prev;
  for (const auto& s : trajectory.samples) {
    if (s.t < cert.T) continue;
    const double lv = log_lyapunov_value(cert, problem, s.x, s.v, s.t);
    const double inc = prev ? lv - *prev : 0.0;
    const bool bad = prev.has_value() && inc > slack;
    if (prev) report.max_increment = std::max(report.max_increment, inc);
    if (bad) {
      ++report.violations;
      if (!report.first_violation_t) report.first_violation_t = s.t;
    }
    report.rows.push_back({s.t, lv, inc, bad});
    prev = lv;
  }
  return report;
}

inline void write_monitor_csv(std::ostream& os, const MonitorReport& report)
{
  os << "t,logL,increment,verdict\n";
  for (const auto& row : report.rows)
    os << format_double(row.t) << ',' << format_double(row.log_L) << ','
       << format_double(row.increment) << ',' << (row.violation ? "violation" : "ok") << '\n';
}

}  // namespace dampflow
