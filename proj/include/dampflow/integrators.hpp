#pragma once

#include "dampflow/lyapunov.hpp"
#include "dampflow/problems.hpp"
#include "dampflow/schedules.hpp"
#include "dampflow/trajectory.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

namespace dampflow {

/// What IntegratorState::aux holds.
enum class Scheme
{
  gd,        ///< unused
  nag,       ///< the extrapolated point y_n
  nag_sc,    ///< the extrapolated point y_n
  momentum,  ///< conjugate momentum y of the Hamiltonian form
  velocity,  ///< velocity v of the overflow-safe form
};

inline const char* to_string(Scheme s)
{
  switch (s) {
    case Scheme::gd: return "gd";
    case Scheme::nag: return "nag";
    case Scheme::nag_sc: return "nag_sc";
    case Scheme::momentum: return "momentum";
    case Scheme::velocity: return "velocity";
  }
  return "?";
}

struct IntegratorState
{
  Vector x;
  Vector aux;
  double t = 1.0;
  std::int64_t n = 0;
  Scheme scheme = Scheme::gd;
  /// t_{n-1}; equal to t at n = 0. Only the velocity form reads it.
  double t_prev = 1.0;
};

/// Start state: y_0 = x_0 for the NAG family, zero momentum / velocity otherwise.
inline IntegratorState initial_state(Scheme scheme, const Vector& x0, double t0 = 1.0)
{
  IntegratorState s;
  s.x = x0;
  s.scheme = scheme;
  s.t = t0;
  s.t_prev = t0;
  switch (scheme) {
    case Scheme::nag:
    case Scheme::nag_sc: s.aux = x0; break;
    default: s.aux = Vector::Zero(x0.size()); break;
  }
  return s;
}

namespace detail {
inline IntegratorState advance(const IntegratorState& s, Vector x, Vector aux, double h)
{
  IntegratorState out;
  out.x = std::move(x);
  out.aux = std::move(aux);
  out.t = s.t + h;
  out.t_prev = s.t;
  out.n = s.n + 1;
  out.scheme = s.scheme;
  return out;
}

inline void require_positive_step(double h, const char* who)
{
  if (!(h > 0.0)) throw std::invalid_argument(std::string(who) + ": step must be > 0");
}
}  // namespace detail

/// x <- x - h grad f(x)
inline IntegratorState step_gd(const ObjectiveProblem& problem, const IntegratorState& s, double h)
{
  detail::require_positive_step(h, "step_gd");
  Vector x = s.x - h * problem.gradient(s.x);
  return detail::advance(s, std::move(x), s.aux, h);
}

inline double nag_momentum(std::int64_t n) { return static_cast<double>(n) / static_cast<double>(n + 3); }

/// x_{n+1} = y_n - h grad f(y_n);  y_{n+1} = x_{n+1} + n/(n+3) (x_{n+1} - x_n)
inline IntegratorState step_nag(const ObjectiveProblem& problem, const IntegratorState& s, double h)
{
  detail::require_positive_step(h, "step_nag");
  Vector x = s.aux - h * problem.gradient(s.aux);
  Vector y = x + nag_momentum(s.n) * (x - s.x);
  return detail::advance(s, std::move(x), std::move(y), h);
}

inline double nag_sc_momentum(double h, double mu)
{
  const double q = std::sqrt(mu * h);
  return (1.0 - q) / (1.0 + q);
}

/// As step_nag with the constant momentum (1 - sqrt(mu h)) / (1 + sqrt(mu h)); requires mu h <= 1.
inline IntegratorState step_nag_sc(const ObjectiveProblem& problem, const IntegratorState& s, double h,
                                   double mu)
{
  detail::require_positive_step(h, "step_nag_sc");
  if (!(mu > 0.0)) throw std::invalid_argument("step_nag_sc: mu must be > 0");
  if (mu * h > 1.0) throw std::invalid_argument("step_nag_sc: requires mu * h <= 1");
  Vector x = s.aux - h * problem.gradient(s.aux);
  Vector y = x + nag_sc_momentum(h, mu) * (x - s.x);
  return detail::advance(s, std::move(x), std::move(y), h);
}

/**
 * Symplectic Euler for H = k(t)/2 |y|^2 + u(t) f(x):
 *   y_{n+1} = y_n - h u(t_n) grad f(x_n)
 *   x_{n+1} = x_n + h k(t_n) y_{n+1}
 * The caller evaluates k(t_n), u(t_n).
 */
inline IntegratorState step_symplectic_euler(const IntegratorState& s, double k_t, double u_t,
                                             const ObjectiveProblem& problem, double h)
{
  detail::require_positive_step(h, "step_symplectic_euler");
  Vector y = s.aux - (h * u_t) * problem.gradient(s.x);
  Vector x = s.x + (h * k_t) * y;
  return detail::advance(s, std::move(x), std::move(y), h);
}

/**
 * Velocity form of the (alpha, r) symplectic Euler scheme, v_n = e^{-xi(t_{n-1})} y_n:
 *   v_{n+1} = e^{xi(t_{n-1}) - xi(t_n)} v_n - h grad f(x_n)
 *   x_{n+1} = x_n + h v_{n+1}
 * The decay factor is 1 at n = 0.
 */
inline IntegratorState step_damped_velocity(const ObjectiveProblem& problem, const IntegratorState& s,
                                            const DampedFlowParams& params, double h)
{
  detail::require_positive_step(h, "step_damped_velocity");
  const double decay = s.n == 0 ? 1.0 : std::exp(xi(params, s.t_prev) - xi(params, s.t));
  Vector v = decay * s.aux - h * problem.gradient(s.x);
  Vector x = s.x + h * v;
  return detail::advance(s, std::move(x), std::move(v), h);
}

using Stepper = std::function<IntegratorState(const IntegratorState&)>;

/// Step size as a function of the current state (fixed steps ignore it).
using StepPolicy = std::function<double(const IntegratorState&)>;

inline StepPolicy fixed_step(double h)
{
  detail::require_positive_step(h, "fixed_step");
  return [h](const IntegratorState&) { return h; };
}

inline Stepper gd_stepper(ObjectiveProblem problem, double h)
{
  return [p = std::move(problem), h](const IntegratorState& s) { return step_gd(p, s, h); };
}

inline Stepper nag_stepper(ObjectiveProblem problem, double h)
{
  return [p = std::move(problem), h](const IntegratorState& s) { return step_nag(p, s, h); };
}

inline Stepper nag_sc_stepper(ObjectiveProblem problem, double h, double mu)
{
  return [p = std::move(problem), h, mu](const IntegratorState& s) { return step_nag_sc(p, s, h, mu); };
}

inline Stepper damped_velocity_stepper(ObjectiveProblem problem, DampedFlowParams params, double h)
{
  params.validate();
  return [p = std::move(problem), params, h](const IntegratorState& s) {
    return step_damped_velocity(p, s, params, h);
  };
}

/// Momentum form with k = e^-xi, u = e^xi. Throws once e^xi overflows.
inline Stepper damped_momentum_stepper(ObjectiveProblem problem, DampedFlowParams params, double h)
{
  params.validate();
  return [p = std::move(problem), params, h](const IntegratorState& s) {
    const auto [k, u] = hamiltonian_coeffs(params, s.t);
    return step_symplectic_euler(s, k, u, p, h);
  };
}

/// Bregman polynomial subfamily, k = p t^-(p+1), u = C p t^(2p-1).
inline Stepper bregman_stepper(ObjectiveProblem problem, BregmanPolyParams params, StepPolicy step)
{
  params.validate();
  return [p = std::move(problem), params, step = std::move(step)](const IntegratorState& s) {
    const auto [k, u] = bregman_hamiltonian_coeffs(params, s.t);
    return step_symplectic_euler(s, k, u, p, step(s));
  };
}

struct IntegrateOptions
{
  /// f* to measure gaps against when the problem has no exact minimum.
  std::optional<double> f_ref;
  /// Fills the lyapunov column when set and the minimizer is known.
  std::optional<LyapunovCertificate> certificate;
  /// Keep (t, x, v) at every recorded row.
  bool keep_states = false;
  /// Divergence guard on |x| and f_gap.
  double divergence_threshold = 1e12;
};

namespace detail {
inline double reference_value(const ObjectiveProblem& problem, const IntegrateOptions& opt)
{
  if (problem.min_value) return *problem.min_value;
  if (opt.f_ref) return *opt.f_ref;
  throw std::invalid_argument("integrate: problem has no known minimum and no f_ref was given");
}

inline std::optional<std::string> divergence_reason(const Vector& x, double gap, double threshold)
{
  const double xn = x.norm();
  if (!std::isfinite(xn) || !std::isfinite(gap)) return "non-finite state";
  if (xn > threshold) return "|x| exceeded " + format_double(threshold);
  if (gap > threshold) return "f_gap exceeded " + format_double(threshold);
  return std::nullopt;
}
}  // namespace detail

/**
 * Runs `stepper` for n_steps and records every record_every-th iterate plus
 * the last. The velocity column is the discrete (x_n - x_{n-1}) / (t_n - t_{n-1}),
 * which equals v_n exactly for the velocity form; it is 0 at n = 0.
 *
 * A run whose |x| or f_gap exceeds the divergence threshold (or turns
 * non-finite) stops there; the record keeps the rows so far plus the
 * offending row, and `divergence` is set.
 */
inline TrajectoryRecord integrate(const ObjectiveProblem& problem, const Stepper& stepper,
                                  const IntegratorState& initial, std::int64_t n_steps,
                                  std::int64_t record_every = 1, const IntegrateOptions& opt = {})
{
  if (n_steps < 1) throw std::invalid_argument("integrate: n_steps must be >= 1");
  if (record_every < 1) throw std::invalid_argument("integrate: record_every must be >= 1");

  const double f_ref = detail::reference_value(problem, opt);
  TrajectoryRecord rec;
  rec.gap_is_exact = problem.min_value.has_value();
  const bool with_lyap = opt.certificate && problem.minimizer && problem.min_value;

  auto record = [&](const IntegratorState& s, const Vector& v, double gap, double step) {
    TrajectoryRow row;
    row.n = s.n;
    row.t = s.t;
    row.f_gap = gap;
    row.grad_norm = problem.gradient(s.x).norm();
    row.energy = 0.5 * v.squaredNorm() + gap;
    if (with_lyap) {
      const double lv = log_lyapunov_value(*opt.certificate, problem, s.x, v, s.t);
      if (lv < max_exp_argument && std::isfinite(lv)) row.lyapunov = std::exp(lv);
    }
    row.step = step;
    rec.rows.push_back(row);
    if (opt.keep_states) rec.samples.push_back({s.t, s.x, v});
  };

  IntegratorState s = initial;
  record(s, Vector::Zero(s.x.size()), problem.gap(s.x, f_ref), 0.0);

  for (std::int64_t i = 1; i <= n_steps; ++i) {
    IntegratorState next = stepper(s);
    const double h = next.t - s.t;
    const double gap = problem.gap(next.x, f_ref);
    if (auto why = detail::divergence_reason(next.x, gap, opt.divergence_threshold)) {
      rec.divergence = Divergence{next.n, next.t, *why};
      TrajectoryRow row;
      row.n = next.n;
      row.t = next.t;
      row.f_gap = gap;
      row.grad_norm = std::numeric_limits<double>::quiet_NaN();
      row.energy = std::numeric_limits<double>::quiet_NaN();
      row.step = h;
      rec.rows.push_back(row);
      return rec;
    }
    if (i % record_every == 0 || i == n_steps) {
      const Vector v = (next.x - s.x) / h;
      record(next, v, gap, h);
    }
    s = std::move(next);
  }
  return rec;
}

struct ReferenceOptions
{
  std::int64_t record_every = 1;
  bool keep_states = true;
  std::optional<double> f_ref;
  double divergence_threshold = 1e12;
};

/**
 * Classical fourth-order Runge-Kutta on x' = v, v' = -(r / t^alpha) v - grad f(x)
 * from (x0, v = 0) at params.t0 to t_end. The step is h_ref adjusted down so
 * an integer number of steps lands on t_end.
 */
inline TrajectoryRecord reference_solve(const ObjectiveProblem& problem, const DampedFlowParams& params,
                                        const Vector& x0, double t_end, double h_ref,
                                        const ReferenceOptions& opt = {})
{
  params.validate();
  if (!(t_end > params.t0)) throw std::invalid_argument("reference_solve: t_end must exceed t0");
  if (!(h_ref > 0.0)) throw std::invalid_argument("reference_solve: h_ref must be > 0");
  if (opt.record_every < 1) throw std::invalid_argument("reference_solve: record_every must be >= 1");

  IntegrateOptions io;
  io.f_ref = opt.f_ref;
  const double f_ref = detail::reference_value(problem, io);

  const auto n_steps = static_cast<std::int64_t>(std::ceil((t_end - params.t0) / h_ref - 1e-9));
  const double h = (t_end - params.t0) / static_cast<double>(n_steps);
  auto damping = [&](double t) { return params.r * std::pow(t, -params.alpha); };

  TrajectoryRecord rec;
  rec.gap_is_exact = problem.min_value.has_value();
  Vector x = x0;
  Vector v = Vector::Zero(x0.size());

  auto record = [&](std::int64_t n, double t, double step) {
    const double gap = problem.gap(x, f_ref);
    TrajectoryRow row;
    row.n = n;
    row.t = t;
    row.f_gap = gap;
    row.grad_norm = problem.gradient(x).norm();
    row.energy = 0.5 * v.squaredNorm() + gap;
    row.step = step;
    rec.rows.push_back(row);
    if (opt.keep_states) rec.samples.push_back({t, x, v});
  };
  record(0, params.t0, 0.0);

  for (std::int64_t n = 0; n < n_steps; ++n) {
    const double t = params.t0 + static_cast<double>(n) * h;
    const double tm = t + 0.5 * h;
    const double te = t + h;

    const Vector k1x = v;
    const Vector k1v = -damping(t) * v - problem.gradient(x);
    const Vector x2 = x + 0.5 * h * k1x;
    const Vector v2 = v + 0.5 * h * k1v;
    const Vector k2x = v2;
    const Vector k2v = -damping(tm) * v2 - problem.gradient(x2);
    const Vector x3 = x + 0.5 * h * k2x;
    const Vector v3 = v + 0.5 * h * k2v;
    const Vector k3x = v3;
    const Vector k3v = -damping(tm) * v3 - problem.gradient(x3);
    const Vector x4 = x + h * k3x;
    const Vector v4 = v + h * k3v;
    const Vector k4x = v4;
    const Vector k4v = -damping(te) * v4 - problem.gradient(x4);

    x += (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    v += (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);

    const double t_next = params.t0 + static_cast<double>(n + 1) * h;
    const double gap = problem.gap(x, f_ref);
    if (auto why = detail::divergence_reason(x, gap, opt.divergence_threshold)) {
      rec.divergence = Divergence{n + 1, t_next, *why};
      return rec;
    }
    if ((n + 1) % opt.record_every == 0 || n + 1 == n_steps) record(n + 1, t_next, h);
  }
  return rec;
}

/// A point of the extended phase space (x, t, y, epsilon); epsilon is conjugate to t.
struct ExtendedPoint
{
  Vector x;
  double t;
  Vector y;
  double eps;
};

/// How the epsilon component is advanced. `frozen` drops its update and
/// breaks symplecticity; it exists as a negative control.
enum class EpsilonUpdate { exact, frozen };

/**
 * One step of psi_1^h o phi_2^h on the extended space for H = k/2 |y|^2 + u f,
 * k = e^-xi, u = e^xi, with the rectangle quadrature N^h(t; k) = h k(t):
 *   y1 = y - h u(t) grad f(x),            eps1 = eps - h u'(t) f(x)
 *   x2 = x + h k(t) y1,  t2 = t + h,      eps2 = eps1 - 1/2 h k'(t) |y1|^2
 */
inline ExtendedPoint extended_step(const ObjectiveProblem& problem, const DampedFlowParams& params,
                                   const ExtendedPoint& z, double h,
                                   EpsilonUpdate mode = EpsilonUpdate::exact)
{
  const auto [k, u] = hamiltonian_coeffs(params, z.t);
  const auto [dk, du] = hamiltonian_coeff_rates(params, z.t);
  ExtendedPoint out;
  out.y = z.y - (h * u) * problem.gradient(z.x);
  out.x = z.x + (h * k) * out.y;
  out.t = z.t + h;
  out.eps = z.eps;
  if (mode == EpsilonUpdate::exact)
    out.eps += -h * du * problem.value(z.x) - 0.5 * h * dk * out.y.squaredNorm();
  return out;
}

/**
 * max |J^T Omega J - Omega| for the Jacobian J of one extended step at z,
 * by central differences with step 1e-6. Coordinates are ordered
 * (x, t, y, eps); Omega pairs y with x and eps with t. Meant for dim <= 3.
 */
inline double extended_symplecticity_defect(const ObjectiveProblem& problem, const DampedFlowParams& params,
                                            const ExtendedPoint& z, double h,
                                            EpsilonUpdate mode = EpsilonUpdate::exact)
{
  const int d = problem.dim;
  if (d > 3) throw std::invalid_argument("extended_symplecticity_defect: dim must be <= 3");
  const int m = d + 1;
  const int N = 2 * m;

  auto pack = [&](const ExtendedPoint& p) {
    Vector w(N);
    w.head(d) = p.x;
    w(d) = p.t;
    w.segment(m, d) = p.y;
    w(m + d) = p.eps;
    return w;
  };
  auto unpack = [&](const Vector& w) {
    return ExtendedPoint{w.head(d), w(d), w.segment(m, d), w(m + d)};
  };

  const Vector w0 = pack(z);
  const double fd = 1e-6;
  Matrix J(N, N);
  for (int j = 0; j < N; ++j) {
    Vector wp = w0, wm = w0;
    wp(j) += fd;
    wm(j) -= fd;
    const Vector fp = pack(extended_step(problem, params, unpack(wp), h, mode));
    const Vector fm = pack(extended_step(problem, params, unpack(wm), h, mode));
    J.col(j) = (fp - fm) / (2.0 * fd);
  }

  Matrix Omega = Matrix::Zero(N, N);
  Omega.topRightCorner(m, m) = -Matrix::Identity(m, m);
  Omega.bottomLeftCorner(m, m) = Matrix::Identity(m, m);
  return (J.transpose() * Omega * J - Omega).cwiseAbs().maxCoeff();
}

}  // namespace dampflow
