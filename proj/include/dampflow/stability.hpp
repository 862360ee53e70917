#pragma once

#include "dampflow/schedules.hpp"
#include "dampflow/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dampflow {

/// Linearized symplectic Euler step along one Hessian eigendirection:
///   S = [[1 - h^2 k u lambda, h k], [-h u lambda, 1]],  det S = 1.
struct StabilityBlock
{
  double s11, s12, s21, s22;
  double h, k, u, lambda;

  double trace() const { return s11 + s22; }
  double det() const { return s11 * s22 - s12 * s21; }
};

inline StabilityBlock stability_block(double h, double k, double u, double lambda)
{
  if (!(h > 0.0 && k > 0.0 && u > 0.0)) throw std::invalid_argument("stability_block: h, k, u must be > 0");
  if (!(lambda >= 0.0)) throw std::invalid_argument("stability_block: lambda must be >= 0");
  return {1.0 - h * h * k * u * lambda, h * k, -h * u * lambda, 1.0, h, k, u, lambda};
}

struct SpectralVerdict
{
  double radius;
  /// |trace| < 2: two distinct eigenvalues on the unit circle, diagonalizable.
  bool is_strictly_stable;
};

/// Spectral radius of a real 2x2 matrix from its characteristic polynomial.
inline double spectral_radius_2x2(double trace, double det)
{
  const double half = 0.5 * trace;
  const double disc = half * half - det;
  if (disc < 0.0) return std::sqrt(det);  // complex pair, |lambda|^2 = det
  const double s = std::sqrt(disc);
  return std::max(std::abs(half + s), std::abs(half - s));
}

inline SpectralVerdict spectral_radius_2x2(const StabilityBlock& block)
{
  const double tr = block.trace();
  return {spectral_radius_2x2(tr, block.det()), std::abs(tr) < 2.0};
}

/// sup h with h^2 k u L < 4. For the Lagrangian form pass k = 1/a(t), u = b(t).
inline double theorem1_bound(double k_t, double u_t, double L)
{
  if (!(k_t > 0.0 && u_t > 0.0 && L > 0.0)) throw std::invalid_argument("theorem1_bound: inputs must be > 0");
  return std::sqrt(4.0 / (k_t * u_t * L));
}

/// Bound on h_n for the polynomial Bregman family: sqrt(4 / (C L p^2 t_n^(p-2))).
inline double corollary1_schedule(const BregmanPolyParams& params, double L, double t_n)
{
  params.validate();
  if (!(t_n > 0.0)) throw std::domain_error("corollary1_schedule: t_n must be > 0");
  if (!(L > 0.0)) throw std::invalid_argument("corollary1_schedule: L must be > 0");
  return std::sqrt(4.0 / (params.C * L * params.p * params.p * std::pow(t_n, params.p - 2.0)));
}

/// The step h_n = t_n^(-(p-2)/2), which sits inside corollary1_schedule
/// when C = 1 / (L p^2).
inline double bregman_reference_step(const BregmanPolyParams& params, double t_n)
{
  return std::pow(t_n, -(params.p - 2.0) / 2.0);
}

/// The often-quoted fixed step bound 2 / L for the (alpha, r) scheme. It
/// differs from theorem1_bound(1, 1, L) = 2 / sqrt(L) unless L = 1; reports
/// show both.
inline double quoted_fixed_step_bound(double L) { return 2.0 / L; }

/**
 * Velocity-form step matrix along eigenvalue lambda with decay c in (0, 1]:
 *   [[1 - h^2 lambda, h c], [-h lambda, c]],  det = c, trace = 1 + c - h^2 lambda.
 * Stable (Jury) iff 0 < h^2 lambda < 2 (1 + c).
 */
inline SpectralVerdict velocity_form_verdict(double h, double c, double lambda)
{
  const double tr = 1.0 + c - h * h * lambda;
  return {spectral_radius_2x2(tr, c), std::abs(tr) < 1.0 + c};
}

/**
 * Largest fixed step for which every velocity-form step matrix of the
 * (alpha, r) scheme is a contraction on [0, L]: the root of
 *   h^2 L = 2 (1 + e^{xi(t0) - xi(t0 + h)}).
 * The decay e^{xi(t_{n-1}) - xi(t_n)} is smallest on the first damped step,
 * so the condition then holds for all later steps. Tends to the
 * theorem1_bound value 2/sqrt(L) as the damping vanishes.
 */
inline double velocity_form_step_bound(const DampedFlowParams& params, double L)
{
  params.validate();
  if (!(L > 0.0)) throw std::invalid_argument("velocity_form_step_bound: L must be > 0");
  auto excess = [&](double h) {
    const double c = std::exp(xi(params, params.t0) - xi(params, params.t0 + h));
    return h * h * L - 2.0 * (1.0 + c);
  };
  double lo = 0.0;
  double hi = 2.0 / std::sqrt(L);
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (excess(mid) < 0.0 ? lo : hi) = mid;
  }
  return lo;
}

enum class ModeVerdict { stable, marginal, unstable };

inline const char* to_string(ModeVerdict v)
{
  switch (v) {
    case ModeVerdict::stable: return "stable";
    case ModeVerdict::marginal: return "marginal";
    case ModeVerdict::unstable: return "unstable";
  }
  return "?";
}

struct StabilityReportRow
{
  double h, t, lambda, radius;
  ModeVerdict verdict;
};

/// Per-eigenvalue verdicts at one step. lambda = 0 modes are reported as
/// marginal (a shear block); the spectrum is stable when every lambda > 0
/// mode is strictly stable.
inline std::vector<StabilityReportRow> stability_report(double h, double t, double k, double u,
                                                        std::span<const double> eigenvalues)
{
  std::vector<StabilityReportRow> rows;
  rows.reserve(eigenvalues.size());
  for (double lam : eigenvalues) {
    const auto block = stability_block(h, k, u, lam);
    const auto sv = spectral_radius_2x2(block);
    ModeVerdict v = lam == 0.0 ? ModeVerdict::marginal
                               : (sv.is_strictly_stable ? ModeVerdict::stable : ModeVerdict::unstable);
    rows.push_back({h, t, lam, sv.radius, v});
  }
  return rows;
}

inline bool spectrum_is_stable(std::span<const StabilityReportRow> rows)
{
  return std::none_of(rows.begin(), rows.end(),
                      [](const StabilityReportRow& r) { return r.verdict == ModeVerdict::unstable; });
}

inline void write_stability_csv(std::ostream& os, std::span<const StabilityReportRow> rows)
{
  os << "h,t,lambda,radius,verdict\n";
  for (const auto& r : rows)
    os << format_double(r.h) << ',' << format_double(r.t) << ',' << format_double(r.lambda) << ','
       << format_double(r.radius) << ',' << to_string(r.verdict) << '\n';
}

}  // namespace dampflow
