#pragma once

#include "dampflow/integrators.hpp"
#include "dampflow/lyapunov.hpp"
#include "dampflow/problems.hpp"
#include "dampflow/schedules.hpp"
#include "dampflow/stability.hpp"
#include "dampflow/trajectory.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace dampflow::bench {

enum class ProblemKind { quadratic, logsumexp, kms };
enum class MethodKind { gd, nag, nag_sc, damped, bregman };

/// How the Bregman stepper picks h_n. `fixed` uses the configured h;
/// `corollary` uses 0.999 x corollary1_schedule(t_n); `reference` uses
/// t_n^-(p-2)/2, which for p = 4 is the 1 / t_n schedule.
enum class BregmanStep { fixed, corollary, reference };

struct ProblemSpec
{
  ProblemKind kind = ProblemKind::quadratic;
  int dim = 500;
  std::uint64_t seed = 0;
  double eig_min = 0.001;
  double eig_max = 1.0;
  double b_std = 5.0;
  int m = 200;
  double rho = 20.0;
};

struct MethodSpec
{
  MethodKind kind = MethodKind::damped;
  double alpha = 0.6;
  double r = 3.0;
  double p = 2.0;
  /// Bregman C; defaults to 1 / (L p^2).
  std::optional<double> C;
  BregmanStep bregman_step = BregmanStep::fixed;
};

struct ExperimentConfig
{
  ProblemSpec problem;
  MethodSpec method;
  /// nullopt means "auto"
  std::optional<double> h;
  std::int64_t n_iters = 100000;
  double t0 = 1.0;
  std::int64_t record_every = 1;
  std::string out;
  /// Directory holding cached log-sum-exp minima.
  std::string fstar_cache_dir = ".dampflow_cache";
  /// Length of the reference run that estimates the log-sum-exp minimum.
  std::int64_t fstar_iters = 1000000;

  void validate() const
  {
    if (n_iters < 1) throw std::invalid_argument("config: iters must be >= 1");
    if (record_every < 1) throw std::invalid_argument("config: record-every must be >= 1");
    if (!(t0 > 0.0)) throw std::invalid_argument("config: t0 must be > 0");
    if (h && !(*h > 0.0 && std::isfinite(*h))) throw std::invalid_argument("config: h must be > 0");
    if (method.kind == MethodKind::damped) DampedFlowParams{method.alpha, method.r, t0}.validate();
    if (method.kind == MethodKind::bregman) {
      if (!(method.p >= 2.0)) throw std::invalid_argument("config: p must be >= 2");
      if (method.C && !(*method.C > 0.0)) throw std::invalid_argument("config: C must be > 0");
    }
  }
};

inline const char* to_string(ProblemKind k)
{
  switch (k) {
    case ProblemKind::quadratic: return "quadratic";
    case ProblemKind::logsumexp: return "logsumexp";
    case ProblemKind::kms: return "kms";
  }
  return "?";
}

inline const char* to_string(MethodKind k)
{
  switch (k) {
    case MethodKind::gd: return "gd";
    case MethodKind::nag: return "nag";
    case MethodKind::nag_sc: return "nagsc";
    case MethodKind::damped: return "damped";
    case MethodKind::bregman: return "bregman";
  }
  return "?";
}

inline const char* to_string(BregmanStep s)
{
  switch (s) {
    case BregmanStep::fixed: return "fixed";
    case BregmanStep::corollary: return "corollary";
    case BregmanStep::reference: return "reference";
  }
  return "?";
}

inline ObjectiveProblem build_problem(const ProblemSpec& spec)
{
  switch (spec.kind) {
    case ProblemKind::quadratic:
      return make_quadratic(spec.dim, spec.eig_min, spec.eig_max, spec.b_std, spec.seed);
    case ProblemKind::logsumexp: return make_log_sum_exp(spec.dim, spec.m, spec.rho, spec.seed);
    case ProblemKind::kms: return make_kms_inverse_quadratic(spec.dim);
  }
  throw std::invalid_argument("build_problem: unknown kind");
}

/// x0 ~ N(0, I), from a stream separate from the problem generator.
inline Vector default_x0(int dim, std::uint64_t seed)
{
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x7830u};
  Rng rng(seq);
  return gaussian_vector(rng, dim);
}

inline double bregman_C(const MethodSpec& m, double L) { return m.C ? *m.C : 1.0 / (L * m.p * m.p); }

/// Resolved step and how it was chosen.
struct StepChoice
{
  double h;
  std::string policy;
};

/**
 * "auto" steps: 1/L for GD, NAG and NAG-SC; 0.999 x velocity_form_step_bound
 * for the (alpha, r) scheme; for the Bregman family the per-step schedule
 * replaces a fixed h.
 */
inline StepChoice resolve_step(const ExperimentConfig& cfg, const ObjectiveProblem& problem)
{
  const double L = problem.lipschitz_L;
  if (cfg.h) return {*cfg.h, "explicit"};
  switch (cfg.method.kind) {
    case MethodKind::gd:
    case MethodKind::nag:
    case MethodKind::nag_sc: return {1.0 / L, "auto:1/L"};
    case MethodKind::damped:
      return {0.999 * velocity_form_step_bound({cfg.method.alpha, cfg.method.r, cfg.t0}, L),
              "auto:0.999*velocity_form_bound"};
    case MethodKind::bregman: {
      const BregmanPolyParams bp{cfg.method.p, bregman_C(cfg.method, L)};
      return {0.999 * corollary1_schedule(bp, L, cfg.t0), "auto:0.999*corollary1(t0)"};
    }
  }
  throw std::invalid_argument("resolve_step: unknown method");
}

inline Stepper make_stepper(const ExperimentConfig& cfg, const ObjectiveProblem& problem, double h)
{
  const auto& m = cfg.method;
  switch (m.kind) {
    case MethodKind::gd: return gd_stepper(problem, h);
    case MethodKind::nag: return nag_stepper(problem, h);
    case MethodKind::nag_sc: {
      if (!problem.strong_mu) throw std::invalid_argument("nagsc needs a strongly convex problem");
      return nag_sc_stepper(problem, h, *problem.strong_mu);
    }
    case MethodKind::damped: return damped_velocity_stepper(problem, {m.alpha, m.r, cfg.t0}, h);
    case MethodKind::bregman: {
      const double L = problem.lipschitz_L;
      const BregmanPolyParams bp{m.p, bregman_C(m, L)};
      StepPolicy policy;
      switch (m.bregman_step) {
        case BregmanStep::fixed: policy = fixed_step(h); break;
        case BregmanStep::corollary:
          policy = [bp, L](const IntegratorState& s) { return 0.999 * corollary1_schedule(bp, L, s.t); };
          break;
        case BregmanStep::reference:
          policy = [bp](const IntegratorState& s) { return bregman_reference_step(bp, s.t); };
          break;
      }
      return bregman_stepper(problem, bp, std::move(policy));
    }
  }
  throw std::invalid_argument("make_stepper: unknown method");
}

inline Scheme scheme_of(MethodKind k)
{
  switch (k) {
    case MethodKind::gd: return Scheme::gd;
    case MethodKind::nag: return Scheme::nag;
    case MethodKind::nag_sc: return Scheme::nag_sc;
    case MethodKind::damped: return Scheme::velocity;
    case MethodKind::bregman: return Scheme::momentum;
  }
  return Scheme::gd;
}

/// Certificate for the lyapunov column, when one applies.
inline std::optional<LyapunovCertificate> column_certificate(const ExperimentConfig& cfg,
                                                             const ObjectiveProblem& problem)
{
  if (cfg.method.kind != MethodKind::damped || !problem.strong_mu || !problem.minimizer) return std::nullopt;
  const double a = cfg.method.alpha, r = cfg.method.r, mu = *problem.strong_mu;
  double beta = default_lyap_beta(a, r);
  // alpha = 0 needs beta (1 - beta) <= mu / r^2
  if (a == 0.0 && 4.0 * mu < r * r) beta = 0.5 * (1.0 - std::sqrt(1.0 - 4.0 * mu / (r * r)));
  try {
    return certificate(a, r, beta, mu);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

/// Key for the log-sum-exp minimum cache.
inline std::string fstar_cache_name(const ProblemSpec& spec)
{
  std::ostringstream os;
  os << "lse_d" << spec.dim << "_m" << spec.m << "_rho" << format_double(spec.rho) << "_seed"
     << spec.seed << ".fstar";
  return os.str();
}

/**
 * Minimum of a problem without a closed form: the smallest f seen along a
 * damped (alpha = 0.8, r = 5) velocity-form run of `iters` steps with
 * h = 0.5 / sqrt(L), sampled every 100 steps and at the end.
 */
inline double estimate_min_value(const ObjectiveProblem& problem, const Vector& x0, std::int64_t iters)
{
  const DampedFlowParams params{0.8, 5.0, 1.0};
  const double h = 0.5 / std::sqrt(problem.lipschitz_L);
  IntegratorState s = initial_state(Scheme::velocity, x0, params.t0);
  double best = problem.value(x0);
  for (std::int64_t i = 1; i <= iters; ++i) {
    s = step_damped_velocity(problem, s, params, h);
    if (i % 100 == 0 || i == iters) best = std::min(best, problem.value(s.x));
  }
  return best;
}

struct FStar
{
  double value;
  std::string source;  // "exact", "cache:<path>", "computed:<path>"
};

inline FStar resolve_fstar(const ExperimentConfig& cfg, const ObjectiveProblem& problem)
{
  if (problem.min_value) return {*problem.min_value, "exact"};
  namespace fs = std::filesystem;
  const fs::path dir = cfg.fstar_cache_dir.empty() ? fs::path(".") : fs::path(cfg.fstar_cache_dir);
  const fs::path file = dir / fstar_cache_name(cfg.problem);
  if (std::ifstream in{file}) {
    std::string text;
    in >> text;
    try {
      return {std::stod(text), "cache:" + file.string()};
    } catch (const std::exception&) {
      // unreadable cache entry: recompute below
    }
  }
  const double v = estimate_min_value(problem, default_x0(problem.dim, cfg.problem.seed), cfg.fstar_iters);
  fs::create_directories(dir);
  std::ofstream(file) << format_double(v) << '\n';
  return {v, "computed:" + file.string()};
}

struct RunSummary
{
  std::vector<std::pair<std::string, std::string>> entries;

  void add(std::string key, std::string value) { entries.emplace_back(std::move(key), std::move(value)); }
  void add(std::string key, double value) { add(std::move(key), format_double(value)); }

  std::optional<std::string> get(const std::string& key) const
  {
    for (const auto& [k, v] : entries)
      if (k == key) return v;
    return std::nullopt;
  }
};

inline void write_summary(std::ostream& os, const RunSummary& s)
{
  for (const auto& [k, v] : s.entries) os << k << '=' << v << '\n';
}

struct RunResult
{
  TrajectoryRecord record;
  RunSummary summary;
  double h = 0.0;
  double final_gap = 0.0;
  bool diverged = false;
};

/// Runs one configuration on an already-built problem. Does not write files.
inline RunResult run_on(const ExperimentConfig& cfg, const ObjectiveProblem& problem, const FStar& fstar)
{
  cfg.validate();
  const auto clock_start = std::chrono::steady_clock::now();
  const StepChoice step = resolve_step(cfg, problem);
  if (!(step.h > 0.0 && std::isfinite(step.h))) throw std::runtime_error("run: step did not resolve");

  const Vector x0 = default_x0(problem.dim, cfg.problem.seed);
  IntegrateOptions opt;
  opt.f_ref = fstar.value;
  opt.certificate = column_certificate(cfg, problem);

  const IntegratorState init = initial_state(scheme_of(cfg.method.kind), x0, cfg.t0);
  RunResult res;
  res.record = integrate(problem, make_stepper(cfg, problem, step.h), init, cfg.n_iters, cfg.record_every, opt);
  res.h = step.h;
  res.diverged = res.record.diverged();
  res.final_gap = res.record.rows.back().f_gap;
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();

  const double L = problem.lipschitz_L;
  RunSummary& s = res.summary;
  s.add("problem", to_string(cfg.problem.kind));
  s.add("dim", std::to_string(problem.dim));
  s.add("seed", std::to_string(cfg.problem.seed));
  s.add("L", L);
  s.add("mu", problem.strong_mu ? format_double(*problem.strong_mu) : std::string("none"));
  s.add("method", to_string(cfg.method.kind));
  if (cfg.method.kind == MethodKind::damped) {
    s.add("alpha", cfg.method.alpha);
    s.add("r", cfg.method.r);
    s.add("theorem1_bound", theorem1_bound(1.0, 1.0, L));
    s.add("quoted_bound_2_over_L", quoted_fixed_step_bound(L));
    s.add("velocity_form_bound", velocity_form_step_bound({cfg.method.alpha, cfg.method.r, cfg.t0}, L));
  }
  if (cfg.method.kind == MethodKind::bregman) {
    s.add("p", cfg.method.p);
    s.add("C", bregman_C(cfg.method, L));
    s.add("bregman_step", to_string(cfg.method.bregman_step));
  }
  s.add("h", step.h);
  s.add("h_policy", step.policy);
  s.add("iters", std::to_string(cfg.n_iters));
  s.add("t0", cfg.t0);
  s.add("x0", "gaussian(seed)");
  s.add("record_every", std::to_string(cfg.record_every));
  s.add("fstar", fstar.value);
  s.add("fstar_source", fstar.source);
  s.add("final_f_gap", res.final_gap);
  s.add("iterations", std::to_string(res.record.rows.back().n));
  s.add("wall_time_s", wall);
  s.add("diverged", res.diverged ? "true" : "false");
  if (res.record.divergence) {
    s.add("divergence_n", std::to_string(res.record.divergence->n));
    s.add("divergence_reason", res.record.divergence->reason);
  }
  return res;
}

/// Builds the problem, runs, writes the CSV when cfg.out is set.
inline RunResult run(const ExperimentConfig& cfg)
{
  cfg.validate();
  const ObjectiveProblem problem = build_problem(cfg.problem);
  const FStar fstar = resolve_fstar(cfg, problem);
  RunResult res = run_on(cfg, problem, fstar);
  if (!cfg.out.empty()) {
    std::ofstream os(cfg.out);
    if (!os) throw std::runtime_error("run: cannot open " + cfg.out);
    write_trajectory_csv(os, res.record);
  }
  return res;
}

enum class SweepAxis { alpha, r, p };

inline const char* to_string(SweepAxis a)
{
  switch (a) {
    case SweepAxis::alpha: return "alpha";
    case SweepAxis::r: return "r";
    case SweepAxis::p: return "p";
  }
  return "?";
}

inline ExperimentConfig with_value(ExperimentConfig cfg, SweepAxis axis, double value)
{
  switch (axis) {
    case SweepAxis::alpha: cfg.method.alpha = value; break;
    case SweepAxis::r: cfg.method.r = value; break;
    case SweepAxis::p: cfg.method.p = value; break;
  }
  cfg.out.clear();
  return cfg;
}

struct SweepResult
{
  SweepAxis axis;
  std::vector<double> values;
  std::vector<RunResult> runs;
};

/**
 * Runs `base` once per value along `axis` on one shared problem instance.
 * Runs are independent and spread over `threads` workers (0 = hardware
 * concurrency); results come back in value order.
 */
inline SweepResult sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<double>& values,
                         unsigned threads = 0)
{
  if (values.empty()) throw std::invalid_argument("sweep: values must be nonempty");
  for (double v : values) with_value(base, axis, v).validate();

  const ObjectiveProblem problem = build_problem(base.problem);
  const FStar fstar = resolve_fstar(base, problem);

  SweepResult out{axis, values, std::vector<RunResult>(values.size())};
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(values.size()));

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(values.size());
  auto worker = [&]() {
    for (std::size_t i = next++; i < values.size(); i = next++) {
      try {
        out.runs[i] = run_on(with_value(base, axis, values[i]), problem, fstar);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

inline void write_sweep_csv(std::ostream& os, const SweepResult& s)
{
  os << "value,n,t,f_gap\n";
  for (std::size_t i = 0; i < s.values.size(); ++i)
    for (const auto& row : s.runs[i].record.rows)
      os << format_double(s.values[i]) << ',' << row.n << ',' << format_double(row.t) << ','
         << format_double(row.f_gap) << '\n';
}

}  // namespace dampflow::bench
