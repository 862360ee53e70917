#include "dampflow/bench.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace dampflow;
using namespace dampflow::bench;

namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p)
{
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path scratch_dir(const std::string& name)
{
  const fs::path dir = fs::temp_directory_path() / ("dampflow_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ExperimentConfig small_quadratic(MethodKind m)
{
  ExperimentConfig cfg;
  cfg.problem.kind = ProblemKind::quadratic;
  cfg.problem.dim = 40;
  cfg.problem.seed = 3;
  cfg.method.kind = m;
  cfg.n_iters = 2000;
  return cfg;
}

}  // namespace

TEST(Config, Validation)
{
  ExperimentConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.n_iters = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = ExperimentConfig{};
  cfg.method.alpha = 1.5;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = ExperimentConfig{};
  cfg.method.r = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = ExperimentConfig{};
  cfg.h = -1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = ExperimentConfig{};
  cfg.method.kind = MethodKind::bregman;
  cfg.method.p = 1.5;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Config, AutoStepResolvesFinite)
{
  const auto f = make_quadratic(10, 0.01, 4.0, 1.0, 0);
  for (auto m : {MethodKind::gd, MethodKind::nag, MethodKind::nag_sc, MethodKind::damped, MethodKind::bregman}) {
    auto cfg = small_quadratic(m);
    const auto s = resolve_step(cfg, f);
    EXPECT_TRUE(std::isfinite(s.h) && s.h > 0.0) << to_string(m);
    EXPECT_EQ(s.policy.rfind("auto", 0), 0u);
  }
  auto cfg = small_quadratic(MethodKind::gd);
  EXPECT_DOUBLE_EQ(resolve_step(cfg, f).h, 0.25);
  cfg.h = 0.1;
  EXPECT_EQ(resolve_step(cfg, f).h, 0.1);
  EXPECT_EQ(resolve_step(cfg, f).policy, "explicit");
  cfg = small_quadratic(MethodKind::damped);
  EXPECT_LE(resolve_step(cfg, f).h, 0.999 * theorem1_bound(1.0, 1.0, 4.0));
}

TEST(Run, NagCsvStructure)
{
  auto cfg = small_quadratic(MethodKind::nag);
  cfg.n_iters = 1000;
  cfg.record_every = 10;
  const auto dir = scratch_dir("nag");
  cfg.out = (dir / "nag.csv").string();
  const auto res = run(cfg);
  std::istringstream in(slurp(cfg.out));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "n,t,f_gap,grad_norm,energy,lyapunov,step");
  int rows = 0;
  double prev_t = -1.0;
  while (std::getline(in, line)) {
    const double t = std::stod(line.substr(line.find(',') + 1));
    EXPECT_GT(t, prev_t);
    prev_t = t;
    // no certificate for nag: empty lyapunov column
    EXPECT_NE(line.find(",,"), std::string::npos);
    ++rows;
  }
  EXPECT_EQ(rows, 1000 / 10 + 1);
  EXPECT_EQ(res.summary.get("diverged"), "false");
  EXPECT_EQ(res.summary.get("h_policy"), "auto:1/L");
  EXPECT_TRUE(res.summary.get("wall_time_s"));
  EXPECT_TRUE(res.summary.get("final_f_gap"));
  fs::remove_all(dir);
}

TEST(Run, DeterministicCsv)
{
  const auto dir = scratch_dir("det");
  auto cfg = small_quadratic(MethodKind::damped);
  cfg.out = (dir / "a.csv").string();
  run(cfg);
  cfg.out = (dir / "b.csv").string();
  run(cfg);
  const auto a = slurp(dir / "a.csv"), b = slurp(dir / "b.csv");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, b);
  fs::remove_all(dir);
}

TEST(Run, DampedFillsLyapunovColumn)
{
  auto cfg = small_quadratic(MethodKind::damped);
  cfg.n_iters = 200;
  const auto res = run(cfg);
  std::size_t filled = 0;
  for (const auto& row : res.record.rows) filled += row.lyapunov.has_value();
  EXPECT_GT(filled, 0u);
  EXPECT_TRUE(res.summary.get("theorem1_bound"));
  EXPECT_TRUE(res.summary.get("quoted_bound_2_over_L"));
}

TEST(Run, BregmanP3FixedStepDiverges)
{
  ExperimentConfig cfg;
  cfg.problem.kind = ProblemKind::kms;
  cfg.problem.dim = 50;
  cfg.method.kind = MethodKind::bregman;
  cfg.method.p = 3.0;
  cfg.n_iters = 100000;
  cfg.record_every = 100;
  const auto res = run(cfg);
  EXPECT_TRUE(res.diverged);
  EXPECT_EQ(res.summary.get("diverged"), "true");
  EXPECT_TRUE(res.summary.get("divergence_n"));
}

TEST(Run, BregmanP2StaysBounded)
{
  ExperimentConfig cfg;
  cfg.problem.kind = ProblemKind::kms;
  cfg.problem.dim = 50;
  cfg.method.kind = MethodKind::bregman;
  cfg.method.p = 2.0;
  cfg.n_iters = 20000;
  cfg.record_every = 100;
  cfg.h = 1.0;
  EXPECT_FALSE(run(cfg).diverged);
  // at 0.999 x the frozen-time bound the early, fast-varying coefficients blow up
  cfg.h = std::nullopt;
  EXPECT_TRUE(run(cfg).diverged);
}

TEST(Run, DampedBeatsNagOnQuadratic)
{
  ExperimentConfig base;
  base.problem.dim = 100;
  base.problem.seed = 1;
  base.n_iters = 20000;
  base.record_every = 1000;
  auto nag = base;
  nag.method.kind = MethodKind::nag;
  auto damped = base;
  damped.method.kind = MethodKind::damped;
  damped.method.alpha = 0.6;
  damped.method.r = 3.0;
  EXPECT_LT(run(damped).final_gap, run(nag).final_gap);
}

TEST(FStar, ComputedThenCached)
{
  const auto dir = scratch_dir("fstar");
  ExperimentConfig cfg;
  cfg.problem.kind = ProblemKind::logsumexp;
  cfg.problem.dim = 10;
  cfg.problem.m = 30;
  cfg.problem.rho = 2.0;
  cfg.fstar_cache_dir = dir.string();
  cfg.fstar_iters = 20000;
  const auto f = build_problem(cfg.problem);
  const auto first = resolve_fstar(cfg, f);
  EXPECT_EQ(first.source.rfind("computed:", 0), 0u);
  EXPECT_TRUE(fs::exists(dir / fstar_cache_name(cfg.problem)));
  const auto second = resolve_fstar(cfg, f);
  EXPECT_EQ(second.source.rfind("cache:", 0), 0u);
  EXPECT_EQ(first.value, second.value);
  // no sampled point does better than the estimate by more than roundoff
  Rng rng(1);
  const Vector x0 = default_x0(10, 0);
  for (int i = 0; i < 100; ++i)
    EXPECT_GE(f.value(x0 + 0.1 * gaussian_vector(rng, 10)), first.value - 1e-9);

  cfg.method.kind = MethodKind::nag;
  cfg.n_iters = 500;
  const auto res = run(cfg);
  EXPECT_EQ(res.summary.get("fstar_source")->rfind("cache:", 0), 0u);
  EXPECT_FALSE(res.record.gap_is_exact);
  fs::remove_all(dir);
}

TEST(FStar, ExactForQuadratics)
{
  const auto cfg = small_quadratic(MethodKind::gd);
  const auto f = build_problem(cfg.problem);
  EXPECT_EQ(resolve_fstar(cfg, f).source, "exact");
}

TEST(Sweep, RejectsEmptyValues)
{
  EXPECT_THROW(sweep(small_quadratic(MethodKind::damped), SweepAxis::r, {}), std::invalid_argument);
}

TEST(Sweep, MatchesIndividualRunsAndWritesLongCsv)
{
  auto base = small_quadratic(MethodKind::damped);
  base.n_iters = 500;
  base.record_every = 100;
  const std::vector<double> rs{0.5, 1.5, 5.0};
  const auto s = sweep(base, SweepAxis::r, rs, 2);
  ASSERT_EQ(s.runs.size(), 3u);
  for (std::size_t i = 0; i < rs.size(); ++i) {
    auto cfg = base;
    cfg.method.r = rs[i];
    EXPECT_EQ(s.runs[i].final_gap, run(cfg).final_gap);
  }
  std::ostringstream os;
  write_sweep_csv(os, s);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "value,n,t,f_gap");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 3 * 6);
}

TEST(Sweep, RejectsInvalidValue)
{
  EXPECT_THROW(sweep(small_quadratic(MethodKind::damped), SweepAxis::alpha, {0.5, 2.0}), std::invalid_argument);
}

TEST(Defaults, X0IsSeeded)
{
  EXPECT_EQ(default_x0(20, 4), default_x0(20, 4));
  EXPECT_NE(default_x0(20, 4), default_x0(20, 5));
}

TEST(ColumnCertificate, AlphaZeroPicksAdmissibleBeta)
{
  auto cfg = small_quadratic(MethodKind::damped);
  cfg.method.alpha = 0.0;
  cfg.method.r = 3.0;
  const auto f = make_quadratic(10, 0.01, 1.0, 1.0, 0);
  const auto c = column_certificate(cfg, f);
  ASSERT_TRUE(c.has_value());
  EXPECT_LE(c->beta * (1.0 - c->beta), 0.01 / 9.0 * (1.0 + 1e-12));
}
