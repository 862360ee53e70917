#pragma once

#include "dampflow/problems.hpp"

#include <charconv>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace dampflow {

struct TrajectoryRow
{
  std::int64_t n = 0;
  double t = 0.0;
  double f_gap = 0.0;
  double grad_norm = 0.0;
  double energy = 0.0;
  std::optional<double> lyapunov;
  double step = 0.0;
};

/// Full state at a recorded time, kept when a consumer needs more than the
/// scalar columns (Lyapunov monitors, plots of x itself).
struct StateSample
{
  double t;
  Vector x;
  Vector v;
};

struct Divergence
{
  std::int64_t n;
  double t;
  std::string reason;
};

struct TrajectoryRecord
{
  std::vector<TrajectoryRow> rows;
  std::vector<StateSample> samples;
  std::optional<Divergence> divergence;
  /// true when f_gap is measured against the exact minimum
  bool gap_is_exact = false;

  bool diverged() const { return divergence.has_value(); }
};

inline constexpr const char* trajectory_csv_header = "n,t,f_gap,grad_norm,energy,lyapunov,step";

/// Shortest round-trip decimal form; deterministic across runs.
inline std::string format_double(double v)
{
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline void write_trajectory_row(std::ostream& os, const TrajectoryRow& row)
{
  os << row.n << ',' << format_double(row.t) << ',' << format_double(row.f_gap) << ','
     << format_double(row.grad_norm) << ',' << format_double(row.energy) << ',';
  if (row.lyapunov) os << format_double(*row.lyapunov);
  os << ',' << format_double(row.step) << '\n';
}

inline void write_trajectory_csv(std::ostream& os, const TrajectoryRecord& record)
{
  os << trajectory_csv_header << '\n';
  for (const auto& row : record.rows) write_trajectory_row(os, row);
}

}  // namespace dampflow
