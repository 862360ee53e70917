// Runs GD, NAG and the damped velocity-form scheme on a small random
// quadratic and prints the suboptimality every 100 iterations.

#include "dampflow/dampflow.hpp"

#include <cstdio>

int main()
{
  using namespace dampflow;

  const ObjectiveProblem f = make_quadratic(50, 1e-3, 1.0, 5.0, 7);
  const Vector x0 = Vector::Ones(f.dim);
  const double L = f.lipschitz_L;
  const DampedFlowParams flow{0.6, 1.5, 1.0};
  const double h_damped = 0.999 * velocity_form_step_bound(flow, L);

  const auto gd = integrate(f, gd_stepper(f, 1.0 / L), initial_state(Scheme::gd, x0), 2000, 100);
  const auto nag = integrate(f, nag_stepper(f, 1.0 / L), initial_state(Scheme::nag, x0), 2000, 100);
  const auto damped = integrate(f, damped_velocity_stepper(f, flow, h_damped),
                                initial_state(Scheme::velocity, x0, flow.t0), 2000, 100);

  std::printf("%6s %12s %12s %12s\n", "n", "gd", "nag", "damped");
  for (std::size_t i = 0; i < gd.rows.size(); ++i)
    std::printf("%6lld %12.4e %12.4e %12.4e\n", static_cast<long long>(gd.rows[i].n), gd.rows[i].f_gap,
                nag.rows[i].f_gap, damped.rows[i].f_gap);
}
