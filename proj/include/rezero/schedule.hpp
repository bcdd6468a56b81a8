#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace rezero {

namespace sched {
struct Constant {
  double value = 0.01;
};
/// peak * min(1, t / steps)
struct LinearWarmup {
  long steps = 100;
  double peak = 0.01;
};
/// base / factor^k after k of the drop points have been passed.
struct StepDown {
  double base = 0.1;
  std::vector<double> drop_at{100, 150};
  double factor = 10.0;
};
/// Triangle lo -> hi over [0, up], hi -> lo over [up, down], then a linear
/// tail to `final`. Momentum runs the mirrored triangle hi -> lo -> hi.
struct OneCycle {
  double lr_lo = 0.032;
  double lr_hi = 1.2;
  double lr_final = 0.001;
  double up_frac = 0.1;
  double down_frac = 0.9;
  double momentum_hi = 0.95;
  double momentum_lo = 0.85;
};
}  // namespace sched

using Schedule = std::variant<sched::Constant, sched::LinearWarmup, sched::StepDown, sched::OneCycle>;

struct ScheduleValue {
  double lr = 0.0;
  std::optional<double> momentum;
};

void validate(const Schedule& s);

/// Value at time t of a run lasting `total` (epochs or iterations).
ScheduleValue lr_schedule(const Schedule& s, double t, double total);

/// "constant:LR", "warmup:STEPS:PEAK", "step_down:BASE:E1,E2,...:FACTOR",
/// "one_cycle" or "one_cycle:LO:HI:FINAL".
Schedule parse_schedule(std::string_view text);
std::string to_string(const Schedule& s);

}  // namespace rezero
