#include "rezero/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rezero/error.hpp"

namespace rezero {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

// Interpolation written so that f = 0 and f = 1 return the anchors exactly.
double lerp(double a, double b, double f) { return a * (1.0 - f) + b * f; }

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double number(const std::string& s) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw ConfigError("bad number '" + s + "' in schedule");
    return v;
  } catch (const std::logic_error&) {
    throw ConfigError("bad number '" + s + "' in schedule");
  }
}

}  // namespace

void validate(const Schedule& s) {
  std::visit(Overloaded{
                 [](const sched::Constant& c) {
                   if (!(c.value > 0.0)) throw ConfigError("constant rate must be positive");
                 },
                 [](const sched::LinearWarmup& w) {
                   if (w.steps < 1) throw ConfigError("warm-up needs at least one step");
                   if (!(w.peak > 0.0)) throw ConfigError("warm-up peak must be positive");
                 },
                 [](const sched::StepDown& d) {
                   if (!(d.base > 0.0) || !(d.factor > 0.0)) {
                     throw ConfigError("step-down base and factor must be positive");
                   }
                   if (!std::is_sorted(d.drop_at.begin(), d.drop_at.end())) {
                     throw ConfigError("step-down drop points must be ordered");
                   }
                 },
                 [](const sched::OneCycle& o) {
                   if (!(o.lr_lo > 0.0 && o.lr_hi > 0.0 && o.lr_final > 0.0)) {
                     throw ConfigError("one-cycle rates must be positive");
                   }
                   if (!(0.0 < o.up_frac && o.up_frac < o.down_frac && o.down_frac < 1.0)) {
                     throw ConfigError("one-cycle fractions must satisfy 0 < up < down < 1");
                   }
                   if (!(o.momentum_lo > 0.0 && o.momentum_hi >= o.momentum_lo)) {
                     throw ConfigError("one-cycle momenta must satisfy 0 < lo <= hi");
                   }
                 },
             },
             s);
}

ScheduleValue lr_schedule(const Schedule& s, double t, double total) {
  if (!(t >= 0.0 && t <= total)) {
    throw ContractError("schedule time " + std::to_string(t) + " outside [0, " +
                        std::to_string(total) + "]");
  }
  return std::visit(
      Overloaded{
          [](const sched::Constant& c) { return ScheduleValue{c.value, std::nullopt}; },
          [t](const sched::LinearWarmup& w) {
            return ScheduleValue{w.peak * std::min(1.0, t / static_cast<double>(w.steps)),
                                 std::nullopt};
          },
          [t](const sched::StepDown& d) {
            const auto k = std::count_if(d.drop_at.begin(), d.drop_at.end(),
                                         [t](double e) { return t >= e; });
            return ScheduleValue{d.base / std::pow(d.factor, static_cast<double>(k)), std::nullopt};
          },
          [t, total](const sched::OneCycle& o) {
            const double f = total > 0.0 ? t / total : 1.0;
            if (f <= o.up_frac) {
              const double g = f / o.up_frac;
              return ScheduleValue{lerp(o.lr_lo, o.lr_hi, g), lerp(o.momentum_hi, o.momentum_lo, g)};
            }
            if (f <= o.down_frac) {
              const double g = (f - o.up_frac) / (o.down_frac - o.up_frac);
              return ScheduleValue{lerp(o.lr_hi, o.lr_lo, g), lerp(o.momentum_lo, o.momentum_hi, g)};
            }
            const double g = (f - o.down_frac) / (1.0 - o.down_frac);
            return ScheduleValue{lerp(o.lr_lo, o.lr_final, g), o.momentum_hi};
          },
      },
      s);
}

Schedule parse_schedule(std::string_view text) {
  const auto parts = split(text, ':');
  const std::string& kind = parts[0];
  Schedule s;
  if (kind == "constant" && parts.size() == 2) {
    s = sched::Constant{number(parts[1])};
  } else if (kind == "warmup" && parts.size() == 3) {
    s = sched::LinearWarmup{static_cast<long>(number(parts[1])), number(parts[2])};
  } else if (kind == "step_down" && (parts.size() == 3 || parts.size() == 4)) {
    sched::StepDown d;
    d.base = number(parts[1]);
    d.drop_at.clear();
    for (const auto& e : split(parts[2], ',')) d.drop_at.push_back(number(e));
    if (parts.size() == 4) d.factor = number(parts[3]);
    s = d;
  } else if (kind == "one_cycle" && (parts.size() == 1 || parts.size() == 4)) {
    sched::OneCycle o;
    if (parts.size() == 4) {
      o.lr_lo = number(parts[1]);
      o.lr_hi = number(parts[2]);
      o.lr_final = number(parts[3]);
    }
    s = o;
  } else {
    throw ConfigError("cannot parse schedule '" + std::string(text) + "'");
  }
  validate(s);
  return s;
}

std::string to_string(const Schedule& s) {
  std::ostringstream out;
  out.precision(17);
  std::visit(Overloaded{
                 [&](const sched::Constant& c) { out << "constant:" << c.value; },
                 [&](const sched::LinearWarmup& w) { out << "warmup:" << w.steps << ':' << w.peak; },
                 [&](const sched::StepDown& d) {
                   out << "step_down:" << d.base << ':';
                   for (std::size_t i = 0; i < d.drop_at.size(); ++i) {
                     out << (i ? "," : "") << d.drop_at[i];
                   }
                   out << ':' << d.factor;
                 },
                 [&](const sched::OneCycle& o) {
                   out << "one_cycle:" << o.lr_lo << ':' << o.lr_hi << ':' << o.lr_final;
                 },
             },
             s);
  return out.str();
}

}  // namespace rezero
