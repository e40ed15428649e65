#include "async_lab/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "async_lab/errors.hpp"

namespace async_lab {
namespace {

// SplitMix64 step.
std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

std::uint64_t CounterRng::bits(std::uint64_t k, std::uint64_t j) const {
  std::uint64_t x = splitmix(seed_);
  x = splitmix(x ^ splitmix(stream_ + 0x632BE59BD9B4E019ull));
  x = splitmix(x ^ splitmix(k + 0x8CB92BA72F3D8DD7ull));
  return splitmix(x ^ splitmix(j + 0xD1B54A32D192ED03ull));
}

double CounterRng::uniform(std::uint64_t k, std::uint64_t j) const {
  return static_cast<double>(bits(k, j) >> 11) * 0x1.0p-53;
}

double CounterRng::uniform(double lo, double hi, std::uint64_t k, std::uint64_t j) const {
  return lo + (hi - lo) * uniform(k, j);
}

double CounterRng::normal(std::uint64_t k, std::uint64_t j) const {
  const double u1 = 1.0 - uniform(k, 2 * j);  // (0, 1]
  const double u2 = uniform(k, 2 * j + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Vector CounterRng::unit_vector(int dim, std::uint64_t k) const {
  Vector v(dim);
  for (std::uint64_t attempt = 0;; ++attempt) {
    for (int i = 0; i < dim; ++i) v(i) = normal(k, attempt * dim + i);
    const double n = v.norm();
    if (n > 1e-300) return v / n;
  }
}

std::uint64_t rng_stream(int channel_id, RngPurpose purpose) {
  return static_cast<std::uint64_t>(channel_id) * 8u + static_cast<std::uint64_t>(purpose);
}

void ScheduleParams::validate() const {
  if (!std::isfinite(h_min) || !std::isfinite(h_max) || !std::isfinite(tau_max) ||
      !std::isfinite(horizon)) {
    throw ParameterError("schedule: non-finite parameter");
  }
  if (!(h_min > 0.0) || !(h_min <= h_max)) {
    throw ParameterError("schedule: need 0 < h_min <= h_max, got h_min = " + fmt(h_min) +
                         ", h_max = " + fmt(h_max));
  }
  if (!(tau_max >= 0.0)) throw ParameterError("schedule: tau_max must be >= 0");
  if (tau_max > h_min) {
    throw ParameterError("schedule: tau_max = " + fmt(tau_max) + " exceeds h_min = " +
                         fmt(h_min) + "; a delay could outlast the next sampling gap");
  }
  if (!(horizon >= 0.0)) throw ParameterError("schedule: horizon must be >= 0");
}

ChannelSchedule generate_schedule(const ScheduleParams& p, std::uint64_t seed, int channel_id) {
  p.validate();
  const CounterRng gaps(seed, rng_stream(channel_id, RngPurpose::gap));
  const CounterRng delays(seed, rng_stream(channel_id, RngPurpose::delay));
  const CounterRng start(seed, rng_stream(channel_id, RngPurpose::start));

  ChannelSchedule s;
  s.channel_id = channel_id;
  double t = start.uniform(0.0, p.h_max, 0);
  for (std::uint64_t k = 0; t <= p.horizon; ++k) {
    const double gap = gaps.uniform(p.h_min, p.h_max, k);
    const double cap = std::min(p.tau_max, gap * (1.0 - 1e-9));
    s.sample_instants.push_back(t);
    s.delays.push_back(delays.uniform(0.0, cap, k));
    const double prev = t;
    t += gap;
    // Accumulated instants can round the realised gap just above h_max.
    while (t - prev > p.h_max) t = std::nextafter(t, prev);
  }
  return s;
}

std::optional<std::string> schedule_violation(const ChannelSchedule& s, double h, double tau) {
  const std::string ch = "channel " + std::to_string(s.channel_id) + ": ";
  if (s.sample_instants.size() != s.delays.size()) {
    return ch + "instants and delays differ in length";
  }
  const std::size_t n = s.sample_instants.size();
  for (std::size_t k = 0; k < n; ++k) {
    const double t = s.sample_instants[k];
    const double d = s.delays[k];
    if (!std::isfinite(t) || !std::isfinite(d)) return ch + "non-finite entry at k = " + std::to_string(k);
    if (d < 0.0) return ch + "negative delay at k = " + std::to_string(k);
    if (d > tau) {
      return ch + "delay " + fmt(d) + " at k = " + std::to_string(k) + " exceeds tau = " + fmt(tau);
    }
    if (k == 0) {
      if (t < 0.0) return ch + "first instant is negative";
      if (t > h) return ch + "first instant " + fmt(t) + " exceeds h = " + fmt(h);
      continue;
    }
    const double prev = s.sample_instants[k - 1];
    const double gap = t - prev;
    if (!(gap > 0.0)) return ch + "instants not strictly increasing at k = " + std::to_string(k);
    if (gap > h) {
      return ch + "gap " + fmt(gap) + " at k = " + std::to_string(k) + " exceeds h = " + fmt(h);
    }
    if (!(s.delays[k - 1] < gap)) {
      return ch + "delay at k = " + std::to_string(k - 1) + " is not shorter than the next gap";
    }
    if (!(s.delivery(k) > s.delivery(k - 1))) {
      return ch + "deliveries not strictly increasing at k = " + std::to_string(k);
    }
  }
  return std::nullopt;
}

void validate_schedule(const ChannelSchedule& s, double h, double tau) {
  if (auto v = schedule_violation(s, h, tau)) throw ScheduleError(*v);
}

void validate_error_model(const ErrorModel& m) {
  std::visit(Overloaded{
                 [](const NoError&) {},
                 [](const MultiplicativeError& e) {
                   if (!(e.omega >= 0.0) || !std::isfinite(e.omega)) {
                     throw ParameterError("multiplicative error: omega must be >= 0");
                   }
                 },
                 [](const AdditiveError& e) {
                   if (!(e.delta_e >= 0.0) || !std::isfinite(e.delta_e)) {
                     throw ParameterError("additive error: delta_e must be >= 0");
                   }
                 },
                 [](const LogQuantizer& q) {
                   if (!(q.level > 1.0) || !std::isfinite(q.level)) {
                     throw ParameterError("log quantizer: level must be > 1");
                   }
                 },
                 [](const EventTrigger& t) {
                   if (!(t.omega >= 0.0) || !std::isfinite(t.omega)) {
                     throw ParameterError("event trigger: omega must be >= 0");
                   }
                   if (!(t.dwell > 0.0) || !std::isfinite(t.dwell)) {
                     throw ParameterError("event trigger: dwell must be > 0");
                   }
                   if (t.cap && !(*t.cap > 0.0)) {
                     throw ParameterError("event trigger: cap must be > 0");
                   }
                   if (t.form == TriggerForm::capped && !t.cap) {
                     throw ParameterError("event trigger: capped form needs a cap");
                   }
                 },
             },
             m);
}

std::string error_model_kind(const ErrorModel& m) {
  return std::visit(Overloaded{
                        [](const NoError&) { return std::string("none"); },
                        [](const MultiplicativeError&) { return std::string("multiplicative"); },
                        [](const AdditiveError&) { return std::string("additive"); },
                        [](const LogQuantizer&) { return std::string("log_quantizer"); },
                        [](const EventTrigger&) { return std::string("event_trigger"); },
                    },
                    m);
}

Measurement apply_multiplicative_error(const Vector& value, double omega, const CounterRng& rng,
                                       std::uint64_t k, bool adversarial) {
  if (!(omega >= 0.0)) throw ParameterError("multiplicative error: omega must be >= 0");
  const double ratio = std::sqrt(omega) / (1.0 + std::sqrt(omega));
  const double bound = ratio * value.norm();
  Vector e = Vector::Zero(value.size());
  if (bound > 0.0) {
    if (adversarial) {
      e = ratio * value;
    } else {
      e = rng.uniform(k, 1u << 20) * bound * rng.unit_vector(static_cast<int>(value.size()), k);
    }
  }
  return {value - e, e};
}

Measurement apply_additive_error(const Vector& value, double delta_e, const CounterRng& rng,
                                 std::uint64_t k) {
  if (!(delta_e >= 0.0)) throw ParameterError("additive error: delta_e must be >= 0");
  Vector e = Vector::Zero(value.size());
  if (delta_e > 0.0 && value.size() > 0) {
    e = rng.uniform(k, 1u << 20) * delta_e * rng.unit_vector(static_cast<int>(value.size()), k);
  }
  return {value - e, e};
}

double log_quantize(double xi, double level) {
  if (!(level > 1.0)) throw ParameterError("log quantizer: level must be > 1");
  if (xi == 0.0 || !std::isfinite(xi)) return xi;
  const double mag = std::abs(xi);
  double k = std::floor(std::log(mag) / std::log(level));
  // Snap the floor against rounding in the logarithm.
  while (std::pow(level, k) > mag) k -= 1.0;
  while (std::pow(level, k + 1.0) <= mag) k += 1.0;
  return std::copysign(std::pow(level, k), xi);
}

Vector log_quantize(const Vector& value, double level) {
  Vector out(value.size());
  for (Eigen::Index i = 0; i < value.size(); ++i) out(i) = log_quantize(value(i), level);
  return out;
}

Measurement measure(const ErrorModel& m, const Vector& value, const CounterRng& rng,
                    std::uint64_t k) {
  return std::visit(
      Overloaded{
          [&](const NoError&) { return Measurement{value, Vector::Zero(value.size())}; },
          [&](const MultiplicativeError& e) {
            return apply_multiplicative_error(value, e.omega, rng, k, e.adversarial);
          },
          [&](const AdditiveError& e) { return apply_additive_error(value, e.delta_e, rng, k); },
          [&](const LogQuantizer& q) {
            Vector qv = log_quantize(value, q.level);
            Vector e = value - qv;
            return Measurement{std::move(qv), std::move(e)};
          },
          [&](const EventTrigger&) { return Measurement{value, Vector::Zero(value.size())}; },
      },
      m);
}

bool event_trigger_check(const Vector& current, const Vector& held, double omega) {
  return (current - held).squaredNorm() >= omega * held.squaredNorm();
}

bool event_trigger_fires(const EventTrigger& t, const Vector& current, const Vector& held) {
  const double gap = (current - held).norm();
  const double root = std::sqrt(t.omega);
  switch (t.form) {
    case TriggerForm::quadratic:
      return event_trigger_check(current, held, t.omega);
    case TriggerForm::norm_relative:
      return gap >= root / (1.0 + root) * current.norm();
    case TriggerForm::capped:
      return gap > std::min(root * held.norm(), t.cap.value_or(INFINITY));
  }
  return false;
}

SaturationResult saturation_scale(const Vector& value, double rho_s) {
  if (!(rho_s > 0.0)) throw ParameterError("saturation: rho_s must be > 0");
  SaturationResult r;
  const double peak = value.size() ? value.cwiseAbs().maxCoeff() : 0.0;
  if (peak > 0.0) {
    double c = std::ceil(peak / rho_s);
    if (peak / c > rho_s) c += 1.0;  // division rounded below an integer ratio
    r.rho = 1.0 / c;
  }
  r.scaled = r.rho * value;
  return r;
}

}  // namespace async_lab
