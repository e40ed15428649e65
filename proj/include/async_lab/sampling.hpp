#pragma once

// Asynchronous sampling schedules and the measurement distortions applied to
// sampled values: multiplicative and additive errors, logarithmic
// quantisation, event triggering and saturation scaling.

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "async_lab/matan.hpp"

namespace async_lab {

/// Stateless counter-based generator: every draw is a pure function of
/// (seed, stream, k, j), so channels stay independent and runs reproducible
/// whatever order events are processed in.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

  std::uint64_t bits(std::uint64_t k, std::uint64_t j = 0) const;
  /// Uniform on [0, 1).
  double uniform(std::uint64_t k, std::uint64_t j = 0) const;
  double uniform(double lo, double hi, std::uint64_t k, std::uint64_t j = 0) const;
  /// Standard normal (Box-Muller on two sub-draws).
  double normal(std::uint64_t k, std::uint64_t j = 0) const;
  /// Uniform direction on the unit sphere in R^dim.
  Vector unit_vector(int dim, std::uint64_t k) const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
};

/// Stream tags so that gaps, delays and errors of one channel never share draws.
enum class RngPurpose : std::uint64_t { gap = 0, delay = 1, error = 2, start = 3 };
std::uint64_t rng_stream(int channel_id, RngPurpose purpose);

struct ChannelSchedule {
  int channel_id = 0;
  std::vector<double> sample_instants;  ///< strictly increasing
  std::vector<double> delays;           ///< one per instant, >= 0

  double delivery(std::size_t k) const { return sample_instants[k] + delays[k]; }
};

struct ScheduleParams {
  double h_min = 0.0;
  double h_max = 0.0;
  double tau_max = 0.0;
  double horizon = 0.0;

  /// Throws ParameterError unless 0 < h_min <= h_max, 0 <= tau_max <= h_min
  /// and horizon >= 0.
  void validate() const;
};

/// First instant uniform in [0, h_max), gaps uniform in [h_min, h_max], delay
/// k uniform in [0, min(tau_max, gap_k (1 - 1e-9))]. Instants are generated
/// until they pass the horizon.
ChannelSchedule generate_schedule(const ScheduleParams& p, std::uint64_t seed, int channel_id);

/// Independent check of: gaps (and the first instant) <= h, delay < next gap,
/// delay <= tau, deliveries strictly increasing. Returns the first violation,
/// or nullopt.
std::optional<std::string> schedule_violation(const ChannelSchedule& s, double h, double tau);
/// Throws ScheduleError carrying the violation.
void validate_schedule(const ChannelSchedule& s, double h, double tau);

// ---------------------------------------------------------------------------
// Error models

struct NoError {};

/// ‖e‖ ≤ √ω/(1+√ω)‖value‖, which implies eᵀe ≤ ω ẑᵀẑ for ẑ = value - e.
struct MultiplicativeError {
  double omega = 0.0;
  bool adversarial = false;  ///< error aligned with the value at full size
};

struct AdditiveError {
  double delta_e = 0.0;
};

struct LogQuantizer {
  double level = 1.1;
};

enum class TriggerForm { quadratic, norm_relative, capped };

struct EventTrigger {
  double omega = 0.0;
  double dwell = 0.0;
  std::optional<double> cap;
  TriggerForm form = TriggerForm::quadratic;
};

using ErrorModel =
    std::variant<NoError, MultiplicativeError, AdditiveError, LogQuantizer, EventTrigger>;

/// Throws ParameterError on omega < 0, level <= 1, dwell <= 0, cap <= 0, ...
void validate_error_model(const ErrorModel& m);
std::string error_model_kind(const ErrorModel& m);

struct Measurement {
  Vector measured;
  Vector error;  ///< value - measured
};

Measurement apply_multiplicative_error(const Vector& value, double omega, const CounterRng& rng,
                                       std::uint64_t k, bool adversarial = false);
Measurement apply_additive_error(const Vector& value, double delta_e, const CounterRng& rng,
                                 std::uint64_t k);

/// Entrywise sign(ξ) q^{⌊log_q |ξ|⌋}, with Q(0) = 0.
double log_quantize(double xi, double level);
Vector log_quantize(const Vector& value, double level);

/// Measurement under any non-trigger model (an event trigger measures exactly).
Measurement measure(const ErrorModel& m, const Vector& value, const CounterRng& rng,
                    std::uint64_t k);

/// (current - held)ᵀ(current - held) ≥ ω heldᵀheld.
bool event_trigger_check(const Vector& current, const Vector& held, double omega);
/// The configured trigger form:
///   quadratic      ‖c - h‖² ≥ ω‖h‖²
///   norm_relative  ‖c - h‖ ≥ √ω/(1+√ω) ‖c‖
///   capped         ‖c - h‖ > min(√ω ‖h‖, cap)
bool event_trigger_fires(const EventTrigger& t, const Vector& current, const Vector& held);

struct SaturationResult {
  double rho = 1.0;
  Vector scaled;
};
/// ρ = 1 for a zero value, else 1/⌈‖value‖_∞/ρ_s⌉.
SaturationResult saturation_scale(const Vector& value, double rho_s);

}  // namespace async_lab
