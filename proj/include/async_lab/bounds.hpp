#pragma once

// Stability margins of the asynchronous sampled-data coupling and the search
// for certified sampling/delay budgets.
//
// Every budget search maximises a margin over free positive parameters
// (α, β and, for the broadcast error bound, γ and η) and then locates the
// largest lag s = h + τ (+ τ_in) at which the maximised margin stays positive.

#include <map>
#include <optional>
#include <span>
#include <string>

#include "async_lab/design.hpp"
#include "async_lab/graphs.hpp"
#include "async_lab/matan.hpp"

namespace async_lab {

struct BoundQuery {
  double mu = 1.0;       ///< decay weight on ẑᵀẑ in dV/dt
  double eps = 1.0;      ///< weight of the sampling error (z - ẑ)ᵀ(z - ẑ)
  double omega = 0.0;    ///< multiplicative measurement-error ratio
  double lambda_As = 0.0;
  double sigma_A = 0.0;
  double sigma_G = 0.0;
  double sigma_K = 0.0;
  double h = 0.0;        ///< max sampling period
  double tau = 0.0;      ///< max sampling delay
  double tau_in = 0.0;   ///< input delay

  /// Throws ParameterError on non-finite fields, mu/eps <= 0 or negative
  /// omega/h/tau/tau_in.
  void validate() const;
};

struct SearchParams {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;
  double eta = 1.0;
  double theta = 1.0 + 1e-9;

  void validate() const;
};

struct BoundReport {
  bool feasible = false;
  bool unbounded = false;   ///< margin positive for every lag up to kUnboundedLag
  double margin = 0.0;      ///< maximised margin at the witness and budget
  double budget = 0.0;
  SearchParams witness;
  std::string diagnostics;
  std::map<std::string, double> details;
};

/// Lags beyond this are reported as unbounded rather than searched.
inline constexpr double kUnboundedLag = 1e3;

/// μ - εω(1+1/α)(1+1/β)e^{2λs} - ε((1+α)(1+1/β)σ_A² + (1+β)(7/3)σ_G²σ_K²) s² e^{2λs}
/// evaluated at an explicit lag s.
double lag_margin(const BoundQuery& q, double lag, double alpha, double beta);

/// The margin at s = h + τ.
double theorem1_margin(const BoundQuery& q, const SearchParams& p);

struct InnerOptimum {
  double margin = 0.0;
  double alpha = 1.0;
  double beta = 1.0;
};

/// max over (α, β) of lag_margin: 20x20 log grid over [1e-3, 1e3], then
/// coordinate-wise golden section in log10 space over [1e-9, 1e9] to 1e-6.
InnerOptimum maximize_lag_margin(const BoundQuery& q, double lag);

/// Largest s = h + τ with a positive maximised margin (h, τ and τ_in of the
/// query are ignored).
BoundReport theorem1_budget(const BoundQuery& q);

/// sup over γ > 0 with a - b/γ > 0 and cγ + d > 0 of (a - b/γ) / (cγ + d),
/// for a > 0 and b, c ≥ 0.
struct RatioSup {
  enum class Kind { finite, unbounded, empty };
  Kind kind = Kind::empty;
  double value = 0.0;
  double gamma = 0.0;  ///< maximiser (infinity when the sup is approached as γ → ∞)
};
RatioSup sup_ratio(double a, double b, double c, double d);

/// Relative-state sampling budget for agents (A, B) with gain from `design`.
/// Throws PreconditionError for a disconnected graph or a design failing the
/// Lyapunov family.
BoundReport theorem2_budget(const LtiModel& model, const GainDesign& design,
                            const GraphAlgebra& algebra, double omega);

/// The lag query behind the relative-state budget: μ is the supremum over γ of
/// the decay/error-weight ratio, ε = 1, σ_G = λ_n and σ_K = σ_BK. Throws
/// PreconditionError when that supremum is not finite.
BoundQuery relative_state_query(const LtiModel& model, const GainDesign& design,
                                const GraphAlgebra& algebra, double omega);

/// Broadcast budget for single integrators with K = 1. Throws
/// PreconditionError for a disconnected graph.
BoundReport theorem3_budget(const GraphAlgebra& algebra);

/// 2/λ_n: exact synchronous periodic sampling limit for single integrators,
/// reported only as a comparison constant.
double synchronous_period_limit(const GraphAlgebra& algebra);

/// Logarithmic quantiser with level q > 1 enters as ω = (q - 1)².
double quantizer_omega(double quant_level);
BoundReport corollary1_budget(const BoundQuery& q, double quant_level);
BoundReport corollary1_budget(const LtiModel& model, const GainDesign& design,
                              const GraphAlgebra& algebra, double quant_level);

/// Event-triggered sampling with dwell time: the budget is the dwell time h.
BoundReport corollary2_budget(const BoundQuery& q);

/// Saturated control with input delay: the general lag search over the total
/// lag h + τ + τ_in. `budget` is the remaining h + τ allowance given q.tau_in;
/// details["total_lag_budget"] is the total.
BoundReport theorem5_budget(const BoundQuery& q);

// ---------------------------------------------------------------------------
// Broadcast consensus error bound for marginally stable agents.

bool is_marginally_stable(const Matrix& a, double tol = 1e-9);

struct ExpNormMax {
  double norm2 = 1.0;     ///< max_s ‖e^{As}‖_2
  double norm_inf = 1.0;  ///< max_s ‖e^{As}‖_∞ (max row sum)
  double horizon = 0.0;   ///< sampled s ∈ [0, horizon]
  int samples = 0;
};

/// Sampled estimate of max_s ‖e^{As}‖ for marginally stable A: horizon is
/// 2π/ω_min over nonzero imaginary-axis frequencies, at least 10/|Re λ| for
/// the slowest decaying mode; 10^4 points.
ExpNormMax max_exp_norm(const Matrix& a, int samples = 10000);

struct BroadcastErrorInputs {
  double h = 0.0;
  double tau = 0.0;
  double delta_e = 0.0;  ///< bound on the stacked measurement error ‖e(t)‖_2
  Vector x0_sum;         ///< Σ_i x_i(0)
};

struct Theorem4Constants {
  int n = 0;
  double lambda_n = 0.0;
  double mu = 0.0;
  double lambda_P = 0.0;
  double sigma_PB = 0.0;
  double sigma_BBtP = 0.0;
  double sigma_A = 0.0;
  double lambda_As = 0.0;
  ExpNormMax exp_norm;
  double kron_norm = 0.0;     ///< ‖D Dᵀ ⊗ B K‖_2
  double delta_kappa = 0.0;   ///< Δ_κ(h)
  double delta = 0.0;         ///< Δ(h)
  double nu_min = 0.0;        ///< eigenvalue range of D Dᵀ ⊗ P B Bᵀ P
  double nu_max = 0.0;
};

Theorem4Constants theorem4_constants(const LtiModel& model, const GainDesign& design,
                                     const GraphAlgebra& algebra,
                                     const BroadcastErrorInputs& in);

struct Theorem4Terms {
  double sigma = 0.0;       ///< σ_max(D Dᵀ ⊗ P B Bᵀ P - 2(μ - λ_P/(2η)) I)
  double decay = 0.0;       ///< μ - λ_P/(2η) - σ/(2γ)
  double error_weight = 0.0;  ///< γσ/2 - μ + λ_P/(2η) + λ_n σ_PB²
  double delta_bar = 0.0;
  double gamma_big = 0.0;   ///< Γ
};
Theorem4Terms theorem4_terms(const Theorem4Constants& c, const BroadcastErrorInputs& in,
                             const SearchParams& p);

/// θ Δ̄ / Γ. Throws SetMembershipError naming each violated condition.
double theorem4_error_bound(const Theorem4Constants& c, const BroadcastErrorInputs& in,
                            const SearchParams& p);
double theorem4_error_bound(const LtiModel& model, const GainDesign& design,
                            const GraphAlgebra& algebra, const BroadcastErrorInputs& in,
                            const SearchParams& p);

/// Which of α, γ, η are held fixed during minimisation (β is always searched).
struct Theorem4Fixed {
  std::optional<double> alpha;
  std::optional<double> gamma;
  std::optional<double> eta;
};

/// Minimises the bound over the admissible set. Throws PreconditionError when
/// A is not marginally stable or the graph is disconnected.
BoundReport theorem4_optimize(const LtiModel& model, const GainDesign& design,
                              const GraphAlgebra& algebra, const BroadcastErrorInputs& in,
                              const Theorem4Fixed& fixed = {}, double theta = 1.0 + 1e-9);

/// Infimum over the admissible members of a supplied grid (+inf if none).
double theorem4_grid_inf(const Theorem4Constants& c, const BroadcastErrorInputs& in,
                         std::span<const SearchParams> grid);

}  // namespace async_lab
