#include "async_lab/bounds.hpp"

#include <cmath>
#include <optional>
#include <limits>
#include <sstream>
#include <string>

#include "async_lab/errors.hpp"
#include "search.hpp"

namespace async_lab {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSevenThirds = 7.0 / 3.0;

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

detail::Optimum2 maximize_log(const BoundQuery& q, double lag,
                              std::optional<detail::Optimum2> seed) {
  auto f = [&](double la, double lb) {
    return lag_margin(q, lag, std::pow(10.0, la), std::pow(10.0, lb));
  };
  return detail::maximize_log_grid_then_descent(f, seed);
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

BoundReport infeasible(std::string why) {
  BoundReport r;
  r.feasible = false;
  r.diagnostics = std::move(why);
  return r;
}

// Largest lag with positive maximised margin.
BoundReport search_budget(const BoundQuery& q) {
  q.validate();
  if (q.eps * q.omega >= q.mu) {
    return infeasible("eps*omega = " + format_double(q.eps * q.omega) + " >= mu = " +
                      format_double(q.mu) + ": the margin cannot be made positive");
  }
  auto g = [&](double s) { return maximize_lag_margin(q, s); };

  double lo = 0.0;
  double hi = 0.0;
  InnerOptimum lo_opt = g(0.0);
  if (!(lo_opt.margin > 0.0)) {
    return infeasible("maximised margin is not positive at zero lag");
  }

  if (q.lambda_As >= 0.0) {
    // Each term is non-decreasing in s, so the maximised margin is monotone.
    if (g(kUnboundedLag).margin > 0.0) {
      BoundReport r;
      r.feasible = true;
      r.unbounded = true;
      r.budget = kInf;
      const InnerOptimum at_cap = g(kUnboundedLag);
      r.margin = at_cap.margin;
      r.witness.alpha = at_cap.alpha;
      r.witness.beta = at_cap.beta;
      r.diagnostics = "unbounded: margin stays positive for every lag up to " +
                      format_double(kUnboundedLag);
      return r;
    }
    hi = 1e-6;
    while (g(hi).margin > 0.0) {
      lo = hi;
      hi *= 2.0;
    }
    hi = std::min(hi, kUnboundedLag);
  } else {
    // e^{2λs} decays for λ < 0 and the margin may recover at large s: find
    // the first sign change on a geometric scan with ratio 1 + 1e-4.
    constexpr double kRatio = 1.0 + 1e-4;
    double prev = 0.0;
    bool found = false;
    std::optional<detail::Optimum2> seed;
    for (double s = 1e-9; s <= kUnboundedLag; s *= kRatio) {
      seed = maximize_log(q, s, seed);
      if (!(seed->value > 0.0)) {
        lo = prev;
        hi = s;
        found = true;
        break;
      }
      prev = s;
    }
    if (!found) {
      BoundReport r;
      r.feasible = true;
      r.unbounded = true;
      r.budget = kInf;
      r.margin = g(kUnboundedLag).margin;
      r.diagnostics = "unbounded: no sign change of the margin for lags up to " +
                      format_double(kUnboundedLag);
      return r;
    }
  }

  for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (g(mid).margin > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  lo_opt = g(lo);
  BoundReport r;
  r.feasible = true;
  r.budget = lo;
  r.margin = lo_opt.margin;
  r.witness.alpha = lo_opt.alpha;
  r.witness.beta = lo_opt.beta;
  r.details["first_nonpositive_lag"] = hi;
  r.diagnostics = "certified lag budget " + format_double(lo);
  return r;
}

}  // namespace

void BoundQuery::validate() const {
  for (double v : {mu, eps, omega, lambda_As, sigma_A, sigma_G, sigma_K, h, tau, tau_in}) {
    if (!std::isfinite(v)) throw ParameterError("BoundQuery: non-finite field");
  }
  if (!(mu > 0.0) || !(eps > 0.0)) throw ParameterError("BoundQuery: mu and eps must be > 0");
  if (!finite_nonneg(omega) || !finite_nonneg(h) || !finite_nonneg(tau) ||
      !finite_nonneg(tau_in) || sigma_A < 0.0 || sigma_G < 0.0 || sigma_K < 0.0) {
    throw ParameterError("BoundQuery: omega, h, tau, tau_in and singular values must be >= 0");
  }
}

void SearchParams::validate() const {
  if (!(alpha > 0.0) || !(beta > 0.0) || !(gamma > 0.0) || !(eta > 0.0)) {
    throw ParameterError("SearchParams: alpha, beta, gamma, eta must be > 0");
  }
  if (!(theta > 1.0)) throw ParameterError("SearchParams: theta must be > 1");
}

double lag_margin(const BoundQuery& q, double lag, double alpha, double beta) {
  const double growth = std::exp(2.0 * q.lambda_As * lag);
  const double coupling = q.sigma_G * q.sigma_K;
  const double error_term = q.eps * q.omega * (1.0 + 1.0 / alpha) * (1.0 + 1.0 / beta) * growth;
  const double drift_term =
      q.eps *
      ((1.0 + alpha) * (1.0 + 1.0 / beta) * q.sigma_A * q.sigma_A +
       (1.0 + beta) * kSevenThirds * coupling * coupling) *
      lag * lag * growth;
  return q.mu - error_term - drift_term;
}

double theorem1_margin(const BoundQuery& q, const SearchParams& p) {
  return lag_margin(q, q.h + q.tau, p.alpha, p.beta);
}

InnerOptimum maximize_lag_margin(const BoundQuery& q, double lag) {
  const detail::Optimum2 best = maximize_log(q, lag, std::nullopt);
  return {best.value, std::pow(10.0, best.x), std::pow(10.0, best.y)};
}

BoundReport theorem1_budget(const BoundQuery& q) { return search_budget(q); }

RatioSup sup_ratio(double a, double b, double c, double d) {
  RatioSup out;
  if (!(a > 0.0) || b < 0.0 || c < 0.0) return out;  // empty
  if (c == 0.0) {
    if (d <= 0.0) {
      out.kind = RatioSup::Kind::unbounded;
      return out;
    }
    out.kind = RatioSup::Kind::finite;
    out.value = a / d;
    out.gamma = kInf;
    return out;
  }
  const double gamma_num = b / a;   // numerator positive for γ above this
  const double gamma_den = -d / c;  // denominator positive for γ above this
  if (gamma_den > gamma_num || (b == 0.0 && d <= 0.0)) {
    out.kind = RatioSup::Kind::unbounded;
    return out;
  }
  if (b == 0.0) {
    // a / (cγ + d) with d > 0: decreasing, sup as γ → 0+.
    out.kind = RatioSup::Kind::finite;
    out.value = a / d;
    out.gamma = 0.0;
    return out;
  }
  // Stationarity of (aγ - b) / (γ(cγ + d)): acγ² - 2bcγ - bd = 0.
  const double disc = b * c * (b * c + a * d);
  const double gamma = (b * c + std::sqrt(std::max(disc, 0.0))) / (a * c);
  out.kind = RatioSup::Kind::finite;
  out.gamma = gamma;
  out.value = (a - b / gamma) / (c * gamma + d);
  return out;
}

namespace {

// Relative-state constants, the γ supremum and, when finite, the lag query.
struct RelativeSetup {
  BoundReport base;
  RatioSup sup;
  BoundQuery query;
};

RelativeSetup relative_setup(const LtiModel& model, const GainDesign& design,
                             const GraphAlgebra& algebra, double omega) {
  model.validate();
  const double lambda2 = algebraic_connectivity(algebra);
  if (!(lambda2 > 1e-9)) {
    throw PreconditionError("relative-state budget: interaction graph is not connected");
  }
  if (!verify_lyapunov_family(design, model, algebra)) {
    throw PreconditionError(
        "relative-state budget: gain does not satisfy the Lyapunov inequalities on "
        "lambda_2..lambda_n");
  }
  const double lambda_n = largest_laplacian_eigenvalue(algebra);
  const DesignConstants dc = design_constants(design, model, algebra);
  const SpectralConstants sc = spectral_constants(model.A);

  RelativeSetup out;
  out.sup = sup_ratio(design.mu, dc.sigma_edge / 2.0, dc.sigma_edge / 2.0,
                      lambda_n * dc.lambda_PBKs - design.mu);
  BoundReport& r = out.base;
  r.details["sigma"] = dc.sigma_edge;
  r.details["lambda_PBKs"] = dc.lambda_PBKs;
  r.details["sigma_BK"] = dc.sigma_BK;
  r.details["lambda_2"] = lambda2;
  r.details["lambda_n"] = lambda_n;
  r.details["omega"] = omega;
  if (out.sup.kind == RatioSup::Kind::finite) {
    r.details["sup_ratio"] = out.sup.value;
    r.details["gamma_star"] = out.sup.gamma;
  }
  out.query.mu = out.sup.value;
  out.query.eps = 1.0;
  out.query.omega = omega;
  out.query.lambda_As = sc.lambda_As;
  out.query.sigma_A = sc.sigma_A;
  out.query.sigma_G = lambda_n;
  out.query.sigma_K = dc.sigma_BK;
  return out;
}

}  // namespace

BoundReport theorem2_budget(const LtiModel& model, const GainDesign& design,
                            const GraphAlgebra& algebra, double omega) {
  RelativeSetup setup = relative_setup(model, design, algebra, omega);
  BoundReport& r = setup.base;
  if (setup.sup.kind == RatioSup::Kind::empty) {
    r.diagnostics = "admissible gamma set is empty";
    return r;
  }
  if (setup.sup.kind == RatioSup::Kind::unbounded) {
    r.feasible = true;
    r.unbounded = true;
    r.budget = kInf;
    r.diagnostics =
        "a gamma with positive decay and non-positive error weight exists: consensus holds "
        "for any sampling period";
    return r;
  }
  BoundReport inner = search_budget(setup.query);
  inner.witness.gamma = setup.sup.gamma;
  inner.details.insert(r.details.begin(), r.details.end());
  return inner;
}

BoundQuery relative_state_query(const LtiModel& model, const GainDesign& design,
                                const GraphAlgebra& algebra, double omega) {
  const RelativeSetup setup = relative_setup(model, design, algebra, omega);
  if (setup.sup.kind != RatioSup::Kind::finite) {
    throw PreconditionError("relative-state ratio supremum is not finite");
  }
  return setup.query;
}

BoundReport theorem3_budget(const GraphAlgebra& algebra) {
  const double lambda2 = algebraic_connectivity(algebra);
  if (!(lambda2 > 1e-9)) {
    throw PreconditionError("theorem3_budget: interaction graph is not connected");
  }
  const double lambda_n = largest_laplacian_eigenvalue(algebra);
  const double sigma = std::max(2.0 * lambda2, lambda_n - 2.0 * lambda2);
  const RatioSup sup = sup_ratio(lambda2, sigma / 2.0, sigma / 2.0, lambda_n - lambda2);
  BoundReport r;
  r.details["lambda_2"] = lambda2;
  r.details["lambda_n"] = lambda_n;
  r.details["sigma"] = sigma;
  r.details["synchronous_limit"] = synchronous_period_limit(algebra);
  if (sup.kind != RatioSup::Kind::finite) {
    r.diagnostics = "unexpected: gamma supremum is not finite";
    return r;
  }
  r.details["gamma_star"] = sup.gamma;
  r.details["objective"] = sup.value;
  r.feasible = true;
  r.budget = std::sqrt(3.0 / (7.0 * lambda_n * lambda_n) * sup.value);
  r.margin = sup.value;
  r.witness.gamma = sup.gamma;
  r.diagnostics = "h + tau < " + format_double(r.budget);
  return r;
}

double synchronous_period_limit(const GraphAlgebra& algebra) {
  return 2.0 / largest_laplacian_eigenvalue(algebra);
}

double quantizer_omega(double quant_level) {
  if (!(quant_level > 1.0) || !std::isfinite(quant_level)) {
    throw ParameterError("quantizer level must be > 1");
  }
  return (quant_level - 1.0) * (quant_level - 1.0);
}

BoundReport corollary1_budget(const BoundQuery& q, double quant_level) {
  BoundQuery qq = q;
  qq.omega = quantizer_omega(quant_level);
  BoundReport r = theorem1_budget(qq);
  r.details["omega"] = qq.omega;
  return r;
}

BoundReport corollary1_budget(const LtiModel& model, const GainDesign& design,
                              const GraphAlgebra& algebra, double quant_level) {
  return theorem2_budget(model, design, algebra, quantizer_omega(quant_level));
}

BoundReport corollary2_budget(const BoundQuery& q) {
  BoundQuery qq = q;
  qq.tau = 0.0;
  qq.tau_in = 0.0;
  BoundReport r = theorem1_budget(qq);
  if (r.feasible && !r.unbounded) r.diagnostics = "dwell time h < " + format_double(r.budget);
  return r;
}

BoundReport theorem5_budget(const BoundQuery& q) {
  BoundReport r = theorem1_budget(q);
  if (!r.feasible) return r;
  r.details["total_lag_budget"] = r.budget;
  r.details["tau_in"] = q.tau_in;
  if (r.unbounded) return r;
  if (q.tau_in >= r.budget) {
    r.feasible = false;
    r.diagnostics = "input delay " + format_double(q.tau_in) +
                    " consumes the whole certified lag " + format_double(r.budget);
    r.budget = 0.0;
    return r;
  }
  r.budget -= q.tau_in;
  r.diagnostics = "h + tau < " + format_double(r.budget) + " (total lag with input delay < " +
                  format_double(r.details["total_lag_budget"]) + ")";
  return r;
}

}  // namespace async_lab
