#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "async_lab/bounds.hpp"
#include "async_lab/errors.hpp"
#include "search.hpp"

namespace async_lab {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Smallest nonzero imaginary-axis frequency and slowest decay rate.
struct ModeScales {
  double min_frequency = kInf;
  double slowest_decay = kInf;
};

ModeScales mode_scales(const Matrix& a, double tol) {
  Eigen::EigenSolver<Matrix> es(a, false);
  ModeScales m;
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
    const std::complex<double> s = es.eigenvalues()(k);
    if (std::abs(s.real()) <= tol) {
      if (std::abs(s.imag()) > tol) m.min_frequency = std::min(m.min_frequency, std::abs(s.imag()));
    } else {
      m.slowest_decay = std::min(m.slowest_decay, std::abs(s.real()));
    }
  }
  return m;
}

std::vector<std::string> membership_failures(const SearchParams& p, const Theorem4Terms& t) {
  std::vector<std::string> out;
  if (!(p.alpha > 0.0 && p.beta > 0.0 && p.gamma > 0.0 && p.eta > 0.0)) {
    out.push_back("alpha, beta, gamma, eta must all be positive");
  }
  if (!(t.decay > 0.0)) out.push_back("mu - lambda_P/(2 eta) - sigma/(2 gamma) > 0 fails");
  if (!(t.error_weight >= 0.0)) {
    out.push_back("gamma sigma/2 - mu + lambda_P/(2 eta) + lambda_n sigma_PB^2 >= 0 fails");
  }
  if (!(t.gamma_big > 0.0)) out.push_back("Gamma > 0 fails");
  return out;
}

// θΔ̄/Γ or +inf outside the admissible set.
double bound_or_inf(const Theorem4Constants& c, const BroadcastErrorInputs& in,
                    const SearchParams& p) {
  if (!(p.alpha > 0.0 && p.beta > 0.0 && p.gamma > 0.0 && p.eta > 0.0)) return kInf;
  const Theorem4Terms t = theorem4_terms(c, in, p);
  if (!(t.decay > 0.0) || !(t.error_weight >= 0.0) || !(t.gamma_big > 0.0)) return kInf;
  return p.theta * t.delta_bar / t.gamma_big;
}

// Minimises f over log10 x ∈ [kLogLo, kLogHi]: a coarse scan picks the best
// admissible bracket, golden section refines it.
template <class F>
double line_minimize(F&& f, double current) {
  constexpr int kScan = 181;
  const double step = (detail::kLogHi - detail::kLogLo) / (kScan - 1);
  double best_x = current;
  double best_v = f(current);
  int best_i = -1;
  for (int i = 0; i < kScan; ++i) {
    const double x = detail::kLogLo + step * i;
    const double v = f(x);
    if (v < best_v) {
      best_v = v;
      best_x = x;
      best_i = i;
    }
  }
  if (best_i < 0 || !std::isfinite(best_v)) return best_x;
  const double lo = std::max(detail::kLogLo, best_x - step);
  const double hi = std::min(detail::kLogHi, best_x + step);
  double refined_v = 0.0;
  const double refined =
      detail::golden_max([&](double x) { return -f(x); }, lo, hi, 1e-7, &refined_v);
  return -refined_v < best_v ? refined : best_x;
}

}  // namespace

bool is_marginally_stable(const Matrix& a, double tol) {
  require_square(a, "is_marginally_stable");
  const Eigen::Index n = a.rows();
  if (n == 0) return true;
  Eigen::EigenSolver<Matrix> es(a, false);
  const Eigen::VectorXcd ev = es.eigenvalues();
  if (ev.real().maxCoeff() > tol) return false;
  const double scale = std::max(1.0, max_singular_value(a));
  constexpr double kCluster = 1e-6;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (std::abs(ev(k).real()) > tol) continue;
    int algebraic = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (std::abs(ev(j) - ev(k)) <= kCluster * scale) ++algebraic;
    }
    if (algebraic == 1) continue;
    const Eigen::MatrixXcd shifted =
        a.cast<std::complex<double>>() - ev(k) * Eigen::MatrixXcd::Identity(n, n);
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(shifted);
    int null_dim = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (svd.singularValues()(j) <= 1e-7 * scale) ++null_dim;
    }
    if (null_dim < algebraic) return false;
  }
  return true;
}

ExpNormMax max_exp_norm(const Matrix& a, int samples) {
  require_square(a, "max_exp_norm");
  if (samples < 2) throw ParameterError("max_exp_norm: at least two samples required");
  const ModeScales m = mode_scales(a, 1e-9);
  double horizon = 0.0;
  if (std::isfinite(m.min_frequency)) horizon = 2.0 * std::numbers::pi / m.min_frequency;
  if (std::isfinite(m.slowest_decay)) horizon = std::max(horizon, 10.0 / m.slowest_decay);
  if (horizon == 0.0) horizon = 1.0;

  ExpNormMax out;
  out.horizon = horizon;
  out.samples = samples;
  // Each sample is evaluated directly; chaining step products drifts above 1
  // for rotations after a few thousand samples.
  for (int k = 0; k < samples; ++k) {
    const Matrix e = expm(a, horizon * k / (samples - 1));
    out.norm2 = std::max(out.norm2, max_singular_value(e));
    out.norm_inf = std::max(out.norm_inf, e.cwiseAbs().rowwise().sum().maxCoeff());
  }
  return out;
}

Theorem4Constants theorem4_constants(const LtiModel& model, const GainDesign& design,
                                     const GraphAlgebra& algebra,
                                     const BroadcastErrorInputs& in) {
  model.validate();
  const Eigen::Index dim = model.A.rows();
  if (design.P.rows() != dim || design.K.cols() != dim || design.K.rows() != model.B.cols()) {
    throw DimensionError("theorem4_constants: P, K incompatible with (A, B)");
  }
  if (in.x0_sum.size() != dim) {
    throw DimensionError("theorem4_constants: x0 sum has " + std::to_string(in.x0_sum.size()) +
                         " entries, agents have state dimension " + std::to_string(dim));
  }
  if (!(in.h >= 0.0) || !(in.tau >= 0.0) || !(in.delta_e >= 0.0)) {
    throw ParameterError("theorem4_constants: h, tau and delta_e must be >= 0");
  }
  Theorem4Constants c;
  c.n = static_cast<int>(algebra.graph_laplacian.rows());
  c.lambda_n = largest_laplacian_eigenvalue(algebra);
  c.mu = design.mu;
  const DesignConstants dc = design_constants(design, model, algebra);
  c.lambda_P = dc.lambda_P;
  c.sigma_PB = dc.sigma_PB;
  c.sigma_BBtP = dc.sigma_BBtP;
  const SpectralConstants sc = spectral_constants(model.A);
  c.sigma_A = sc.sigma_A;
  c.lambda_As = sc.lambda_As;
  c.exp_norm = max_exp_norm(model.A);
  c.kron_norm = max_singular_value(kron(algebra.graph_laplacian, model.B * design.K));
  c.delta_kappa = in.x0_sum.norm() / std::sqrt(static_cast<double>(c.n)) * c.exp_norm.norm2 *
                  c.sigma_A * exp_ratio(c.lambda_As, in.h);
  c.delta = c.kron_norm * (c.delta_kappa + in.delta_e);
  const Matrix pbbp = design.P * model.B * model.B.transpose() * design.P;
  Eigen::SelfAdjointEigenSolver<Matrix> es(kron(algebra.graph_laplacian, pbbp),
                                           Eigen::EigenvaluesOnly);
  c.nu_min = es.eigenvalues().minCoeff();
  c.nu_max = es.eigenvalues().maxCoeff();
  return c;
}

Theorem4Terms theorem4_terms(const Theorem4Constants& c, const BroadcastErrorInputs& in,
                             const SearchParams& p) {
  Theorem4Terms t;
  const double shifted_mu = c.mu - c.lambda_P / (2.0 * p.eta);
  t.sigma = std::max(std::abs(c.nu_max - 2.0 * shifted_mu), std::abs(c.nu_min - 2.0 * shifted_mu));
  t.decay = shifted_mu - t.sigma / (2.0 * p.gamma);
  t.error_weight = p.gamma * t.sigma / 2.0 - shifted_mu + c.lambda_n * c.sigma_PB * c.sigma_PB;
  const double lag = in.h + in.tau;
  const double d2 = c.delta * c.delta;
  t.delta_bar = t.error_weight * (1.0 + 1.0 / p.alpha) * c.exp_norm.norm_inf *
                    c.exp_norm.norm_inf * c.n * lag * lag * d2 +
                0.5 * c.lambda_P * p.eta * d2;
  const double drift = (1.0 + 1.0 / p.beta) * c.sigma_A * c.sigma_A +
                       (1.0 + p.beta) * (7.0 / 3.0) * c.lambda_n * c.lambda_n * c.sigma_BBtP *
                           c.sigma_BBtP;
  t.gamma_big = t.decay - t.error_weight * (1.0 + p.alpha) * drift * lag * lag *
                              std::exp(2.0 * c.lambda_As * lag);
  return t;
}

double theorem4_error_bound(const Theorem4Constants& c, const BroadcastErrorInputs& in,
                            const SearchParams& p) {
  if (!(p.theta > 1.0)) throw ParameterError("theorem4_error_bound: theta must be > 1");
  const Theorem4Terms t = theorem4_terms(c, in, p);
  const std::vector<std::string> failures = membership_failures(p, t);
  if (!failures.empty()) {
    std::string msg = "parameters outside the admissible set:";
    for (const auto& f : failures) msg += " [" + f + "]";
    throw SetMembershipError(msg);
  }
  return p.theta * t.delta_bar / t.gamma_big;
}

namespace {

void require_broadcast_preconditions(const LtiModel& model, const GraphAlgebra& algebra) {
  model.validate();
  if (!is_marginally_stable(model.A)) {
    throw PreconditionError("A is not marginally stable");
  }
  if (!(algebraic_connectivity(algebra) > 1e-9)) {
    throw PreconditionError("interaction graph is not connected");
  }
}

}  // namespace

double theorem4_error_bound(const LtiModel& model, const GainDesign& design,
                            const GraphAlgebra& algebra, const BroadcastErrorInputs& in,
                            const SearchParams& p) {
  require_broadcast_preconditions(model, algebra);
  return theorem4_error_bound(theorem4_constants(model, design, algebra, in), in, p);
}

double theorem4_grid_inf(const Theorem4Constants& c, const BroadcastErrorInputs& in,
                         std::span<const SearchParams> grid) {
  double best = kInf;
  for (const SearchParams& p : grid) best = std::min(best, bound_or_inf(c, in, p));
  return best;
}

BoundReport theorem4_optimize(const LtiModel& model, const GainDesign& design,
                              const GraphAlgebra& algebra, const BroadcastErrorInputs& in,
                              const Theorem4Fixed& fixed, double theta) {
  require_broadcast_preconditions(model, algebra);
  if (!(theta > 1.0)) throw ParameterError("theorem4_optimize: theta must be > 1");
  for (const auto& v : {fixed.alpha, fixed.gamma, fixed.eta}) {
    if (v && !(*v > 0.0)) throw ParameterError("theorem4_optimize: fixed parameters must be > 0");
  }
  const Theorem4Constants c = theorem4_constants(model, design, algebra, in);

  // Coordinates in log10; index 0..3 = alpha, beta, gamma, eta.
  std::array<double, 4> x{0.0, 0.0, 0.0, 0.0};
  std::array<bool, 4> free{!fixed.alpha, true, !fixed.gamma, !fixed.eta};
  if (fixed.alpha) x[0] = std::log10(*fixed.alpha);
  if (fixed.gamma) x[2] = std::log10(*fixed.gamma);
  if (fixed.eta) x[3] = std::log10(*fixed.eta);

  auto params = [&](const std::array<double, 4>& v) {
    SearchParams p;
    p.alpha = fixed.alpha ? *fixed.alpha : std::pow(10.0, v[0]);
    p.beta = std::pow(10.0, v[1]);
    p.gamma = fixed.gamma ? *fixed.gamma : std::pow(10.0, v[2]);
    p.eta = fixed.eta ? *fixed.eta : std::pow(10.0, v[3]);
    p.theta = theta;
    return p;
  };
  auto objective = [&](const std::array<double, 4>& v) { return bound_or_inf(c, in, params(v)); };

  // Coarse seed over the free coordinates in [1e-3, 1e3].
  {
    std::vector<int> idx;
    for (int k = 0; k < 4; ++k)
      if (free[k]) idx.push_back(k);
    constexpr int kSeed = 13;
    int total = 1;
    for (std::size_t k = 0; k < idx.size(); ++k) total *= kSeed;
    double best = objective(x);
    std::array<double, 4> best_x = x;
    for (int code = 0; code < total; ++code) {
      std::array<double, 4> v = x;
      int rest = code;
      for (int k : idx) {
        v[k] = -3.0 + 6.0 * (rest % kSeed) / (kSeed - 1);
        rest /= kSeed;
      }
      const double val = objective(v);
      if (val < best) {
        best = val;
        best_x = v;
      }
    }
    x = best_x;
  }

  double value = objective(x);
  for (int sweep = 0; sweep < 40; ++sweep) {
    const double before = value;
    for (int k = 0; k < 4; ++k) {
      if (!free[k]) continue;
      x[k] = line_minimize(
          [&](double t) {
            std::array<double, 4> v = x;
            v[k] = t;
            return objective(v);
          },
          x[k]);
      value = objective(x);
    }
    if (std::isfinite(before) && std::abs(before - value) <= 1e-12 * std::max(1.0, value)) break;
  }

  BoundReport r;
  r.witness = params(x);
  r.details["delta"] = c.delta;
  r.details["delta_kappa"] = c.delta_kappa;
  r.details["lambda_n"] = c.lambda_n;
  r.details["lambda_P"] = c.lambda_P;
  r.details["sigma_PB"] = c.sigma_PB;
  r.details["sigma_BBtP"] = c.sigma_BBtP;
  r.details["exp_norm_2"] = c.exp_norm.norm2;
  r.details["exp_norm_inf"] = c.exp_norm.norm_inf;
  r.details["exp_norm_horizon"] = c.exp_norm.horizon;
  if (!std::isfinite(value)) {
    r.feasible = false;
    r.diagnostics = "no admissible (alpha, beta, gamma, eta) found";
    return r;
  }
  const Theorem4Terms t = theorem4_terms(c, in, r.witness);
  r.feasible = true;
  r.budget = value;
  r.margin = t.gamma_big;
  r.details["sigma"] = t.sigma;
  r.details["decay"] = t.decay;
  r.details["error_weight"] = t.error_weight;
  r.details["delta_bar"] = t.delta_bar;
  r.details["gamma_big"] = t.gamma_big;
  std::ostringstream os;
  os.precision(10);
  os << "consensus error bound " << value << " at beta = " << r.witness.beta;
  r.diagnostics = os.str();
  return r;
}

}  // namespace async_lab
