#pragma once

// Dense real matrix analysis: exponentials, spectral constants and the
// closed-form singular value bounds for e^{At}, e^{At}-I and its integral.

#include <Eigen/Dense>

namespace async_lab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Spectral constants of a square matrix A.
struct SpectralConstants {
  double lambda_As = 0.0;  ///< largest eigenvalue of (A + A^T) / 2
  double sigma_A = 0.0;    ///< largest singular value of A
};

/// Throws DimensionError unless `m` is square (and non-empty).
void require_square(const Matrix& m, const char* what);
/// Throws RangeError if any entry is NaN or infinite.
void require_finite(const Matrix& m, const char* what);

double symmetric_part_max_eig(const Matrix& m);
double symmetric_part_min_eig(const Matrix& m);
double max_singular_value(const Matrix& m);
SpectralConstants spectral_constants(const Matrix& a);

/// e^{M t} by scaling and squaring with a diagonal Padé approximant.
///
/// Order selection follows Higham (2005): the 1-norm of M t is compared with
/// θ_3 = 1.50e-2, θ_5 = 2.54e-1, θ_7 = 9.50e-1, θ_9 = 2.10 and the lowest
/// sufficient order is used; above θ_13 = 5.37 the argument is scaled by
/// 2^{-s} and a [13/13] approximant is squared s times. Backward error is
/// bounded by the unit roundoff of double.
Matrix expm(const Matrix& m, double t = 1.0);

/// Φ(t) = ∫_0^t e^{M s} ds, from the top-right block of exp([[M, I], [0, 0]] t).
Matrix expm_integral(const Matrix& m, double t);

/// Exact zero-order-hold transition over `dt`: x(dt) = ad x(0) + bd u for
/// ẋ = A x + B u with constant u.
struct ZohStep {
  Matrix ad;
  Matrix bd;
};
ZohStep zoh_step(const Matrix& a, const Matrix& b, double dt);

struct Lemma1Bounds {
  double bound_exp = 0.0;            ///< bounds σ_max(e^{At})
  double bound_exp_minus_I = 0.0;    ///< bounds σ_max(e^{At} - I)
  double bound_integral = 0.0;       ///< bounds σ_max(∫_0^t e^{As} ds)
};

/// λ_As below this magnitude is treated as zero and the limit forms are used.
inline constexpr double kZeroLambdaTol = 1e-10;

/// (e^{λ t} - 1) / λ with its λ → 0 limit t.
double exp_ratio(double lambda, double t);

Lemma1Bounds lemma1_bounds(const SpectralConstants& c, double t);

/// The scalar expressions bounding e^{2t}-4e^t+3+2t ≤ (2t³/3)e^{2t} and
/// t ≤ e^t - 1 ≤ t e^t.
struct Lemma2Values {
  double lhs1 = 0.0;
  double rhs1 = 0.0;
  double lhs2a = 0.0;  ///< t
  double lhs2b = 0.0;  ///< e^t - 1
  double rhs2b = 0.0;  ///< t e^t
};
Lemma2Values lemma2_check(double t);

/// Solves A^T X + X A = -Q for symmetric Q (dense Kronecker formulation,
/// small N only). The result is symmetrised.
Matrix solve_lyapunov(const Matrix& a, const Matrix& q);

}  // namespace async_lab
