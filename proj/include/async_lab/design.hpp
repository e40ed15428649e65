#pragma once

#include <span>

#include "async_lab/graphs.hpp"
#include "async_lab/matan.hpp"

namespace async_lab {

/// The agent pair (A, B) shared by every agent: ẋ_i = A x_i + B u_i.
struct LtiModel {
  Matrix A;
  Matrix B;

  int state_dim() const { return static_cast<int>(A.rows()); }
  int input_dim() const { return static_cast<int>(B.cols()); }
  /// Throws DimensionError on a non-square A or a B with mismatched rows.
  void validate() const;
};

struct GainDesign {
  Matrix P;            ///< symmetric positive definite
  Matrix K;            ///< B^T P
  double mu = 0.0;
  double lambda = 0.0;
  double residual = 0.0;  ///< ‖PA + A^T P - 2λ P B B^T P + 2μ I‖_F
};

/// PBH test: rank [A - sI, B] = N for every eigenvalue s with Re(s) >= 0.
bool is_stabilizable(const LtiModel& model, double tol = 1e-9);

/// Solves P A + A^T P - 2λ P B B^T P = -2μ I for the stabilising P and returns
/// K = B^T P. Throws DesignError (with residual diagnostics) on a
/// non-stabilisable pair or a failed solve.
GainDesign riccati_design(const LtiModel& model, double lambda, double mu);

/// Residual ‖PA + A^T P - 2λ P B B^T P + 2μ I‖_F of a candidate P.
double riccati_residual(const LtiModel& model, const Matrix& p, double lambda, double mu);

/// True iff (A - λ_i B K)^T P + P (A - λ_i B K) + 2μ I ⪯ 0 for every supplied
/// λ_i, tested as max eigenvalue ≤ tol.
bool verify_lyapunov_family(const GainDesign& design, const LtiModel& model,
                            std::span<const double> eigenvalues, double tol = 1e-9);
/// Same check over λ_2..λ_n of a graph.
bool verify_lyapunov_family(const GainDesign& design, const LtiModel& model,
                            const GraphAlgebra& algebra, double tol = 1e-9);

/// Constants of the relative-state and broadcast consensus bounds.
struct DesignConstants {
  double lambda_PBKs = 0.0;   ///< max eig of (PBK + K^T B^T P)/2
  double sigma_edge = 0.0;    ///< σ_max((D^T D ⊗ PBK) - 2μ I)
  double lambda_P = 0.0;      ///< max eig of P
  double sigma_PB = 0.0;
  double sigma_BBtP = 0.0;
  double sigma_BK = 0.0;
};

DesignConstants design_constants(const GainDesign& design, const LtiModel& model,
                                 const GraphAlgebra& algebra);

/// σ_max((D D^T ⊗ P B B^T P) - 2(μ - λ_P/(2η)) I), by a dense Kronecker
/// product and SVD.
double broadcast_sigma(const GainDesign& design, const LtiModel& model,
                       const GraphAlgebra& algebra, double eta);

/// Kronecker product a ⊗ b.
Matrix kron(const Matrix& a, const Matrix& b);

}  // namespace async_lab
