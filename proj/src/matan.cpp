#include "async_lab/matan.hpp"

#include <cmath>
#include <string>

#include "async_lab/errors.hpp"

namespace async_lab {

void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw DimensionError(std::string(what) + ": expected a non-empty square matrix, got " +
                         std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw RangeError(std::string(what) + ": non-finite entry");
}

double symmetric_part_max_eig(const Matrix& m) {
  require_square(m, "symmetric_part_max_eig");
  require_finite(m, "symmetric_part_max_eig");
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().maxCoeff();
}

double symmetric_part_min_eig(const Matrix& m) {
  require_square(m, "symmetric_part_min_eig");
  require_finite(m, "symmetric_part_min_eig");
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

double max_singular_value(const Matrix& m) {
  require_finite(m, "max_singular_value");
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

SpectralConstants spectral_constants(const Matrix& a) {
  return {symmetric_part_max_eig(a), max_singular_value(a)};
}

double exp_ratio(double lambda, double t) {
  if (std::abs(lambda) < kZeroLambdaTol) return t;
  return std::expm1(lambda * t) / lambda;
}

Lemma1Bounds lemma1_bounds(const SpectralConstants& c, double t) {
  if (!(t >= 0.0)) throw ParameterError("lemma1_bounds: t must be >= 0");
  const double ratio = exp_ratio(c.lambda_As, t);
  return {std::exp(c.lambda_As * t), c.sigma_A * ratio, ratio};
}

Lemma2Values lemma2_check(double t) {
  if (!(t >= 0.0)) throw ParameterError("lemma2_check: t must be >= 0");
  const double et = std::exp(t);
  const double e2t = et * et;
  Lemma2Values v;
  v.lhs1 = e2t - 4.0 * et + 3.0 + 2.0 * t;
  v.rhs1 = (2.0 * t * t * t / 3.0) * e2t;
  v.lhs2a = t;
  v.lhs2b = std::expm1(t);
  v.rhs2b = t * et;
  return v;
}

Matrix solve_lyapunov(const Matrix& a, const Matrix& q) {
  require_square(a, "solve_lyapunov");
  const Eigen::Index n = a.rows();
  if (q.rows() != n || q.cols() != n) {
    throw DimensionError("solve_lyapunov: Q must match A");
  }
  // vec(A^T X + X A) = (I ⊗ A^T + A^T ⊗ I) vec(X)
  const Eigen::Index nn = n * n;
  Matrix op = Matrix::Zero(nn, nn);
  const Matrix at = a.transpose();
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index row = j * n + i;  // entry (i, j) of the result
      for (Eigen::Index k = 0; k < n; ++k) {
        op(row, j * n + k) += at(i, k);  // (A^T X)_{ij} = sum_k A^T_{ik} X_{kj}
        op(row, k * n + i) += a(k, j);   // (X A)_{ij} = sum_k X_{ik} A_{kj}
      }
    }
  }
  const Vector rhs = -Eigen::Map<const Vector>(q.data(), nn);
  Eigen::FullPivLU<Matrix> lu(op);
  if (!lu.isInvertible()) {
    throw DesignError("solve_lyapunov: operator is singular (A and -A share an eigenvalue)");
  }
  const Vector x = lu.solve(rhs);
  Matrix result = Eigen::Map<const Matrix>(x.data(), n, n);
  return 0.5 * (result + result.transpose());
}

}  // namespace async_lab
