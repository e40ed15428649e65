#include "async_lab/design.hpp"

#include <cmath>
#include <complex>
#include <optional>
#include <sstream>
#include <string>

#include "async_lab/errors.hpp"

namespace async_lab {
namespace {

using ComplexMatrix = Eigen::MatrixXcd;

bool is_hurwitz(const Matrix& a) {
  Eigen::EigenSolver<Matrix> es(a, false);
  return es.eigenvalues().real().maxCoeff() < 0.0;
}

// Stable invariant subspace of the Hamiltonian from its eigenvectors.
std::optional<Matrix> hamiltonian_solution(const Matrix& a, const Matrix& r, const Matrix& q) {
  const Eigen::Index n = a.rows();
  Matrix h(2 * n, 2 * n);
  h << a, -r, -q, -a.transpose();
  Eigen::ComplexEigenSolver<ComplexMatrix> ces(h.cast<std::complex<double>>());
  if (ces.info() != Eigen::Success) return std::nullopt;

  ComplexMatrix basis(2 * n, n);
  Eigen::Index count = 0;
  for (Eigen::Index k = 0; k < 2 * n; ++k) {
    if (ces.eigenvalues()(k).real() < 0.0) {
      if (count == n) return std::nullopt;
      basis.col(count++) = ces.eigenvectors().col(k);
    }
  }
  if (count != n) return std::nullopt;

  const ComplexMatrix u1 = basis.topRows(n);
  const ComplexMatrix u2 = basis.bottomRows(n);
  Eigen::FullPivLU<ComplexMatrix> lu(u1);
  if (!lu.isInvertible()) return std::nullopt;
  const ComplexMatrix pc = u2 * lu.inverse();  // P = U2 U1^{-1}
  const double scale = std::max(1.0, pc.norm());
  if (pc.imag().norm() > 1e-6 * scale) return std::nullopt;
  Matrix real = pc.real();
  return Matrix(0.5 * (real + real.transpose()));
}

// Bass-style stabilising start for Newton: Z solves
// (A + βI) Z + Z (A + βI)^T = 2 B B^T with -(A + βI) Hurwitz.
std::optional<Matrix> bass_initial(const Matrix& a, const Matrix& b, double lambda) {
  const Eigen::Index n = a.rows();
  const double beta = max_singular_value(a) + 1.0;
  const Matrix f = -(a + beta * Matrix::Identity(n, n)).transpose();
  Matrix z;
  try {
    z = solve_lyapunov(f, 2.0 * b * b.transpose());
  } catch (const Error&) {
    return std::nullopt;
  }
  const Matrix zinv = z.completeOrthogonalDecomposition().pseudoInverse();
  Matrix p0 = zinv / (2.0 * lambda);
  p0 = 0.5 * (p0 + p0.transpose());
  if (!is_hurwitz(a - 2.0 * lambda * b * b.transpose() * p0)) return std::nullopt;
  return p0;
}

// Kleinman/Newton iteration with step halving on the residual.
Matrix newton_refine(const LtiModel& model, Matrix p, double lambda, double mu, int max_iter) {
  const Eigen::Index n = model.A.rows();
  const Matrix r = 2.0 * lambda * model.B * model.B.transpose();
  const Matrix q = 2.0 * mu * Matrix::Identity(n, n);
  double res = riccati_residual(model, p, lambda, mu);
  for (int it = 0; it < max_iter; ++it) {
    if (res <= 1e-14 * (1.0 + p.norm())) break;
    const Matrix closed = model.A - r * p;
    Matrix next;
    try {
      next = solve_lyapunov(closed, q + p * r * p);
    } catch (const Error&) {
      break;
    }
    double step = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 30; ++ls) {
      Matrix trial = p + step * (next - p);
      trial = 0.5 * (trial + trial.transpose());
      const double trial_res = riccati_residual(model, trial, lambda, mu);
      if (trial_res < res) {
        p = std::move(trial);
        res = trial_res;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
  }
  return p;
}

}  // namespace

void LtiModel::validate() const {
  require_square(A, "LtiModel.A");
  if (B.rows() != A.rows()) {
    throw DimensionError("LtiModel: B has " + std::to_string(B.rows()) +
                         " rows, A is " + std::to_string(A.rows()) + "x" +
                         std::to_string(A.cols()));
  }
  require_finite(A, "LtiModel.A");
  require_finite(B, "LtiModel.B");
}

bool is_stabilizable(const LtiModel& model, double tol) {
  model.validate();
  const Eigen::Index n = model.A.rows();
  Eigen::EigenSolver<Matrix> es(model.A, false);
  const double scale = std::max(1.0, max_singular_value(model.A) + max_singular_value(model.B));
  for (Eigen::Index k = 0; k < n; ++k) {
    const std::complex<double> s = es.eigenvalues()(k);
    if (s.real() < -tol) continue;
    ComplexMatrix pbh(n, n + model.B.cols());
    pbh.leftCols(n) = model.A.cast<std::complex<double>>() -
                      s * ComplexMatrix::Identity(n, n);
    pbh.rightCols(model.B.cols()) = model.B.cast<std::complex<double>>();
    Eigen::JacobiSVD<ComplexMatrix> svd(pbh);
    if (svd.singularValues()(n - 1) <= 1e-8 * scale) return false;
  }
  return true;
}

double riccati_residual(const LtiModel& model, const Matrix& p, double lambda, double mu) {
  const Eigen::Index n = model.A.rows();
  const Matrix res = p * model.A + model.A.transpose() * p -
                     2.0 * lambda * p * model.B * model.B.transpose() * p +
                     2.0 * mu * Matrix::Identity(n, n);
  return res.norm();
}

GainDesign riccati_design(const LtiModel& model, double lambda, double mu) {
  model.validate();
  if (!(lambda > 0.0) || !(mu > 0.0)) {
    throw ParameterError("riccati_design: lambda and mu must be positive");
  }
  const Eigen::Index n = model.A.rows();
  GainDesign out;
  out.lambda = lambda;
  out.mu = mu;

  if (model.B.cwiseAbs().maxCoeff() == 0.0) {
    const double las = symmetric_part_max_eig(model.A);
    if (!(las < 0.0)) {
      throw DesignError("riccati_design: B = 0 and lambda_As = " + std::to_string(las) +
                        " >= 0; the pair cannot be stabilised");
    }
    out.P = solve_lyapunov(model.A, 2.0 * mu * Matrix::Identity(n, n));
    out.K = Matrix::Zero(model.B.cols(), n);
    out.residual = riccati_residual(model, out.P, lambda, mu);
    return out;
  }
  if (!is_stabilizable(model)) {
    throw DesignError("riccati_design: (A, B) is not stabilisable");
  }

  const Matrix r = 2.0 * lambda * model.B * model.B.transpose();
  const Matrix q = 2.0 * mu * Matrix::Identity(n, n);

  std::optional<Matrix> start = hamiltonian_solution(model.A, r, q);
  std::string route = "hamiltonian";
  if (!start) {
    start = bass_initial(model.A, model.B, lambda);
    route = "newton";
  }
  if (!start) {
    throw DesignError("riccati_design: no stabilising initial solution found");
  }
  Matrix p = newton_refine(model, *start, lambda, mu, route == "newton" ? 200 : 8);
  p = 0.5 * (p + p.transpose());
  const double residual = riccati_residual(model, p, lambda, mu);
  const double min_eig = symmetric_part_min_eig(p);
  if (!(residual <= 1e-8 * (1.0 + p.norm())) || !(min_eig > 0.0)) {
    std::ostringstream os;
    os << "riccati_design: solve failed via " << route << " (residual " << residual
       << ", ‖P‖_F " << p.norm() << ", min eig(P) " << min_eig << ")";
    throw DesignError(os.str());
  }
  out.P = std::move(p);
  out.K = model.B.transpose() * out.P;
  out.residual = residual;
  return out;
}

bool verify_lyapunov_family(const GainDesign& design, const LtiModel& model,
                            std::span<const double> eigenvalues, double tol) {
  const Eigen::Index n = model.A.rows();
  for (double li : eigenvalues) {
    const Matrix closed = model.A - li * model.B * design.K;
    const Matrix pc = design.P * closed;
    const Matrix lyap = pc.transpose() + pc + 2.0 * design.mu * Matrix::Identity(n, n);
    // With rank-deficient B the matrix is singular by construction, so rounding
    // scales with the size of the products rather than with 1.
    const double scale = 1.0 + design.P.norm() * (model.A.norm() + li * (model.B * design.K).norm());
    if (symmetric_part_max_eig(lyap) > tol * scale) return false;
  }
  return true;
}

bool verify_lyapunov_family(const GainDesign& design, const LtiModel& model,
                            const GraphAlgebra& algebra, double tol) {
  std::vector<double> nonzero(algebra.spectrum.data() + std::min<Eigen::Index>(1, algebra.spectrum.size()),
                              algebra.spectrum.data() + algebra.spectrum.size());
  return verify_lyapunov_family(design, model, nonzero, tol);
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

DesignConstants design_constants(const GainDesign& design, const LtiModel& model,
                                 const GraphAlgebra& algebra) {
  const Eigen::Index n = model.A.rows();
  if (design.P.rows() != n || design.K.cols() != n || design.K.rows() != model.B.cols()) {
    throw DimensionError("design_constants: P, K incompatible with (A, B)");
  }
  DesignConstants c;
  const Matrix pbk = design.P * model.B * design.K;
  c.lambda_PBKs = symmetric_part_max_eig(pbk);
  const Matrix big = kron(algebra.edge_laplacian, pbk);
  c.sigma_edge = max_singular_value(big - 2.0 * design.mu * Matrix::Identity(big.rows(), big.cols()));
  c.lambda_P = symmetric_part_max_eig(design.P);
  c.sigma_PB = max_singular_value(design.P * model.B);
  c.sigma_BBtP = max_singular_value(model.B * model.B.transpose() * design.P);
  c.sigma_BK = max_singular_value(model.B * design.K);
  return c;
}

double broadcast_sigma(const GainDesign& design, const LtiModel& model,
                       const GraphAlgebra& algebra, double eta) {
  const double lambda_p = symmetric_part_max_eig(design.P);
  const Matrix pbbp = design.P * model.B * model.B.transpose() * design.P;
  const Matrix big = kron(algebra.graph_laplacian, pbbp);
  const double shift = 2.0 * (design.mu - lambda_p / (2.0 * eta));
  return max_singular_value(big - shift * Matrix::Identity(big.rows(), big.cols()));
}

}  // namespace async_lab
