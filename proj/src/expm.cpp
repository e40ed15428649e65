#include <array>
#include <cmath>
#include <string>

#include "async_lab/errors.hpp"
#include "async_lab/matan.hpp"

namespace async_lab {
namespace {

// Higham (2005), Table 2.3: largest 1-norm for which the [m/m] approximant
// reaches double precision backward error.
constexpr double kTheta3 = 1.495585217958292e-2;
constexpr double kTheta5 = 2.539398330063230e-1;
constexpr double kTheta7 = 9.504178996162932e-1;
constexpr double kTheta9 = 2.097847961257068e0;
constexpr double kTheta13 = 5.371920351148152e0;

struct PadeTerms {
  Matrix u;
  Matrix v;
};

template <std::size_t N>
PadeTerms pade_low(const Matrix& a, const std::array<double, N>& b) {
  // Orders 3..9: U = A * sum_{odd} b_k A^{k-1}, V = sum_{even} b_k A^k.
  const Eigen::Index n = a.rows();
  const Matrix id = Matrix::Identity(n, n);
  const Matrix a2 = a * a;
  Matrix odd = b[1] * id;
  Matrix even = b[0] * id;
  Matrix power = id;
  for (std::size_t k = 2; k < N; k += 2) {
    power = power * a2;
    even += b[k] * power;
    if (k + 1 < N) odd += b[k + 1] * power;
  }
  return {a * odd, even};
}

PadeTerms pade13(const Matrix& a) {
  static constexpr std::array<double, 14> b = {
      64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
      1187353796428800.0,  129060195264000.0,   10559470521600.0,
      670442572800.0,      33522128640.0,       1323241920.0,
      40840800.0,          960960.0,            16380.0,
      182.0,               1.0};
  const Eigen::Index n = a.rows();
  const Matrix id = Matrix::Identity(n, n);
  const Matrix a2 = a * a;
  const Matrix a4 = a2 * a2;
  const Matrix a6 = a4 * a2;
  Matrix u_inner = a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 +
                   b[5] * a4 + b[3] * a2 + b[1] * id;
  Matrix v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 +
             b[4] * a4 + b[2] * a2 + b[0] * id;
  return {a * u_inner, std::move(v)};
}

Matrix pade_solve(const PadeTerms& t) {
  // (V - U)^{-1} (V + U)
  return (t.v - t.u).partialPivLu().solve(t.v + t.u);
}

}  // namespace

Matrix expm(const Matrix& m, double t) {
  require_square(m, "expm");
  if (!std::isfinite(t)) throw RangeError("expm: non-finite time argument");
  require_finite(m, "expm");
  const Matrix a = m * t;
  const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
  if (!std::isfinite(norm1)) throw RangeError("expm: non-finite argument norm");
  if (norm1 == 0.0) return Matrix::Identity(m.rows(), m.cols());

  if (norm1 <= kTheta3) {
    return pade_solve(pade_low(a, std::array<double, 4>{120.0, 60.0, 12.0, 1.0}));
  }
  if (norm1 <= kTheta5) {
    return pade_solve(pade_low(
        a, std::array<double, 6>{30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0}));
  }
  if (norm1 <= kTheta7) {
    return pade_solve(pade_low(
        a, std::array<double, 8>{17297280.0, 8648640.0, 1995840.0, 277200.0,
                                 25200.0, 1512.0, 56.0, 1.0}));
  }
  if (norm1 <= kTheta9) {
    return pade_solve(pade_low(
        a, std::array<double, 10>{17643225600.0, 8821612800.0, 2075673600.0,
                                  302702400.0, 30270240.0, 2162160.0,
                                  110880.0, 3960.0, 90.0, 1.0}));
  }

  int squarings = 0;
  if (norm1 > kTheta13) {
    squarings = static_cast<int>(std::ceil(std::log2(norm1 / kTheta13)));
  }
  // 2^1100 already exceeds any double; anything that large overflows.
  if (squarings > 1100) {
    throw RangeError("expm: argument norm " + std::to_string(norm1) +
                     " overflows");
  }
  Matrix result = pade_solve(pade13(std::ldexp(1.0, -squarings) * a));
  for (int i = 0; i < squarings; ++i) result = result * result;
  if (!result.allFinite()) {
    throw RangeError("expm: result overflowed (argument 1-norm " +
                     std::to_string(norm1) + ")");
  }
  return result;
}

Matrix expm_integral(const Matrix& m, double t) {
  require_square(m, "expm_integral");
  if (!(t >= 0.0)) throw ParameterError("expm_integral: t must be >= 0");
  const Eigen::Index n = m.rows();
  Matrix block = Matrix::Zero(2 * n, 2 * n);
  block.topLeftCorner(n, n) = m;
  block.topRightCorner(n, n) = Matrix::Identity(n, n);
  return expm(block, t).topRightCorner(n, n);
}

ZohStep zoh_step(const Matrix& a, const Matrix& b, double dt) {
  require_square(a, "zoh_step");
  if (b.rows() != a.rows()) {
    throw DimensionError("zoh_step: B must have as many rows as A");
  }
  const Eigen::Index n = a.rows();
  const Eigen::Index k = b.cols();
  Matrix block = Matrix::Zero(n + k, n + k);
  block.topLeftCorner(n, n) = a;
  block.topRightCorner(n, k) = b;
  const Matrix e = expm(block, dt);
  return {e.topLeftCorner(n, n), e.topRightCorner(n, k)};
}

}  // namespace async_lab
