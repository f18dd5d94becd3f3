#include "nsi/common.hpp"

#include <cmath>
#include <limits>

namespace nsi {

namespace {

// Regularized upper incomplete gamma Q(a, x), series + continued fraction.
double gamma_q_upper(double a, double x) {
  if (x < 0.0 || a <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  if (x == 0.0) return 1.0;
  const double gln = std::lgamma(a);
  if (x < a + 1.0) {
    // series for P(a,x), return 1 - P
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::fabs(del) < std::fabs(sum) * 1e-15) break;
    }
    return 1.0 - sum * std::exp(-x + a * std::log(x) - gln);
  }
  // Lentz continued fraction for Q(a,x)
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-15) break;
  }
  return std::exp(-x + a * std::log(x) - gln) * h;
}

}  // namespace

Mat spd_solve(const Mat& A, const Mat& B) {
  if (A.rows() != A.cols() || A.rows() != B.rows())
    throw NumericalError("spd_solve: dimension mismatch");
  const double scale = A.trace() / static_cast<double>(A.rows());
  const double base = (scale > 0.0 && std::isfinite(scale)) ? scale : 1.0;
  const double ladder[] = {0.0, 1e-10, 1e-8, 1e-6};
  for (double rel : ladder) {
    Mat Aj = A;
    if (rel > 0.0) Aj.diagonal().array() += rel * base;
    Eigen::LLT<Mat> llt(Aj);
    if (llt.info() != Eigen::Success) continue;
    Mat X = llt.solve(B);
    if (X.allFinite()) return X;
  }
  throw NumericalError(
      "spd_solve: matrix not positive definite after jitter ladder; "
      "consider larger penalties");
}

Mat spd_inverse(const Mat& A) {
  return spd_solve(A, Mat::Identity(A.rows(), A.cols()));
}

Mat spd_inverse_sqrt(const Mat& A) {
  Eigen::SelfAdjointEigenSolver<Mat> es(A);
  if (es.info() != Eigen::Success)
    throw NumericalError("spd_inverse_sqrt: eigendecomposition failed");
  const double scale = A.trace() / static_cast<double>(A.rows());
  const double floor = 1e-12 * (scale > 0.0 ? scale : 1.0);
  Vec d = es.eigenvalues();
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (d(i) < floor) d(i) = floor;
  }
  return es.eigenvectors() * d.cwiseSqrt().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double chi2_survival(double x, int df) {
  if (df <= 0) throw NumericalError("chi2_survival: df must be positive");
  if (x <= 0.0) return 1.0;
  return gamma_q_upper(0.5 * df, 0.5 * x);
}

}  // namespace nsi
