#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace nsi {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Error taxonomy, mapped to CLI exit codes (1 numerical, 2 config, 3 data).
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct ValidationError : Error {
  using Error::Error;
};
struct InsufficientDataError : ValidationError {
  using ValidationError::ValidationError;
};
struct NumericalError : Error {
  using Error::Error;
};

// Solves A X = B for symmetric positive definite A. Escalates a relative
// jitter ladder (0, 1e-10, 1e-8, 1e-6 of the trace average) before giving up.
Mat spd_solve(const Mat& A, const Mat& B);

Mat spd_inverse(const Mat& A);

// Symmetric inverse square root via eigendecomposition.
Mat spd_inverse_sqrt(const Mat& A);

// splitmix64-style seed derivation for independent deterministic streams.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

// Upper tail of the chi-square distribution with df degrees of freedom.
double chi2_survival(double x, int df);

}  // namespace nsi
