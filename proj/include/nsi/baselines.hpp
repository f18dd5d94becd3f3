#pragma once

#include "nsi/data_model.hpp"

#include <optional>
#include <string>

namespace nsi {

enum class IndexKind { pca, icw, wsi };

struct IndexFit {
  IndexKind kind = IndexKind::pca;
  Vec weights;       // length J
  Vec lambdas;       // wsi only; lambda_1 = 1
  Vec index_values;  // length n
};

struct DiffInMeans {
  double tau_hat = 0.0;
  double se = 0.0;
};

struct WsiEstimate {
  IndexFit fit;
  double tau_hat = 0.0;
  double se = 0.0;
};

// Leading principal component of the column correlation matrix by default;
// use_correlation=false operates on the centered covariance instead.
IndexFit pca_index(const Mat& Y, bool use_correlation = true);

// Inverse-covariance weights Sigma^-1 1 / (1' Sigma^-1 1). When z is given,
// columns are standardized by control-group mean/SD first.
IndexFit icw_index(const Mat& Y, const std::optional<Vec>& z = std::nullopt,
                   std::vector<std::string>* warnings = nullptr);

DiffInMeans index_diff_in_means(const Vec& index, const Vec& z, double pi);

// Wald-ratio scaled index: lambda_j = cov(Y_j, instr)/cov(Y_1, instr),
// inverse-variance weights over the rescaled measurements, then the HT
// difference in means of the weighted index.
WsiEstimate wsi_estimate(const Dataset& ds,
                         const std::string& instrument = std::string(),
                         std::optional<double> known_pi = std::nullopt);

}  // namespace nsi
