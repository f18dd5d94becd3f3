#pragma once

#include "nsi/common.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace nsi {

enum class BasisKind { polynomial, kernel_nystrom, tree_leaf };

std::string to_string(BasisKind k);
BasisKind basis_kind_from_string(const std::string& s);

struct BasisSpec {
  BasisKind kind = BasisKind::polynomial;
  int degree = 3;           // polynomial
  int n_centers = 50;       // kernel_nystrom
  double bandwidth = 0.0;   // kernel_nystrom; 0 = median heuristic
  int n_trees = 50;         // tree_leaf
  int max_depth = 3;        // tree_leaf
  bool include_intercept = true;
  bool standardize = true;

  void check() const;
};

// One regression tree node; leaf nodes carry a dense feature column index.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int leaf_col = -1;  // >= 0 for leaves
};

struct Tree {
  std::vector<TreeNode> nodes;
  int leaf_for(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
};

class FittedBasis {
 public:
  const BasisSpec& spec() const { return spec_; }
  Eigen::Index dimension() const { return dim_; }
  Eigen::Index input_dim() const { return input_dim_; }

  // m x p design matrix; intercept column (all ones) first when enabled.
  Mat evaluate(const Mat& inputs) const;
  Mat evaluate(const Vec& scalar_input) const;

  nlohmann::json describe() const;

  friend FittedBasis fit_basis(const BasisSpec& spec, const Mat& inputs,
                               const std::optional<Vec>& targets,
                               std::uint64_t seed,
                               std::vector<std::string>* warnings);

 private:
  BasisSpec spec_;
  Eigen::Index dim_ = 0;
  Eigen::Index input_dim_ = 0;
  Vec in_mean_, in_sd_;    // input standardization (when enabled)
  Vec col_mean_;           // post-expansion centering (polynomial/kernel)
  Vec col_scale_;          // post-expansion unit-variance scaling
  Mat centers_;            // kernel centers, in standardized coordinates
  double bandwidth_ = 0.0;
  std::vector<Tree> trees_;

  Mat raw_features(const Mat& std_inputs) const;
};

FittedBasis fit_basis(const BasisSpec& spec, const Mat& inputs,
                      const std::optional<Vec>& targets = std::nullopt,
                      std::uint64_t seed = 0,
                      std::vector<std::string>* warnings = nullptr);

}  // namespace nsi
