#include "nsi/basis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace nsi {

std::string to_string(BasisKind k) {
  switch (k) {
    case BasisKind::polynomial: return "polynomial";
    case BasisKind::kernel_nystrom: return "kernel_nystrom";
    case BasisKind::tree_leaf: return "tree_leaf";
  }
  return "?";
}

BasisKind basis_kind_from_string(const std::string& s) {
  if (s == "polynomial" || s == "series") return BasisKind::polynomial;
  if (s == "kernel_nystrom" || s == "kernel" || s == "rkhs")
    return BasisKind::kernel_nystrom;
  if (s == "tree_leaf" || s == "tree" || s == "forest")
    return BasisKind::tree_leaf;
  throw ConfigError("unknown basis kind '" + s + "'");
}

void BasisSpec::check() const {
  if (degree < 1) throw ConfigError("BasisSpec: degree must be >= 1");
  if (n_centers < 1) throw ConfigError("BasisSpec: n_centers must be >= 1");
  if (bandwidth < 0.0) throw ConfigError("BasisSpec: bandwidth must be > 0");
  if (n_trees < 1) throw ConfigError("BasisSpec: n_trees must be >= 1");
  if (max_depth < 1) throw ConfigError("BasisSpec: max_depth must be >= 1");
}

int Tree::leaf_for(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  int node = 0;
  while (nodes[static_cast<std::size_t>(node)].leaf_col < 0) {
    const TreeNode& nd = nodes[static_cast<std::size_t>(node)];
    node = x(nd.feature) <= nd.threshold ? nd.left : nd.right;
  }
  return nodes[static_cast<std::size_t>(node)].leaf_col;
}

namespace {

struct TreeBuilder {
  const Mat& X;
  const Vec& y;
  int max_depth;
  int min_leaf;
  std::vector<TreeNode>& nodes;
  int* next_leaf_col;

  // Greedy variance-reduction split; returns node index.
  int build(std::vector<int>& rows, int depth) {
    const int node_id = static_cast<int>(nodes.size());
    nodes.emplace_back();
    double mean = 0.0;
    for (int r : rows) mean += y(r);
    mean /= static_cast<double>(rows.size());
    double sse = 0.0;
    for (int r : rows) sse += (y(r) - mean) * (y(r) - mean);

    int best_feat = -1;
    double best_thresh = 0.0, best_gain = 1e-12;
    if (depth < max_depth && static_cast<int>(rows.size()) >= 2 * min_leaf) {
      for (int f = 0; f < X.cols(); ++f) {
        std::vector<double> vals;
        vals.reserve(rows.size());
        for (int r : rows) vals.push_back(X(r, f));
        std::sort(vals.begin(), vals.end());
        vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
        if (vals.size() < 2) continue;
        // up to 32 quantile candidates
        const std::size_t n_cand = std::min<std::size_t>(32, vals.size() - 1);
        for (std::size_t c = 0; c < n_cand; ++c) {
          const std::size_t pos = (c + 1) * (vals.size() - 1) / (n_cand + 1);
          const double thresh = 0.5 * (vals[pos] + vals[pos + 1]);
          double nl = 0, suml = 0, ssl = 0, nr = 0, sumr = 0, ssr = 0;
          for (int r : rows) {
            const double v = y(r);
            if (X(r, f) <= thresh) {
              nl += 1;
              suml += v;
              ssl += v * v;
            } else {
              nr += 1;
              sumr += v;
              ssr += v * v;
            }
          }
          if (nl < min_leaf || nr < min_leaf) continue;
          const double sse_split =
              (ssl - suml * suml / nl) + (ssr - sumr * sumr / nr);
          const double gain = sse - sse_split;
          if (gain > best_gain) {
            best_gain = gain;
            best_feat = f;
            best_thresh = thresh;
          }
        }
      }
    }

    if (best_feat < 0) {
      nodes[static_cast<std::size_t>(node_id)].leaf_col = (*next_leaf_col)++;
      return node_id;
    }
    std::vector<int> left_rows, right_rows;
    for (int r : rows) {
      if (X(r, best_feat) <= best_thresh)
        left_rows.push_back(r);
      else
        right_rows.push_back(r);
    }
    const int left = build(left_rows, depth + 1);
    const int right = build(right_rows, depth + 1);
    TreeNode& nd = nodes[static_cast<std::size_t>(node_id)];
    nd.feature = best_feat;
    nd.threshold = best_thresh;
    nd.left = left;
    nd.right = right;
    return node_id;
  }
};

double median_pairwise_distance(const Mat& X) {
  const Eigen::Index n = X.rows();
  const Eigen::Index m = std::min<Eigen::Index>(n, 200);
  std::vector<double> d;
  for (Eigen::Index a = 0; a < m; ++a) {
    const Eigen::Index ia = a * n / m;
    for (Eigen::Index b = a + 1; b < m; ++b) {
      const Eigen::Index ib = b * n / m;
      const double dist = (X.row(ia) - X.row(ib)).norm();
      if (dist > 0.0) d.push_back(dist);
    }
  }
  if (d.empty()) return 1.0;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2), d.end());
  return d[d.size() / 2];
}

}  // namespace

Mat FittedBasis::raw_features(const Mat& Xs) const {
  const Eigen::Index n = Xs.rows();
  const Eigen::Index d = Xs.cols();
  Mat out(n, dim_);
  Eigen::Index col = 0;
  if (spec_.include_intercept) out.col(col++).setOnes();

  switch (spec_.kind) {
    case BasisKind::polynomial: {
      for (Eigen::Index j = 0; j < d; ++j) {
        Vec p = Xs.col(j);
        for (int deg = 1; deg <= spec_.degree; ++deg) {
          out.col(col++) = p;
          if (deg < spec_.degree) p = p.cwiseProduct(Xs.col(j));
        }
      }
      if (spec_.degree >= 2) {
        for (Eigen::Index a = 0; a < d; ++a)
          for (Eigen::Index b = a + 1; b < d; ++b)
            out.col(col++) = Xs.col(a).cwiseProduct(Xs.col(b));
      }
      break;
    }
    case BasisKind::kernel_nystrom: {
      const double denom = 2.0 * bandwidth_ * bandwidth_;
      for (Eigen::Index c = 0; c < centers_.rows(); ++c) {
        out.col(col++) =
            (-(Xs.rowwise() - centers_.row(c)).rowwise().squaredNorm() / denom)
                .array()
                .exp();
      }
      break;
    }
    case BasisKind::tree_leaf: {
      out.rightCols(dim_ - col).setZero();
      for (Eigen::Index i = 0; i < n; ++i) {
        for (const Tree& t : trees_) out(i, col + t.leaf_for(Xs.row(i))) = 1.0;
      }
      col = dim_;
      break;
    }
  }
  if (col != dim_) throw NumericalError("basis: internal dimension mismatch");
  return out;
}

Mat FittedBasis::evaluate(const Mat& inputs) const {
  if (inputs.cols() != input_dim_)
    throw ValidationError("basis evaluate: expected " +
                          std::to_string(input_dim_) + " input columns, got " +
                          std::to_string(inputs.cols()));
  Mat Xs = inputs;
  if (spec_.standardize) {
    Xs = (Xs.rowwise() - in_mean_.transpose()).array().rowwise() /
         in_sd_.transpose().array();
  }
  Mat F = raw_features(Xs);
  if (col_mean_.size() > 0) F.rowwise() -= col_mean_.transpose();
  if (col_scale_.size() > 0)
    F.array().rowwise() /= col_scale_.transpose().array();
  if (!F.allFinite()) throw NumericalError("basis evaluate: non-finite features");
  return F;
}

Mat FittedBasis::evaluate(const Vec& scalar_input) const {
  return evaluate(Mat(scalar_input));
}

nlohmann::json FittedBasis::describe() const {
  nlohmann::json j;
  j["kind"] = to_string(spec_.kind);
  j["dimension"] = dim_;
  j["input_dim"] = input_dim_;
  j["include_intercept"] = spec_.include_intercept;
  j["standardize"] = spec_.standardize;
  if (spec_.standardize) {
    j["input_mean"] = std::vector<double>(in_mean_.data(), in_mean_.data() + in_mean_.size());
    j["input_sd"] = std::vector<double>(in_sd_.data(), in_sd_.data() + in_sd_.size());
  }
  if (col_mean_.size() > 0)
    j["column_mean"] = std::vector<double>(col_mean_.data(), col_mean_.data() + col_mean_.size());
  if (col_scale_.size() > 0)
    j["column_scale"] = std::vector<double>(col_scale_.data(), col_scale_.data() + col_scale_.size());
  switch (spec_.kind) {
    case BasisKind::polynomial:
      j["degree"] = spec_.degree;
      break;
    case BasisKind::kernel_nystrom: {
      j["bandwidth"] = bandwidth_;
      std::vector<std::vector<double>> cs;
      for (Eigen::Index r = 0; r < centers_.rows(); ++r)
        cs.emplace_back(centers_.row(r).data(), centers_.row(r).data() + centers_.cols());
      j["centers"] = cs;
      break;
    }
    case BasisKind::tree_leaf: {
      j["n_trees"] = static_cast<int>(trees_.size());
      j["max_depth"] = spec_.max_depth;
      nlohmann::json ts = nlohmann::json::array();
      for (const Tree& t : trees_) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const TreeNode& nd : t.nodes)
          nodes.push_back({{"feature", nd.feature},
                           {"threshold", nd.threshold},
                           {"left", nd.left},
                           {"right", nd.right},
                           {"leaf_col", nd.leaf_col}});
        ts.push_back(nodes);
      }
      j["trees"] = ts;
      break;
    }
  }
  return j;
}

FittedBasis fit_basis(const BasisSpec& spec, const Mat& inputs,
                      const std::optional<Vec>& targets, std::uint64_t seed,
                      std::vector<std::string>* warnings) {
  spec.check();
  const Eigen::Index n = inputs.rows();
  const Eigen::Index d = inputs.cols();
  if (n < 1 || d < 1) throw InsufficientDataError("fit_basis: empty input");

  FittedBasis fb;
  fb.spec_ = spec;
  fb.input_dim_ = d;

  Mat Xs = inputs;
  if (spec.standardize) {
    fb.in_mean_ = inputs.colwise().mean();
    fb.in_sd_ = Vec(d);
    for (Eigen::Index j = 0; j < d; ++j) {
      const double var =
          (inputs.col(j).array() - fb.in_mean_(j)).square().sum() /
          static_cast<double>(n);
      if (var <= 0.0)
        throw ValidationError("fit_basis: zero-variance input column " +
                              std::to_string(j) + " with standardize on");
      fb.in_sd_(j) = std::sqrt(var);
    }
    Xs = (Xs.rowwise() - fb.in_mean_.transpose()).array().rowwise() /
         fb.in_sd_.transpose().array();
  }

  const Eigen::Index icols = spec.include_intercept ? 1 : 0;
  switch (spec.kind) {
    case BasisKind::polynomial: {
      Eigen::Index p = icols + d * spec.degree;
      if (spec.degree >= 2) p += d * (d - 1) / 2;
      fb.dim_ = p;
      break;
    }
    case BasisKind::kernel_nystrom: {
      Eigen::Index m = spec.n_centers;
      if (m > n) {
        if (warnings)
          warnings->push_back("kernel_nystrom: n_centers clipped from " +
                              std::to_string(m) + " to " + std::to_string(n));
        m = n;
      }
      // seeded subsample without replacement
      std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
      std::iota(idx.begin(), idx.end(), 0);
      std::mt19937_64 rng(mix_seed(seed, 0x63656e7465727aULL));
      for (std::size_t i = idx.size() - 1; i > 0; --i)
        std::swap(idx[i], idx[static_cast<std::size_t>(rng() % (i + 1))]);
      fb.centers_.resize(m, d);
      for (Eigen::Index c = 0; c < m; ++c)
        fb.centers_.row(c) = Xs.row(idx[static_cast<std::size_t>(c)]);
      fb.bandwidth_ =
          spec.bandwidth > 0.0 ? spec.bandwidth : median_pairwise_distance(Xs);
      fb.dim_ = icols + m;
      break;
    }
    case BasisKind::tree_leaf: {
      if (!targets)
        throw ConfigError("fit_basis: tree_leaf requires a target vector");
      if (targets->size() != n)
        throw ValidationError("fit_basis: target length mismatch");
      const int min_leaf = std::max<int>(2, static_cast<int>(n) / 64);
      int next_leaf = 0;
      for (int t = 0; t < spec.n_trees; ++t) {
        // bootstrap sample per tree
        std::mt19937_64 rng(mix_seed(seed, 0x74726565ULL + static_cast<std::uint64_t>(t)));
        std::vector<int> rows(static_cast<std::size_t>(n));
        if (spec.n_trees == 1) {
          std::iota(rows.begin(), rows.end(), 0);
        } else {
          for (auto& r : rows) r = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
        }
        Tree tree;
        TreeBuilder builder{Xs, *targets, spec.max_depth, min_leaf, tree.nodes,
                            &next_leaf};
        builder.build(rows, 0);
        fb.trees_.push_back(std::move(tree));
      }
      fb.dim_ = icols + next_leaf;
      break;
    }
  }

  // Center and rescale expanded columns so Gram matrices stay well scaled
  // (high-order monomials otherwise dominate trace-based penalty defaults);
  // indicator features keep their partition structure instead.
  if (spec.standardize && spec.kind != BasisKind::tree_leaf) {
    Mat F = fb.raw_features(Xs);
    fb.col_mean_ = F.colwise().mean();
    if (spec.include_intercept) fb.col_mean_(0) = 0.0;
    fb.col_scale_ = Vec::Ones(fb.dim_);
    for (Eigen::Index c = spec.include_intercept ? 1 : 0; c < fb.dim_; ++c) {
      const double var = (F.col(c).array() - fb.col_mean_(c)).square().sum() /
                         static_cast<double>(n);
      if (var > 1e-24) fb.col_scale_(c) = std::sqrt(var);
    }
  }
  return fb;
}

}  // namespace nsi
