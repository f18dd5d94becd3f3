#pragma once

#include "nsi/common.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace nsi {

struct ColumnRoles {
  std::string benchmark;
  std::vector<std::string> measurements;  // auxiliary measurements Y2..YJ
  std::vector<std::string> treatments;    // binary indicators
  std::vector<std::string> covariates;
  // Explicit instrument list; when empty the default is
  // treatments + covariates + all measurements other than the bridged one.
  std::vector<std::string> instruments;

  std::vector<std::string> all_role_columns() const;
};

// Immutable column table. Safe for concurrent reads after construction.
class Dataset {
 public:
  Dataset(std::vector<std::string> names, std::vector<Vec> columns,
          ColumnRoles roles, std::size_t dropped_rows = 0);

  Eigen::Index n() const { return n_; }
  const ColumnRoles& roles() const { return roles_; }
  std::size_t dropped_rows() const { return dropped_rows_; }

  bool has(const std::string& name) const;
  const Vec& col(const std::string& name) const;
  const std::vector<std::string>& names() const { return names_; }

  // Column matrix in the given order.
  Mat matrix(const std::vector<std::string>& cols) const;

  // Row subset (0-based indices), preserving roles.
  Dataset rows(const std::vector<int>& idx) const;

  // Instrument columns used when bridging the named measurement.
  std::vector<std::string> instruments_for(const std::string& bridged) const;

 private:
  Eigen::Index n_;
  std::vector<std::string> names_;
  std::map<std::string, Vec> cols_;
  ColumnRoles roles_;
  std::size_t dropped_rows_;
};

struct FoldAssignment {
  std::vector<int> fold_of;  // values in {1..K}
  int K = 0;

  std::vector<std::vector<int>> fold_indices() const;
  std::vector<int> fold(int k) const;        // rows in fold k
  std::vector<int> complement(int k) const;  // rows outside fold k
};

Dataset load_csv(const std::string& path, const ColumnRoles& roles);

FoldAssignment assign_folds(Eigen::Index n, int K, std::uint64_t seed);

struct RoleSummary {
  std::string column;
  std::string role;
  double mean = 0.0;
  double variance = 0.0;
  bool zero_variance = false;
};

struct RoleDiagnostics {
  std::vector<RoleSummary> summaries;
  std::map<std::string, double> treated_share;  // pi-hat per treatment
  std::vector<std::string> warnings;
};

RoleDiagnostics validate_roles(const Dataset& ds);

}  // namespace nsi
