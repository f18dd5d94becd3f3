#include "nsi/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace nsi {

std::vector<std::string> ColumnRoles::all_role_columns() const {
  std::vector<std::string> out;
  out.push_back(benchmark);
  for (const auto& c : measurements) out.push_back(c);
  for (const auto& c : treatments) out.push_back(c);
  for (const auto& c : covariates) out.push_back(c);
  for (const auto& c : instruments)
    if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
  return out;
}

Dataset::Dataset(std::vector<std::string> names, std::vector<Vec> columns,
                 ColumnRoles roles, std::size_t dropped_rows)
    : names_(std::move(names)), roles_(std::move(roles)), dropped_rows_(dropped_rows) {
  if (names_.size() != columns.size())
    throw ValidationError("Dataset: name/column count mismatch");
  if (columns.empty()) throw ValidationError("Dataset: no columns");
  n_ = columns.front().size();
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].size() != n_)
      throw ValidationError("Dataset: column '" + names_[i] +
                            "' has inconsistent length");
    if (!columns[i].allFinite())
      throw ValidationError("Dataset: column '" + names_[i] +
                            "' contains non-finite values");
    cols_[names_[i]] = std::move(columns[i]);
  }
  if (n_ < 2) throw InsufficientDataError("Dataset: fewer than 2 rows");

  if (roles_.benchmark.empty())
    throw ValidationError("Dataset: benchmark role is required");
  for (const auto& name : roles_.all_role_columns()) {
    if (!has(name))
      throw ValidationError("Dataset: role column '" + name + "' not present");
  }
  for (const auto& m : roles_.measurements) {
    if (m == roles_.benchmark)
      throw ValidationError(
          "Dataset: benchmark column may not also be listed as a measurement");
  }
  for (const auto& z : roles_.treatments) {
    const Vec& v = cols_.at(z);
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (v(i) != 0.0 && v(i) != 1.0)
        throw ValidationError("Dataset: treatment column '" + z +
                              "' contains non-binary value " +
                              std::to_string(v(i)));
    }
  }
  if (!roles_.measurements.empty() && roles_.instruments.empty() &&
      roles_.treatments.empty() && roles_.covariates.empty() &&
      roles_.measurements.size() < 2)
    throw ValidationError(
        "Dataset: no instruments available for the single measurement");
}

bool Dataset::has(const std::string& name) const {
  return cols_.count(name) > 0;
}

const Vec& Dataset::col(const std::string& name) const {
  auto it = cols_.find(name);
  if (it == cols_.end())
    throw ValidationError("Dataset: unknown column '" + name + "'");
  return it->second;
}

Mat Dataset::matrix(const std::vector<std::string>& cols) const {
  Mat out(n_, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(j) = col(cols[j]);
  return out;
}

Dataset Dataset::rows(const std::vector<int>& idx) const {
  std::vector<Vec> columns;
  columns.reserve(names_.size());
  for (const auto& name : names_) {
    const Vec& src = cols_.at(name);
    Vec v(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] < 0 || idx[i] >= n_)
        throw ValidationError("Dataset::rows: index out of range");
      v(static_cast<Eigen::Index>(i)) = src(idx[i]);
    }
    columns.push_back(std::move(v));
  }
  return Dataset(names_, std::move(columns), roles_, 0);
}

std::vector<std::string> Dataset::instruments_for(
    const std::string& bridged) const {
  std::vector<std::string> out;
  if (!roles_.instruments.empty()) {
    for (const auto& c : roles_.instruments)
      if (c != bridged) out.push_back(c);
  } else {
    for (const auto& c : roles_.treatments) out.push_back(c);
    for (const auto& c : roles_.covariates) out.push_back(c);
    for (const auto& c : roles_.measurements)
      if (c != bridged) out.push_back(c);
  }
  if (out.empty())
    throw ValidationError("Dataset: empty instrument set for measurement '" +
                          bridged + "'");
  return out;
}

std::vector<std::vector<int>> FoldAssignment::fold_indices() const {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(K));
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    out[static_cast<std::size_t>(fold_of[i] - 1)].push_back(static_cast<int>(i));
  return out;
}

std::vector<int> FoldAssignment::fold(int k) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] == k) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<int> FoldAssignment::complement(int k) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] != k) out.push_back(static_cast<int>(i));
  return out;
}

FoldAssignment assign_folds(Eigen::Index n, int K, std::uint64_t seed) {
  if (K < 2) throw ConfigError("assign_folds: K must be at least 2");
  if (n < 2 * static_cast<Eigen::Index>(K))
    throw InsufficientDataError("assign_folds: need n >= 2K, got n=" +
                                std::to_string(n) + ", K=" + std::to_string(K));
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(mix_seed(seed, 0x666f6c6473ULL));  // "folds"
  // Fisher-Yates; avoids std::shuffle to keep the permutation
  // implementation-independent.
  for (std::size_t i = perm.size() - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(perm[i], perm[j]);
  }
  FoldAssignment fa;
  fa.K = K;
  fa.fold_of.assign(static_cast<std::size_t>(n), 0);
  for (std::size_t pos = 0; pos < perm.size(); ++pos)
    fa.fold_of[static_cast<std::size_t>(perm[pos])] =
        static_cast<int>(pos % static_cast<std::size_t>(K)) + 1;
  return fa;
}

namespace {

std::vector<std::string> parse_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch == '\r') {
      // tolerate CRLF
    } else {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

}  // namespace

Dataset load_csv(const std::string& path, const ColumnRoles& roles) {
  std::ifstream in(path);
  if (!in) throw ConfigError("load_csv: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw ValidationError("load_csv: empty file '" + path + "'");
  const std::vector<std::string> header = parse_csv_line(line);

  std::map<std::string, std::size_t> col_index;
  for (std::size_t j = 0; j < header.size(); ++j)
    col_index[trim(header[j])] = j;

  const std::vector<std::string> wanted = roles.all_role_columns();
  for (const auto& name : wanted) {
    if (!col_index.count(name))
      throw ConfigError("load_csv: role column '" + name +
                        "' missing from header of '" + path + "'");
  }

  std::vector<std::vector<double>> data(wanted.size());
  std::size_t dropped = 0;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = parse_csv_line(line);
    std::vector<double> row(wanted.size());
    bool missing = false;
    for (std::size_t j = 0; j < wanted.size(); ++j) {
      const std::size_t fi = col_index[wanted[j]];
      const std::string raw =
          fi < fields.size() ? trim(fields[fi]) : std::string();
      if (raw.empty() || raw == "NA" || raw == "nan" || raw == "NaN") {
        missing = true;
        break;
      }
      try {
        std::size_t pos = 0;
        row[j] = std::stod(raw, &pos);
        if (pos != raw.size()) throw std::invalid_argument(raw);
      } catch (const std::exception&) {
        throw ValidationError("load_csv: non-numeric value '" + raw +
                              "' in column '" + wanted[j] + "' at line " +
                              std::to_string(lineno));
      }
    }
    if (missing) {
      ++dropped;
      continue;
    }
    for (std::size_t j = 0; j < wanted.size(); ++j) data[j].push_back(row[j]);
  }

  std::vector<Vec> columns;
  for (auto& v : data)
    columns.push_back(Eigen::Map<Vec>(v.data(), static_cast<Eigen::Index>(v.size())));
  return Dataset(wanted, std::move(columns), roles, dropped);
}

RoleDiagnostics validate_roles(const Dataset& ds) {
  RoleDiagnostics out;
  const double n = static_cast<double>(ds.n());
  auto add = [&](const std::string& name, const std::string& role) {
    const Vec& v = ds.col(name);
    RoleSummary s;
    s.column = name;
    s.role = role;
    s.mean = v.mean();
    s.variance = (v.array() - s.mean).square().sum() / n;
    s.zero_variance = s.variance <= 0.0;
    if (s.zero_variance)
      out.warnings.push_back("column '" + name + "' has zero variance");
    out.summaries.push_back(s);
  };
  add(ds.roles().benchmark, "benchmark");
  for (const auto& c : ds.roles().measurements) add(c, "measurement");
  for (const auto& c : ds.roles().treatments) {
    add(c, "treatment");
    out.treated_share[c] = ds.col(c).mean();
  }
  for (const auto& c : ds.roles().covariates) add(c, "covariate");
  return out;
}

}  // namespace nsi
