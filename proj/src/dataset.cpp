#include "relu_optset/dataset.hpp"

#include "relu_optset/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace relu_optset {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

Dataset Dataset::subset(const std::vector<int>& rows) const {
  Dataset out;
  out.Z.resize(static_cast<Eigen::Index>(rows.size()), Z.cols());
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (size_t k = 0; k < rows.size(); ++k) {
    out.Z.row(k) = Z.row(rows[k]);
    out.y[k] = y[rows[k]];
  }
  out.feature_names = feature_names;
  out.target_name = target_name;
  return out;
}

Dataset parse_dataset(const std::string& text, const std::string& source) {
  std::istringstream is(text);
  std::string line;
  std::vector<std::string> header;
  while (std::getline(is, line)) {
    if (!trim(line).empty()) {
      header = split_line(line);
      break;
    }
  }
  if (header.empty()) throw InputError(source + ": empty file");
  if (header.size() < 2) throw ParseError(source + ": need at least one feature column and a target column");

  std::vector<std::vector<double>> rows;
  int row_no = 0;
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    ++row_no;
    auto cells = split_line(line);
    if (cells.size() != header.size())
      throw ParseError(source + ": row " + std::to_string(row_no) + " has " + std::to_string(cells.size()) +
                       " cells, header has " + std::to_string(header.size()));
    std::vector<double> vals(cells.size());
    for (size_t c = 0; c < cells.size(); ++c) {
      const std::string& cell = cells[c];
      double x = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), x);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(x))
        throw ParseError(source + ": non-numeric cell '" + cell + "' at row " + std::to_string(row_no) +
                         ", column " + std::to_string(c + 1) + " (" + header[c] + ")");
      vals[c] = x;
    }
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw InputError(source + ": no data rows");

  const int n = static_cast<int>(rows.size());
  const int d = static_cast<int>(header.size()) - 1;
  Dataset ds;
  ds.Z.resize(n, d);
  ds.y.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) ds.Z(i, k) = rows[i][k];
    ds.y[i] = rows[i][d];
  }
  ds.feature_names.assign(header.begin(), header.end() - 1);
  ds.target_name = header.back();
  return ds;
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open dataset '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_dataset(ss.str(), path);
}

Split split_dataset(int n, double train_frac, double val_frac, std::uint64_t seed) {
  if (train_frac < 0 || val_frac < 0 || train_frac + val_frac > 1.0 + 1e-12)
    throw InputError("split fractions must be non-negative and sum to at most 1");
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const int nt = static_cast<int>(std::floor(train_frac * n + 1e-9));
  const int nv = std::min(n - nt, static_cast<int>(std::floor(val_frac * n + 1e-9)));
  Split s;
  s.train.assign(idx.begin(), idx.begin() + nt);
  s.val.assign(idx.begin() + nt, idx.begin() + nt + nv);
  s.test.assign(idx.begin() + nt + nv, idx.end());
  for (auto* part : {&s.train, &s.val, &s.test}) std::sort(part->begin(), part->end());
  return s;
}

Dataset gaussian_dataset(int n, int d, std::uint64_t seed, double noise) {
  if (n <= 0 || d <= 0) throw InputError("gaussian_dataset: n and d must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  Dataset ds;
  ds.Z.resize(n, d);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < d; ++k) ds.Z(i, k) = N(rng);
  Mat U(d, 2);
  for (int k = 0; k < d; ++k)
    for (int j = 0; j < 2; ++j) U(k, j) = N(rng);
  Mat H = (ds.Z * U).cwiseMax(0.0);
  ds.y = H.col(0) - 0.5 * H.col(1);
  for (int i = 0; i < n; ++i) ds.y[i] += noise * N(rng);
  for (int k = 0; k < d; ++k) ds.feature_names.push_back("z" + std::to_string(k));
  ds.target_name = "y";
  return ds;
}

void write_csv(std::ostream& os, const std::vector<std::string>& header, const Mat& rows) {
  if (static_cast<Eigen::Index>(header.size()) != rows.cols()) throw ShapeError("write_csv: header width mismatch");
  for (size_t k = 0; k < header.size(); ++k) os << (k ? "," : "") << header[k];
  os << '\n';
  char buf[32];
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index k = 0; k < rows.cols(); ++k) {
      auto r = std::to_chars(buf, buf + sizeof buf, rows(i, k));
      os << (k ? "," : "") << std::string_view(buf, r.ptr - buf);
    }
    os << '\n';
  }
}

}  // namespace relu_optset
