#pragma once

#include "relu_optset/core.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace relu_optset {

struct Split {
  std::vector<int> train, val, test;
};

struct Dataset {
  Mat Z;
  Vec y;
  std::vector<std::string> feature_names;
  std::string target_name;

  int n() const { return static_cast<int>(Z.rows()); }
  int d() const { return static_cast<int>(Z.cols()); }
  Dataset subset(const std::vector<int>& rows) const;
};

// Header row required; last column is the target. Non-numeric cells raise ParseError naming the
// 1-based data row and column; an empty file (or header only) raises InputError.
Dataset load_dataset(const std::string& path);
Dataset parse_dataset(const std::string& text, const std::string& source = "<memory>");

// Shuffled split with floor(train n) / floor(val n) rows, remainder to test.
Split split_dataset(int n, double train_frac, double val_frac, std::uint64_t seed);

// Standard normal features; targets from a planted two-neuron ReLU network plus noise.
Dataset gaussian_dataset(int n, int d, std::uint64_t seed, double noise = 0.1);

void write_csv(std::ostream& os, const std::vector<std::string>& header, const Mat& rows);

}  // namespace relu_optset
