#pragma once

#include <string>
#include <vector>

#include "ghnforge/core/rng.hpp"
#include "ghnforge/target_net/forward.hpp"

namespace ghnforge {

// Synthetic image classification task standing in for CIFAR-scale data.
// Each class is an oriented grating with class-specific frequency and
// channel mixing plus a class-positioned blob; samples jitter in phase,
// amplitude and additive noise. style_seed picks the class parameterization
// so transfer targets can use a disjoint task family.
struct DatasetConfig {
  std::string name = "synth10";
  int classes = 10;
  int n_train = 4096;
  int n_val = 1024;
  int hw = 32;
  uint64_t seed = 123;
  uint64_t style_seed = 7;
  double noise = 0.35;

  void validate() const;  // throws ConfigError
};

struct Dataset {
  DatasetConfig cfg;
  Tensor<float> train_x;  // N x 3 x hw x hw
  std::vector<int> train_y;
  Tensor<float> val_x;
  std::vector<int> val_y;
};

Dataset synth_dataset(const DatasetConfig& cfg);

// On-disk layout in `dir`: train.bin / val.bin (raw float32 tensors),
// train.labels / val.labels (int32), manifest.json with sizes and fnv64
// checksums of the binary files.
void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

// Loads the dataset if `dir` holds a matching manifest, otherwise generates
// and saves it first.
Dataset ensure_dataset(const DatasetConfig& cfg, const std::string& dir);

// Gathers rows of the train or val split into a batch.
Batch make_batch(const Tensor<float>& xs, const std::vector<int>& ys,
                 const std::vector<int64_t>& indices);

// Deterministic per-epoch permutation of [0, n).
std::vector<int64_t> epoch_permutation(int64_t n, uint64_t seed, int64_t epoch);

}  // namespace ghnforge
