#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "storygen/corpus.hpp"
#include "storygen/knowledge.hpp"
#include "storygen/model.hpp"

namespace storygen {

/// Non-finite loss or gradient during training.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update from each tensor's grad slot. Tensors with
/// no gradient are treated as having a zero gradient.
void adam_step(std::span<Tensor* const> params, AdamState& state, const AdamConfig& config);

/// Rescales all gradients so their joint L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_global_norm(std::span<Tensor* const> params, double max_norm);
double global_grad_norm(std::span<Tensor* const> params);

struct TrainConfig {
  AdamConfig adam;
  std::size_t batch_size = 32;
  std::size_t epochs = 10;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
  std::size_t eval_every = 1;      // epochs between dev evaluations / checkpoints
  std::filesystem::path checkpoint_dir;  // empty: no per-epoch checkpoints
  std::size_t workers = 1;         // dev perplexity only

  void validate() const;
};

struct EpochReport {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;     // per story
  double mean_encoder = 0.0;  // per story
  double mean_decoder = 0.0;  // per story
  double decoder_nll_per_token = 0.0;
  std::optional<double> dev_perplexity;
  double seconds = 0.0;

  /// Equality over everything except wall time.
  bool same_numbers(const EpochReport& other) const;
};

struct TrainReport {
  std::vector<EpochReport> epochs;
  bool same_numbers(const TrainReport& other) const;
};

/// Carves a deterministic dev split of round(fraction * size) stories.
std::pair<Dataset, Dataset> split_dev(const Dataset& data, double fraction, std::uint64_t seed);

using EpochCallback = std::function<void(const EpochReport&)>;

/// Mini-batch training on the mean per-story objective. Throws NumericError
/// naming the epoch and batch when the loss is not finite.
TrainReport train(ModelParams& params, const Dataset& train_data, const Dataset* dev_data,
                  const TripleStore* store, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

}  // namespace storygen
