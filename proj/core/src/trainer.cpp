#include "storygen/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "storygen/checkpoint.hpp"
#include "storygen/decode.hpp"
#include "storygen/random.hpp"

namespace storygen {

void adam_step(std::span<Tensor* const> params, AdamState& state, const AdamConfig& config) {
  if (state.first_moment.empty()) {
    for (Tensor* t : params) {
      state.first_moment.emplace_back(t->size(), 0.0);
      state.second_moment.emplace_back(t->size(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ShapeError("adam_step: optimizer state tracks " +
                     std::to_string(state.first_moment.size()) + " tensors, got " +
                     std::to_string(params.size()));
  }
  ++state.step;
  const double correction1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& t = *params[i];
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    if (m.size() != t.size()) {
      throw ShapeError("adam_step: moment size differs for tensor " + shape_to_string(t.shape));
    }
    if (!t.grad.empty() && t.grad.size() != t.size()) {
      throw ShapeError("adam_step: gradient size differs for tensor " + shape_to_string(t.shape));
    }
    for (std::size_t k = 0; k < t.size(); ++k) {
      const double g = t.grad.empty() ? 0.0 : t.grad[k];
      m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g;
      v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g * g;
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      t.values[k] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
  }
}

double global_grad_norm(std::span<Tensor* const> params) {
  double sq = 0.0;
  for (const Tensor* t : params) {
    for (double g : t->grad) sq += g * g;
  }
  return std::sqrt(sq);
}

double clip_global_norm(std::span<Tensor* const> params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (norm > max_norm) {
    const double factor = max_norm / norm;
    for (Tensor* t : params) {
      for (double& g : t->grad) g *= factor;
    }
  }
  return norm;
}

void TrainConfig::validate() const {
  if (!(adam.lr >= 0.0)) throw std::invalid_argument("train config: lr must be >= 0");
  if (!(clip_norm > 0.0)) throw std::invalid_argument("train config: clip_norm must be > 0");
  if (batch_size == 0) throw std::invalid_argument("train config: batch_size must be >= 1");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw std::invalid_argument("train config: Adam betas must lie in [0, 1)");
  }
}

bool EpochReport::same_numbers(const EpochReport& o) const {
  return epoch == o.epoch && mean_loss == o.mean_loss && mean_encoder == o.mean_encoder &&
         mean_decoder == o.mean_decoder && decoder_nll_per_token == o.decoder_nll_per_token &&
         dev_perplexity == o.dev_perplexity;
}

bool TrainReport::same_numbers(const TrainReport& o) const {
  if (epochs.size() != o.epochs.size()) return false;
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    if (!epochs[i].same_numbers(o.epochs[i])) return false;
  }
  return true;
}

std::pair<Dataset, Dataset> split_dev(const Dataset& data, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("dev fraction must lie in [0, 1)");
  }
  const auto dev_size = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(data.size())));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, "dev-split"));
  rng.shuffle(order.begin(), order.end());
  std::vector<bool> in_dev(data.size(), false);
  for (std::size_t i = 0; i < dev_size; ++i) in_dev[order[i]] = true;
  Dataset train_part, dev_part;
  for (std::size_t i = 0; i < data.size(); ++i) {
    (in_dev[i] ? dev_part : train_part).push_back(data[i]);
  }
  return {std::move(train_part), std::move(dev_part)};
}

TrainReport train(ModelParams& params, const Dataset& train_data, const Dataset* dev_data,
                  const TripleStore* store, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (train_data.empty()) throw std::invalid_argument("train: empty training set");
  std::vector<Tensor*> trainable = params.trainable();
  AdamState adam;
  BatchIterator batches(train_data, config.batch_size, config.seed);
  TrainReport report;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    batches.start_epoch(epoch);
    EpochReport er;
    er.epoch = epoch;
    std::size_t decoder_tokens = 0;
    std::size_t batch_index = 0;
    Batch batch;
    while (batches.next(batch)) {
      for (Tensor* t : trainable) t->zero_grad();
      for (const Story& story : batch.stories) {
        Tape tape;
        LossTerms terms = story_loss(tape, params, story, store);
        const double loss = terms.total.scalar();
        if (!std::isfinite(loss)) {
          std::ostringstream msg;
          msg << "non-finite loss " << loss << " in epoch " << epoch << ", batch " << batch_index
              << " (story " << story.id << ")";
          throw NumericError(msg.str());
        }
        er.mean_loss += loss;
        er.mean_encoder += terms.encoder.scalar();
        er.mean_decoder += terms.decoder.scalar();
        decoder_tokens += terms.decoder_tokens;
        tape.backward(terms.total);
        tape.accumulate_param_grads(trainable);
      }
      const double inv = 1.0 / static_cast<double>(batch.stories.size());
      for (Tensor* t : trainable) {
        for (double& g : t->grad) g *= inv;
      }
      const double norm = clip_global_norm(trainable, config.clip_norm);
      if (!std::isfinite(norm)) {
        throw NumericError("non-finite gradient norm in epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(batch_index));
      }
      adam_step(trainable, adam, config.adam);
      ++batch_index;
    }
    er.decoder_nll_per_token = er.mean_decoder / static_cast<double>(decoder_tokens);
    const double n = static_cast<double>(train_data.size());
    er.mean_loss /= n;
    er.mean_encoder /= n;
    er.mean_decoder /= n;

    const bool eval_now = config.eval_every > 0 &&
                          (epoch % config.eval_every == 0 || epoch == config.epochs);
    if (eval_now && dev_data && !dev_data->empty()) {
      er.dev_perplexity = perplexity(params, *dev_data, store, config.workers).perplexity;
    }
    if (eval_now && !config.checkpoint_dir.empty()) {
      std::filesystem::create_directories(config.checkpoint_dir);
      save_checkpoint(config.checkpoint_dir / ("epoch-" + std::to_string(epoch) + ".ckpt"), params);
    }
    er.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report.epochs.push_back(er);
    if (on_epoch) on_epoch(er);
  }
  for (Tensor* t : trainable) t->grad.clear();
  return report;
}

}  // namespace storygen
