#pragma once

#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "asgl/error.hpp"
#include "asgl/fusion.hpp"
#include "asgl/model.hpp"
#include "asgl/optim.hpp"
#include "asgl/pose.hpp"
#include "asgl/pose_io.hpp"
#include "asgl/rng.hpp"

namespace asgl {

template <typename T>
struct TrainConfig {
  std::size_t epochs = 120;
  std::size_t batch_p = 8;  // identities per batch
  std::size_t batch_k = 4;  // clips per identity
  T lr0 = T(5e-3);
  std::size_t lr_step_epochs = 40;
  T lr_decay = T(0.1);
  std::size_t clip_len = 8;
  std::size_t stride = 2;
  LossConfig<T> loss;
  std::uint64_t seed = 0;
  std::size_t max_iterations = 0;  // optimizer-step cap; 0 means no cap
};

struct TrainResult {
  std::vector<double> epoch_loss;  // mean total loss per completed epoch
  std::vector<double> step_loss;
  std::size_t steps = 0;
};

struct BatchEntry {
  std::size_t tracklet;  // index into ClipDataset::tracklets
  std::size_t label;     // class index from train_person_ids order
};

// Batches of P distinct identities with K clips each. Identity order is a
// reshuffled queue per pass; identities short of K tracklets repeat theirs
// (clip windows still differ through the random clip offsets).
class PkSampler {
 public:
  PkSampler(const ClipDataset& data, std::size_t p, std::size_t k)
      : p_(p), k_(k) {
    if (p_ == 0 || k_ == 0) {
      raise(ErrorCode::config, "PkSampler: batch factors must be positive");
    }
    const auto persons = data.train_person_ids();
    std::map<std::string, std::size_t> label_of;
    for (std::size_t i = 0; i < persons.size(); ++i) label_of[persons[i]] = i;
    groups_.resize(persons.size());
    for (std::size_t idx : data.split_indices(Split::train)) {
      groups_[label_of.at(data.tracklets[idx].person_id)].push_back(idx);
      ++train_count_;
    }
    if (groups_.size() < p_) {
      raise(ErrorCode::data,
            "PkSampler: " + std::to_string(groups_.size()) +
                " train identities cannot fill a batch of " +
                std::to_string(p_));
    }
  }

  std::size_t steps_per_epoch() const {
    return (train_count_ + p_ * k_ - 1) / (p_ * k_);
  }

  std::size_t num_identities() const { return groups_.size(); }

  std::vector<BatchEntry> next(Rng& rng) {
    if (queue_.size() < p_) {
      queue_.resize(groups_.size());
      std::iota(queue_.begin(), queue_.end(), std::size_t(0));
      rng.shuffle(queue_.begin(), queue_.end());
    }
    std::vector<BatchEntry> out;
    out.reserve(p_ * k_);
    for (std::size_t i = 0; i < p_; ++i) {
      const std::size_t label = queue_.back();
      queue_.pop_back();
      const auto& tracklets = groups_[label];
      if (tracklets.size() >= k_) {
        auto order = tracklets;
        rng.shuffle(order.begin(), order.end());
        for (std::size_t j = 0; j < k_; ++j) out.push_back({order[j], label});
      } else {
        for (std::size_t j = 0; j < k_; ++j) {
          out.push_back({tracklets[rng.index(tracklets.size())], label});
        }
      }
    }
    return out;
  }

 private:
  std::size_t p_, k_;
  std::size_t train_count_ = 0;
  std::vector<std::vector<std::size_t>> groups_;
  std::vector<std::size_t> queue_;
};

// Epoch loop: PK batches, joint classification/metric loss, Adam with step
// decay. All randomness flows from the seed; a fixed seed reproduces the
// loss trace bit-for-bit in 64-bit mode.
template <typename T>
class Trainer {
 public:
  Trainer(AsglModel<T>& model, const ClipDataset& data,
          const TrainConfig<T>& config)
      : model_(model),
        data_(data),
        config_(config),
        rng_(config.seed),
        sampler_(data, config.batch_p, config.batch_k),
        opt_(model.params()) {
    if (!(config_.lr0 > T(0))) {
      raise(ErrorCode::config, "Trainer: learning rate must be positive");
    }
    if (config_.batch_p < 2 || config_.batch_k < 2) {
      raise(ErrorCode::config,
            "Trainer: the triplet loss needs at least 2 identities and 2 "
            "clips per identity in every batch");
    }
    if (config_.clip_len != model.config().clip_len) {
      raise(ErrorCode::config,
            "Trainer: clip length " + std::to_string(config_.clip_len) +
                " does not match the model's " +
                std::to_string(model.config().clip_len));
    }
    if (data_.appearance_dim > 0 &&
        model.appearance_dim() != data_.appearance_dim) {
      raise(ErrorCode::config,
            "Trainer: appearance vectors are " +
                std::to_string(data_.appearance_dim) +
                "-dimensional but the model expects " +
                std::to_string(model.appearance_dim()));
    }
    if (sampler_.num_identities() != model.num_classes()) {
      raise(ErrorCode::config,
            "Trainer: " + std::to_string(sampler_.num_identities()) +
                " train identities but the classifier has " +
                std::to_string(model.num_classes()) + " classes");
    }
  }

  TrainResult run(std::ostream* log) {
    TrainResult res;
    const std::size_t steps_per_epoch = sampler_.steps_per_epoch();
    bool stop = steps_per_epoch == 0;
    for (std::size_t epoch = 0; !stop && epoch < config_.epochs; ++epoch) {
      const T lr = lr_schedule(config_.lr0, epoch, config_.lr_step_epochs,
                               config_.lr_decay);
      double sum = 0.0;
      std::size_t n = 0;
      for (std::size_t s = 0; s < steps_per_epoch; ++s) {
        if (config_.max_iterations != 0 &&
            res.steps >= config_.max_iterations) {
          stop = true;
          break;
        }
        const double l = train_step(lr);
        res.step_loss.push_back(l);
        sum += l;
        ++n;
        ++res.steps;
      }
      if (n == 0) break;
      res.epoch_loss.push_back(sum / static_cast<double>(n));
      if (log != nullptr) {
        *log << "epoch " << epoch << " lr " << std::setprecision(17)
             << static_cast<double>(lr) << " loss " << res.epoch_loss.back()
             << "\n";
      }
      epochs_done_ = epoch + 1;
    }
    return res;
  }

  double train_step(T lr) {
    const auto batch = sampler_.next(rng_);
    std::vector<Tensor<T>> clips, apps;
    std::vector<std::size_t> labels;
    clips.reserve(batch.size());
    labels.reserve(batch.size());
    for (const auto& e : batch) {
      const auto& tracklet = data_.tracklets[e.tracklet];
      clips.push_back(clip_tensor<T>(
          sample_clip(tracklet, config_.clip_len, config_.stride, rng_)));
      if (data_.appearance_dim > 0) {
        const auto& vec = data_.appearance.at(tracklet.tracklet_id);
        std::vector<T> vals(vec.begin(), vec.end());
        apps.push_back(
            Tensor<T>::from_data({data_.appearance_dim}, std::move(vals)));
      }
      labels.push_back(e.label);
    }
    opt_.zero_grad();
    auto out = model_.forward_batch(clips, apps);
    auto ce = cross_entropy_loss(out.logits, labels);
    auto tri =
        batch_hard_triplet(out.embeddings, labels, config_.loss.margin);
    auto loss = total_loss(ce, tri.loss, config_.loss);
    loss.backward();
    opt_.step(lr);
    return static_cast<double>(loss.item());
  }

  Adam<T>& optimizer() { return opt_; }
  Rng& rng() { return rng_; }
  PkSampler& sampler() { return sampler_; }
  std::size_t epochs_done() const { return epochs_done_; }

 private:
  AsglModel<T>& model_;
  const ClipDataset& data_;
  TrainConfig<T> config_;
  Rng rng_;
  PkSampler sampler_;
  Adam<T> opt_;
  std::size_t epochs_done_ = 0;
};

}  // namespace asgl
