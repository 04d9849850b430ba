#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "skillmatch/adjacency.hpp"
#include "skillmatch/backbone.hpp"
#include "skillmatch/checkpoint.hpp"
#include "skillmatch/corpus.hpp"
#include "skillmatch/optimizer.hpp"
#include "skillmatch/random.hpp"

namespace skillmatch {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  LossKind loss = LossKind::dual_a_info_nce;
  std::size_t epochs = 2;
  OptimizerConfig optimizer;
  double tau = 0.05;
  double margin = 1.0;
  std::size_t batch_projects = 1;
  std::size_t positives_per_project = 2;
  std::size_t negatives_per_project = 1;
  std::size_t weak_negatives_per_batch = 30;
  std::uint64_t seed = 1;
  // Stops after this many optimizer steps when non-zero.
  std::size_t max_steps = 0;
  bool keep_best_epoch = true;

  static TrainConfig triplet_preset();
  static TrainConfig info_nce_preset();
  static TrainConfig preset(LossKind kind);
};

std::string train_config_to_json(const TrainConfig& config);
// Fields absent from the JSON keep the values of `base`.
TrainConfig train_config_from_json(const std::string& json_text, TrainConfig base);

struct Batch {
  std::vector<const Document*> projects;
  std::vector<const Document*> freelancers;
  SignedAdjacency a_pf;
  SignedAdjacency a_ff;  // strictly upper-triangular
  std::size_t weak_negatives = 0;

  std::vector<std::string> ids() const;
};

// Draws batches from the interactions of one split part.
class BatchSampler {
 public:
  BatchSampler(const Corpus& corpus, const SplitPart& part, TrainConfig config);

  // Projects with enough positives and negatives for one batch slot, sorted by id.
  const std::vector<std::string>& eligible_projects() const { return eligible_; }

  // Random projects, then per-project positives/negatives (and weak negatives
  // when configured).
  Batch sample(Rng& rng, std::vector<std::string>* warnings = nullptr) const;
  // One pass over the eligible projects in shuffled order; an incomplete
  // trailing group is dropped.
  std::vector<Batch> epoch(Rng& rng, std::vector<std::string>* warnings = nullptr) const;

  Batch make_batch(const std::vector<std::string>& projects, Rng& rng,
                   std::vector<std::string>* warnings = nullptr) const;

 private:
  struct Pairs {
    std::vector<std::string> positives;
    std::vector<std::string> negatives;
  };

  const Corpus& corpus_;
  TrainConfig config_;
  std::map<std::string, Pairs> pairs_;
  std::vector<std::string> eligible_;
  std::vector<std::string> pool_;  // freelancers usable as weak negatives
};

// One batch under the triplet / InfoNCE preset compositions.
Batch sample_triplet_batch(const Corpus& corpus, const SplitPart& part, Rng& rng);
Batch sample_infonce_batch(const Corpus& corpus, const SplitPart& part, Rng& rng,
                           std::vector<std::string>* warnings = nullptr);

struct HistoryRow {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double loss = 0.0;
  double project_term = 0.0;
  double freelancer_term = 0.0;
};

struct EpochSummary {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  std::optional<double> validation_loss;
  std::size_t steps = 0;
  std::size_t skipped = 0;
};

// Caches backbone outputs per document; the backbone is frozen, so they never change.
class SectionCache {
 public:
  explicit SectionCache(const Backbone& backbone) : backbone_(backbone) {}
  const std::vector<Tensor<float>>& get(const Document& doc);
  std::size_t size() const { return cache_.size(); }

 private:
  const Backbone& backbone_;
  std::unordered_map<std::string, std::vector<Tensor<float>>> cache_;
};

struct TrainResult {
  Checkpoint model;
  std::vector<HistoryRow> history;
  std::vector<EpochSummary> epochs;
  std::size_t best_epoch = 0;
  std::uint64_t backbone_checksum_before = 0;
  std::uint64_t backbone_checksum_after = 0;
  std::vector<std::string> warnings;
};

// Batch loss with both towers bound as constants (no gradient); nullopt when
// the batch has no positive pair.
std::optional<double> evaluate_batch_loss(const Checkpoint& model, const Batch& batch, SectionCache& cache,
                                          const TrainConfig& config);

using StepCallback = std::function<void(const HistoryRow&)>;

// Trains both towers of `initial` on split.train, tracking validation loss on
// split.validation after each epoch. Only tower parameters change.
TrainResult train(const Corpus& corpus, const CorpusSplit& split, const TrainConfig& config, Checkpoint initial,
                  const Backbone& backbone, const StepCallback& on_step = {});

void write_history_csv(const std::vector<HistoryRow>& history, const std::filesystem::path& path);

}  // namespace skillmatch
