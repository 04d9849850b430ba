#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "skillmatch/checkpoint.hpp"
#include "skillmatch/corpus.hpp"
#include "skillmatch/encoder.hpp"
#include "skillmatch/index.hpp"

namespace skillmatch {

// Score mode: higher is better (cosine). Distance mode: lower is better (Euclidean).
enum class CompareMode { score, distance };

// Fraction of positives strictly better than every negative; nullopt when
// either list is empty.
std::optional<double> recall_single(std::span<const double> positive, std::span<const double> negative,
                                    CompareMode mode);
// 1 when the positive mean is strictly better than the negative mean.
std::optional<double> recall_all(std::span<const double> positive, std::span<const double> negative,
                                 CompareMode mode);

// Embedding-level variants: cosine scores or Euclidean distances to `project`.
std::optional<double> recall_single(std::span<const float> project, const std::vector<std::vector<float>>& positives,
                                    const std::vector<std::vector<float>>& negatives, CompareMode mode);
std::optional<double> recall_all(std::span<const float> project, const std::vector<std::vector<float>>& positives,
                                 const std::vector<std::vector<float>>& negatives, CompareMode mode);

// Mean over retrieved freelancers of |A_p ∩ A_f| / |A_p|; nullopt when A_p or
// the retrieved list is empty.
std::optional<double> a_overlap(const std::set<std::string>& project_terms,
                                const std::vector<std::set<std::string>>& retrieved_terms);

// |retrieved ∩ reference| / |reference|; nullopt for an empty reference.
std::optional<double> retrieved_fraction(const std::vector<std::string>& retrieved,
                                         const std::set<std::string>& reference);

struct ProjectMetrics {
  std::string project_id;
  std::string language;
  std::map<std::string, double> values;  // metrics that were defined for this project
};

struct MetricSummary {
  double mean = 0.0;
  std::size_t support = 0;
};

struct EvalReport {
  std::vector<std::size_t> k_list;
  std::vector<ProjectMetrics> projects;
  std::map<std::string, MetricSummary> overall;
  std::map<std::string, std::map<std::string, MetricSummary>> by_language;
  std::map<std::string, std::size_t> language_support;  // projects per language
};

// Metric names in report order for the given k values.
std::vector<std::string> metric_names(const std::vector<std::size_t>& k_list);

// Means over the projects for which each metric is defined, overall and per language.
EvalReport aggregate(std::vector<ProjectMetrics> projects, std::vector<std::size_t> k_list);

struct EvalConfig {
  std::vector<std::size_t> k_list{10, 100};
  SearchMode search = SearchMode::exact;
  HnswParams hnsw;
};

// All three settings over the test part: interacted pairs (recall), k-NN over
// every test freelancer (overlaps), and k-NN hits among interacted pairs.
// Cosine scoring when `normalization` is l2, Euclidean distance otherwise.
EvalReport evaluate_embeddings(const Corpus& corpus, const SplitPart& test,
                               const std::vector<DocumentEmbedding>& projects,
                               const std::vector<DocumentEmbedding>& freelancers, Normalization normalization,
                               const EvalConfig& config = {});

EvalReport evaluate(const Corpus& corpus, const SplitPart& test, const Checkpoint& model, const Backbone& backbone,
                    const EvalConfig& config = {});

std::string report_to_json(const EvalReport& report);
// Aligned text table: one row per group (overall first, then languages).
std::string report_to_table(const EvalReport& report);

}  // namespace skillmatch
