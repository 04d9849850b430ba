#include "skillmatch/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

namespace skillmatch {

TrainConfig TrainConfig::triplet_preset() {
  TrainConfig c;
  c.loss = LossKind::dual_a_triplets;
  c.epochs = 10;
  c.batch_projects = 2;
  c.positives_per_project = 2;
  c.negatives_per_project = 1;
  c.weak_negatives_per_batch = 0;
  return c;
}

TrainConfig TrainConfig::info_nce_preset() {
  TrainConfig c;
  c.loss = LossKind::dual_a_info_nce;
  c.epochs = 2;
  c.batch_projects = 1;
  c.positives_per_project = 2;
  c.negatives_per_project = 1;
  c.weak_negatives_per_batch = 30;
  return c;
}

TrainConfig TrainConfig::preset(LossKind kind) {
  return kind == LossKind::dual_a_triplets ? triplet_preset() : info_nce_preset();
}

std::string train_config_to_json(const TrainConfig& c) {
  nlohmann::json j{{"loss", std::string(to_string(c.loss))},
                   {"epochs", c.epochs},
                   {"optimizer", std::string(to_string(c.optimizer.kind))},
                   {"learning_rate", c.optimizer.learning_rate},
                   {"beta1", c.optimizer.beta1},
                   {"beta2", c.optimizer.beta2},
                   {"epsilon", c.optimizer.epsilon},
                   {"tau", c.tau},
                   {"margin", c.margin},
                   {"batch_projects", c.batch_projects},
                   {"positives_per_project", c.positives_per_project},
                   {"negatives_per_project", c.negatives_per_project},
                   {"weak_negatives_per_batch", c.weak_negatives_per_batch},
                   {"seed", c.seed},
                   {"max_steps", c.max_steps},
                   {"keep_best_epoch", c.keep_best_epoch}};
  return j.dump(2);
}

TrainConfig train_config_from_json(const std::string& json_text, TrainConfig c) {
  const auto j = nlohmann::json::parse(json_text);
  if (!j.is_object()) throw std::invalid_argument("train config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key == "loss") c.loss = parse_loss_kind(v.get<std::string>());
    else if (key == "epochs") c.epochs = v.get<std::size_t>();
    else if (key == "optimizer") c.optimizer.kind = parse_optimizer_kind(v.get<std::string>());
    else if (key == "learning_rate") c.optimizer.learning_rate = v.get<double>();
    else if (key == "beta1") c.optimizer.beta1 = v.get<double>();
    else if (key == "beta2") c.optimizer.beta2 = v.get<double>();
    else if (key == "epsilon") c.optimizer.epsilon = v.get<double>();
    else if (key == "tau") c.tau = v.get<double>();
    else if (key == "margin") c.margin = v.get<double>();
    else if (key == "batch_projects") c.batch_projects = v.get<std::size_t>();
    else if (key == "positives_per_project") c.positives_per_project = v.get<std::size_t>();
    else if (key == "negatives_per_project") c.negatives_per_project = v.get<std::size_t>();
    else if (key == "weak_negatives_per_batch") c.weak_negatives_per_batch = v.get<std::size_t>();
    else if (key == "seed") c.seed = v.get<std::uint64_t>();
    else if (key == "max_steps") c.max_steps = v.get<std::size_t>();
    else if (key == "keep_best_epoch") c.keep_best_epoch = v.get<bool>();
    else throw std::invalid_argument("train config: unknown field '" + key + "'");
  }
  if (!(c.tau > 0.0)) throw std::invalid_argument("train config: tau must be > 0");
  if (c.margin < 0.0) throw std::invalid_argument("train config: margin must be >= 0");
  if (c.batch_projects == 0) throw std::invalid_argument("train config: batch_projects must be >= 1");
  return c;
}

std::vector<std::string> Batch::ids() const {
  std::vector<std::string> out;
  for (const auto* d : projects) out.push_back(d->id);
  for (const auto* d : freelancers) out.push_back(d->id);
  return out;
}

BatchSampler::BatchSampler(const Corpus& corpus, const SplitPart& part, TrainConfig config)
    : corpus_(corpus), config_(std::move(config)) {
  for (const auto& it : part.interactions) {
    auto& p = pairs_[it.project_id];
    (it.label == Label::positive ? p.positives : p.negatives).push_back(it.freelancer_id);
  }
  for (auto& [pid, p] : pairs_) {
    std::sort(p.positives.begin(), p.positives.end());
    std::sort(p.negatives.begin(), p.negatives.end());
    if (p.positives.size() >= config_.positives_per_project && p.negatives.size() >= config_.negatives_per_project) {
      eligible_.push_back(pid);
    }
  }
  pool_.assign(part.freelancer_ids.begin(), part.freelancer_ids.end());
}

Batch BatchSampler::make_batch(const std::vector<std::string>& projects, Rng& rng,
                               std::vector<std::string>* warnings) const {
  Batch batch;
  std::vector<std::string> freelancer_ids;
  std::set<std::string> in_batch;
  std::vector<Interaction> sampled;
  std::set<std::string> positive_categories;
  auto add_freelancer = [&](const std::string& id) {
    if (in_batch.insert(id).second) freelancer_ids.push_back(id);
  };
  for (const auto& pid : projects) {
    auto it = pairs_.find(pid);
    if (it == pairs_.end()) throw TrainingError("project '" + pid + "' has no interactions in this split");
    const auto& p = it->second;
    if (p.positives.size() < config_.positives_per_project || p.negatives.size() < config_.negatives_per_project) {
      throw TrainingError("project '" + pid + "' is not eligible for batching");
    }
    batch.projects.push_back(&corpus_.proposal_at(pid));
    for (auto k : rng.sample_indices(p.positives.size(), config_.positives_per_project)) {
      sampled.push_back({pid, p.positives[k], Label::positive, 0});
      add_freelancer(p.positives[k]);
      positive_categories.insert(corpus_.profile_at(p.positives[k]).category);
    }
    for (auto k : rng.sample_indices(p.negatives.size(), config_.negatives_per_project)) {
      sampled.push_back({pid, p.negatives[k], Label::negative, 0});
      add_freelancer(p.negatives[k]);
    }
  }
  if (config_.weak_negatives_per_batch > 0) {
    std::vector<std::string> candidates;
    for (const auto& f : pool_) {
      if (in_batch.count(f)) continue;
      if (positive_categories.count(corpus_.profile_at(f).category)) continue;
      candidates.push_back(f);
    }
    std::size_t n = config_.weak_negatives_per_batch;
    if (candidates.size() < n) {
      if (warnings) {
        warnings->push_back("only " + std::to_string(candidates.size()) + " weak-negative candidates available, " +
                            std::to_string(n) + " requested");
      }
      n = candidates.size();
    }
    for (auto k : rng.sample_indices(candidates.size(), n)) add_freelancer(candidates[k]);
    batch.weak_negatives = n;
  }
  std::map<std::string, std::string> categories;
  for (const auto& f : freelancer_ids) {
    const auto& doc = corpus_.profile_at(f);
    batch.freelancers.push_back(&doc);
    categories[f] = doc.category;
  }
  std::vector<std::string> project_ids(projects.begin(), projects.end());
  batch.a_pf = build_interaction_adjacency(sampled, project_ids, freelancer_ids);
  batch.a_ff = transitive_freelancer_adjacency(batch.a_pf);
  if (config_.weak_negatives_per_batch > 0) batch.a_ff = add_weak_negatives(batch.a_ff, categories);
  check_adjacency(batch.a_pf, false);
  check_adjacency(batch.a_ff, true);
  return batch;
}

Batch BatchSampler::sample(Rng& rng, std::vector<std::string>* warnings) const {
  if (eligible_.size() < config_.batch_projects) {
    throw TrainingError("only " + std::to_string(eligible_.size()) + " eligible projects, " +
                        std::to_string(config_.batch_projects) + " needed per batch");
  }
  std::vector<std::string> chosen;
  for (auto k : rng.sample_indices(eligible_.size(), config_.batch_projects)) chosen.push_back(eligible_[k]);
  return make_batch(chosen, rng, warnings);
}

std::vector<Batch> BatchSampler::epoch(Rng& rng, std::vector<std::string>* warnings) const {
  std::vector<std::string> order = eligible_;
  rng.shuffle(order);
  std::vector<Batch> out;
  for (std::size_t i = 0; i + config_.batch_projects <= order.size(); i += config_.batch_projects) {
    std::vector<std::string> group(order.begin() + static_cast<std::ptrdiff_t>(i),
                                   order.begin() + static_cast<std::ptrdiff_t>(i + config_.batch_projects));
    out.push_back(make_batch(group, rng, warnings));
  }
  return out;
}

Batch sample_triplet_batch(const Corpus& corpus, const SplitPart& part, Rng& rng) {
  return BatchSampler(corpus, part, TrainConfig::triplet_preset()).sample(rng);
}

Batch sample_infonce_batch(const Corpus& corpus, const SplitPart& part, Rng& rng, std::vector<std::string>* warnings) {
  return BatchSampler(corpus, part, TrainConfig::info_nce_preset()).sample(rng, warnings);
}

const std::vector<Tensor<float>>& SectionCache::get(const Document& doc) {
  const std::string key = std::string(to_string(doc.kind)) + ":" + doc.id;
  auto it = cache_.find(key);
  if (it == cache_.end()) it = cache_.emplace(key, backbone_.encode_sections(doc)).first;
  return it->second;
}

namespace {

Var<float> encode_stack(const TowerVars<float>& tower, const std::vector<const Document*>& docs, SectionCache& cache,
                        Tape<float>& tape, Normalization norm) {
  std::vector<Var<float>> rows;
  rows.reserve(docs.size());
  for (const auto* doc : docs) {
    std::vector<Var<float>> sections;
    for (const auto& s : cache.get(*doc)) sections.push_back(tape.constant_ref(s));
    rows.push_back(tower_forward(tower, sections, norm));
  }
  return concat_rows(rows);
}

LossTerms<float> batch_loss(const TowerVars<float>& freelancer, const TowerVars<float>& project, const Batch& batch,
                            SectionCache& cache, Tape<float>& tape, const TrainConfig& config, Normalization norm) {
  const auto p = encode_stack(project, batch.projects, cache, tape, norm);
  const auto f = encode_stack(freelancer, batch.freelancers, cache, tape, norm);
  if (config.loss == LossKind::dual_a_triplets) {
    return dual_a_triplets(p, f, batch.a_pf, batch.a_ff, static_cast<float>(config.margin));
  }
  return dual_a_info_nce(p, f, batch.a_pf, batch.a_ff, static_cast<float>(config.tau));
}

double term_value(const std::optional<Var<float>>& v) { return v ? static_cast<double>(v->value()[0]) : 0.0; }

}  // namespace

std::optional<double> evaluate_batch_loss(const Checkpoint& model, const Batch& batch, SectionCache& cache,
                                          const TrainConfig& config) {
  Tape<float> tape;
  const auto fv = bind_tower_constants(tape, model.freelancer);
  const auto pv = bind_tower_constants(tape, model.project);
  const auto terms = batch_loss(fv, pv, batch, cache, tape, config, model.normalization);
  if (!terms.total) return std::nullopt;
  return term_value(terms.total);
}

TrainResult train(const Corpus& corpus, const CorpusSplit& split, const TrainConfig& config, Checkpoint initial,
                  const Backbone& backbone, const StepCallback& on_step) {
  TrainResult result;
  result.model = std::move(initial);
  result.model.loss = config.loss;
  result.model.normalization = config.loss == LossKind::dual_a_info_nce ? Normalization::l2 : Normalization::none;
  result.backbone_checksum_before = backbone.checksum();

  BatchSampler sampler(corpus, split.train, config);
  if (sampler.eligible_projects().size() < config.batch_projects) {
    throw TrainingError("training split has " + std::to_string(sampler.eligible_projects().size()) +
                        " eligible projects; at least " + std::to_string(config.batch_projects) + " required");
  }
  BatchSampler val_sampler(corpus, split.validation, config);
  SectionCache cache(backbone);

  auto& model = result.model;
  std::vector<Parameter<float>*> params = model.freelancer.parameters();
  for (auto* p : model.project.parameters()) params.push_back(p);
  Optimizer<float> optimizer(config.optimizer, params);
  optimizer.zero_grad();

  Rng rng(mix_seed(config.seed, 1));
  std::optional<double> best_val;
  std::optional<Checkpoint> best_model;
  std::size_t step = 0;
  bool stop = false;

  for (std::size_t epoch = 1; epoch <= config.epochs && !stop; ++epoch) {
    EpochSummary summary;
    summary.epoch = epoch;
    double loss_sum = 0.0;
    for (const auto& batch : sampler.epoch(rng, &result.warnings)) {
      Tape<float> tape;
      const auto fv = bind_tower(tape, model.freelancer);
      const auto pv = bind_tower(tape, model.project);
      const auto terms = batch_loss(fv, pv, batch, cache, tape, config, model.normalization);
      if (!terms.total) {
        ++summary.skipped;
        continue;
      }
      const double loss = term_value(terms.total);
      if (!std::isfinite(loss)) {
        std::string ids;
        for (const auto& id : batch.ids()) ids += (ids.empty() ? "" : ",") + id;
        throw TrainingError("non-finite loss at step " + std::to_string(step + 1) + " (epoch " +
                            std::to_string(epoch) + "); batch documents: " + ids);
      }
      tape.backward(*terms.total);
      optimizer.step();
      optimizer.zero_grad();
      ++step;
      ++summary.steps;
      loss_sum += loss;
      HistoryRow row{step, epoch, loss, term_value(terms.project_term), term_value(terms.freelancer_term)};
      result.history.push_back(row);
      if (on_step) on_step(row);
      if (config.max_steps != 0 && step >= config.max_steps) {
        stop = true;
        break;
      }
    }
    summary.train_loss = summary.steps ? loss_sum / static_cast<double>(summary.steps) : 0.0;

    // Same validation batches every epoch, so losses are comparable.
    if (val_sampler.eligible_projects().size() >= config.batch_projects) {
      Rng val_rng(mix_seed(config.seed, 2));
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto& batch : val_sampler.epoch(val_rng)) {
        if (auto v = evaluate_batch_loss(model, batch, cache, config)) {
          sum += *v;
          ++n;
        }
      }
      if (n > 0) summary.validation_loss = sum / static_cast<double>(n);
    }
    if (config.keep_best_epoch && summary.validation_loss &&
        (!best_val || *summary.validation_loss < *best_val)) {
      best_val = summary.validation_loss;
      best_model = model;
      result.best_epoch = epoch;
    }
    result.epochs.push_back(summary);
  }

  if (best_model) {
    model = std::move(*best_model);
  } else {
    result.best_epoch = result.epochs.empty() ? 0 : result.epochs.back().epoch;
  }
  for (auto* p : model.freelancer.parameters()) p->grad = Tensor<float>();
  for (auto* p : model.project.parameters()) p->grad = Tensor<float>();
  result.backbone_checksum_after = backbone.checksum();
  return result;
}

void write_history_csv(const std::vector<HistoryRow>& history, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "step,epoch,loss,project_term,freelancer_term\n";
  out.precision(9);
  for (const auto& r : history) {
    out << r.step << ',' << r.epoch << ',' << r.loss << ',' << r.project_term << ',' << r.freelancer_term << '\n';
  }
}

}  // namespace skillmatch
