#include "skillmatch/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace skillmatch {

namespace {

bool better(double a, double b, CompareMode mode) { return mode == CompareMode::score ? a > b : a < b; }

double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double cosine(std::span<const float> a, std::span<const float> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += double(a[i]) * b[i];
    aa += double(a[i]) * a[i];
    bb += double(b[i]) * b[i];
  }
  const double denom = std::sqrt(aa) * std::sqrt(bb);
  return denom > 0 ? ab / denom : 0.0;
}

double euclidean(std::span<const float> a, std::span<const float> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = double(a[i]) - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

std::vector<double> compare_values(std::span<const float> project, const std::vector<std::vector<float>>& others,
                                   CompareMode mode) {
  std::vector<double> out;
  out.reserve(others.size());
  for (const auto& o : others) {
    if (o.size() != project.size()) throw std::invalid_argument("embedding dimension mismatch");
    out.push_back(mode == CompareMode::score ? cosine(project, o) : euclidean(project, o));
  }
  return out;
}

}  // namespace

std::optional<double> recall_single(std::span<const double> positive, std::span<const double> negative,
                                    CompareMode mode) {
  if (positive.empty() || negative.empty()) return std::nullopt;
  const double hardest = mode == CompareMode::score ? *std::max_element(negative.begin(), negative.end())
                                                    : *std::min_element(negative.begin(), negative.end());
  std::size_t wins = 0;
  for (double p : positive) wins += better(p, hardest, mode) ? 1 : 0;
  return static_cast<double>(wins) / static_cast<double>(positive.size());
}

std::optional<double> recall_all(std::span<const double> positive, std::span<const double> negative,
                                 CompareMode mode) {
  if (positive.empty() || negative.empty()) return std::nullopt;
  return better(mean(positive), mean(negative), mode) ? 1.0 : 0.0;
}

std::optional<double> recall_single(std::span<const float> project, const std::vector<std::vector<float>>& positives,
                                    const std::vector<std::vector<float>>& negatives, CompareMode mode) {
  const auto p = compare_values(project, positives, mode);
  const auto n = compare_values(project, negatives, mode);
  return recall_single(std::span<const double>(p), std::span<const double>(n), mode);
}

std::optional<double> recall_all(std::span<const float> project, const std::vector<std::vector<float>>& positives,
                                 const std::vector<std::vector<float>>& negatives, CompareMode mode) {
  const auto p = compare_values(project, positives, mode);
  const auto n = compare_values(project, negatives, mode);
  return recall_all(std::span<const double>(p), std::span<const double>(n), mode);
}

std::optional<double> a_overlap(const std::set<std::string>& project_terms,
                                const std::vector<std::set<std::string>>& retrieved_terms) {
  if (project_terms.empty() || retrieved_terms.empty()) return std::nullopt;
  double total = 0.0;
  for (const auto& terms : retrieved_terms) {
    std::size_t shared = 0;
    for (const auto& t : project_terms) shared += terms.count(t);
    total += static_cast<double>(shared) / static_cast<double>(project_terms.size());
  }
  return total / static_cast<double>(retrieved_terms.size());
}

std::optional<double> retrieved_fraction(const std::vector<std::string>& retrieved,
                                         const std::set<std::string>& reference) {
  if (reference.empty()) return std::nullopt;
  const std::set<std::string> unique(retrieved.begin(), retrieved.end());
  std::size_t hits = 0;
  for (const auto& id : unique) hits += reference.count(id);
  return static_cast<double>(hits) / static_cast<double>(reference.size());
}

std::vector<std::string> metric_names(const std::vector<std::size_t>& k_list) {
  std::vector<std::string> out{"recall_single", "recall_all"};
  for (const char* base : {"category_overlap", "skills_overlap", "retrieved_pos", "retrieved_neg"}) {
    for (auto k : k_list) out.push_back(std::string(base) + "@" + std::to_string(k));
  }
  return out;
}

EvalReport aggregate(std::vector<ProjectMetrics> projects, std::vector<std::size_t> k_list) {
  EvalReport report;
  report.k_list = std::move(k_list);
  std::map<std::string, std::map<std::string, std::pair<double, std::size_t>>> sums;  // group -> metric
  for (const auto& p : projects) {
    ++report.language_support[p.language];
    for (const auto& [name, value] : p.values) {
      for (const std::string& group : {std::string(), "lang:" + p.language}) {
        auto& s = sums[group][name];
        s.first += value;
        ++s.second;
      }
    }
  }
  for (const auto& [group, metrics] : sums) {
    for (const auto& [name, s] : metrics) {
      const MetricSummary summary{s.first / static_cast<double>(s.second), s.second};
      if (group.empty()) {
        report.overall[name] = summary;
      } else {
        report.by_language[group.substr(5)][name] = summary;
      }
    }
  }
  report.projects = std::move(projects);
  return report;
}

EvalReport evaluate_embeddings(const Corpus& corpus, const SplitPart& test,
                               const std::vector<DocumentEmbedding>& projects,
                               const std::vector<DocumentEmbedding>& freelancers, Normalization normalization,
                               const EvalConfig& config) {
  if (config.k_list.empty()) throw std::invalid_argument("evaluate: empty k list");
  const CompareMode mode = normalization == Normalization::l2 ? CompareMode::score : CompareMode::distance;
  const IndexMetric metric = normalization == Normalization::l2 ? IndexMetric::cosine : IndexMetric::euclidean;

  std::unordered_map<std::string, const DocumentEmbedding*> project_emb, freelancer_emb;
  for (const auto& e : projects) project_emb[e.doc_id] = &e;
  for (const auto& e : freelancers) freelancer_emb[e.doc_id] = &e;

  std::vector<IndexedVector> pool;
  std::unordered_map<std::string, std::set<std::string>> skills;
  for (const auto& fid : test.freelancer_ids) {
    auto it = freelancer_emb.find(fid);
    if (it == freelancer_emb.end()) throw std::invalid_argument("evaluate: no embedding for freelancer '" + fid + "'");
    pool.push_back({fid, it->second->vector, {{"category", it->second->category}, {"language", it->second->language}}});
    skills[fid] = skill_terms(corpus.profile_at(fid));
  }
  const VectorIndex index(std::move(pool), metric, config.hnsw);
  const std::size_t k_max = *std::max_element(config.k_list.begin(), config.k_list.end());

  std::map<std::string, std::pair<std::set<std::string>, std::set<std::string>>> labels;  // project -> (pos, neg)
  for (const auto& it : test.interactions) {
    auto& l = labels[it.project_id];
    (it.label == Label::positive ? l.first : l.second).insert(it.freelancer_id);
  }

  std::vector<ProjectMetrics> rows;
  for (const auto& pid : test.project_ids) {
    auto pe = project_emb.find(pid);
    if (pe == project_emb.end()) throw std::invalid_argument("evaluate: no embedding for project '" + pid + "'");
    const auto& proposal = corpus.proposal_at(pid);
    const std::span<const float> q(pe->second->vector);
    ProjectMetrics row{pid, proposal.language, {}};
    const auto& [pos, neg] = labels[pid];

    std::vector<std::vector<float>> pos_vecs, neg_vecs;
    for (const auto& f : pos) pos_vecs.push_back(freelancer_emb.at(f)->vector);
    for (const auto& f : neg) neg_vecs.push_back(freelancer_emb.at(f)->vector);
    if (auto v = recall_single(q, pos_vecs, neg_vecs, mode)) row.values["recall_single"] = *v;
    if (auto v = recall_all(q, pos_vecs, neg_vecs, mode)) row.values["recall_all"] = *v;

    const auto hits = index.knn(q, k_max, {}, config.search);
    const std::set<std::string> category{proposal.category};
    const auto project_skills = skill_terms(proposal);
    for (auto k : config.k_list) {
      std::vector<std::string> top;
      std::vector<std::set<std::string>> cats, sk;
      for (std::size_t i = 0; i < std::min(k, hits.size()); ++i) {
        top.push_back(hits[i].doc_id);
        cats.push_back({corpus.profile_at(hits[i].doc_id).category});
        sk.push_back(skills.at(hits[i].doc_id));
      }
      const std::string at = "@" + std::to_string(k);
      if (auto v = a_overlap(category, cats)) row.values["category_overlap" + at] = *v;
      if (auto v = a_overlap(project_skills, sk)) row.values["skills_overlap" + at] = *v;
      if (auto v = retrieved_fraction(top, pos)) row.values["retrieved_pos" + at] = *v;
      if (auto v = retrieved_fraction(top, neg)) row.values["retrieved_neg" + at] = *v;
    }
    rows.push_back(std::move(row));
  }
  return aggregate(std::move(rows), config.k_list);
}

EvalReport evaluate(const Corpus& corpus, const SplitPart& test, const Checkpoint& model, const Backbone& backbone,
                    const EvalConfig& config) {
  std::vector<DocumentEmbedding> projects, freelancers;
  for (const auto& pid : test.project_ids) projects.push_back(model.encode(corpus.proposal_at(pid), backbone));
  for (const auto& fid : test.freelancer_ids) freelancers.push_back(model.encode(corpus.profile_at(fid), backbone));
  return evaluate_embeddings(corpus, test, projects, freelancers, model.normalization, config);
}

std::string report_to_json(const EvalReport& report) {
  auto summaries = [](const std::map<std::string, MetricSummary>& m) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [name, s] : m) j[name] = {{"mean", s.mean}, {"support", s.support}};
    return j;
  };
  nlohmann::json j;
  j["k"] = report.k_list;
  j["overall"] = summaries(report.overall);
  j["by_language"] = nlohmann::json::object();
  for (const auto& [lang, m] : report.by_language) {
    j["by_language"][lang] = {{"projects", report.language_support.at(lang)}, {"metrics", summaries(m)}};
  }
  j["projects"] = nlohmann::json::array();
  for (const auto& p : report.projects) {
    j["projects"].push_back({{"project_id", p.project_id}, {"language", p.language}, {"metrics", p.values}});
  }
  return j.dump(2);
}

std::string report_to_table(const EvalReport& report) {
  const auto names = metric_names(report.k_list);
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"group", "projects"};
  header.insert(header.end(), names.begin(), names.end());
  cells.push_back(header);
  auto add_row = [&](const std::string& group, std::size_t n, const std::map<std::string, MetricSummary>& m) {
    std::vector<std::string> row{group, std::to_string(n)};
    for (const auto& name : names) {
      auto it = m.find(name);
      if (it == m.end()) {
        row.push_back("-");
      } else {
        std::ostringstream s;
        s << std::fixed << std::setprecision(3) << it->second.mean;
        row.push_back(s.str());
      }
    }
    cells.push_back(std::move(row));
  };
  add_row("all", report.projects.size(), report.overall);
  for (const auto& [lang, m] : report.by_language) add_row(lang, report.language_support.at(lang), m);

  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << "  ";
      if (c == 0) {
        out << std::left << std::setw(static_cast<int>(width[c])) << row[c];
      } else {
        out << std::right << std::setw(static_cast<int>(width[c])) << row[c];
      }
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace skillmatch
