#include "skillmatch/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "skillmatch/random.hpp"
#include "skillmatch/tokenizer.hpp"

namespace skillmatch {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(
    SynthConfig, n_categories, n_families, skills_per_category, n_generic_skills, n_freelancers,
    n_projects, positives_min, positives_max, negatives_min, negatives_max, hard_negative_share,
    min_positive_overlap, n_languages, primary_language_share, profile_skills_min,
    profile_skills_max, ideal_skills, mandatory_min, mandatory_max, bonus_min, bonus_max,
    description_words_min, description_words_max, category_word_share, off_category_skill_rate,
    empty_section_rate, start_ts, project_interval_s, vocab_size, render_dialects)

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("synth config: " + what);
}

}  // namespace

void SynthConfig::validate() const {
  require(n_categories >= 1, "n_categories must be >= 1");
  require(n_families >= 1 && n_families <= n_categories, "n_families must lie in [1, n_categories]");
  require(skills_per_category >= 1 && n_generic_skills >= 0, "skill pool sizes must be positive");
  require(n_freelancers >= 1 && n_projects >= 1, "need at least one freelancer and one project");
  require(positives_min >= 0 && positives_min <= positives_max, "bad positives range");
  require(negatives_min >= 0 && negatives_min <= negatives_max, "bad negatives range");
  require(hard_negative_share >= 0.0 && hard_negative_share <= 1.0, "hard_negative_share must lie in [0, 1]");
  require(n_languages >= 1 && n_languages <= static_cast<int>(synth_language_tags().size()),
          "n_languages must lie in [1, " + std::to_string(synth_language_tags().size()) + "]");
  require(primary_language_share >= 0.0 && primary_language_share <= 1.0,
          "primary_language_share must lie in [0, 1]");
  require(profile_skills_min >= 1 && profile_skills_min <= profile_skills_max &&
              profile_skills_max <= skills_per_category,
          "profile skills range must lie in [1, skills_per_category]");
  require(ideal_skills >= 1 && ideal_skills <= skills_per_category, "ideal_skills must lie in [1, skills_per_category]");
  require(mandatory_min >= 1 && mandatory_min <= mandatory_max, "bad mandatory range");
  require(bonus_min >= 0 && bonus_min <= bonus_max, "bad bonus range");
  require(mandatory_max + bonus_max <= ideal_skills, "mandatory_max + bonus_max must not exceed ideal_skills");
  require(description_words_min >= 0 && description_words_min <= description_words_max,
          "bad description length range");
  require(category_word_share >= 0.0 && category_word_share <= 1.0, "category_word_share must lie in [0, 1]");
  require(off_category_skill_rate >= 0.0 && off_category_skill_rate < 1.0,
          "off_category_skill_rate must lie in [0, 1)");
  require(empty_section_rate >= 0.0 && empty_section_rate < 1.0, "empty_section_rate must lie in [0, 1)");
  require(project_interval_s >= 4, "project_interval_s must be >= 4");
  require(vocab_size >= 1024, "vocab_size must be >= 1024");
}

SynthConfig synth_config_from_json(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  const nlohmann::json known = SynthConfig{};
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw std::invalid_argument("synth config: unknown field '" + key + "'");
  }
  SynthConfig config = j.get<SynthConfig>();
  config.validate();
  return config;
}

std::string synth_config_to_json(const SynthConfig& config) {
  return nlohmann::json(config).dump(2);
}

SynthConfig load_synth_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open synth config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return synth_config_from_json(ss.str());
}

const std::vector<std::string>& synth_language_tags() {
  static const std::vector<std::string> tags{"fr", "es", "en", "de", "nl", "it"};
  return tags;
}

namespace {

// Produces pronounceable pseudo-words whose token ids are pairwise distinct.
class WordFactory {
 public:
  WordFactory(Rng& rng, const Tokenizer& tokenizer) : rng_(rng), tokenizer_(tokenizer) {}

  std::string make() {
    static constexpr std::string_view kConsonants = "bdfgklmnprstvz";
    static constexpr std::string_view kVowels = "aeiou";
    for (;;) {
      std::string w;
      const auto syllables = 2 + rng_.below(2);
      for (std::uint64_t s = 0; s < syllables; ++s) {
        w.push_back(kConsonants[rng_.below(kConsonants.size())]);
        w.push_back(kVowels[rng_.below(kVowels.size())]);
      }
      if (rng_.bernoulli(0.3)) w.push_back(kConsonants[rng_.below(kConsonants.size())]);
      const TokenId id = tokenizer_.word_id(w);
      if (ids_.insert(id).second) return w;
    }
  }

  std::vector<std::string> make_many(std::size_t n) {
    std::vector<std::string> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(make());
    return out;
  }

 private:
  Rng& rng_;
  const Tokenizer& tokenizer_;
  std::unordered_set<TokenId> ids_;
};

struct Vocabulary {
  std::vector<std::string> category_labels;
  std::vector<std::string> family_labels;
  std::vector<std::vector<std::string>> title_words;        // per category
  std::vector<std::vector<std::string>> description_words;  // per category
  std::vector<std::string> filler;
  std::vector<std::string> seniority;
  std::vector<std::vector<std::string>> skills;  // per category
  std::vector<std::string> generic_skills;
  // dialect[language][latent word] -> surface word; language 0 is the latent form
  std::vector<std::map<std::string, std::string>> dialect;
};

struct LatentDoc {
  std::vector<std::pair<std::string, std::vector<std::string>>> word_sections;
  std::vector<std::string> skills;
  std::vector<std::string> bonus;
};

class Generator {
 public:
  Generator(const SynthConfig& config, std::uint64_t seed)
      : config_(config),
        rng_(seed),
        tokenizer_(static_cast<std::size_t>(config.vocab_size)),
        words_(rng_, tokenizer_) {}

  Corpus run();

 private:
  void build_vocabulary();
  std::size_t pick_language();
  std::vector<std::string> draw_skills(std::size_t category, std::size_t count, bool noisy = true);
  std::vector<std::string> description(std::size_t category);
  std::string render(const std::vector<std::string>& words, std::size_t language) const;
  Document make_profile(std::size_t i);
  Document make_proposal(std::size_t i);
  void add_interactions(std::size_t project, std::vector<Interaction>& out);

  const SynthConfig& config_;
  Rng rng_;
  Tokenizer tokenizer_;
  WordFactory words_;
  Vocabulary vocab_;
  Lexicon lexicon_;

  std::vector<Document> profiles_;
  std::vector<std::size_t> profile_category_;
  std::vector<std::set<std::string>> profile_skills_;
  std::vector<Document> proposals_;
  std::vector<std::size_t> proposal_category_;
  std::vector<std::set<std::string>> proposal_skills_;
  std::vector<std::vector<std::size_t>> by_category_;
};

void Generator::build_vocabulary() {
  const auto c = static_cast<std::size_t>(config_.n_categories);
  vocab_.category_labels = words_.make_many(c);
  vocab_.family_labels = words_.make_many(static_cast<std::size_t>(config_.n_families));
  vocab_.filler = words_.make_many(150);
  vocab_.seniority = words_.make_many(8);
  for (std::size_t k = 0; k < c; ++k) {
    vocab_.title_words.push_back(words_.make_many(4));
    vocab_.description_words.push_back(words_.make_many(25));
    std::vector<std::string> pool;
    for (int s = 0; s < config_.skills_per_category; ++s) {
      std::string skill = words_.make();
      if (rng_.bernoulli(0.4)) skill += " " + words_.make();
      pool.push_back(std::move(skill));
    }
    vocab_.skills.push_back(std::move(pool));
  }
  for (int s = 0; s < config_.n_generic_skills; ++s) vocab_.generic_skills.push_back(words_.make());

  std::vector<std::string> latent;
  auto append = [&latent](const std::vector<std::string>& v) { latent.insert(latent.end(), v.begin(), v.end()); };
  append(vocab_.category_labels);
  append(vocab_.family_labels);
  append(vocab_.filler);
  append(vocab_.seniority);
  for (const auto& v : vocab_.title_words) append(v);
  for (const auto& v : vocab_.description_words) append(v);

  vocab_.dialect.resize(static_cast<std::size_t>(config_.n_languages));
  for (const auto& w : latent) vocab_.dialect[0][w] = w;
  for (std::size_t lang = 1; lang < vocab_.dialect.size(); ++lang) {
    for (const auto& w : latent) {
      std::string surface = words_.make();
      lexicon_[surface] = w;
      vocab_.dialect[lang][w] = std::move(surface);
    }
  }
}

std::size_t Generator::pick_language() {
  const auto n = static_cast<std::size_t>(config_.n_languages);
  if (n == 1 || rng_.bernoulli(config_.primary_language_share)) return 0;
  return 1 + rng_.below(n - 1);
}

std::vector<std::string> Generator::draw_skills(std::size_t category, std::size_t count, bool noisy) {
  std::vector<std::string> out;
  const auto& own = vocab_.skills[category];
  std::size_t guard = 0;
  while (out.size() < count && guard++ < 100000) {
    std::string skill;
    if (noisy && rng_.bernoulli(config_.off_category_skill_rate)) {
      const bool generic = vocab_.generic_skills.empty() ? false : rng_.bernoulli(0.5);
      if (generic || vocab_.skills.size() == 1) {
        if (vocab_.generic_skills.empty()) continue;
        skill = vocab_.generic_skills[rng_.below(vocab_.generic_skills.size())];
      } else {
        std::size_t other = rng_.below(vocab_.skills.size() - 1);
        if (other >= category) ++other;
        skill = vocab_.skills[other][rng_.below(vocab_.skills[other].size())];
      }
    } else {
      skill = own[rng_.below(own.size())];
    }
    if (std::find(out.begin(), out.end(), skill) == out.end()) out.push_back(std::move(skill));
  }
  return out;
}

std::vector<std::string> Generator::description(std::size_t category) {
  std::vector<std::string> out;
  if (rng_.bernoulli(config_.empty_section_rate)) return out;
  const auto n = rng_.between(config_.description_words_min, config_.description_words_max);
  for (std::int64_t i = 0; i < n; ++i) {
    if (rng_.bernoulli(config_.category_word_share)) {
      const auto& pool = vocab_.description_words[category];
      out.push_back(pool[rng_.below(pool.size())]);
    } else {
      out.push_back(vocab_.filler[rng_.below(vocab_.filler.size())]);
    }
  }
  return out;
}

std::string Generator::render(const std::vector<std::string>& words, std::size_t language) const {
  const std::size_t lang = config_.render_dialects ? language : 0;
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out.push_back(' ');
    out += vocab_.dialect[lang].at(w);
  }
  return out;
}

std::string join_skills(const std::vector<std::string>& skills) {
  std::string out;
  for (const auto& s : skills) {
    if (!out.empty()) out += ", ";
    out += s;
  }
  return out;
}

Document Generator::make_profile(std::size_t i) {
  const std::size_t category = rng_.below(static_cast<std::size_t>(config_.n_categories));
  const std::size_t language = pick_language();
  const std::size_t family = category % static_cast<std::size_t>(config_.n_families);

  const auto n_skills = static_cast<std::size_t>(rng_.between(config_.profile_skills_min, config_.profile_skills_max));
  auto skills = draw_skills(category, n_skills);

  std::vector<std::string> title;
  if (rng_.bernoulli(0.5)) title.push_back(vocab_.seniority[rng_.below(vocab_.seniority.size())]);
  title.push_back(vocab_.title_words[category][rng_.below(vocab_.title_words[category].size())]);
  auto desc = description(category);

  char id[16];
  std::snprintf(id, sizeof(id), "f%05zu", i);
  Document doc;
  doc.id = id;
  doc.kind = DocumentKind::profile;
  doc.category = vocab_.category_labels[category];
  doc.language = synth_language_tags()[language];
  doc.sections = {{"job_title", render(title, language)},
                  {"description", render(desc, language)},
                  {"job_family", render({vocab_.family_labels[family]}, language)},
                  {"job_category", render({vocab_.category_labels[category]}, language)},
                  {"skills", join_skills(skills)}};
  profile_category_.push_back(category);
  profile_skills_.emplace_back(skills.begin(), skills.end());
  return doc;
}

Document Generator::make_proposal(std::size_t i) {
  const std::size_t category = rng_.below(static_cast<std::size_t>(config_.n_categories));
  const std::size_t language = pick_language();
  const std::size_t family = category % static_cast<std::size_t>(config_.n_families);

  // Hidden "ideal freelancer" skill set, drawn from the category pool only;
  // the proposal discloses a subset of it.
  auto ideal = draw_skills(category, static_cast<std::size_t>(config_.ideal_skills), false);
  rng_.shuffle(ideal);
  const auto n_mandatory = static_cast<std::size_t>(rng_.between(config_.mandatory_min, config_.mandatory_max));
  const auto n_bonus = static_cast<std::size_t>(rng_.between(config_.bonus_min, config_.bonus_max));
  std::vector<std::string> mandatory(ideal.begin(), ideal.begin() + static_cast<std::ptrdiff_t>(n_mandatory));
  std::vector<std::string> bonus(ideal.begin() + static_cast<std::ptrdiff_t>(n_mandatory),
                                 ideal.begin() + static_cast<std::ptrdiff_t>(n_mandatory + n_bonus));

  const auto& titles = vocab_.title_words[category];
  std::vector<std::string> mission{titles[rng_.below(titles.size())]};
  const auto extra = rng_.between(1, 2);
  for (std::int64_t k = 0; k < extra; ++k) mission.push_back(vocab_.filler[rng_.below(vocab_.filler.size())]);
  std::vector<std::string> job_title{titles[rng_.below(titles.size())]};
  auto desc = description(category);

  char id[16];
  std::snprintf(id, sizeof(id), "p%04zu", i);
  Document doc;
  doc.id = id;
  doc.kind = DocumentKind::proposal;
  doc.category = vocab_.category_labels[category];
  doc.language = synth_language_tags()[language];
  doc.sections = {{"mission_title", render(mission, language)},
                  {"job_title", render(job_title, language)},
                  {"description", render(desc, language)},
                  {"job_family", render({vocab_.family_labels[family]}, language)},
                  {"job_category", render({vocab_.category_labels[category]}, language)},
                  {"mandatory_skills", join_skills(mandatory)},
                  {"bonus_skills", join_skills(bonus)}};
  proposal_category_.push_back(category);
  std::set<std::string> required(mandatory.begin(), mandatory.end());
  required.insert(bonus.begin(), bonus.end());
  proposal_skills_.push_back(std::move(required));
  return doc;
}

std::size_t overlap(const std::set<std::string>& a, const std::set<std::string>& b) {
  std::size_t n = 0;
  for (const auto& s : a) n += b.count(s);
  return n;
}

void Generator::add_interactions(std::size_t project, std::vector<Interaction>& out) {
  const std::size_t category = proposal_category_[project];
  const auto& required = proposal_skills_[project];
  std::vector<std::size_t> strong, weak_same, other;
  for (std::size_t f : by_category_[category]) {
    const std::size_t ov = overlap(required, profile_skills_[f]);
    if (ov >= static_cast<std::size_t>(config_.min_positive_overlap)) strong.push_back(f);
    if (ov == 0) weak_same.push_back(f);
  }
  for (std::size_t f = 0; f < profiles_.size(); ++f) {
    if (profile_category_[f] != category) other.push_back(f);
  }

  // Counts are drawn first, then clamped to what the population offers: a
  // project with few matching freelancers gets fewer positives, and missing
  // same-category negatives are replaced by other-category ones.
  auto n_pos = static_cast<std::size_t>(rng_.between(config_.positives_min, config_.positives_max));
  const auto n_neg = static_cast<std::size_t>(rng_.between(config_.negatives_min, config_.negatives_max));
  auto n_hard = static_cast<std::size_t>(std::lround(static_cast<double>(n_neg) * config_.hard_negative_share));
  if (other.empty()) n_hard = n_neg;
  n_hard = std::min(n_hard, weak_same.size());
  const std::size_t n_soft = n_neg - n_hard;
  const std::string& pid = proposals_[project].id;
  n_pos = std::min(n_pos, strong.size());
  if (n_pos == 0) {
    throw CorpusError("infeasible synth config: no freelancer shares " +
                      std::to_string(config_.min_positive_overlap) + " skills with project " + pid);
  }
  if (other.size() < n_soft) {
    throw CorpusError("infeasible synth config: project " + pid + " cannot draw " +
                      std::to_string(n_neg) + " negatives");
  }

  const std::int64_t posted = config_.start_ts + static_cast<std::int64_t>(project) * config_.project_interval_s;
  auto stamp = [&]() {
    return posted + 1 + static_cast<std::int64_t>(rng_.below(static_cast<std::uint64_t>(config_.project_interval_s / 2)));
  };
  std::vector<Interaction> batch;
  for (std::size_t k : rng_.sample_indices(strong.size(), n_pos)) {
    batch.push_back({pid, profiles_[strong[k]].id, Label::positive, stamp()});
  }
  for (std::size_t k : rng_.sample_indices(weak_same.size(), n_hard)) {
    batch.push_back({pid, profiles_[weak_same[k]].id, Label::negative, stamp()});
  }
  for (std::size_t k : rng_.sample_indices(other.size(), n_soft)) {
    batch.push_back({pid, profiles_[other[k]].id, Label::negative, stamp()});
  }
  std::stable_sort(batch.begin(), batch.end(),
                   [](const Interaction& a, const Interaction& b) { return a.timestamp < b.timestamp; });
  out.insert(out.end(), batch.begin(), batch.end());
}

Corpus Generator::run() {
  config_.validate();
  build_vocabulary();
  by_category_.resize(static_cast<std::size_t>(config_.n_categories));
  for (std::size_t i = 0; i < static_cast<std::size_t>(config_.n_freelancers); ++i) {
    profiles_.push_back(make_profile(i));
    by_category_[profile_category_.back()].push_back(i);
  }
  for (std::size_t i = 0; i < static_cast<std::size_t>(config_.n_projects); ++i) {
    proposals_.push_back(make_proposal(i));
  }
  std::vector<Interaction> interactions;
  for (std::size_t p = 0; p < proposals_.size(); ++p) add_interactions(p, interactions);

  std::vector<Document> documents = std::move(profiles_);
  documents.insert(documents.end(), std::make_move_iterator(proposals_.begin()),
                   std::make_move_iterator(proposals_.end()));
  return Corpus(SectionRegistry::defaults(), std::move(documents), std::move(interactions),
                std::move(lexicon_));
}

}  // namespace

Corpus generate_synthetic(const SynthConfig& config, std::uint64_t seed) {
  Generator gen(config, seed);
  return gen.run();
}

}  // namespace skillmatch
