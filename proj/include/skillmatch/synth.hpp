#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "skillmatch/corpus.hpp"

namespace skillmatch {

// Knobs of the synthetic marketplace. Every field has a JSON key of the same name.
struct SynthConfig {
  int n_categories = 8;
  int n_families = 4;
  int skills_per_category = 30;
  int n_generic_skills = 20;
  int n_freelancers = 2000;
  int n_projects = 200;

  int positives_min = 4;
  int positives_max = 6;
  int negatives_min = 3;
  int negatives_max = 5;
  // Per-project counts; positives are capped by the number of freelancers that
  // share at least min_positive_overlap of the project's listed skills.
  // Share of negatives drawn from the project's own category with zero skill
  // overlap (as far as such freelancers exist); the rest come from other categories.
  double hard_negative_share = 0.7;
  int min_positive_overlap = 2;

  int n_languages = 3;
  double primary_language_share = 0.7;

  int profile_skills_min = 6;
  int profile_skills_max = 10;
  int ideal_skills = 10;
  int mandatory_min = 2;
  int mandatory_max = 4;
  int bonus_min = 1;
  int bonus_max = 3;

  int description_words_min = 12;
  int description_words_max = 30;
  double category_word_share = 0.4;
  double off_category_skill_rate = 0.1;
  double empty_section_rate = 0.03;

  std::int64_t start_ts = 1640995200;  // 2022-01-01T00:00:00Z
  std::int64_t project_interval_s = 86400;

  // Must match the tokenizer used downstream; dialect words are chosen so that
  // no two generated words share a token id.
  int vocab_size = 32768;

  // When false, every document keeps its language tag but is written with the
  // latent vocabulary. The random stream is the same either way, so the two
  // renderings describe identical documents.
  bool render_dialects = true;

  void validate() const;
};

SynthConfig synth_config_from_json(const std::string& json_text);
std::string synth_config_to_json(const SynthConfig& config);
SynthConfig load_synth_config(const std::filesystem::path& path);

// Language tags in the order they are assigned; the first is the primary language.
const std::vector<std::string>& synth_language_tags();

// Generates a corpus fully determined by (config, seed). Free text is rendered
// in per-language dialects of a shared latent vocabulary; the dialect->latent
// lexicon is attached to the corpus. Skills are taxonomy terms shared across
// languages. Throws CorpusError when the requested interactions cannot be drawn.
Corpus generate_synthetic(const SynthConfig& config, std::uint64_t seed);

}  // namespace skillmatch
