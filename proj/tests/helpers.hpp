#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "skillmatch/corpus.hpp"

namespace testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("skillmatch_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline skillmatch::Document profile(const std::string& id, const std::string& category, const std::string& skills,
                                    const std::string& title = "engineer", const std::string& language = "en") {
  skillmatch::Document d;
  d.id = id;
  d.kind = skillmatch::DocumentKind::profile;
  d.category = category;
  d.language = language;
  d.sections = {{"job_title", title}, {"skills", skills}, {"job_category", category}};
  return skillmatch::normalize_document(d, skillmatch::SectionRegistry::defaults());
}

inline skillmatch::Document proposal(const std::string& id, const std::string& category, const std::string& skills,
                                     const std::string& title = "engineer", const std::string& language = "en") {
  skillmatch::Document d;
  d.id = id;
  d.kind = skillmatch::DocumentKind::proposal;
  d.category = category;
  d.language = language;
  d.sections = {{"mission_title", title}, {"mandatory_skills", skills}, {"job_category", category}};
  return skillmatch::normalize_document(d, skillmatch::SectionRegistry::defaults());
}

}  // namespace testing
