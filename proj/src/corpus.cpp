#include "skillmatch/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "skillmatch/random.hpp"

namespace skillmatch {

using nlohmann::json;

ParseError::ParseError(std::size_t line, const std::string& what)
    : CorpusError("line " + std::to_string(line) + ": " + what), line_(line) {}

std::string_view to_string(DocumentKind kind) {
  return kind == DocumentKind::profile ? "profile" : "proposal";
}

DocumentKind parse_document_kind(std::string_view s) {
  if (s == "profile") return DocumentKind::profile;
  if (s == "proposal") return DocumentKind::proposal;
  throw SchemaError("unknown document kind '" + std::string(s) + "'");
}

std::string_view to_string(Label label) {
  return label == Label::positive ? "positive" : "negative";
}

SectionRegistry SectionRegistry::defaults() {
  return SectionRegistry{
      {"job_title", "description", "job_family", "job_category", "skills"},
      {"mission_title", "job_title", "description", "job_family", "job_category",
       "mandatory_skills", "bonus_skills"}};
}

const std::vector<std::string>& SectionRegistry::for_kind(DocumentKind kind) const {
  return kind == DocumentKind::profile ? profile : proposal;
}

const std::string& Document::section(std::string_view label) const {
  for (const auto& s : sections) {
    if (s.label == label) return s.text;
  }
  throw SchemaError("document '" + id + "' has no section '" + std::string(label) + "'");
}

Document normalize_document(Document doc, const SectionRegistry& registry) {
  const auto& labels = registry.for_kind(doc.kind);
  for (const auto& s : doc.sections) {
    if (std::find(labels.begin(), labels.end(), s.label) == labels.end()) {
      throw SchemaError("document '" + doc.id + "': unknown section type '" + s.label +
                        "' for kind " + std::string(to_string(doc.kind)));
    }
  }
  std::vector<Section> ordered;
  ordered.reserve(labels.size());
  for (const auto& label : labels) {
    std::string text;
    std::size_t seen = 0;
    for (const auto& s : doc.sections) {
      if (s.label == label) {
        text = s.text;
        ++seen;
      }
    }
    if (seen > 1) {
      throw SchemaError("document '" + doc.id + "': duplicate section '" + label + "'");
    }
    ordered.push_back({label, std::move(text)});
  }
  doc.sections = std::move(ordered);
  if (doc.id.empty()) throw SchemaError("document with empty id");
  if (doc.kind == DocumentKind::profile && doc.category.empty()) {
    throw SchemaError("profile '" + doc.id + "' has no category");
  }
  return doc;
}

Corpus::Corpus(SectionRegistry registry, std::vector<Document> documents,
               std::vector<Interaction> interactions, Lexicon lexicon)
    : registry_(std::move(registry)), lexicon_(std::move(lexicon)) {
  for (auto& d : documents) {
    Document doc = normalize_document(std::move(d), registry_);
    auto& index = doc.kind == DocumentKind::profile ? profile_index_ : proposal_index_;
    auto& list = doc.kind == DocumentKind::profile ? profiles_ : proposals_;
    if (auto it = index.find(doc.id); it != index.end()) {
      list[it->second] = std::move(doc);  // last record wins
    } else {
      index.emplace(doc.id, list.size());
      list.push_back(std::move(doc));
    }
  }

  std::map<std::pair<std::string, std::string>, std::size_t> latest;
  for (std::size_t i = 0; i < interactions.size(); ++i) {
    const auto& it = interactions[i];
    if (!proposal_index_.contains(it.project_id)) {
      throw ReferentialError("interaction references unknown project '" + it.project_id + "'");
    }
    if (!profile_index_.contains(it.freelancer_id)) {
      throw ReferentialError("interaction references unknown freelancer '" + it.freelancer_id +
                             "'");
    }
    auto key = std::make_pair(it.project_id, it.freelancer_id);
    auto found = latest.find(key);
    if (found == latest.end()) {
      latest.emplace(std::move(key), i);
    } else if (interactions[found->second].timestamp <= it.timestamp) {
      found->second = i;
    }
  }
  std::vector<std::size_t> keep;
  keep.reserve(latest.size());
  for (const auto& [key, idx] : latest) keep.push_back(idx);
  std::sort(keep.begin(), keep.end());
  interactions_.reserve(keep.size());
  for (std::size_t idx : keep) interactions_.push_back(std::move(interactions[idx]));
}

const Document* Corpus::profile(std::string_view id) const {
  auto it = profile_index_.find(std::string(id));
  return it == profile_index_.end() ? nullptr : &profiles_[it->second];
}

const Document* Corpus::proposal(std::string_view id) const {
  auto it = proposal_index_.find(std::string(id));
  return it == proposal_index_.end() ? nullptr : &proposals_[it->second];
}

const Document& Corpus::profile_at(std::string_view id) const {
  if (const Document* d = profile(id)) return *d;
  throw ReferentialError("unknown freelancer '" + std::string(id) + "'");
}

const Document& Corpus::proposal_at(std::string_view id) const {
  if (const Document* d = proposal(id)) return *d;
  throw ReferentialError("unknown project '" + std::string(id) + "'");
}

// ---- serialization ---------------------------------------------------------

namespace {

std::string string_field(const json& j, const char* key, bool required) {
  auto it = j.find(key);
  if (it == j.end()) {
    if (required) throw SchemaError(std::string("missing field '") + key + "'");
    return {};
  }
  if (!it->is_string()) throw SchemaError(std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

Document document_from_json(const json& j, const SectionRegistry& registry) {
  Document doc;
  doc.id = string_field(j, "id", true);
  doc.kind = parse_document_kind(string_field(j, "kind", true));
  doc.category = string_field(j, "category", false);
  doc.language = string_field(j, "language", false);
  if (auto it = j.find("sections"); it != j.end()) {
    if (!it->is_object()) throw SchemaError("field 'sections' must be an object");
    for (const auto& [label, text] : it->items()) {
      if (!text.is_string()) throw SchemaError("section '" + label + "' must be a string");
      doc.sections.push_back({label, text.get<std::string>()});
    }
  }
  return normalize_document(std::move(doc), registry);
}

json document_to_json(const Document& doc) {
  json sections = json::object();
  for (const auto& s : doc.sections) sections[s.label] = s.text;
  return json{{"id", doc.id},
              {"kind", std::string(to_string(doc.kind))},
              {"category", doc.category},
              {"language", doc.language},
              {"sections", std::move(sections)}};
}

Interaction interaction_from_json(const json& j) {
  Interaction it;
  it.project_id = string_field(j, "project_id", true);
  it.freelancer_id = string_field(j, "freelancer_id", true);
  const std::string label = string_field(j, "label", true);
  if (label == "positive") {
    it.label = Label::positive;
  } else if (label == "negative") {
    it.label = Label::negative;
  } else {
    throw SchemaError("unknown interaction label '" + label + "'");
  }
  auto ts = j.find("ts");
  if (ts == j.end() || !ts->is_number_integer()) throw SchemaError("field 'ts' must be an integer");
  it.timestamp = ts->get<std::int64_t>();
  return it;
}

}  // namespace

Document parse_document_json(std::string_view json_text, const SectionRegistry& registry) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(1, e.what());
  }
  if (!j.is_object()) throw SchemaError("document must be a JSON object");
  return document_from_json(j, registry);
}

Corpus read_corpus(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  SectionRegistry registry;
  Lexicon lexicon;
  std::vector<Document> documents;
  std::vector<Interaction> interactions;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, e.what());
    }
    if (!j.is_object()) throw ParseError(line_no, "record is not a JSON object");
    try {
      if (!have_header) {
        auto version = j.find("schema_version");
        if (version == j.end()) throw SchemaError("first record must be the schema header");
        if (*version != Corpus::kSchemaVersion) {
          throw SchemaError("unsupported schema_version " + version->dump());
        }
        const json& sections = j.at("sections");
        registry.profile = sections.at("profile").get<std::vector<std::string>>();
        registry.proposal = sections.at("proposal").get<std::vector<std::string>>();
        if (auto lx = j.find("lexicon"); lx != j.end()) lexicon = lx->get<Lexicon>();
        have_header = true;
      } else if (j.contains("kind")) {
        documents.push_back(document_from_json(j, registry));
      } else if (j.contains("project_id")) {
        interactions.push_back(interaction_from_json(j));
      } else {
        throw SchemaError("record is neither a document nor an interaction");
      }
    } catch (const SchemaError& e) {
      throw SchemaError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const json::exception& e) {
      throw SchemaError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw SchemaError("empty corpus: missing schema header");
  return Corpus(std::move(registry), std::move(documents), std::move(interactions),
                std::move(lexicon));
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open corpus file " + path.string());
  return read_corpus(in);
}

void write_corpus(const Corpus& corpus, std::ostream& out) {
  json header{{"schema_version", Corpus::kSchemaVersion},
              {"sections",
               {{"profile", corpus.registry().profile}, {"proposal", corpus.registry().proposal}}}};
  if (!corpus.lexicon().empty()) header["lexicon"] = corpus.lexicon();
  out << header.dump() << '\n';
  for (const auto& d : corpus.profiles()) out << document_to_json(d).dump() << '\n';
  for (const auto& d : corpus.proposals()) out << document_to_json(d).dump() << '\n';
  for (const auto& it : corpus.interactions()) {
    out << json{{"project_id", it.project_id},
                {"freelancer_id", it.freelancer_id},
                {"label", std::string(to_string(it.label))},
                {"ts", it.timestamp}}
               .dump()
        << '\n';
  }
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CorpusError("cannot write corpus file " + path.string());
  write_corpus(corpus, out);
}

// ---- splitting -------------------------------------------------------------

namespace {

void add_to(SplitPart& part, const Interaction& it) {
  part.interactions.push_back(it);
  part.project_ids.insert(it.project_id);
  part.freelancer_ids.insert(it.freelancer_id);
}

}  // namespace

CorpusSplit temporal_split(const Corpus& corpus, std::int64_t cutoff, double val_ratio,
                           std::uint64_t seed) {
  if (!(val_ratio > 0.0 && val_ratio < 1.0)) {
    throw std::invalid_argument("temporal_split: val_ratio must lie in (0, 1)");
  }
  CorpusSplit split;
  std::vector<std::size_t> before;
  const auto all = corpus.interactions();
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (all[i].timestamp >= cutoff) {
      add_to(split.test, all[i]);
    } else {
      before.push_back(i);
    }
  }
  if (split.test.interactions.empty()) throw SplitError("temporal split leaves the test part empty");
  const auto n_val = static_cast<std::size_t>(std::lround(static_cast<double>(before.size()) * val_ratio));
  if (before.size() <= n_val) throw SplitError("temporal split leaves the train part empty");

  Rng rng(seed);
  rng.shuffle(before);
  std::vector<std::size_t> val(before.begin(), before.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(before.begin() + static_cast<std::ptrdiff_t>(n_val), before.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
  for (std::size_t i : train) add_to(split.train, all[i]);
  for (std::size_t i : val) add_to(split.validation, all[i]);
  return split;
}

std::int64_t cutoff_for_test_fraction(const Corpus& corpus, double test_fraction) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("test fraction must lie in (0, 1)");
  }
  std::vector<std::int64_t> ts;
  for (const auto& it : corpus.interactions()) ts.push_back(it.timestamp);
  if (ts.empty()) throw SplitError("corpus has no interactions");
  std::sort(ts.begin(), ts.end());
  auto idx = static_cast<std::size_t>(std::floor((1.0 - test_fraction) * static_cast<double>(ts.size())));
  idx = std::min(idx, ts.size() - 1);
  return ts[idx];
}

std::set<std::string> skill_terms(const Document& doc) {
  std::set<std::string> out;
  for (const auto& s : doc.sections) {
    if (s.label.size() < 6 || s.label.compare(s.label.size() - 6, 6, "skills") != 0) continue;
    std::string current;
    auto flush = [&]() {
      const auto b = current.find_first_not_of(" \t\r\n");
      if (b != std::string::npos) {
        const auto e = current.find_last_not_of(" \t\r\n");
        out.insert(current.substr(b, e - b + 1));
      }
      current.clear();
    };
    for (char c : s.text) {
      if (c == ',' || c == ';' || c == '\n') {
        flush();
      } else {
        current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
      }
    }
    flush();
  }
  return out;
}

}  // namespace skillmatch
