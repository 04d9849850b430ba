#include "skillmatch/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "skillmatch/binary_io.hpp"
#include "skillmatch/random.hpp"

namespace skillmatch {

namespace {

constexpr char kMagic[5] = "SMCK";

nlohmann::json backbone_json(const BackboneConfig& c) {
  return {{"d_model", c.d_model}, {"n_layers", c.n_layers}, {"n_heads", c.n_heads}, {"ff_dim", c.ff_dim},
          {"vocab_size", c.vocab_size}, {"max_section_tokens", c.max_section_tokens}, {"seed", c.seed}};
}

BackboneConfig backbone_from_json(const nlohmann::json& j) {
  BackboneConfig c;
  c.d_model = j.at("d_model");
  c.n_layers = j.at("n_layers");
  c.n_heads = j.at("n_heads");
  c.ff_dim = j.at("ff_dim");
  c.vocab_size = j.at("vocab_size");
  c.max_section_tokens = j.at("max_section_tokens");
  c.seed = j.at("seed");
  return c;
}

nlohmann::json head_json(const HeadConfig& c) {
  return {{"d_model", c.d_model}, {"n_layers", c.n_layers}, {"n_heads", c.n_heads}, {"ff_dim", c.ff_dim},
          {"init_scale", c.init_scale}, {"categorical_scale", c.categorical_scale}};
}

HeadConfig head_from_json(const nlohmann::json& j) {
  HeadConfig c;
  c.d_model = j.at("d_model");
  c.n_layers = j.at("n_layers");
  c.n_heads = j.at("n_heads");
  c.ff_dim = j.at("ff_dim");
  c.init_scale = j.at("init_scale");
  c.categorical_scale = j.at("categorical_scale");
  return c;
}

void write_tower(std::ostream& out, const TowerParams<float>& tower) {
  for (const auto* p : tower.parameters()) {
    binio::put<std::uint64_t>(out, p->value.rows());
    binio::put<std::uint64_t>(out, p->value.cols());
    binio::put_bytes(out, p->value.data(), p->value.size() * sizeof(float));
  }
}

void read_tower(std::istream& in, TowerParams<float>& tower) {
  for (auto* p : tower.parameters()) {
    const auto rows = binio::get<std::uint64_t>(in);
    const auto cols = binio::get<std::uint64_t>(in);
    if (rows != p->value.rows() || cols != p->value.cols()) {
      throw CheckpointError("checkpoint tensor is " + std::to_string(rows) + "x" + std::to_string(cols) +
                            ", configuration expects " + shape_string(p->value.shape()));
    }
    binio::get_bytes(in, p->value.data(), p->value.size() * sizeof(float));
  }
}

}  // namespace

std::shared_ptr<StubBackbone> Checkpoint::make_backbone() const {
  return std::make_shared<StubBackbone>(backbone, lexicon);
}

DocumentEmbedding Checkpoint::encode(const Document& doc, const Backbone& bb) const {
  return encode_document(doc, tower(doc.kind), bb, normalization);
}

Checkpoint init_checkpoint(const BackboneConfig& backbone, Lexicon lexicon, const SectionRegistry& registry,
                           const HeadConfig& head, LossKind loss, std::uint64_t seed) {
  if (head.d_model != backbone.d_model) {
    throw CheckpointError("head d_model " + std::to_string(head.d_model) + " differs from backbone d_model " +
                          std::to_string(backbone.d_model));
  }
  Checkpoint c;
  c.backbone = backbone;
  c.lexicon = std::move(lexicon);
  c.registry = registry;
  c.loss = loss;
  c.normalization = loss == LossKind::dual_a_info_nce ? Normalization::l2 : Normalization::none;
  c.freelancer = init_tower<float>(DocumentKind::profile, registry.profile.size(), head, mix_seed(seed, 101));
  c.project = init_tower<float>(DocumentKind::proposal, registry.proposal.size(), head, mix_seed(seed, 202));
  return c;
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  nlohmann::json config;
  config["backbone"] = backbone_json(c.backbone);
  config["lexicon"] = c.lexicon;
  config["registry"] = {{"profile", c.registry.profile}, {"proposal", c.registry.proposal}};
  config["normalization"] = std::string(to_string(c.normalization));
  config["loss"] = std::string(to_string(c.loss));
  config["freelancer_head"] = head_json(c.freelancer.config);
  config["project_head"] = head_json(c.project.config);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  binio::put_magic(out, kMagic, Checkpoint::kVersion);
  binio::put_string(out, config.dump());
  write_tower(out, c.freelancer);
  write_tower(out, c.project);
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, std::size_t expected_d_model) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  try {
    binio::expect_magic(in, kMagic, Checkpoint::kVersion, "checkpoint");
    const auto config = nlohmann::json::parse(binio::get_string(in));
    Checkpoint c;
    c.backbone = backbone_from_json(config.at("backbone"));
    if (expected_d_model != 0 && c.backbone.d_model != expected_d_model) {
      throw CheckpointError("checkpoint d_model " + std::to_string(c.backbone.d_model) + " differs from expected " +
                            std::to_string(expected_d_model));
    }
    c.lexicon = config.at("lexicon").get<Lexicon>();
    c.registry.profile = config.at("registry").at("profile").get<std::vector<std::string>>();
    c.registry.proposal = config.at("registry").at("proposal").get<std::vector<std::string>>();
    c.normalization = parse_normalization(config.at("normalization").get<std::string>());
    c.loss = parse_loss_kind(config.at("loss").get<std::string>());
    const auto fh = head_from_json(config.at("freelancer_head"));
    const auto ph = head_from_json(config.at("project_head"));
    if (fh.d_model != c.backbone.d_model || ph.d_model != c.backbone.d_model) {
      throw CheckpointError("checkpoint head width does not match backbone d_model");
    }
    // Shapes come from the configuration; values are overwritten below.
    c.freelancer = init_tower<float>(DocumentKind::profile, c.registry.profile.size(), fh, 0);
    c.project = init_tower<float>(DocumentKind::proposal, c.registry.proposal.size(), ph, 0);
    read_tower(in, c.freelancer);
    read_tower(in, c.project);
    if (in.peek() != std::char_traits<char>::eof()) throw CheckpointError("trailing bytes in checkpoint");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("malformed checkpoint config in " + path.string() + ": " + e.what());
  } catch (const binio::FormatError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

}  // namespace skillmatch
