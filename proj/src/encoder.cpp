#include "skillmatch/encoder.hpp"

#include <cmath>

#include "skillmatch/random.hpp"

namespace skillmatch {

std::string_view to_string(Normalization n) { return n == Normalization::l2 ? "l2" : "none"; }

Normalization parse_normalization(std::string_view s) {
  if (s == "l2") return Normalization::l2;
  if (s == "none") return Normalization::none;
  throw std::invalid_argument("unknown normalization '" + std::string(s) + "'");
}

template <typename T>
std::vector<Parameter<T>*> TowerParams<T>::parameters() {
  std::vector<Parameter<T>*> out{&categorical};
  for (auto& layer : layers) {
    for (auto* p : layer.parameters()) out.push_back(p);
  }
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> TowerParams<T>::parameters() const {
  std::vector<const Parameter<T>*> out{&categorical};
  for (const auto& layer : layers) {
    for (const auto* p : layer.parameters()) out.push_back(p);
  }
  return out;
}

template <typename T>
TowerParams<T> init_tower(DocumentKind kind, std::size_t n_sections, const HeadConfig& config,
                          std::uint64_t seed) {
  if (n_sections == 0) throw std::invalid_argument("init_tower: no sections");
  TowerParams<T> p;
  p.kind = kind;
  p.config = config;
  Rng rng(mix_seed(seed, 0));
  Tensor<T> cat(n_sections, config.d_model);
  for (auto& v : cat.values()) v = static_cast<T>(rng.normal() * config.categorical_scale);
  p.categorical = Parameter<T>(std::move(cat));
  const AttentionShape shape{config.d_model, config.n_heads, config.ff_dim};
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    p.layers.push_back(init_attention<T>(shape, mix_seed(seed, 1 + l), config.init_scale));
  }
  return p;
}

template <typename T>
TowerVars<T> bind_tower(Tape<T>& tape, TowerParams<T>& params) {
  TowerVars<T> v{tape.parameter(params.categorical), {}, params.config.n_heads};
  for (auto& layer : params.layers) v.layers.push_back(bind_parameters(tape, layer));
  return v;
}

template <typename T>
TowerVars<T> bind_tower_constants(Tape<T>& tape, const TowerParams<T>& params) {
  TowerVars<T> v{tape.constant_ref(params.categorical.value), {}, params.config.n_heads};
  for (const auto& layer : params.layers) v.layers.push_back(bind_constants(tape, layer));
  return v;
}

template <typename T>
Var<T> assemble_sequence(const std::vector<Var<T>>& sections, const Var<T>& categorical) {
  if (sections.size() != categorical.rows()) {
    throw ShapeError("assemble_sequence: " + std::to_string(sections.size()) + " sections but " +
                     std::to_string(categorical.rows()) + " categorical embeddings");
  }
  std::vector<Var<T>> parts;
  parts.reserve(sections.size());
  for (std::size_t l = 0; l < sections.size(); ++l) {
    parts.push_back(add_row(sections[l], slice_rows(categorical, l, 1)));
  }
  return concat_rows(parts);
}

template <typename T>
Var<T> head_forward(const Var<T>& x, const std::vector<AttentionVars<T>>& layers, std::size_t n_heads) {
  Var<T> h = x;
  for (const auto& layer : layers) h = attention_block(h, layer, n_heads);
  return h;
}

template <typename T>
Tensor<T> pooling_weights(std::span<const std::size_t> section_lengths) {
  std::size_t n = 0;
  for (auto k : section_lengths) {
    if (k == 0) throw ShapeError("pooling: zero-length section");
    n += k;
  }
  Tensor<T> w(1, n);
  const double n_sections = static_cast<double>(section_lengths.size());
  std::size_t offset = 0;
  for (auto k : section_lengths) {
    const T value = static_cast<T>(1.0 / (static_cast<double>(k) * n_sections));
    for (std::size_t j = 0; j < k; ++j) w(0, offset + j) = value;
    offset += k;
  }
  return w;
}

template <typename T>
Var<T> pool(const Var<T>& head_out, const Var<T>& backbone_out, std::span<const std::size_t> section_lengths) {
  auto w = pooling_weights<T>(section_lengths);
  if (w.cols() != head_out.rows() || head_out.shape() != backbone_out.shape()) {
    throw ShapeError("pool: section lengths cover " + std::to_string(w.cols()) + " rows, head output is " +
                     shape_string(head_out.shape()) + ", backbone output is " +
                     shape_string(backbone_out.shape()));
  }
  return matmul(head_out.tape().constant(std::move(w)), add(head_out, backbone_out));
}

template <typename T>
Var<T> tower_forward(const TowerVars<T>& tower, const std::vector<Var<T>>& sections, Normalization norm) {
  std::vector<std::size_t> lengths;
  lengths.reserve(sections.size());
  for (const auto& s : sections) lengths.push_back(s.rows());
  const Var<T> backbone_out = concat_rows(sections);
  const Var<T> head_out = head_forward(assemble_sequence(sections, tower.categorical), tower.layers, tower.n_heads);
  Var<T> e = pool(head_out, backbone_out, std::span<const std::size_t>(lengths));
  if (norm == Normalization::l2) e = l2_normalize_rows(e);
  return e;
}

DocumentEmbedding encode_sections(const Document& doc, const std::vector<Tensor<float>>& sections,
                                  const TowerParams<float>& tower, Normalization norm) {
  if (doc.kind != tower.kind) {
    throw EncoderError("cannot encode " + std::string(to_string(doc.kind)) + " '" + doc.id + "' with the " +
                       std::string(to_string(tower.kind)) + " tower");
  }
  if (sections.size() != tower.n_sections()) {
    throw EncoderError("document '" + doc.id + "' has " + std::to_string(sections.size()) +
                       " sections, tower expects " + std::to_string(tower.n_sections()));
  }
  Tape<float> tape;
  std::vector<Var<float>> vars;
  vars.reserve(sections.size());
  for (const auto& s : sections) {
    if (s.cols() != tower.config.d_model) {
      throw EncoderError("section width " + std::to_string(s.cols()) + " does not match tower d_model " +
                         std::to_string(tower.config.d_model));
    }
    vars.push_back(tape.constant_ref(s));
  }
  const auto e = tower_forward(bind_tower_constants(tape, tower), vars, norm);
  const auto& v = e.value();
  return DocumentEmbedding{doc.id, std::vector<float>(v.data(), v.data() + v.size()), doc.category, doc.language};
}

DocumentEmbedding encode_document(const Document& doc, const TowerParams<float>& tower,
                                  const Backbone& backbone, Normalization norm) {
  if (doc.kind != tower.kind) {
    throw EncoderError("cannot encode " + std::string(to_string(doc.kind)) + " '" + doc.id + "' with the " +
                       std::string(to_string(tower.kind)) + " tower");
  }
  return encode_sections(doc, backbone.encode_sections(doc), tower, norm);
}

#define SKILLMATCH_INSTANTIATE(T)                                                                         \
  template struct TowerParams<T>;                                                                         \
  template TowerParams<T> init_tower<T>(DocumentKind, std::size_t, const HeadConfig&, std::uint64_t);     \
  template TowerVars<T> bind_tower<T>(Tape<T>&, TowerParams<T>&);                                         \
  template TowerVars<T> bind_tower_constants<T>(Tape<T>&, const TowerParams<T>&);                         \
  template Var<T> assemble_sequence<T>(const std::vector<Var<T>>&, const Var<T>&);                        \
  template Var<T> head_forward<T>(const Var<T>&, const std::vector<AttentionVars<T>>&, std::size_t);      \
  template Tensor<T> pooling_weights<T>(std::span<const std::size_t>);                                    \
  template Var<T> pool<T>(const Var<T>&, const Var<T>&, std::span<const std::size_t>);                    \
  template Var<T> tower_forward<T>(const TowerVars<T>&, const std::vector<Var<T>>&, Normalization);

SKILLMATCH_INSTANTIATE(float)
SKILLMATCH_INSTANTIATE(double)
#undef SKILLMATCH_INSTANTIATE

}  // namespace skillmatch
