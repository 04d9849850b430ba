#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "skillmatch/attention.hpp"
#include "skillmatch/backbone.hpp"
#include "skillmatch/corpus.hpp"

namespace skillmatch {

// Output normalization of a tower: unit-length rows for the cosine regime,
// raw vectors for the Euclidean regime.
enum class Normalization { none, l2 };

std::string_view to_string(Normalization n);
Normalization parse_normalization(std::string_view s);

struct HeadConfig {
  std::size_t d_model = 128;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t ff_dim = 512;
  double init_scale = 1.0;
  double categorical_scale = 0.1;

  bool operator==(const HeadConfig&) const = default;
};

// Trainable weights of one tower. The backbone is not part of it.
template <typename T>
struct TowerParams {
  DocumentKind kind = DocumentKind::profile;
  HeadConfig config;
  Parameter<T> categorical;  // one row per registered section type
  std::vector<AttentionParams<T>> layers;

  std::size_t n_sections() const { return categorical.value.rows(); }

  // Fixed order used by optimizers and serialization.
  std::vector<Parameter<T>*> parameters();
  std::vector<const Parameter<T>*> parameters() const;

  template <typename U>
  TowerParams<U> cast() const;
};

template <typename T>
TowerParams<T> init_tower(DocumentKind kind, std::size_t n_sections, const HeadConfig& config,
                          std::uint64_t seed);

template <typename T>
struct TowerVars {
  Var<T> categorical;
  std::vector<AttentionVars<T>> layers;
  std::size_t n_heads = 0;
};

template <typename T>
TowerVars<T> bind_tower(Tape<T>& tape, TowerParams<T>& params);
template <typename T>
TowerVars<T> bind_tower_constants(Tape<T>& tape, const TowerParams<T>& params);

// Adds categorical row l to every token of section l and stacks the sections
// in registry order: [sum k_l x d].
template <typename T>
Var<T> assemble_sequence(const std::vector<Var<T>>& sections, const Var<T>& categorical);

template <typename T>
Var<T> head_forward(const Var<T>& x, const std::vector<AttentionVars<T>>& layers, std::size_t n_heads);

// 1 x sum(k_l) row holding 1 / (k_l * |sections|) for every token of section l.
template <typename T>
Tensor<T> pooling_weights(std::span<const std::size_t> section_lengths);

// Section-balanced mean of (head output + backbone output): [1 x d].
template <typename T>
Var<T> pool(const Var<T>& head_out, const Var<T>& backbone_out, std::span<const std::size_t> section_lengths);

// Whole tower on precomputed section encodings (one Var per section, registry order).
template <typename T>
Var<T> tower_forward(const TowerVars<T>& tower, const std::vector<Var<T>>& sections, Normalization norm);

struct DocumentEmbedding {
  std::string doc_id;
  std::vector<float> vector;
  std::string category;
  std::string language;
};

class EncoderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inference path: section encodings -> embedding.
DocumentEmbedding encode_sections(const Document& doc, const std::vector<Tensor<float>>& sections,
                                  const TowerParams<float>& tower, Normalization norm);

// tokenize -> backbone -> categorical encoding -> head -> pooling -> normalization.
DocumentEmbedding encode_document(const Document& doc, const TowerParams<float>& tower,
                                  const Backbone& backbone, Normalization norm);

template <typename T>
template <typename U>
TowerParams<U> TowerParams<T>::cast() const {
  TowerParams<U> out;
  out.kind = kind;
  out.config = config;
  out.categorical.value = categorical.value.template cast<U>();
  for (const auto& layer : layers) out.layers.push_back(layer.template cast<U>());
  return out;
}

}  // namespace skillmatch
