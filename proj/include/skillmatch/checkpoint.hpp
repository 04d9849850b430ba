#pragma once

#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>

#include "skillmatch/backbone.hpp"
#include "skillmatch/encoder.hpp"
#include "skillmatch/losses.hpp"

namespace skillmatch {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Everything needed to encode documents again: both towers plus the frozen
// backbone description (its weights are regenerated from the seed).
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  BackboneConfig backbone;
  Lexicon lexicon;
  SectionRegistry registry = SectionRegistry::defaults();
  Normalization normalization = Normalization::l2;
  LossKind loss = LossKind::dual_a_info_nce;
  TowerParams<float> freelancer;
  TowerParams<float> project;

  const TowerParams<float>& tower(DocumentKind kind) const {
    return kind == DocumentKind::profile ? freelancer : project;
  }
  std::shared_ptr<StubBackbone> make_backbone() const;
  DocumentEmbedding encode(const Document& doc, const Backbone& backbone) const;
};

// Builds untrained towers matching `registry` and `head`.
Checkpoint init_checkpoint(const BackboneConfig& backbone, Lexicon lexicon, const SectionRegistry& registry,
                           const HeadConfig& head, LossKind loss, std::uint64_t seed);

// Layout: "SMCK", u32 version, u64-prefixed config JSON, then for every tower
// parameter (freelancer tower first) u64 rows, u64 cols and little-endian float32 values.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
// `expected_d_model` of 0 accepts any width.
Checkpoint load_checkpoint(const std::filesystem::path& path, std::size_t expected_d_model = 0);

}  // namespace skillmatch
