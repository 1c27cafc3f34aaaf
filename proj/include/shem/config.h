#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "shem/autograd.h"
#include "shem/ontology.h"

namespace shem {

enum class CompInputMode : std::uint8_t { kInferredFrames, kLexical };
enum class CombineMode : std::uint8_t { kNone, kSum, kCat };

struct LossWeights {
  double alpha1 = 1.0;  // base reconstruction
  double alpha2 = 1.0;  // compression reconstruction
  double beta1 = 1.0;   // base KL
  double beta2 = 1.0;   // compression KL
  double gamma = 0.1;   // observed-frame classification
};

struct ModelConfig {
  std::size_t hidden_dim = 512;
  std::size_t encoder_layers = 2;  // bidirectional
  std::size_t decoder_layers = 2;  // unidirectional
  std::size_t word_emb_dim = 300;
  std::size_t frame_emb_dim = 500;
  std::size_t n_base_latents = 5;
  std::size_t n_comp_latents = 3;
  double gumbel_temperature = 0.5;
  std::size_t comp_gumbel_samples = 2;
  double injection_weight = 100.0;
  double epsilon = 0.9;
  RelationFilter relation_filter = RelationFilter::single(RelationType::kInheritance);
  CompInputMode comp_input = CompInputMode::kInferredFrames;
  LossWeights weights;
  bool compression_enabled = true;
  bool share_encdec = false;
  bool share_frame_emb = false;
  CombineMode combine = CombineMode::kNone;
  ad::KlMode kl_mode = ad::KlMode::kDivergence;
  bool straight_through = false;
  double init_scale = 0.5;  // embedding init bound
  std::uint64_t init_seed = 1;

  // Throws ArgumentError on inconsistent settings.
  void validate() const;
};

std::string to_string(CompInputMode m);
std::string to_string(CombineMode m);

}  // namespace shem
