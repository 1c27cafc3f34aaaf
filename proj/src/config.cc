#include "shem/config.h"

#include "shem/corpus.h"

namespace shem {

void ModelConfig::validate() const {
  if (hidden_dim == 0 || word_emb_dim == 0 || frame_emb_dim == 0) {
    throw ArgumentError("model dimensions must be positive");
  }
  if (hidden_dim % 2 != 0) throw ArgumentError("hidden_dim must be even (bidirectional encoder)");
  if (encoder_layers == 0 || decoder_layers == 0) throw ArgumentError("layer counts must be positive");
  if (n_base_latents == 0) throw ArgumentError("n_base_latents must be at least 1");
  if (compression_enabled && n_comp_latents == 0) {
    throw ArgumentError("n_comp_latents must be at least 1");
  }
  if (!(gumbel_temperature > 0.0)) throw ArgumentError("gumbel_temperature must be positive");
  if (comp_gumbel_samples == 0) throw ArgumentError("comp_gumbel_samples must be at least 1");
  if (!(injection_weight > 0.0)) throw ArgumentError("injection_weight must be positive");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ArgumentError("epsilon must lie in [0, 1]");
  if (!(init_scale > 0.0)) throw ArgumentError("init_scale must be positive");
  const auto& w = weights;
  for (double x : {w.alpha1, w.alpha2, w.beta1, w.beta2, w.gamma}) {
    if (!(x >= 0.0)) throw ArgumentError("loss weights must be nonnegative");
  }
  if (combine != CombineMode::kNone && !compression_enabled) {
    throw ArgumentError("combine mode requires the compression layer");
  }
}

std::string to_string(CompInputMode m) {
  return m == CompInputMode::kLexical ? "lexical" : "inferred";
}

std::string to_string(CombineMode m) {
  switch (m) {
    case CombineMode::kSum: return "sum";
    case CombineMode::kCat: return "cat";
    case CombineMode::kNone: break;
  }
  return "none";
}

}  // namespace shem
