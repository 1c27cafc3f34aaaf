#pragma once

// Binary checkpoints: magic "SHEMCKPT", format version, model configuration
// as key=value text, vocabulary, optimizer step, then every distinct
// parameter by name as little-endian float32 with its shape.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "shem/config.h"
#include "shem/corpus.h"
#include "shem/model.h"

namespace shem {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NamedArray {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> values;
};

struct Checkpoint {
  ModelConfig config;
  Vocab vocab;
  std::uint64_t step = 0;
  std::vector<NamedArray> arrays;
};

std::string encode_checkpoint(const ShemModel& model, const Vocab& vocab, std::uint64_t step);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const ShemModel& model,
                     const Vocab& vocab, std::uint64_t step);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies arrays into the model's parameters. Every model parameter must be
// present with the same shape and no array may be left over; the error
// names the offending parameter.
void restore_parameters(ShemModel& model, const Checkpoint& ckpt);

// Builds a model from the stored configuration and restores its weights.
std::unique_ptr<ShemModel> model_from_checkpoint(const Checkpoint& ckpt, const FrameGraph* graph);

}  // namespace shem
