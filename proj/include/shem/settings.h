#pragma once

// Named key=value bindings onto configuration structs. One key per line,
// '#' starts a comment; values are parsed by the bound field's type.

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "shem/config.h"

namespace shem {

static_assert(std::is_same_v<std::uint64_t, std::size_t>, "size_t fields bind as uint64_t");

struct TrainConfig;

class Settings {
 public:
  struct Entry {
    std::string key;
    std::string help;
    std::function<std::string()> get;
    std::function<void(std::string_view)> set;
  };

  void bind(const std::string& key, const std::string& help, bool& field);
  void bind(const std::string& key, const std::string& help, std::uint64_t& field);
  void bind(const std::string& key, const std::string& help, double& field);
  void bind(const std::string& key, const std::string& help, std::string& field);
  void bind(const std::string& key, const std::string& help, std::function<std::string()> get,
            std::function<void(std::string_view)> set);

  bool has(std::string_view key) const;
  // Throws ArgumentError on an unknown key or an unparsable value; the
  // message names the key.
  void set(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;
  const std::vector<Entry>& entries() const { return entries_; }

  // Applies "key=value" lines. Errors carry the line number.
  void apply_text(std::string_view text);
  // Every key in binding order, one "key=value" per line.
  std::string dump() const;

 private:
  const Entry* find(std::string_view key) const;
  std::vector<Entry> entries_;
};

void bind_model_config(Settings& s, ModelConfig& cfg);
void bind_train_config(Settings& s, TrainConfig& cfg);

std::string format_double(double v);

}  // namespace shem
