#include "shem/settings.h"

#include <charconv>
#include <cmath>
#include <cstdio>

#include "shem/corpus.h"
#include "shem/text.h"
#include "shem/training.h"

namespace shem {
namespace {

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* what) {
  throw ArgumentError("invalid value '" + std::string(value) + "' for " + std::string(key) +
                      ": expected " + what);
}

template <typename T>
T parse_unsigned(std::string_view key, std::string_view v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    bad_value(key, v, "a nonnegative integer");
  }
  return out;
}

double parse_real(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty() || !std::isfinite(out)) {
    bad_value(key, v, "a finite number");
  }
  return out;
}

bool parse_flag(std::string_view key, std::string_view v) {
  const std::string s = to_lower(v);
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  bad_value(key, v, "true or false");
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void Settings::bind(const std::string& key, const std::string& help, bool& field) {
  bind(key, help, [&field] { return std::string(field ? "true" : "false"); },
       [&field, key](std::string_view v) { field = parse_flag(key, v); });
}

void Settings::bind(const std::string& key, const std::string& help, std::uint64_t& field) {
  bind(key, help, [&field] { return std::to_string(field); },
       [&field, key](std::string_view v) { field = parse_unsigned<std::uint64_t>(key, v); });
}

void Settings::bind(const std::string& key, const std::string& help, double& field) {
  bind(key, help, [&field] { return format_double(field); },
       [&field, key](std::string_view v) { field = parse_real(key, v); });
}

void Settings::bind(const std::string& key, const std::string& help, std::string& field) {
  bind(key, help, [&field] { return field; },
       [&field](std::string_view v) { field = std::string(v); });
}

void Settings::bind(const std::string& key, const std::string& help,
                    std::function<std::string()> get, std::function<void(std::string_view)> set) {
  if (has(key)) throw ArgumentError("duplicate setting " + key);
  entries_.push_back({key, help, std::move(get), std::move(set)});
}

const Settings::Entry* Settings::find(std::string_view key) const {
  for (const auto& e : entries_) {
    if (e.key == key) return &e;
  }
  return nullptr;
}

bool Settings::has(std::string_view key) const { return find(key) != nullptr; }

void Settings::set(std::string_view key, std::string_view value) {
  const Entry* e = find(key);
  if (!e) throw ArgumentError("unknown setting " + std::string(key));
  e->set(trim(value));
}

std::string Settings::get(std::string_view key) const {
  const Entry* e = find(key);
  if (!e) throw ArgumentError("unknown setting " + std::string(key));
  return e->get();
}

void Settings::apply_text(std::string_view text) {
  std::size_t line_no = 0;
  for (std::string_view line : split_lines(text)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ArgumentError("line " + std::to_string(line_no) + ": expected key=value");
    }
    try {
      set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ArgumentError& err) {
      throw ArgumentError("line " + std::to_string(line_no) + ": " + err.what());
    }
  }
}

std::string Settings::dump() const {
  std::string out;
  for (const auto& e : entries_) out += e.key + "=" + e.get() + "\n";
  return out;
}

void bind_model_config(Settings& s, ModelConfig& c) {
  s.bind("hidden_dim", "recurrent state size", c.hidden_dim);
  s.bind("encoder_layers", "bidirectional encoder layers", c.encoder_layers);
  s.bind("decoder_layers", "decoder layers", c.decoder_layers);
  s.bind("word_emb_dim", "word embedding size", c.word_emb_dim);
  s.bind("frame_emb_dim", "frame embedding size", c.frame_emb_dim);
  s.bind("n_base_latents", "base-layer latent count", c.n_base_latents);
  s.bind("n_comp_latents", "compression-layer latent count", c.n_comp_latents);
  s.bind("gumbel_temperature", "Gumbel-Softmax temperature", c.gumbel_temperature);
  s.bind("comp_gumbel_samples", "averaged samples per compression step", c.comp_gumbel_samples);
  s.bind("injection_weight", "scale of injected one-hot frames", c.injection_weight);
  s.bind("epsilon", "frame observation probability during training", c.epsilon);
  s.bind(
      "relation", "ontology relation filter",
      [&c] { return c.relation_filter.to_string(); },
      [&c](std::string_view v) {
        const auto f = RelationFilter::parse(v);
        if (!f) bad_value("relation", v, "a relation name, grouping, scenario_only or all");
        c.relation_filter = *f;
      });
  s.bind(
      "comp_input", "compression input (inferred|lexical)",
      [&c] { return to_string(c.comp_input); },
      [&c](std::string_view v) {
        if (v == "inferred") c.comp_input = CompInputMode::kInferredFrames;
        else if (v == "lexical") c.comp_input = CompInputMode::kLexical;
        else bad_value("comp_input", v, "inferred or lexical");
      });
  s.bind("alpha1", "base reconstruction weight", c.weights.alpha1);
  s.bind("alpha2", "compression reconstruction weight", c.weights.alpha2);
  s.bind("beta1", "base KL weight", c.weights.beta1);
  s.bind("beta2", "compression KL weight", c.weights.beta2);
  s.bind("gamma", "observed-frame classification weight", c.weights.gamma);
  s.bind("compression", "build the compression layer", c.compression_enabled);
  s.bind("share_encdec", "one encoder/decoder for both layers", c.share_encdec);
  s.bind("share_frame_emb", "one frame embedding table for both layers", c.share_frame_emb);
  s.bind(
      "combine", "decoder conditioning (none|sum|cat)",
      [&c] { return to_string(c.combine); },
      [&c](std::string_view v) {
        if (v == "none") c.combine = CombineMode::kNone;
        else if (v == "sum") c.combine = CombineMode::kSum;
        else if (v == "cat") c.combine = CombineMode::kCat;
        else bad_value("combine", v, "none, sum or cat");
      });
  s.bind(
      "kl_mode", "divergence or cross_entropy",
      [&c] {
        return std::string(c.kl_mode == ad::KlMode::kCrossEntropy ? "cross_entropy" : "divergence");
      },
      [&c](std::string_view v) {
        if (v == "divergence") c.kl_mode = ad::KlMode::kDivergence;
        else if (v == "cross_entropy") c.kl_mode = ad::KlMode::kCrossEntropy;
        else bad_value("kl_mode", v, "divergence or cross_entropy");
      });
  s.bind("straight_through", "straight-through latent embeddings", c.straight_through);
  s.bind("init_scale", "embedding init bound", c.init_scale);
  s.bind("init_seed", "parameter init seed", c.init_seed);
}

void bind_train_config(Settings& s, TrainConfig& c) {
  s.bind("learning_rate", "Adam step size", c.learning_rate);
  s.bind("batch_size", "documents per micro-batch", c.batch_size);
  s.bind("grad_accumulation", "micro-batches per update", c.grad_accumulation);
  s.bind("patience", "epochs without improvement before stopping", c.patience);
  s.bind("grad_clip_norm", "global gradient norm bound", c.grad_clip_norm);
  s.bind("max_epochs", "epoch cap", c.max_epochs);
  s.bind("seed", "training seed", c.seed);
  s.bind("contrastive", "add the contrastive objective", c.contrastive_enabled);
  s.bind("contrastive_weight", "weight of the contrastive term", c.contrastive_weight);
  s.bind("contrastive_temperature", "cosine temperature", c.contrastive_temperature);
  s.bind("predicate_dropout", "predicate dropout during contrastive training", c.predicate_dropout);
  s.bind("freeze_masks", "draw observation masks once", c.freeze_masks);
  s.bind(
      "stop_metric", "early-stopping perplexity (combined|base|compression)",
      [&c] { return to_string(c.stop_metric); },
      [&c](std::string_view v) {
        if (v == "combined") c.stop_metric = StopMetric::kCombined;
        else if (v == "base") c.stop_metric = StopMetric::kBase;
        else if (v == "compression") c.stop_metric = StopMetric::kCompression;
        else bad_value("stop_metric", v, "combined, base or compression");
      });
  s.bind("adam_beta1", "Adam first-moment decay", c.adam_beta1);
  s.bind("adam_beta2", "Adam second-moment decay", c.adam_beta2);
  s.bind("adam_eps", "Adam stability constant", c.adam_eps);
  s.bind("max_steps", "optimizer step cap (0: none)", c.max_steps);
}

}  // namespace shem
