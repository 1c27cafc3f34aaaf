// shem: data generation, training, evaluation and embedding export.
//
// Exit codes: 0 success, 2 input or configuration error, 3 numerical failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "shem/checkpoint.h"
#include "shem/corpus.h"
#include "shem/evaluation.h"
#include "shem/ontology.h"
#include "shem/settings.h"
#include "shem/similarity.h"
#include "shem/synthetic.h"
#include "shem/training.h"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace shem;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;
constexpr int kRunFormatVersion = 1;

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InputError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + p.string());
  out << text;
  if (!out) throw InputError("write failed for " + p.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw InputError("cannot create directory " + dir.string());
}

std::string flag_name(const std::string& key) {
  std::string s = key;
  std::replace(s.begin(), s.end(), '_', '-');
  return s;
}

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::string data_dir;
  std::string train_corpus;
  std::string train_frames;
  std::string val_corpus;
  std::string val_frames;
  std::string frame_graph;
  std::string out_dir;
  std::size_t lexical_cap = kDefaultLexicalCap;
  std::size_t frame_cap = kDefaultFrameCap;
  std::size_t max_events = kDefaultEventsPerDoc;

  void bind(Settings& s) {
    bind_model_config(s, model);
    bind_train_config(s, train);
    s.bind("data_dir", "gen-data output directory supplying default data paths", data_dir);
    s.bind("train_corpus", "training corpus file", train_corpus);
    s.bind("train_frames", "training frames file", train_frames);
    s.bind("val_corpus", "validation corpus file", val_corpus);
    s.bind("val_frames", "validation frames file", val_frames);
    s.bind("frame_graph", "frame relation graph file", frame_graph);
    s.bind("out_dir", "run directory", out_dir);
    s.bind("lexical_cap", "lexical vocabulary size cap", lexical_cap);
    s.bind("frame_cap", "gold frame vocabulary cap", frame_cap);
    s.bind("max_events", "events kept per document", max_events);
  }

  void fill_from_data_dir() {
    if (data_dir.empty()) return;
    const fs::path d(data_dir);
    auto fill = [&](std::string& field, const char* name) {
      if (field.empty()) field = (d / name).string();
    };
    fill(train_corpus, "train.txt");
    fill(train_frames, "train.frames");
    fill(val_corpus, "val.txt");
    fill(val_frames, "val.frames");
    fill(frame_graph, "frame_graph.tsv");
  }
};

// Registers "--key value" for every setting. Values are applied after the
// config file so flags take precedence.
class SettingFlags {
 public:
  SettingFlags(CLI::App& app, Settings& settings) : settings_(settings) {
    for (const auto& e : settings.entries()) {
      const std::string flag = flag_name(e.key);
      std::string names = "--" + flag;
      if (flag != e.key) names += ",--" + e.key;
      auto* opt = app.add_option(names, values_[e.key], e.help);
      opt->default_str(e.get());
      options_[e.key] = opt;
    }
    app.add_option("--config", config_path_, "key=value config file");
  }

  void apply() {
    if (!config_path_.empty()) {
      try {
        settings_.apply_text(read_file(config_path_));
      } catch (const ArgumentError& e) {
        throw ArgumentError(config_path_ + ": " + e.what());
      }
    }
    for (const auto& e : settings_.entries()) {
      if (options_.at(e.key)->count() > 0) settings_.set(e.key, values_.at(e.key));
    }
  }

 private:
  Settings& settings_;
  std::map<std::string, std::string> values_;
  std::map<std::string, CLI::Option*> options_;
  std::string config_path_;
};

std::optional<fs::path> optional_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw InputError(std::string("missing ") + what + " path");
  if (!fs::is_regular_file(path)) throw InputError(std::string(what) + " not found: " + path);
}

std::string relation_summary(const FrameGraph& g) {
  std::map<std::string, std::size_t> counts;
  for (const auto& e : g.edges()) ++counts[std::string(relation_name(e.relation))];
  std::string out;
  for (const auto& [name, n] : counts) out += " " + name + "=" + std::to_string(n);
  return out;
}

// ---------------------------------------------------------------- gen-data

struct GenDataOptions {
  std::string out;
  std::uint64_t seed = 7;
  SyntheticConfig synth;
  double val_fraction = 0.1;
  double test_fraction = 0.2;
  std::size_t hard = 200;
  std::size_t transitive = 200;
};

int cmd_gen_data(const GenDataOptions& o) {
  if (o.out.empty()) throw InputError("--out is required");
  if (o.val_fraction < 0 || o.test_fraction < 0 || o.val_fraction + o.test_fraction >= 1.0) {
    throw ArgumentError("split fractions must be nonnegative and sum below 1");
  }
  ensure_dir(o.out);
  std::mt19937_64 rng(o.seed);
  const SyntheticData data = generate_synthetic_corpus(o.synth, rng);
  auto [rest, test] = split_corpus(data.corpus, o.test_fraction);
  auto [train, val] = split_corpus(rest, o.val_fraction / (1.0 - o.test_fraction));
  const fs::path dir(o.out);
  const FrameTable& frames = data.graph.frames();
  save_corpus(train, frames, dir / "train.txt", dir / "train.frames");
  save_corpus(val, frames, dir / "val.txt", dir / "val.frames");
  save_corpus(test, frames, dir / "test.txt", dir / "test.frames");
  save_frame_graph(data.graph, dir / "frame_graph.tsv");
  std::mt19937_64 sim_rng(o.seed + 1);
  const SimilaritySets sims = generate_similarity_sets(data, o.synth, o.hard, o.transitive, sim_rng);
  write_file(dir / "hard_similarity.txt", format_hard_similarity(sims.hard));
  write_file(dir / "transitive.txt", format_transitive(sims.transitive));

  std::size_t scenarios = 0;
  for (FrameId f = kFirstRealFrame; f < static_cast<FrameId>(frames.size()); ++f) {
    if (data.graph.is_scenario(f)) ++scenarios;
  }
  std::printf("docs=%zu train=%zu val=%zu test=%zu\n", data.corpus.size(), train.size(), val.size(),
              test.size());
  std::printf("frames=%zu scenarios=%zu edges=%zu%s\n", data.graph.frame_count(), scenarios,
              data.graph.edges().size(), relation_summary(data.graph).c_str());
  std::printf("lexical_vocab=%zu hard_similarity=%zu transitive=%zu\n", data.vocab.size(),
              sims.hard.size(), sims.transitive.size());
  return 0;
}

// ------------------------------------------------------------------- train

std::string run_config_text(const Settings& s) {
  std::string out = "# shem run configuration\n";
  out += "# run_format=" + std::to_string(kRunFormatVersion) +
         " checkpoint_format=" + std::to_string(kCheckpointVersion) + "\n";
  return out + s.dump();
}

void dump_guidance(ShemModel& model, const Corpus& data, const Vocab& vocab, const FrameGraph& graph,
                   const fs::path& path) {
  std::ostringstream out;
  out << "# doc\tstep\tinjected\tscenario\n";
  for (std::size_t d = 0; d < data.size(); ++d) {
    const auto tokens = tokenize_sequence(data[d], vocab);
    ad::Tape tape;
    ForwardInput in;
    in.input_tokens = tokens;
    in.input_events = data[d].events;
    in.target_tokens = tokens;
    const ForwardResult r = model.forward(tape, in, ForwardMode::kEval, {});
    for (std::size_t j = 0; j < r.guidance.injected_abstract.size(); ++j) {
      const FrameId f = r.guidance.injected_abstract[j];
      out << d << '\t' << j << '\t' << vocab.frames().name(f) << '\t'
          << (graph.is_scenario(f) ? 1 : 0) << '\n';
    }
  }
  write_file(path, out.str());
}

json report_json(const PerplexityReport& r) {
  json j{{"base", r.base}, {"tokens", r.token_count}};
  if (r.has_compression) {
    j["compression"] = r.compression;
    j["combined"] = r.combined;
  } else {
    j["combined"] = r.base;
  }
  return j;
}

int cmd_train(RunConfig& rc, const Settings& settings, const std::string& guidance_path) {
  rc.fill_from_data_dir();
  require_file(rc.train_corpus, "training corpus");
  require_file(rc.val_corpus, "validation corpus");
  require_file(rc.frame_graph, "frame graph");
  if (!rc.train_frames.empty()) require_file(rc.train_frames, "training frames");
  if (!rc.val_frames.empty()) require_file(rc.val_frames, "validation frames");
  if (rc.out_dir.empty()) throw InputError("--out-dir is required");
  rc.model.validate();
  rc.train.validate();

  const FrameGraph graph = load_frame_graph(rc.frame_graph);
  FrameTable frames = graph.frames();
  Corpus train_data = load_corpus(rc.train_corpus, optional_path(rc.train_frames), frames, rc.max_events);
  Corpus val_data = load_corpus(rc.val_corpus, optional_path(rc.val_frames), frames, rc.max_events);
  if (train_data.empty() || val_data.empty()) throw InputError("empty training or validation corpus");
  const Vocab vocab = build_vocab(train_data, frames, rc.lexical_cap, rc.frame_cap);
  restrict_frames(train_data, vocab);
  restrict_frames(val_data, vocab);

  const fs::path dir(rc.out_dir);
  ensure_dir(dir);
  write_file(dir / "config.txt", run_config_text(settings));

  auto model = build_model(apply_ablation(rc.model), vocab.size(), vocab.frames().size(), &graph);
  std::printf("train=%zu val=%zu lexical_vocab=%zu frames=%zu parameters=%zu\n", train_data.size(),
              val_data.size(), vocab.size(), vocab.frames().size(), model->parameter_count());

  std::ofstream log(dir / "train.log", std::ios::trunc);
  if (!log) throw InputError("cannot write " + (dir / "train.log").string());
  TrainCallbacks cb;
  cb.on_epoch = [&](const TrainLogRow& row) {
    const std::string line = format_log_row(row);
    log << line << '\n';
    log.flush();
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
  };
  cb.on_improvement = [&](const ShemModel& m, const TrainState& st) {
    save_checkpoint(dir / "best.ckpt", m, vocab, st.global_step);
  };
  const TrainResult result = train(*model, train_data, val_data, vocab, rc.train, cb);
  save_checkpoint(dir / "best.ckpt", *model, vocab, result.steps_run);

  const PerplexityReport val = perplexity(*model, val_data, vocab);
  json summary{{"run_format", kRunFormatVersion},
               {"checkpoint_format", kCheckpointVersion},
               {"seed", rc.train.seed},
               {"epochs_run", result.epochs_run},
               {"steps_run", result.steps_run},
               {"best_epoch", result.best_epoch},
               {"best_val_ppl", result.best_val_ppl},
               {"stop_reason", result.stop_reason},
               {"validation", report_json(val)}};
  write_file(dir / "summary.json", summary.dump(2) + "\n");
  if (!guidance_path.empty()) {
    if (!model->config().compression_enabled) throw InputError("--dump-guidance needs a compression layer");
    dump_guidance(*model, val_data, vocab, graph, guidance_path);
  }
  std::printf("stop=%s best_epoch=%zu best_val_ppl=%.6f\n", result.stop_reason.c_str(),
              result.best_epoch, result.best_val_ppl);
  return 0;
}

// -------------------------------------------------------------------- eval

struct EvalOptions {
  std::string run;
  std::string checkpoint;
  std::string frame_graph;
  std::string corpus;
  std::string frames;
  std::string layer = "combined";
  std::size_t instances = 1000;
  std::uint64_t seed = 3;
  bool control = false;
  std::string hard;
  std::string transitive;
  std::string export_path;
  std::string json_path;
  std::size_t max_events = kDefaultEventsPerDoc;
};

struct LoadedModel {
  Checkpoint ckpt;
  FrameGraph graph;
  std::unique_ptr<ShemModel> model;
};

void resolve_run(EvalOptions& o) {
  if (o.run.empty()) return;
  const fs::path run(o.run);
  if (o.checkpoint.empty()) o.checkpoint = (run / "best.ckpt").string();
  if (o.frame_graph.empty()) {
    RunConfig rc;
    Settings s;
    rc.bind(s);
    s.apply_text(read_file(run / "config.txt"));
    rc.fill_from_data_dir();
    o.frame_graph = rc.frame_graph;
  }
}

LoadedModel load_model(EvalOptions& o) {
  resolve_run(o);
  require_file(o.checkpoint, "checkpoint");
  require_file(o.frame_graph, "frame graph");
  LoadedModel lm{load_checkpoint(o.checkpoint), load_frame_graph(o.frame_graph), nullptr};
  const auto& graph_names = lm.graph.frames().names();
  const auto& vocab_names = lm.ckpt.vocab.frames().names();
  if (graph_names.size() > vocab_names.size() ||
      !std::equal(graph_names.begin(), graph_names.end(), vocab_names.begin())) {
    throw InputError("frame graph does not match the checkpoint's frame table");
  }
  lm.model = model_from_checkpoint(lm.ckpt, &lm.graph);
  return lm;
}

Corpus load_eval_corpus(const EvalOptions& o, const Vocab& vocab) {
  require_file(o.corpus, "corpus");
  if (!o.frames.empty()) require_file(o.frames, "frames");
  FrameTable frames = vocab.frames();
  Corpus c = load_corpus(o.corpus, optional_path(o.frames), frames, o.max_events);
  if (c.empty()) throw InputError("empty corpus " + o.corpus);
  restrict_frames(c, vocab);
  return c;
}

ScoringLayer parse_layer(const std::string& s) {
  if (s == "base") return ScoringLayer::kBase;
  if (s == "compression") return ScoringLayer::kCompression;
  if (s == "combined") return ScoringLayer::kCombined;
  throw ArgumentError("--layer must be base, compression or combined");
}

void print_ppl_table(const char* title, const PerplexityReport& r, std::size_t count) {
  std::printf("%-12s %12s %12s %12s\n", title, "base", "compression", "combined");
  if (r.has_compression) {
    std::printf("%-12s %12.6f %12.6f %12.6f\n", "perplexity", r.base, r.compression, r.combined);
  } else {
    std::printf("%-12s %12.6f %12s %12.6f\n", "perplexity", r.base, "-", r.combined);
  }
  std::printf("instances=%zu tokens=%zu\n", count, r.token_count);
}

void emit_json(const EvalOptions& o, const json& j) {
  if (!o.json_path.empty()) write_file(o.json_path, j.dump(2) + "\n");
}

int eval_ppl(EvalOptions& o) {
  LoadedModel lm = load_model(o);
  const Corpus c = load_eval_corpus(o, lm.ckpt.vocab);
  const PerplexityReport r = perplexity(*lm.model, c, lm.ckpt.vocab);
  print_ppl_table("ppl", r, c.size());
  json j = report_json(r);
  j["instances"] = c.size();
  emit_json(o, j);
  return 0;
}

int eval_inc(EvalOptions& o) {
  const ScoringLayer layer = parse_layer(o.layer);
  LoadedModel lm = load_model(o);
  const Corpus c = load_eval_corpus(o, lm.ckpt.vocab);
  const auto inst = make_inc_instances(c, o.instances, o.seed);
  const double acc = 100.0 * inverse_narrative_cloze(*lm.model, inst, lm.ckpt.vocab, layer);
  std::printf("%-12s %12s %12s\n", "inc", "layer", "accuracy");
  std::printf("%-12s %12s %12.2f\n", "", o.layer.c_str(), acc);
  std::printf("instances=%zu chance=%.2f\n", inst.size(), 100.0 / kIncChoices);
  emit_json(o, json{{"layer", o.layer}, {"accuracy", acc}, {"instances", inst.size()}});
  return 0;
}

int eval_masked(EvalOptions& o) {
  LoadedModel lm = load_model(o);
  const Corpus c = load_eval_corpus(o, lm.ckpt.vocab);
  MaskedSet set;
  if (o.control) {
    for (const auto& seq : c) set.instances.push_back({seq, seq, seq.size()});
  } else {
    set = make_masked_instances(c, lm.graph);
  }
  if (set.instances.empty()) throw InputError("no scenario-connected masked instances in the corpus");
  const PerplexityReport r = masked_event_perplexity(*lm.model, set.instances, lm.ckpt.vocab);
  print_ppl_table(o.control ? "control" : "masked", r, set.instances.size());
  std::printf("skipped=%zu\n", set.skipped);
  json j = report_json(r);
  j["instances"] = set.instances.size();
  j["skipped"] = set.skipped;
  emit_json(o, j);
  return 0;
}

void write_embeddings(const fs::path& path, const std::vector<EventTuple>& events,
                      const Representer& represent) {
  std::ostringstream out;
  out.precision(9);
  for (const auto& e : events) {
    out << format_event(e);
    for (double v : represent(e)) out << '\t' << v;
    out << '\n';
  }
  write_file(path, out.str());
}

int eval_sim(EvalOptions& o) {
  if (o.hard.empty() && o.transitive.empty()) throw InputError("--hard or --transitive is required");
  LoadedModel lm = load_model(o);
  const Representer represent = model_representer(*lm.model, lm.ckpt.vocab);
  json j;
  std::vector<EventTuple> seen;
  auto note = [&seen](const EventTuple& e) {
    if (std::find(seen.begin(), seen.end(), e) == seen.end()) seen.push_back(e);
  };
  std::printf("%-12s %12s %12s\n", "sim", "score", "instances");
  if (!o.hard.empty()) {
    require_file(o.hard, "hard similarity file");
    const auto inst = load_hard_similarity(o.hard);
    const double acc = 100.0 * hard_similarity_accuracy(inst, represent);
    std::printf("%-12s %12.2f %12zu\n", "hard", acc, inst.size());
    j["hard"] = {{"accuracy", acc}, {"instances", inst.size()}};
    for (const auto& i : inst) {
      for (const auto& e : i.pair_a) note(e);
      for (const auto& e : i.pair_b) note(e);
    }
  }
  if (!o.transitive.empty()) {
    require_file(o.transitive, "transitive file");
    const auto inst = load_transitive(o.transitive);
    const double rho = transitive_correlation(inst, represent);
    std::printf("%-12s %12.4f %12zu\n", "transitive", rho, inst.size());
    j["transitive"] = {{"spearman", rho}, {"instances", inst.size()}};
    for (const auto& i : inst) {
      note(i.first);
      note(i.second);
    }
  }
  if (!o.export_path.empty()) write_embeddings(o.export_path, seen, represent);
  emit_json(o, j);
  return 0;
}

int cmd_export(EvalOptions& o) {
  if (o.export_path.empty()) throw InputError("--out is required");
  LoadedModel lm = load_model(o);
  const Corpus c = load_eval_corpus(o, lm.ckpt.vocab);
  std::vector<EventTuple> events;
  for (const auto& seq : c) {
    for (const auto& e : seq.events) {
      if (std::find(events.begin(), events.end(), e) == events.end()) events.push_back(e);
    }
  }
  write_embeddings(o.export_path, events, model_representer(*lm.model, lm.ckpt.vocab));
  std::printf("events=%zu dim=%zu\n", events.size(),
              events.empty() ? 0 : event_representation(*lm.model, events[0], lm.ckpt.vocab).size());
  return 0;
}

void add_model_source(CLI::App* cmd, EvalOptions& o) {
  cmd->add_option("--run", o.run, "run directory (supplies checkpoint and frame graph)");
  cmd->add_option("--checkpoint", o.checkpoint, "checkpoint file");
  cmd->add_option("--frame-graph", o.frame_graph, "frame relation graph file");
  cmd->add_option("--json", o.json_path, "machine-readable summary output");
}

void add_corpus_source(CLI::App* cmd, EvalOptions& o) {
  cmd->add_option("--corpus", o.corpus, "evaluation corpus")->required();
  cmd->add_option("--frames", o.frames, "evaluation frames file");
  cmd->add_option("--max-events", o.max_events, "events kept per document");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical frame-based event language model"};
  app.require_subcommand(1);

  GenDataOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "write a planted-structure synthetic dataset");
  gen_cmd->add_option("--out", gen.out, "output directory")->required();
  gen_cmd->add_option("--seed", gen.seed, "generator seed");
  gen_cmd->add_option("--docs", gen.synth.n_docs, "documents");
  gen_cmd->add_option("--scenarios", gen.synth.n_scenarios, "latent scenarios");
  gen_cmd->add_option("--frames-per-scenario", gen.synth.frames_per_scenario, "child frames per scenario");
  gen_cmd->add_option("--events", gen.synth.events_per_doc, "events per document");
  gen_cmd->add_option("--val-fraction", gen.val_fraction, "validation share of all documents");
  gen_cmd->add_option("--test-fraction", gen.test_fraction, "test share of all documents");
  gen_cmd->add_option("--hard", gen.hard, "hard similarity instances");
  gen_cmd->add_option("--transitive", gen.transitive, "transitive similarity instances");
  gen_cmd->add_flag("!--no-cross-links", gen.synth.cross_links, "omit non-scenario cross links");

  RunConfig rc;
  Settings settings;
  rc.bind(settings);
  auto* train_cmd = app.add_subcommand("train", "train a model; writes config, log and checkpoint");
  SettingFlags train_flags(*train_cmd, settings);
  bool no_compression = false;
  std::string guidance_path;
  train_cmd->add_flag("--no-compression", no_compression, "base layer only");
  train_cmd->add_option("--dump-guidance", guidance_path,
                        "write the injected compression frames of the validation set");

  EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->require_subcommand(1);
  auto* ppl_cmd = eval_cmd->add_subcommand("ppl", "per-token perplexity");
  add_model_source(ppl_cmd, ev);
  add_corpus_source(ppl_cmd, ev);
  auto* inc_cmd = eval_cmd->add_subcommand("inc", "inverse narrative cloze accuracy (percent)");
  add_model_source(inc_cmd, ev);
  add_corpus_source(inc_cmd, ev);
  inc_cmd->add_option("--layer", ev.layer, "base, compression or combined");
  inc_cmd->add_option("--instances", ev.instances, "instance count");
  inc_cmd->add_option("--seed", ev.seed, "instance seed");
  auto* masked_cmd = eval_cmd->add_subcommand("masked", "scenario-masked event perplexity");
  add_model_source(masked_cmd, ev);
  add_corpus_source(masked_cmd, ev);
  masked_cmd->add_flag("--control", ev.control, "score full documents with nothing removed");
  auto* sim_cmd = eval_cmd->add_subcommand("sim", "hard similarity and transitive correlation");
  add_model_source(sim_cmd, ev);
  sim_cmd->add_option("--hard", ev.hard, "hard similarity file");
  sim_cmd->add_option("--transitive", ev.transitive, "transitive similarity file");
  sim_cmd->add_option("--export-embeddings", ev.export_path, "write representation vectors");

  auto* export_cmd = app.add_subcommand("export-embeddings", "write event representation vectors");
  add_model_source(export_cmd, ev);
  add_corpus_source(export_cmd, ev);
  export_cmd->add_option("--out", ev.export_path, "output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*gen_cmd) return cmd_gen_data(gen);
    if (*train_cmd) {
      train_flags.apply();
      if (no_compression) rc.model.compression_enabled = false;
      return cmd_train(rc, settings, guidance_path);
    }
    if (*ppl_cmd) return eval_ppl(ev);
    if (*inc_cmd) return eval_inc(ev);
    if (*masked_cmd) return eval_masked(ev);
    if (*sim_cmd) return eval_sim(ev);
    if (*export_cmd) return cmd_export(ev);
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure in %s: %s\n", e.term().c_str(), e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  }
  return kExitInput;
}
