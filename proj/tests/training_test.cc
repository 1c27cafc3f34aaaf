#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "shem/synthetic.h"
#include "shem/training.h"
#include "test_support.h"

using namespace shem;
using shem::testing::tiny_config;

namespace {

SyntheticData small_data(std::size_t docs = 24) {
  SyntheticConfig cfg;
  cfg.n_scenarios = 2;
  cfg.frames_per_scenario = 2;
  cfg.n_docs = docs;
  cfg.events_per_doc = 3;
  std::mt19937_64 rng(17);
  return generate_synthetic_corpus(cfg, rng);
}

ModelConfig small_model() {
  ModelConfig c = tiny_config();
  c.n_base_latents = 3;
  c.n_comp_latents = 2;
  c.relation_filter = RelationFilter::single(RelationType::kInheritance);
  return c;
}

std::vector<PreparedDocument> prepare(const SyntheticData& d, std::size_t n) {
  std::vector<PreparedDocument> out(n);
  std::mt19937_64 rng(3);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].seq = &d.corpus[i];
    out[i].tokens = tokenize_sequence(d.corpus[i], d.vocab);
    const auto mask = apply_observation_mask(d.corpus[i], 0.5, rng);
    out[i].observed = observations_from_mask(d.corpus[i], mask, 3);
  }
  return out;
}

std::vector<std::vector<double>> grads(ShemModel& m) {
  std::vector<std::vector<double>> out;
  for (const Parameter* p : m.parameters()) out.push_back(p->grad);
  return out;
}

}  // namespace

TEST_CASE("clipping bounds the global norm by the threshold") {
  Parameter a("a", 2, 1), b("b", 1, 1);
  std::vector<Parameter*> ps{&a, &b};
  for (double scale : {0.1, 1.0, 4.0, 30.0}) {
    a.grad = {3.0 * scale, 4.0 * scale};
    b.grad = {12.0 * scale};
    const double g = 13.0 * scale;
    CHECK(clip_gradients(ps, 5.0) == doctest::Approx(g));
    CHECK(gradient_norm(ps) == doctest::Approx(std::min(g, 5.0)));
    CHECK(a.grad[0] / b.grad[0] == doctest::Approx(0.25));
  }
  CHECK_THROWS_AS(clip_gradients(ps, 0.0), ArgumentError);
}

TEST_CASE("adam follows the bias-corrected update") {
  Parameter p("p", 2, 1);
  p.value = {0.5, -0.25};
  Adam adam(0.01, 0.9, 0.999, 1e-8);
  std::vector<Parameter*> ps{&p};
  const std::vector<std::vector<double>> gs{{0.2, -0.1}, {0.4, 0.3}};
  std::vector<double> m(2, 0.0), v(2, 0.0), want = p.value;
  for (std::size_t t = 1; t <= gs.size(); ++t) {
    p.grad = gs[t - 1];
    adam.step(ps);
    for (std::size_t i = 0; i < 2; ++i) {
      m[i] = 0.9 * m[i] + 0.1 * gs[t - 1][i];
      v[i] = 0.999 * v[i] + 0.001 * gs[t - 1][i] * gs[t - 1][i];
      const double mh = m[i] / (1 - std::pow(0.9, double(t)));
      const double vh = v[i] / (1 - std::pow(0.999, double(t)));
      want[i] = static_cast<float>(want[i] - 0.01 * mh / (std::sqrt(vh) + 1e-8));
      CHECK(p.value[i] == doctest::Approx(want[i]).epsilon(1e-6));
      CHECK(static_cast<double>(static_cast<float>(p.value[i])) == p.value[i]);
    }
  }
  CHECK(adam.steps() == 2);
  Parameter q("q", 1, 1);
  std::vector<Parameter*> other{&p, &q};
  CHECK_THROWS_AS(adam.step(other), ArgumentError);
}

TEST_CASE("early stopping counts epochs since the best score") {
  TrainState st(1);
  CHECK(st.record_validation(10.0));
  CHECK_FALSE(st.should_stop(2));
  CHECK_FALSE(st.record_validation(10.0));
  CHECK_FALSE(st.should_stop(2));
  CHECK(st.record_validation(9.5));
  CHECK(st.epochs_since_best == 0);
  CHECK_FALSE(st.record_validation(11.0));
  CHECK_FALSE(st.record_validation(9.6));
  CHECK(st.should_stop(2));
  CHECK(st.best_val_ppl == 9.5);
}

TEST_CASE("training configuration validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ArgumentError);
  c = TrainConfig{};
  c.predicate_dropout = 1.5;
  CHECK_THROWS_AS(c.validate(), ArgumentError);
  c = TrainConfig{};
  c.grad_clip_norm = 0.0;
  CHECK_THROWS_AS(c.validate(), ArgumentError);
}

TEST_CASE("split micro-batches accumulate the full-batch gradient") {
  const auto data = small_data();
  auto m = std::make_unique<ShemModel>(small_model(), data.vocab.size(),
                                       data.vocab.frames().size(), &data.graph);
  const auto docs = prepare(data, 6);
  const LossSums norms = batch_normalizers(*m, docs);
  CHECK(norms.base_steps == 18.0);
  CHECK(norms.comp_steps == 12.0);

  auto run = [&](std::size_t part) {
    m->zero_grad();
    std::mt19937_64 g1(1), g2(2), g3(3);
    LossSums sums;
    for (std::size_t s = 0; s < docs.size(); s += part) {
      sums += accumulate_gradients(
          *m, std::span<const PreparedDocument>(docs).subspan(s, std::min(part, docs.size() - s)),
          norms, {&g1, &g2, &g3});
    }
    return std::make_pair(sums, grads(*m));
  };
  const auto [full_sums, full] = run(6);
  for (std::size_t part : {1, 2, 4}) {
    const auto [sums, split] = run(part);
    CHECK(sums.recon_base == doctest::Approx(full_sums.recon_base));
    CHECK(sums.tokens == full_sums.tokens);
    double worst = 0.0;
    for (std::size_t k = 0; k < full.size(); ++k) {
      for (std::size_t i = 0; i < full[k].size(); ++i) {
        worst = std::max(worst, std::abs(full[k][i] - split[k][i]));
      }
    }
    CHECK(worst < 1e-12);
  }
  CHECK(full_sums.tokens == norms.tokens);
  CHECK(full_sums.observed == norms.observed);
}

TEST_CASE("ablation plans describe the built parameter sets") {
  ModelConfig c = small_model();
  ModelPlan p = apply_ablation(c);
  CHECK(p.compression_layer);
  CHECK_FALSE(p.shared_encoder);
  CHECK_FALSE(p.comp_input_projection);

  c.compression_enabled = false;
  c.share_encdec = true;
  p = apply_ablation(c);
  CHECK_FALSE(p.compression_layer);
  CHECK_FALSE(p.shared_encoder);
  CHECK(p.combine == CombineMode::kNone);
  c.combine = CombineMode::kSum;
  CHECK_THROWS_AS(apply_ablation(c), ArgumentError);

  c = small_model();
  c.share_encdec = true;
  c.share_frame_emb = true;
  p = apply_ablation(c);
  CHECK(p.shared_encoder);
  CHECK(p.shared_decoder);
  CHECK(p.shared_frame_embedding);
  CHECK(p.comp_input_projection == (c.frame_emb_dim != c.word_emb_dim));

  const auto data = small_data(4);
  auto m = build_model(p, data.vocab.size(), data.vocab.frames().size(), &data.graph);
  CHECK(m->find("comp.enc.l0.fw.w") == m->find("base.enc.l0.fw.w"));
  CHECK(m->find("comp.chain.frame_emb") == m->find("base.chain.frame_emb"));
  CHECK((m->find("comp.input_proj") != nullptr) == p.comp_input_projection);

  p.shared_decoder = false;
  CHECK_THROWS_AS(build_model(p, data.vocab.size(), data.vocab.frames().size(), &data.graph),
                  ArgumentError);
}

TEST_CASE("log rows carry every loss term") {
  TrainLogRow row;
  row.epoch = 3;
  row.step = 12;
  row.loss.recon_base = 1.5;
  row.val.combined = 20.25;
  const std::string s = format_log_row(row);
  CHECK(s.rfind("epoch=3 step=12 L_r1=1.5 ", 0) == 0);
  for (const char* key : {" L_r2=", " L_KL1=", " L_KL2=", " L_c=", " total=", " contrastive=",
                          " val_ppl_base=", " val_ppl_comp=", " val_ppl_total=20.25"}) {
    CHECK(s.find(key) != std::string::npos);
  }
}

TEST_CASE("stop metric selects the requested perplexity") {
  PerplexityReport r;
  r.base = 10;
  r.compression = 20;
  r.combined = 14;
  r.has_compression = true;
  CHECK(stop_metric_value(r, StopMetric::kBase) == 10);
  CHECK(stop_metric_value(r, StopMetric::kCompression) == 20);
  CHECK(stop_metric_value(r, StopMetric::kCombined) == 14);
  r.has_compression = false;
  CHECK(stop_metric_value(r, StopMetric::kCompression) == 10);
}

TEST_CASE("training reduces the loss and keeps the best parameters") {
  const auto data = small_data(40);
  Corpus train_docs(data.corpus.begin(), data.corpus.begin() + 32);
  Corpus val_docs(data.corpus.begin() + 32, data.corpus.end());
  auto m = std::make_unique<ShemModel>(small_model(), data.vocab.size(),
                                       data.vocab.frames().size(), &data.graph);
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.grad_accumulation = 2;
  cfg.max_epochs = 4;
  cfg.learning_rate = 1e-2;
  std::size_t epochs_seen = 0, improvements = 0;
  TrainCallbacks cb;
  cb.on_epoch = [&](const TrainLogRow&) { ++epochs_seen; };
  cb.on_improvement = [&](const ShemModel&, const TrainState&) { ++improvements; };
  const TrainResult r = train(*m, train_docs, val_docs, data.vocab, cfg, cb);
  CHECK(r.epochs_run == 4);
  CHECK(r.steps_run == 16);
  CHECK(epochs_seen == 4);
  CHECK(improvements >= 1);
  REQUIRE(r.step_losses.size() == 16);
  CHECK(r.step_losses.back().recon_base < r.step_losses.front().recon_base);
  const PerplexityReport now = perplexity(*m, val_docs, data.vocab);
  CHECK(now.combined == doctest::Approx(r.best_val_ppl).epsilon(1e-9));
  CHECK(r.log[r.best_epoch - 1].val.combined == r.best_val_ppl);
}

TEST_CASE("training honours the step cap") {
  const auto data = small_data(16);
  Corpus docs(data.corpus.begin(), data.corpus.end());
  auto m = std::make_unique<ShemModel>(small_model(), data.vocab.size(),
                                       data.vocab.frames().size(), &data.graph);
  TrainConfig cfg;
  cfg.batch_size = 2;
  cfg.grad_accumulation = 1;
  cfg.max_steps = 3;
  const TrainResult r = train(*m, docs, docs, data.vocab, cfg);
  CHECK(r.steps_run == 3);
  CHECK(r.stop_reason == "max_steps");
}

TEST_CASE("non-finite parameters raise a numerical error") {
  const auto data = small_data(8);
  Corpus docs(data.corpus.begin(), data.corpus.end());
  auto m = std::make_unique<ShemModel>(small_model(), data.vocab.size(),
                                       data.vocab.frames().size(), &data.graph);
  m->find("base.dec.out_b")->value[Vocab::kTup] = std::nan("");
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.grad_accumulation = 1;
  CHECK_THROWS_AS(train(*m, docs, docs, data.vocab, cfg), NumericalError);
}

TEST_CASE("contrastive training accumulates a finite objective") {
  const auto data = small_data();
  auto m = std::make_unique<ShemModel>(small_model(), data.vocab.size(),
                                       data.vocab.frames().size(), &data.graph);
  const auto docs = prepare(data, 6);
  const std::size_t anchors = count_contrastive_anchors(docs);
  CHECK(anchors > 0);
  TrainConfig cfg;
  std::mt19937_64 rng(2);
  m->zero_grad();
  const auto stats = accumulate_contrastive(*m, data.vocab, docs, cfg, double(anchors), rng);
  CHECK(stats.anchors == anchors);
  CHECK(std::isfinite(stats.loss_sum));
  CHECK(stats.loss_sum > 0.0);
  CHECK(gradient_norm(m->parameters()) > 0.0);
}
