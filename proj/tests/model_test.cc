#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"
#include "shem/corpus.h"
#include "shem/model.h"
#include "test_support.h"

using namespace shem;
using shem::testing::max_gradient_error;
using shem::testing::small_graph;
using shem::testing::tiny_config;

namespace {

struct World {
  FrameGraph graph = small_graph();
  Vocab vocab;
  EventSequence seq;
  std::vector<int> tokens;

  World() {
    std::vector<FrameId> kept;
    for (std::size_t f = kFirstRealFrame; f < graph.frames().size(); ++f) {
      kept.push_back(static_cast<FrameId>(f));
    }
    vocab = Vocab({"eat", "food", "man", "walk", "park", "dog"}, graph.frames(), kept);
    seq.events = {{"eat", "man", "food", "none"}, {"walk", "dog", "park", "none"}};
    seq.gold_frames = {frame("A1"), frame("B1")};
    tokens = tokenize_sequence(seq, vocab);
  }
  FrameId frame(const char* name) const { return *graph.frames().find(name); }

  std::unique_ptr<ShemModel> model(const ModelConfig& cfg) const {
    return std::make_unique<ShemModel>(cfg, vocab.size(), vocab.frames().size(), &graph);
  }

  ForwardInput input(std::span<const Observation> observed) const {
    ForwardInput in;
    in.input_tokens = tokens;
    in.input_events = seq.events;
    in.target_tokens = tokens;
    in.observed = observed;
    return in;
  }
};

std::vector<double> softmax(std::span<const double> v, double tau = 1.0) {
  const double m = *std::max_element(v.begin(), v.end());
  std::vector<double> out(v.size());
  double z = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) z += out[i] = std::exp((v[i] - m) / tau);
  for (auto& x : out) x /= z;
  return out;
}

ad::Var weighted(ad::Tape& t, const ForwardResult& r, const LossWeights& w) {
  return t.sum({t.scale(r.recon_base, w.alpha1), t.scale(r.recon_comp, w.alpha2),
                t.scale(r.kl_base, w.beta1), t.scale(r.kl_comp, w.beta2),
                t.scale(r.frame_cls, w.gamma)});
}

}  // namespace

TEST_CASE("parameters are created once and initialized to float32 values") {
  World w;
  auto m = w.model(tiny_config());
  std::set<std::string> names;
  for (const Parameter* p : m->parameters()) {
    CHECK(names.insert(p->name).second);
    for (double v : p->value) CHECK(static_cast<double>(static_cast<float>(v)) == v);
  }
  CHECK(m->manifest().size() == m->parameters().size());
  CHECK(m->find("base.chain.step_b")->rows == 2);
  CHECK(m->find("comp.chain.step_b")->rows == 1);
  CHECK(m->find("base.dec.slot_b")->rows == m->memory_slots());
  CHECK(m->find("nonexistent") == nullptr);
}

TEST_CASE("initialization is keyed on the seed") {
  World w;
  auto a = w.model(tiny_config());
  auto b = w.model(tiny_config());
  ModelConfig other = tiny_config();
  other.init_seed = 2;
  auto c = w.model(other);
  CHECK(a->find("base.chain.score_w")->value == b->find("base.chain.score_w")->value);
  CHECK(a->find("base.chain.score_w")->value != c->find("base.chain.score_w")->value);
}

TEST_CASE("sharing options alias parameters instead of copying them") {
  World w;
  ModelConfig cfg = tiny_config();
  cfg.share_encdec = true;
  cfg.share_frame_emb = true;
  auto m = w.model(cfg);
  CHECK(m->manifest().size() > m->parameters().size());
  CHECK(m->find("comp.chain.frame_emb") == m->find("base.chain.frame_emb"));
  CHECK(m->find("comp.dec.out_w") == m->find("base.dec.out_w"));
  CHECK(m->find("comp.input_proj") != nullptr);

  ModelConfig plain = tiny_config();
  plain.compression_enabled = false;
  auto p = w.model(plain);
  CHECK(p->find("comp.chain.score_w") == nullptr);
  CHECK(p->parameter_count() < w.model(tiny_config())->parameter_count());
}

TEST_CASE("round_to_float lands on representable values") {
  Parameter p("p", 3, 1);
  p.value = {0.1, 1.0 / 3.0, -2.718281828459045};
  round_to_float(p);
  for (double v : p.value) CHECK(static_cast<double>(static_cast<float>(v)) == v);
  CHECK(p.value[0] == doctest::Approx(0.1).epsilon(1e-7));
}

TEST_CASE("frame chain samples lie on the simplex and hard is their argmax") {
  World w;
  auto m = w.model(tiny_config());
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 10; ++rep) {
    ad::Tape t;
    std::mt19937_64 g1(rep), g2(rep + 100), g3(rep + 200);
    const auto r = m->forward(t, w.input({}), ForwardMode::kTrain, {&g1, &g2, &g3});
    for (const LatentChain* c : {&r.base, &*r.comp}) {
      for (std::size_t i = 0; i < c->size(); ++i) {
        const auto& s = c->relaxed[i];
        CHECK(std::accumulate(s.begin(), s.end(), 0.0) == doctest::Approx(1.0));
        CHECK(c->hard[i] == static_cast<FrameId>(argmax(s)));
        const auto q = softmax(c->logits[i]);
        for (std::size_t k = 0; k < q.size(); ++k) CHECK(c->q[i][k] == doctest::Approx(q[k]));
      }
    }
  }
}

TEST_CASE("evaluation path is noise-free softmax(logits / tau)") {
  World w;
  auto m = w.model(tiny_config());
  ad::Tape t;
  const auto r = m->forward(t, w.input({}), ForwardMode::kEval, {});
  for (std::size_t i = 0; i < r.base.size(); ++i) {
    const auto want = softmax(r.base.logits[i], tiny_config().gumbel_temperature);
    for (std::size_t k = 0; k < want.size(); ++k) {
      CHECK(r.base.relaxed[i][k] == doctest::Approx(want[k]));
    }
  }
}

TEST_CASE("observed frames dominate their step and leave logits untouched") {
  World w;
  auto m = w.model(tiny_config());
  const std::vector<Observation> obs{{0, w.frame("B2")}, {1, w.frame("A2")}};
  ad::Tape t;
  std::mt19937_64 g1(1), g2(2), g3(3);
  const auto r = m->forward(t, w.input(obs), ForwardMode::kTrain, {&g1, &g2, &g3});
  CHECK(r.base.hard[0] == w.frame("B2"));
  CHECK(r.base.hard[1] == w.frame("A2"));
  CHECK(r.base.relaxed[0][w.frame("B2")] > 0.999);

  ad::Tape t2;
  const auto e = m->forward(t2, w.input({}), ForwardMode::kEval, {});
  ad::Tape t3;
  const auto eo = m->forward(t3, w.input(std::span<const Observation>(obs).first(1)),
                             ForwardMode::kEval, {});
  CHECK(eo.base.logits[0] == e.base.logits[0]);
  CHECK(eo.sums.observed == 1.0);
}

TEST_CASE("invalid observations are rejected") {
  World w;
  auto m = w.model(tiny_config());
  ad::Tape t;
  const std::vector<Observation> beyond{{2, w.frame("A1")}};
  CHECK_THROWS_AS(m->forward(t, w.input(beyond), ForwardMode::kEval, {}), ArgumentError);
  const std::vector<Observation> bad_frame{{0, 999}};
  CHECK_THROWS_AS(m->forward(t, w.input(bad_frame), ForwardMode::kEval, {}), ArgumentError);
}

TEST_CASE("forward shapes follow the configuration") {
  World w;
  auto m = w.model(tiny_config());
  ad::Tape t;
  const auto r = m->forward(t, w.input({}), ForwardMode::kEval, {});
  CHECK(r.base.size() == 2);
  REQUIRE(r.comp.has_value());
  CHECK(r.comp->size() == 1);
  CHECK(r.base_logits.size() == w.tokens.size() - 1);
  CHECK(r.comp_logits.size() == w.tokens.size() - 1);
  for (ad::Var l : r.base_logits) CHECK(t.size(l) == w.vocab.size());
  CHECK(r.sums.tokens == static_cast<double>(w.tokens.size() - 1));
  CHECK(r.sums.base_steps == 2.0);
  CHECK(r.sums.comp_steps == 1.0);
}

TEST_CASE("disabling compression reduces to the single-layer model") {
  World w;
  ModelConfig cfg = tiny_config();
  cfg.compression_enabled = false;
  auto m = w.model(cfg);
  ad::Tape t;
  std::mt19937_64 g1(1), g2(2), g3(3);
  const auto r = m->forward(t, w.input({}), ForwardMode::kTrain, {&g1, &g2, &g3});
  CHECK_FALSE(r.comp.has_value());
  CHECK(r.comp_logits.empty());
  CHECK(r.sums.recon_comp == 0.0);
  CHECK(r.sums.kl_comp == 0.0);
  CHECK(r.sums.comp_steps == 0.0);
  CHECK(r.sums.recon_base > 0.0);
  const LossBundle b = compute_losses(r.sums, cfg.weights);
  CHECK(b.total == doctest::Approx(b.recon_base + b.kl_base));
}

TEST_CASE("evaluation is deterministic") {
  World w;
  auto m = w.model(tiny_config());
  ad::Tape a, b;
  const auto ra = m->forward(a, w.input({}), ForwardMode::kEval, {});
  const auto rb = m->forward(b, w.input({}), ForwardMode::kEval, {});
  CHECK(ra.sums.recon_base == rb.sums.recon_base);
  CHECK(ra.sums.recon_comp == rb.sums.recon_comp);
  CHECK(ra.base.hard == rb.base.hard);
}

TEST_CASE("guidance spans partition the base chain in order") {
  for (std::size_t nb = 1; nb <= 9; ++nb) {
    for (std::size_t nc = 1; nc <= nb; ++nc) {
      std::size_t expect = 0;
      for (std::size_t j = 0; j < nc; ++j) {
        const auto [first, last] = guidance_span(j, nb, nc);
        CHECK(first == expect);
        CHECK(last > first);
        expect = last;
      }
      CHECK(expect == nb);
    }
  }
  CHECK(guidance_span(0, 5, 3) == std::pair<std::size_t, std::size_t>{0, 1});
  CHECK(guidance_span(1, 5, 3) == std::pair<std::size_t, std::size_t>{1, 3});
  CHECK(guidance_span(2, 5, 3) == std::pair<std::size_t, std::size_t>{3, 5});
}

TEST_CASE("compression guidance injects ontology parents") {
  World w;
  std::mt19937_64 rng(7);
  const std::vector<FrameId> hard{w.frame("A1"), w.frame("B2"), w.frame("B1"), w.frame("A2")};
  const auto g = compression_guidance(hard, w.graph, RelationFilter::single(RelationType::kInheritance),
                                      2, rng);
  REQUIRE(g.abstract.size() == 4);
  CHECK(g.abstract[0] == w.frame("S1_scenario"));
  CHECK(g.abstract[1] == kAbstain);
  CHECK(g.abstract[2] == w.frame("S2_scenario"));
  CHECK(g.abstract[3] == w.frame("S1_scenario"));
  REQUIRE(g.injected_abstract.size() == 2);
  CHECK(g.injected_abstract[0] == w.frame("S1_scenario"));
  CHECK(g.injected_abstract[1] == w.frame("S2_scenario"));
  const std::vector<Observation> want{{0, w.frame("S1_scenario")},
                                      {0, w.frame("A1")},
                                      {1, w.frame("S2_scenario")},
                                      {1, w.frame("B1")}};
  REQUIRE(g.injections.size() == want.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    CHECK(g.injections[i].index == want[i].index);
    CHECK(g.injections[i].frame == want[i].frame);
  }
}

TEST_CASE("scenario-only guidance yields scenarios or abstains") {
  World w;
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(w.graph.frames().size()) - 1);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<FrameId> hard(5);
    for (auto& f : hard) f = pick(rng);
    const auto g = compression_guidance(hard, w.graph, RelationFilter::scenario_only(), 3, rng);
    for (FrameId f : g.injected_abstract) CHECK((f == kAbstain || w.graph.is_scenario(f)));
  }
}

TEST_CASE("reserved base frames never guide compression") {
  World w;
  std::mt19937_64 rng(1);
  const std::vector<FrameId> hard{kNoFrame, kAbstain, 1};
  const auto g = compression_guidance(hard, w.graph, RelationFilter::all(), 3, rng);
  CHECK(g.injections.empty());
  for (FrameId f : g.injected_abstract) CHECK(f == kAbstain);
}

TEST_CASE("losses normalize by tokens, steps and observations") {
  LossSums s;
  s.recon_base = 30.0;
  s.recon_comp = 45.0;
  s.kl_base = 10.0;
  s.kl_comp = 6.0;
  s.frame_cls = 8.0;
  s.tokens = 15.0;
  s.base_steps = 5.0;
  s.comp_steps = 3.0;
  s.observed = 4.0;
  LossWeights w{1.0, 0.5, 2.0, 1.0, 0.1};
  const LossBundle b = compute_losses(s, w);
  CHECK(b.recon_base == doctest::Approx(2.0));
  CHECK(b.recon_comp == doctest::Approx(3.0));
  CHECK(b.kl_base == doctest::Approx(2.0));
  CHECK(b.kl_comp == doctest::Approx(2.0));
  CHECK(b.frame_cls == doctest::Approx(2.0));
  CHECK(b.total == doctest::Approx(2.0 + 1.5 + 4.0 + 2.0 + 0.2));

  LossSums doubled = s;
  doubled += s;
  const LossBundle d = compute_losses(doubled, w);
  CHECK(d.total == doctest::Approx(b.total));

  LossSums empty;
  CHECK(compute_losses(empty, w).total == 0.0);
}

TEST_CASE("combination modes build the expected memories") {
  ad::Tape t;
  std::vector<ad::Var> base, comp;
  for (int i = 0; i < 5; ++i) base.push_back(t.constant(std::vector<double>{double(i), 0.0}));
  for (int j = 0; j < 3; ++j) comp.push_back(t.constant(std::vector<double>{0.0, 10.0 * (j + 1)}));

  const Memories none = combine_encodings(t, base, comp, CombineMode::kNone);
  CHECK(none.base.size() == 5);
  CHECK(none.comp.size() == 3);

  const Memories cat = combine_encodings(t, base, comp, CombineMode::kCat);
  CHECK(cat.base.size() == 8);
  CHECK(cat.comp.size() == 8);

  const Memories sum = combine_encodings(t, base, comp, CombineMode::kSum);
  REQUIRE(sum.base.size() == 5);
  const std::vector<double> comp_of{10, 20, 20, 30, 30};
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(t.value(sum.base[i])[0] == double(i));
    CHECK(t.value(sum.base[i])[1] == comp_of[i]);
  }
  CHECK_THROWS_AS(combine_encodings(t, base, {}, CombineMode::kSum), ArgumentError);
}

TEST_CASE("observations come from masked gold frames within the chain") {
  EventSequence seq;
  seq.events.resize(4);
  seq.gold_frames = {5, kNoFrame, 7, 8};
  ObservationMask mask{{true, true, false, true}};
  const auto obs = observations_from_mask(seq, mask, 3);
  REQUIRE(obs.size() == 1);
  CHECK(obs[0].index == 0);
  CHECK(obs[0].frame == 5);
  const auto all = observations_from_mask(seq, mask, 5);
  CHECK(all.size() == 2);
}

TEST_CASE("full model gradients agree with finite differences") {
  World w;
  ModelConfig cfg = tiny_config();
  cfg.hidden_dim = 4;
  cfg.word_emb_dim = 3;
  cfg.frame_emb_dim = 3;
  auto m = w.model(cfg);
  const std::vector<Observation> obs{{1, w.frame("B1")}};
  const double err = max_gradient_error(m->parameters(), [&](ad::Tape& t) {
    std::mt19937_64 g1(11), g2(12), g3(13);
    const auto r = m->forward(t, w.input(obs), ForwardMode::kTrain, {&g1, &g2, &g3});
    return weighted(t, r, cfg.weights);
  });
  CHECK(err < 1e-4);
}
