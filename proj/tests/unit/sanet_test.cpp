// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "sanrec/ad/gradcheck.hpp"
#include "sanrec/cache/cache.hpp"
#include "sanrec/error.hpp"
#include "sanrec/sanet/checkpoint.hpp"
#include "sanrec/sanet/layerdrop.hpp"
#include "sanrec/sanet/model.hpp"
#include "test_util.hpp"

using namespace sanrec;
using namespace sanrec::sanet;
using ad::Tensor;

namespace {

using Vec = std::vector<double>;
using Rows = std::vector<Vec>;

std::vector<std::uint16_t> v16(std::initializer_list<int> xs) {
  std::vector<std::uint16_t> out;
  for (int x : xs) out.push_back(static_cast<std::uint16_t>(x));
  return out;
}

// ---- straight-line oracle on per-item vectors, weights read from the store

double gelu(double x) {
  return 0.5 * x * (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (x + 0.044715 * x * x * x)));
}
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Vec affine(const Vec& x, const Tensor<double>& w, const Tensor<double>& b) {
  Vec y(w.cols());
  for (std::size_t c = 0; c < w.cols(); ++c) {
    double acc = b(0, c);
    for (std::size_t k = 0; k < w.rows(); ++k) acc += x[k] * w(k, c);
    y[c] = acc;
  }
  return y;
}

struct Oracle {
  const ad::ParameterStore<double>& p;

  const Tensor<double>& w(const std::string& n) const { return p.at(n).value; }
  double gate(const std::string& n) const { return sigmoid(w(n)(0, 0)); }

  Vec sanb(const std::string& name, const Vec& x) const {
    Vec h = affine(x, w(name + ".down"), w(name + ".down_bias"));
    for (auto& v : h) v = gelu(v);
    Vec u = affine(h, w(name + ".up"), w(name + ".up_bias"));
    for (std::size_t i = 0; i < x.size(); ++i) u[i] += x[i];
    return u;
  }

  Vec intra(const std::string& tower, const Rows& s) const {
    Vec b = sanb(tower + ".sanb1", s[0]);
    for (std::size_t i = 2; i < s.size(); ++i) {
      const double g = gate(tower + ".gate" + std::to_string(i));
      Vec in(b.size());
      for (std::size_t c = 0; c < b.size(); ++c) in[c] = g * b[c] + (1.0 - g) * s[i][c];
      b = sanb(tower + ".sanb" + std::to_string(i), in);
    }
    return b;
  }

  Vec dtl(const Vec& x) const {
    if (p.find("dtl.weight") == nullptr) return x;
    return affine(x, w("dtl.weight"), w("dtl.bias"));
  }

  Vec inter(const Rows& text, const Rows& image) const {
    Vec b;
    for (std::size_t i = 1; i < image.size(); ++i) {
      const std::size_t src = i == 1 ? 0 : i;
      const double g = gate("inter.gate" + std::to_string(i));
      Vec x = dtl(text[src]);
      Vec in(x.size());
      for (std::size_t c = 0; c < x.size(); ++c) {
        in[c] = g * image[src][c] + (1.0 - g) * x[c] + (i == 1 ? 0.0 : b[c]);
      }
      b = sanb("inter.sanb" + std::to_string(i), in);
    }
    return b;
  }

  Vec item(const Rows& text, const Rows& image) const {
    Vec joined = intra("intra_image", image);
    Vec e_inter = inter(text, image);
    Vec e_text = intra("intra_text", text);
    joined.insert(joined.end(), e_inter.begin(), e_inter.end());
    joined.insert(joined.end(), e_text.begin(), e_text.end());
    return affine(joined, w("fusion.weight"), w("fusion.bias"));
  }
};

template <typename T>
void randomize(ad::ParameterStore<T>& store, std::uint64_t seed, double scale = 0.5) {
  Rng rng(seed);
  for (std::size_t i = 0; i < store.size(); ++i) {
    for (auto& v : store[i].value.data()) v = static_cast<T>(rng.normal() * scale);
  }
}

template <typename T>
void set_gates(ad::ParameterStore<T>& store, const std::string& prefix, T raw) {
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (store[i].name.starts_with(prefix) && store[i].name.find(".gate") != std::string::npos) {
      store[i].value[0] = raw;
    }
  }
}

// Random per-item stacks: rows[item][entry] of width h.
std::vector<Rows> random_stacks(std::size_t items, std::size_t entries, std::size_t h, Rng& rng) {
  std::vector<Rows> out(items, Rows(entries, Vec(h)));
  for (auto& item : out)
    for (auto& e : item)
      for (auto& v : e) v = rng.normal();
  return out;
}

template <typename T>
Entries<T> to_entries(ad::Tape<T>& tape, const std::vector<Rows>& stacks) {
  Entries<T> out;
  for (std::size_t e = 0; e < stacks[0].size(); ++e) {
    Tensor<T> t(stacks.size(), stacks[0][e].size());
    for (std::size_t r = 0; r < stacks.size(); ++r)
      for (std::size_t c = 0; c < t.cols(); ++c) t(r, c) = static_cast<T>(stacks[r][e][c]);
    out.push_back(tape.constant(std::move(t)));
  }
  return out;
}

SanConfig toy_config(Variant variant, std::size_t text_layers, std::size_t image_layers,
                     std::size_t text_h, std::size_t image_h) {
  SanConfig cfg;
  cfg.variant = variant;
  cfg.text_hidden = text_h;
  cfg.image_hidden = image_h;
  cfg.image_plan = select_layers(PlanMode::kSymmetricEven, image_layers, image_layers);
  cfg.text_plan = select_layers(
      variant == Variant::kVS ? PlanMode::kSymmetricEven : PlanMode::kAsymEvenAll, text_layers,
      image_layers);
  cfg.bottleneck = 3;
  cfg.d_seq = 5;
  cfg.seed = 99;
  return cfg;
}

}  // namespace

TEST_CASE("layer plans: documented instances") {
  CHECK(select_layers(PlanMode::kSymmetricEven, 12, 12).kept == v16({2, 4, 6, 8, 10, 12}));
  CHECK(select_layers(PlanMode::kSymmetricEven, 7, 7).kept == v16({2, 4, 6}));

  auto p80 = select_layers(PlanMode::kAsymEq5Grouped, 80, 12);
  CHECK(p80.group_size == 13);
  CHECK(p80.kept == v16({15, 28, 41, 54, 67, 80}));
  CHECK_FALSE(eq5_admissible(80, 14, 6));

  auto p24 = select_layers(PlanMode::kAsymEq5Grouped, 24, 12);
  CHECK(p24.group_size == 3);
  CHECK(p24.kept == v16({9, 12, 15, 18, 21, 24}));

  auto p32 = select_layers(PlanMode::kAsymEq5Grouped, 32, 12);
  CHECK(p32.group_size == 5);
  CHECK(p32.kept == v16({7, 12, 17, 22, 27, 32}));

  CHECK(select_layers(PlanMode::kAsymEvenAll, 24, 12).kept == v16({4, 8, 12, 16, 20, 24}));
  CHECK(select_layers(PlanMode::kAsymEvenAll, 12, 12).kept == v16({2, 4, 6, 8, 10, 12}));
  // 7/6 * j = 1.17, 2.33, 3.5, 4.67, 5.83, 7 with halves rounded up.
  CHECK(select_layers(PlanMode::kAsymEvenAll, 7, 12).kept == v16({1, 2, 4, 5, 6, 7}));
  CHECK(p24.cache_layers() == v16({0, 9, 12, 15, 18, 21, 24}));
  CHECK(p24.describe() == "asym_eq5_grouped L=24 k=3 {9,12,15,18,21,24}");
}

TEST_CASE("layer plans: infeasible requests") {
  CHECK_THROWS_AS(select_layers(PlanMode::kSymmetricEven, 1, 12), ConfigError);
  CHECK_THROWS_AS(select_layers(PlanMode::kAsymEvenAll, 5, 12), ConfigError);
  CHECK_THROWS_AS(select_layers(PlanMode::kAsymEq5Grouped, 6, 12), ConfigError);
  CHECK_THROWS_AS(select_layers(PlanMode::kAsymEvenAll, 12, 1), ConfigError);
  CHECK_THROWS_AS(parse_plan_mode("even"), ConfigError);
}

TEST_CASE("layer plans: legality sweep") {
  for (std::size_t image = 2; image <= 24; ++image) {
    for (std::size_t src = 2; src <= 100; ++src) {
      const std::size_t m = image / 2;
      for (auto mode : {PlanMode::kSymmetricEven, PlanMode::kAsymEvenAll, PlanMode::kAsymEq5Grouped}) {
        const bool asym = mode != PlanMode::kSymmetricEven;
        const bool feasible =
            !asym || (src >= m && (mode == PlanMode::kAsymEvenAll || (src - 1) / m >= 1));
        if (!feasible) {
          CHECK_THROWS_AS(select_layers(mode, src, image), ConfigError);
          continue;
        }
        auto plan = select_layers(mode, src, image);
        CHECK(plan.m() == (asym ? m : src / 2));
        CHECK_NOTHROW(plan.validate());
        CHECK(plan.kept.back() <= src);
        if (mode == PlanMode::kAsymEq5Grouped) {
          CHECK(eq5_admissible(src, plan.group_size, m));
          CHECK_FALSE(eq5_admissible(src, plan.group_size + 1, m));
          CHECK(plan.kept.back() == src);
        }
      }
    }
  }
}

TEST_CASE("SAN block: zero up projection is the identity") {
  auto cfg = toy_config(Variant::kVS, 4, 4, 6, 6);
  SideNetwork<float> model(cfg);
  Rng rng(3);
  ad::Tape<float> tape;
  auto x = tape.constant(testing::random_tensor<float>(3, 6, rng));
  auto y = model.intra_text_tower().blocks[0].forward(tape, x);
  CHECK(testing::bit_equal(y.value(), x.value()));
}

TEST_CASE("SAN block: hand arithmetic, d=1, H=2") {
  ad::ParameterStore<double> store;
  SanBlock<double> b;
  b.down = &store.add("down", Tensor<double>(2, 1, {0.5, 0.25}));
  b.down_bias = &store.add("down_bias", Tensor<double>(1, 1, {0.1}));
  b.up = &store.add("up", Tensor<double>(1, 2, {2.0, -1.0}));
  b.up_bias = &store.add("up_bias", Tensor<double>(1, 2, {0.3, -0.2}));
  ad::Tape<double> tape;
  auto y = b.forward(tape, tape.constant(Tensor<double>(1, 2, {1.0, -2.0})));
  // down: 0.5 - 0.5 + 0.1 = 0.1; gelu(0.1) = 0.0539828...
  const double g = 0.5 * 0.1 * (1.0 + std::tanh(0.7978845608028654 * (0.1 + 0.044715 * 0.001)));
  CHECK(g == doctest::Approx(0.0539828).epsilon(1e-5));
  CHECK(std::abs(y.value()(0, 0) - (1.0 + 2.0 * g + 0.3)) < 1e-6);
  CHECK(std::abs(y.value()(0, 1) - (-2.0 - g - 0.2)) < 1e-6);

  ad::Tape<double> t2;
  CHECK_THROWS_AS(b.forward(t2, t2.constant(Tensor<double>(1, 3))), DimensionError);
}

TEST_CASE("SAN block: gradients agree with central differences") {
  ad::ParameterStore<double> store;
  Rng rng(5);
  SanBlock<double> b;
  b.down = &store.add("down", testing::random_tensor<double>(4, 2, rng));
  b.down_bias = &store.add("down_bias", testing::random_tensor<double>(1, 2, rng));
  b.up = &store.add("up", testing::random_tensor<double>(2, 4, rng));
  b.up_bias = &store.add("up_bias", testing::random_tensor<double>(1, 4, rng));
  auto x = testing::random_tensor<double>(3, 4, rng);
  auto probe = testing::random_tensor<double>(4, 1, rng);
  ad::LossFn<double> loss = [&](ad::Tape<double>& t) {
    return ad::sum(ad::matmul(b.forward(t, t.constant(x)), t.constant(probe)));
  };
  auto report = ad::finite_difference_check(store, loss, 1e-5, 1e-3);
  CHECK(report.params.size() == 4);
  CHECK(report.passed());
  CHECK(report.max_rel_err() < 1e-6);
}

TEST_CASE("intra tower matches the oracle at initial gates") {
  auto cfg = toy_config(Variant::kVA, 8, 8, 6, 4);
  SideNetwork<double> model(cfg);
  randomize(model.parameters(), 11);
  set_gates(model.parameters(), "intra", 0.0);
  Rng rng(12);
  auto stacks = random_stacks(3, cfg.m() + 1, 6, rng);
  ad::Tape<double> tape;
  auto out = model.intra_text(tape, to_entries(tape, stacks));
  Oracle oracle{model.parameters()};
  for (std::size_t r = 0; r < 3; ++r) {
    auto expected = oracle.intra("intra_text", stacks[r]);
    for (std::size_t c = 0; c < 6; ++c) CHECK(std::abs(out.value()(r, c) - expected[c]) < 1e-6);
  }
}

TEST_CASE("intra tower gate saturation") {
  auto cfg = toy_config(Variant::kVS, 8, 8, 4, 4);
  SideNetwork<float> model(cfg);
  randomize(model.parameters(), 21);
  Rng rng(22);
  ad::Tape<float> tape;
  auto entries = to_entries(tape, random_stacks(2, cfg.m() + 1, 4, rng));
  const auto& tower = model.intra_image_tower();

  set_gates(model.parameters(), "intra_image", 30.0f);
  auto high = model.intra_image(tape, entries);
  auto cascade = tower.blocks[0].forward(tape, entries[0]);
  for (std::size_t i = 1; i < tower.blocks.size(); ++i) cascade = tower.blocks[i].forward(tape, cascade);
  CHECK(testing::bit_equal(high.value(), cascade.value()));

  set_gates(model.parameters(), "intra_image", -30.0f);
  ad::Tape<float> t2;
  auto entries2 = to_entries(t2, random_stacks(2, cfg.m() + 1, 4, rng));
  auto low = model.intra_image(t2, entries2);
  auto last = tower.blocks.back().forward(t2, entries2.back());
  CHECK(testing::bit_equal(low.value(), last.value()));

  for (float raw : {-30.0f, -3.0f, 0.0f, 3.0f}) {
    set_gates(model.parameters(), "intra_image", raw);
    for (const auto& g : tower.gates) {
      if (raw > -30.0f) {
        CHECK(g.current() > 0.0f);
        CHECK(g.current() < 1.0f);
      }
    }
  }
}

TEST_CASE("intra tower with one block ignores gates") {
  auto cfg = toy_config(Variant::kVS, 2, 2, 4, 4);
  SideNetwork<double> model(cfg);
  CHECK(model.intra_text_tower().gates.empty());
  randomize(model.parameters(), 4);
  Rng rng(8);
  ad::Tape<double> tape;
  auto entries = to_entries(tape, random_stacks(2, 2, 4, rng));
  auto out = model.intra_text(tape, entries);
  auto direct = model.intra_text_tower().blocks[0].forward(tape, entries[0]);
  CHECK(testing::bit_equal(out.value(), direct.value()));

  Entries<double> short_stack{entries[0]};
  CHECK_THROWS_AS(model.intra_text(tape, short_stack), ContractError);
}

TEST_CASE("inter tower: image-saturated gates ignore text") {
  auto cfg = toy_config(Variant::kVA, 8, 8, 6, 4);
  SideNetwork<float> model(cfg);
  randomize(model.parameters(), 31);
  set_gates(model.parameters(), "inter", 30.0f);
  Rng rng(32);
  auto image = random_stacks(2, cfg.m() + 1, 4, rng);
  ad::Tape<float> tape;
  auto img = to_entries(tape, image);
  auto a = model.inter(tape, to_entries(tape, random_stacks(2, cfg.m() + 1, 6, rng)), img);
  auto b = model.inter(tape, to_entries(tape, random_stacks(2, cfg.m() + 1, 6, rng)), img);
  CHECK(testing::bit_equal(a.value(), b.value()));
}

TEST_CASE("inter tower: identical VS stacks reduce to state plus carry") {
  auto cfg = toy_config(Variant::kVS, 8, 8, 4, 4);
  SideNetwork<double> model(cfg);
  CHECK_FALSE(model.has_dtl());
  randomize(model.parameters(), 41);
  Rng rng(42);
  auto stacks = random_stacks(2, cfg.m() + 1, 4, rng);
  ad::Tape<double> tape;
  auto entries = to_entries(tape, stacks);
  auto out = model.inter(tape, entries, entries);
  const auto& tower = model.inter_tower();
  auto b = tower.blocks[0].forward(tape, entries[0]);
  for (std::size_t i = 2; i <= cfg.m(); ++i) b = tower.blocks[i - 1].forward(tape, ad::add(entries[i], b));
  for (std::size_t k = 0; k < out.value().size(); ++k) {
    CHECK(std::abs(out.value()[k] - b.value()[k]) < 1e-12);
  }
}

TEST_CASE("inter tower: VA matches DTL plus cascade oracle") {
  auto cfg = toy_config(Variant::kVA, 8, 8, 6, 4);
  SideNetwork<double> model(cfg);
  CHECK(model.has_dtl());
  randomize(model.parameters(), 51);
  Rng rng(52);
  auto text = random_stacks(3, cfg.m() + 1, 6, rng);
  auto image = random_stacks(3, cfg.m() + 1, 4, rng);
  ad::Tape<double> tape;
  auto out = model.inter(tape, to_entries(tape, text), to_entries(tape, image));
  Oracle oracle{model.parameters()};
  for (std::size_t r = 0; r < 3; ++r) {
    auto expected = oracle.inter(text[r], image[r]);
    for (std::size_t c = 0; c < 4; ++c) CHECK(std::abs(out.value()(r, c) - expected[c]) < 1e-6);
  }
}

TEST_CASE("VS requires equal widths; towers share m") {
  CHECK_THROWS_AS(SideNetwork<float>(toy_config(Variant::kVS, 8, 8, 6, 4)), ConfigError);
  auto cfg = toy_config(Variant::kVA, 8, 8, 6, 4);
  cfg.text_plan = select_layers(PlanMode::kSymmetricEven, 4, 4);
  CHECK_THROWS_AS(SideNetwork<float>{cfg}, ConfigError);
}

TEST_CASE("item embedding: zero-initialized towers") {
  backbone::EncoderConfig text = backbone::EncoderConfig::text_default();
  backbone::EncoderConfig image = backbone::EncoderConfig::image_default();
  auto cfg = SanConfig::for_encoders(Variant::kVA, text, image);
  CHECK(cfg.d_seq == 64);
  SideNetwork<double> model(cfg);
  Rng rng(61);
  auto ts = random_stacks(2, cfg.m() + 1, text.hidden, rng);
  auto is = random_stacks(2, cfg.m() + 1, image.hidden, rng);
  ad::Tape<double> tape;
  auto e = model.item_embed(tape, to_entries(tape, ts), to_entries(tape, is));
  CHECK(e.shape() == ad::Shape{2, 64});
  // With up projections at zero every SAN block passes its input through.
  Oracle oracle{model.parameters()};
  for (std::size_t r = 0; r < 2; ++r) {
    Vec it = ts[r][0], im = is[r][0];
    for (std::size_t i = 2; i <= cfg.m(); ++i)
      for (std::size_t c = 0; c < it.size(); ++c) {
        it[c] = 0.5 * it[c] + 0.5 * ts[r][i][c];
        im[c] = 0.5 * im[c] + 0.5 * is[r][i][c];
      }
    Vec x = oracle.dtl(ts[r][0]), inter(x.size());
    for (std::size_t c = 0; c < x.size(); ++c) inter[c] = 0.5 * is[r][0][c] + 0.5 * x[c];
    for (std::size_t i = 2; i <= cfg.m(); ++i) {
      Vec xi = oracle.dtl(ts[r][i]);
      for (std::size_t c = 0; c < xi.size(); ++c) inter[c] += 0.5 * is[r][i][c] + 0.5 * xi[c];
    }
    Vec joined = im;
    joined.insert(joined.end(), inter.begin(), inter.end());
    joined.insert(joined.end(), it.begin(), it.end());
    auto expected = affine(joined, oracle.w("fusion.weight"), oracle.w("fusion.bias"));
    for (std::size_t c = 0; c < 64; ++c) CHECK(std::abs(e.value()(r, c) - expected[c]) < 1e-9);
  }
}

TEST_CASE("item embedding matches the full-graph oracle on a 2-item toy model") {
  for (auto variant : {Variant::kVS, Variant::kVA}) {
    auto cfg = toy_config(variant, 6, 6, variant == Variant::kVS ? 4 : 6, 4);
    SideNetwork<double> model(cfg);
    randomize(model.parameters(), 71);
    Rng rng(72);
    auto ts = random_stacks(2, cfg.m() + 1, cfg.text_hidden, rng);
    auto is = random_stacks(2, cfg.m() + 1, cfg.image_hidden, rng);
    ad::Tape<double> tape;
    auto e = model.item_embed(tape, to_entries(tape, ts), to_entries(tape, is));
    Oracle oracle{model.parameters()};
    for (std::size_t r = 0; r < 2; ++r) {
      auto expected = oracle.item(ts[r], is[r]);
      for (std::size_t c = 0; c < cfg.d_seq; ++c) CHECK(std::abs(e.value()(r, c) - expected[c]) < 1e-6);
    }
  }
}

TEST_CASE("item embedding gradients agree with central differences") {
  auto cfg = toy_config(Variant::kVA, 6, 6, 5, 4);
  SideNetwork<double> model(cfg);
  randomize(model.parameters(), 81);
  Rng rng(82);
  auto ts = random_stacks(3, cfg.m() + 1, 5, rng);
  auto is = random_stacks(3, cfg.m() + 1, 4, rng);
  auto probe = testing::random_tensor<double>(cfg.d_seq, 1, rng);
  ad::LossFn<double> loss = [&](ad::Tape<double>& t) {
    auto e = model.item_embed(t, to_entries(t, ts), to_entries(t, is));
    return ad::sum(ad::gelu(ad::matmul(e, t.constant(probe))));
  };
  auto report = ad::finite_difference_check(model.parameters(), loss, 1e-5, 1e-5);
  CHECK(report.params.size() == model.parameters().size());
  for (const auto& p : report.params) {
    INFO(p.name << " " << p.max_rel_err);
    CHECK(p.max_rel_err < 1e-5);
  }

  // 32-bit tape against the 64-bit reference.
  SideNetwork<float> model32(cfg);
  for (std::size_t i = 0; i < model.parameters().size(); ++i) {
    model32.parameters()[i].value = model.parameters()[i].value.cast<float>();
  }
  ad::Tape<float> t32;
  auto e32 = model32.item_embed(t32, to_entries(t32, ts), to_entries(t32, is));
  auto l32 = ad::sum(ad::gelu(ad::matmul(e32, t32.constant(probe.cast<float>()))));
  auto g32 = t32.backward(l32, {&model32.parameters()});
  auto reference = ad::central_differences(model.parameters(), loss, 1e-5);
  auto cmp = ad::compare_gradients(g32, reference, 1e-3);
  CHECK(cmp.passed());
}

TEST_CASE("frozen backbone receives no gradient through the towers") {
  backbone::EncoderConfig tc{backbone::Modality::kText, 4, 6, 20, 8, 3, 1};
  backbone::EncoderConfig ic{backbone::Modality::kImage, 4, 4, 20, 8, 3, 2};
  backbone::Encoder<double> text(tc, "backbone.text"), image(ic, "backbone.image");
  auto cfg = SanConfig::for_encoders(Variant::kVA, tc, ic);
  cfg.bottleneck = 2;
  cfg.d_seq = 3;
  SideNetwork<double> model(cfg);
  randomize(model.parameters(), 91);

  ad::Tape<double> tape;
  std::vector<std::vector<ad::Var<double>>> tp, ip;
  for (std::uint64_t id : {1u, 2u}) {
    tp.push_back(text.forward(tape, text.content(id)));
    ip.push_back(image.forward(tape, image.content(id)));
  }
  auto tl = cfg.text_plan.cache_layers();
  auto il = cfg.image_plan.cache_layers();
  auto e = model.item_embed(tape, stack_entries(tp, tl), stack_entries(ip, il));
  auto grads = tape.backward(ad::sum(e), {&model.parameters(), &text.parameters(), &image.parameters()});
  for (const auto& n : text.parameters().names()) CHECK_FALSE(grads.contains(n));
  for (const auto& n : image.parameters().names()) CHECK_FALSE(grads.contains(n));
  for (const auto& n : model.parameters().names()) CHECK(grads.contains(n));
  CHECK(tape.retained_with_tag("backbone") == 0);
}

TEST_CASE("cached and freshly encoded stacks give bit-identical embeddings") {
  testing::TempDir dir("sanrec-sanet");
  backbone::EncoderConfig tc{backbone::Modality::kText, 6, 8, 40, 8, 4, 3};
  backbone::EncoderConfig ic{backbone::Modality::kImage, 4, 8, 40, 8, 5, 4};
  backbone::Encoder<float> text(tc), image(ic);
  auto cfg = SanConfig::for_encoders(Variant::kVS, tc, ic, PlanMode::kAsymEvenAll);
  cfg.text_plan = select_layers(PlanMode::kAsymEvenAll, 6, 4);
  SideNetwork<float> model(cfg);
  randomize(model.parameters(), 5, 0.3);

  const std::vector<std::uint64_t> items{3, 1, 8};
  auto tl = cfg.text_plan.cache_layers();
  auto il = cfg.image_plan.cache_layers();
  cache::build_cache(text, std::span<const std::uint64_t>(items), tl, dir.path() / "t.iisc");
  cache::build_cache(image, std::span<const std::uint64_t>(items), il, dir.path() / "i.iisc");
  cache::CacheReader tr(dir.path() / "t.iisc"), ir(dir.path() / "i.iisc");

  std::vector<backbone::HiddenStateStack> cached_t, cached_i, fresh_t, fresh_i;
  for (auto id : items) {
    cached_t.push_back(tr.read_item(id, text.fingerprint()));
    cached_i.push_back(ir.read_item(id, image.fingerprint()));
    fresh_t.push_back(text.encode_item(id));
    fresh_i.push_back(image.encode_item(id));
  }
  auto ptrs = [](const std::vector<backbone::HiddenStateStack>& v) {
    std::vector<const backbone::HiddenStateStack*> out;
    for (const auto& s : v) out.push_back(&s);
    return out;
  };
  ad::Tape<float> a, b;
  auto ct = ptrs(cached_t), ci = ptrs(cached_i), ft = ptrs(fresh_t), fi = ptrs(fresh_i);
  auto ea = model.item_embed(a, stack_entries<float>(a, ct, tl), stack_entries<float>(a, ci, il));
  auto eb = model.item_embed(b, stack_entries<float>(b, ft, tl), stack_entries<float>(b, fi, il));
  CHECK(testing::bit_equal(ea.value(), eb.value()));

  std::vector<std::uint16_t> missing{0, 5};
  CHECK_THROWS_AS(stack_entries<float>(a, ci, missing), ContractError);
}

TEST_CASE("checkpoint roundtrip") {
  testing::TempDir dir("sanrec-ckpt");
  auto cfg = toy_config(Variant::kVA, 8, 4, 6, 4);
  SideNetwork<float> model(cfg);
  randomize(model.parameters(), 101);
  ad::ParameterStore<float> extra;
  extra.add("seq.w", Tensor<float>(2, 2, {1, 2, 3, 4}));
  CheckpointInfo info{cfg.variant, cfg.text_plan, cfg.image_plan, cfg.hash(), 0};
  auto path = dir.path() / "m.iism";
  save_checkpoint<float>(path, info, {&model.parameters(), &extra});

  auto header = read_checkpoint_info(path);
  CHECK(header.variant == Variant::kVA);
  CHECK(header.text_plan == cfg.text_plan);
  CHECK(header.image_plan == cfg.image_plan);
  CHECK(header.parameter_count == model.parameters().size() + 1);

  SideNetwork<float> restored(cfg);
  ad::ParameterStore<float> extra2;
  extra2.add("seq.w", Tensor<float>(2, 2));
  load_checkpoint<float>(path, {&restored.parameters(), &extra2}, cfg.hash());
  for (std::size_t i = 0; i < model.parameters().size(); ++i) {
    CHECK(testing::bit_equal(model.parameters()[i].value, restored.parameters()[i].value));
  }
  CHECK(testing::bit_equal(extra.at("seq.w").value, extra2.at("seq.w").value));

  CHECK_THROWS_AS(load_checkpoint<float>(path, {&restored.parameters(), &extra2}, cfg.hash() + 1),
                  StalenessError);
  CHECK_THROWS_AS(load_checkpoint<float>(path, {&restored.parameters()}, cfg.hash()), FormatError);

  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 3));
  }
  CHECK_THROWS_AS(load_checkpoint<float>(path, {&restored.parameters(), &extra2}, cfg.hash()),
                  FormatError);
  bytes[4] = 9;
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  CHECK_THROWS_AS(read_checkpoint_info(path), VersionError);
}
