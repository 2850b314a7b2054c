// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#include "sanrec/sanet/model.hpp"

#include <algorithm>
#include <cmath>

#include "sanrec/error.hpp"
#include "sanrec/rng.hpp"

namespace sanrec::sanet {

std::string to_string(Variant v) { return v == Variant::kVS ? "VS" : "VA"; }

Variant parse_variant(const std::string& s) {
  if (s == "VS" || s == "vs") return Variant::kVS;
  if (s == "VA" || s == "va") return Variant::kVA;
  throw ConfigError("unknown variant '" + s + "' (expected VS or VA)");
}

void SanConfig::validate() const {
  text_plan.validate();
  image_plan.validate();
  if (text_plan.m() != image_plan.m()) {
    throw ConfigError("text plan keeps " + std::to_string(text_plan.m()) +
                      " blocks but image plan keeps " + std::to_string(image_plan.m()) +
                      "; all towers must share m");
  }
  if (variant == Variant::kVS && text_hidden != image_hidden) {
    throw ConfigError("VS needs equal text and image widths, got " + std::to_string(text_hidden) +
                      " and " + std::to_string(image_hidden) + "; use VA");
  }
  if (text_hidden < 1 || image_hidden < 1) throw ConfigError("tower widths must be positive");
  if (bottleneck < 1) throw ConfigError("bottleneck must be >= 1");
  if (d_seq < 1) throw ConfigError("d_seq must be >= 1");
}

std::uint64_t SanConfig::hash() const {
  std::uint64_t h = mix64(0x49495341ULL, static_cast<std::uint64_t>(variant));
  for (std::uint64_t v : {std::uint64_t(text_hidden), std::uint64_t(image_hidden),
                          std::uint64_t(bottleneck), std::uint64_t(d_seq), seed}) {
    h = mix64(h, v);
  }
  for (const auto* plan : {&text_plan, &image_plan}) {
    h = mix64(h, static_cast<std::uint64_t>(plan->mode));
    h = mix64(h, plan->source_layers);
    for (auto k : plan->kept) h = mix64(h, k);
  }
  return h;
}

SanConfig SanConfig::for_encoders(Variant variant, const backbone::EncoderConfig& text,
                                  const backbone::EncoderConfig& image, PlanMode asym_mode) {
  SanConfig cfg;
  cfg.variant = variant;
  cfg.text_hidden = text.hidden;
  cfg.image_hidden = image.hidden;
  cfg.image_plan = select_layers(PlanMode::kSymmetricEven, image.layers, image.layers);
  cfg.text_plan = variant == Variant::kVS
                      ? select_layers(PlanMode::kSymmetricEven, text.layers, image.layers)
                      : select_layers(asym_mode, text.layers, image.layers);
  return cfg;
}

template <typename T>
ad::Var<T> SanBlock<T>::forward(ad::Tape<T>& tape, ad::Var<T> x) const {
  auto hidden = ad::gelu(ad::linear(x, tape.param(*down), tape.param(*down_bias)));
  return ad::add(x, ad::linear(hidden, tape.param(*up), tape.param(*up_bias)));
}

namespace {

template <typename T>
ad::Tensor<T> seeded(Rng& rng, std::size_t rows, std::size_t cols) {
  const double s = 1.0 / std::sqrt(static_cast<double>(rows));
  ad::Tensor<T> t(rows, cols);
  for (auto& v : t.data()) v = static_cast<T>(static_cast<float>(rng.normal() * s));
  return t;
}

template <typename T>
SanBlock<T> make_block(ad::ParameterStore<T>& store, Rng& rng, const std::string& name,
                       std::size_t width, std::size_t bottleneck) {
  SanBlock<T> b;
  b.down = &store.add(name + ".down", seeded<T>(rng, width, bottleneck));
  b.down_bias = &store.add(name + ".down_bias", ad::Tensor<T>(1, bottleneck));
  b.up = &store.add(name + ".up", ad::Tensor<T>(bottleneck, width));
  b.up_bias = &store.add(name + ".up_bias", ad::Tensor<T>(1, width));
  return b;
}

template <typename T>
Gate<T> make_gate(ad::ParameterStore<T>& store, const std::string& name) {
  return Gate<T>{&store.add(name, ad::Tensor<T>::scalar(T(0)))};
}

// g * a + (1 - g) * b
template <typename T>
ad::Var<T> mix(ad::Var<T> g, ad::Var<T> a, ad::Var<T> b) {
  return ad::add(ad::mul(g, a), ad::mul(ad::scale(g, T(-1), T(1)), b));
}

}  // namespace

template <typename T>
SideNetwork<T>::SideNetwork(const SanConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(mix64(cfg_.seed, fnv1a("sanet")));
  const std::size_t m = cfg_.m();
  auto tower = [&](Tower<T>& t, const std::string& prefix, std::size_t width, std::size_t first_gate) {
    for (std::size_t i = 1; i <= m; ++i) {
      t.blocks.push_back(
          make_block(store_, rng, prefix + ".sanb" + std::to_string(i), width, cfg_.bottleneck));
    }
    for (std::size_t i = first_gate; i <= m; ++i) {
      t.gates.push_back(make_gate(store_, prefix + ".gate" + std::to_string(i)));
    }
  };
  tower(intra_text_, "intra_text", cfg_.text_hidden, 2);
  tower(intra_image_, "intra_image", cfg_.image_hidden, 2);
  tower(inter_, "inter", cfg_.image_hidden, 1);
  if (cfg_.variant == Variant::kVA) {
    dtl_weight_ = &store_.add("dtl.weight", seeded<T>(rng, cfg_.text_hidden, cfg_.image_hidden));
    dtl_bias_ = &store_.add("dtl.bias", ad::Tensor<T>(1, cfg_.image_hidden));
  }
  fusion_weight_ = &store_.add("fusion.weight", seeded<T>(rng, cfg_.fusion_width(), cfg_.d_seq));
  fusion_bias_ = &store_.add("fusion.bias", ad::Tensor<T>(1, cfg_.d_seq));
}

template <typename T>
ad::Var<T> SideNetwork<T>::run_intra(ad::Tape<T>& tape, const Tower<T>& tower,
                                    const Entries<T>& entries, const char* what) const {
  const std::size_t m = tower.blocks.size();
  if (entries.size() != m + 1) {
    throw ContractError(std::string(what) + " tower expects " + std::to_string(m + 1) +
                        " states, got " + std::to_string(entries.size()));
  }
  auto b = tower.blocks[0].forward(tape, entries[0]);
  for (std::size_t i = 2; i <= m; ++i) {
    auto g = tower.gates[i - 2].value(tape);
    b = tower.blocks[i - 1].forward(tape, mix(g, b, entries[i]));
  }
  return b;
}

template <typename T>
ad::Var<T> SideNetwork<T>::intra_text(ad::Tape<T>& tape, const Entries<T>& text) const {
  return run_intra(tape, intra_text_, text, "intra text");
}

template <typename T>
ad::Var<T> SideNetwork<T>::intra_image(ad::Tape<T>& tape, const Entries<T>& image) const {
  return run_intra(tape, intra_image_, image, "intra image");
}

template <typename T>
ad::Var<T> SideNetwork<T>::transform_text(ad::Tape<T>& tape, ad::Var<T> text_state) const {
  if (!has_dtl()) return text_state;
  return ad::linear(text_state, tape.param(*dtl_weight_), tape.param(*dtl_bias_));
}

template <typename T>
ad::Var<T> SideNetwork<T>::inter(ad::Tape<T>& tape, const Entries<T>& text,
                                const Entries<T>& image) const {
  const std::size_t m = inter_.blocks.size();
  if (text.size() != m + 1 || image.size() != m + 1) {
    throw ContractError("inter tower expects " + std::to_string(m + 1) +
                        " states per modality, got " + std::to_string(text.size()) + " and " +
                        std::to_string(image.size()));
  }
  auto g = inter_.gates[0].value(tape);
  auto b = inter_.blocks[0].forward(tape, mix(g, image[0], transform_text(tape, text[0])));
  for (std::size_t i = 2; i <= m; ++i) {
    g = inter_.gates[i - 1].value(tape);
    auto fused = mix(g, image[i], transform_text(tape, text[i]));
    b = inter_.blocks[i - 1].forward(tape, ad::add(fused, b));
  }
  return b;
}

template <typename T>
ad::Var<T> SideNetwork<T>::item_embed(ad::Tape<T>& tape, const Entries<T>& text,
                                     const Entries<T>& image) const {
  auto e_text = intra_text(tape, text);
  auto e_image = intra_image(tape, image);
  auto e_inter = inter(tape, text, image);
  auto joined = ad::concat_cols<T>({e_image, e_inter, e_text});
  return ad::linear(joined, tape.param(*fusion_weight_), tape.param(*fusion_bias_));
}

template <typename T>
Entries<T> stack_entries(ad::Tape<T>& tape, std::span<const backbone::HiddenStateStack* const> items,
                         std::span<const std::uint16_t> layers) {
  if (items.empty()) throw ContractError("stack_entries: no items");
  const std::size_t h = items.front()->hidden();
  Entries<T> out;
  out.reserve(layers.size());
  for (auto layer : layers) {
    ad::Tensor<T> t(items.size(), h);
    for (std::size_t r = 0; r < items.size(); ++r) {
      const auto& s = *items[r];
      auto it = std::find(s.layers.begin(), s.layers.end(), layer);
      if (it == s.layers.end() || s.hidden() != h) {
        throw ContractError("item " + std::to_string(s.item_id) + " has no layer " +
                            std::to_string(layer) + " of width " + std::to_string(h));
      }
      const auto src = s.states.row(static_cast<std::size_t>(it - s.layers.begin()));
      for (std::size_t c = 0; c < h; ++c) t(r, c) = static_cast<T>(src[c]);
    }
    out.push_back(tape.constant(std::move(t)));
  }
  return out;
}

template <typename T>
Entries<T> stack_entries(const std::vector<std::vector<ad::Var<T>>>& pooled,
                         std::span<const std::uint16_t> layers) {
  if (pooled.empty()) throw ContractError("stack_entries: no items");
  Entries<T> out;
  for (auto layer : layers) {
    std::vector<ad::Var<T>> rows;
    rows.reserve(pooled.size());
    for (const auto& item : pooled) {
      if (layer >= item.size()) {
        throw ContractError("stack_entries: layer " + std::to_string(layer) + " not produced");
      }
      rows.push_back(item[layer]);
    }
    out.push_back(ad::concat_rows(rows));
  }
  return out;
}

template struct SanBlock<float>;
template struct SanBlock<double>;
template class SideNetwork<float>;
template class SideNetwork<double>;
template Entries<float> stack_entries(ad::Tape<float>&,
                                      std::span<const backbone::HiddenStateStack* const>,
                                      std::span<const std::uint16_t>);
template Entries<double> stack_entries(ad::Tape<double>&,
                                       std::span<const backbone::HiddenStateStack* const>,
                                       std::span<const std::uint16_t>);
template Entries<float> stack_entries(const std::vector<std::vector<ad::Var<float>>>&,
                                      std::span<const std::uint16_t>);
template Entries<double> stack_entries(const std::vector<std::vector<ad::Var<double>>>&,
                                       std::span<const std::uint16_t>);

}  // namespace sanrec::sanet
