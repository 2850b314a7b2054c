// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#include "sanrec/recsys/recommender.hpp"

#include <algorithm>
#include <cmath>

#include "sanrec/cache/cache.hpp"
#include "sanrec/error.hpp"
#include "sanrec/rng.hpp"

namespace sanrec::recsys {

void RecommenderConfig::validate() const {
  text.validate();
  image.validate();
  san.validate();
  seq.validate();
  if (san.text_hidden != text.hidden || san.image_hidden != image.hidden) {
    throw ConfigError("side-network widths do not match the encoders");
  }
  if (san.text_plan.source_layers != text.layers || san.image_plan.source_layers != image.layers) {
    throw ConfigError("layer plans were computed for different encoder depths");
  }
  if (seq.d_model != san.d_seq) {
    throw ConfigError("sequence encoder width " + std::to_string(seq.d_model) +
                      " differs from item embedding width " + std::to_string(san.d_seq));
  }
  if (regime == Regime::kEPEFT && epeft_bottleneck < 1) {
    throw ConfigError("adapter bottleneck must be >= 1");
  }
}

std::uint64_t RecommenderConfig::hash() const {
  std::uint64_t h = mix64(text.fingerprint(), image.fingerprint());
  h = mix64(h, san.hash());
  for (std::uint64_t v : {std::uint64_t(regime), std::uint64_t(seq.d_model),
                          std::uint64_t(seq.heads), std::uint64_t(seq.blocks),
                          std::uint64_t(seq.max_len), seq.seed, std::uint64_t(epeft_bottleneck)}) {
    h = mix64(h, v);
  }
  return h;
}

namespace {

std::map<ItemId, backbone::HiddenStateStack> load_cache(const std::filesystem::path& path,
                                                        std::uint64_t fingerprint,
                                                        const std::vector<std::uint16_t>& layers,
                                                        const char* which) {
  if (path.empty() || !std::filesystem::exists(path)) {
    throw StalenessError(std::string("no ") + which + " cache at '" + path.string() +
                         "'; run the cache command first");
  }
  cache::CacheReader reader(path);
  reader.expect_fingerprint(fingerprint);
  const auto& kept = reader.header().kept_layers;
  for (auto l : layers) {
    if (std::find(kept.begin(), kept.end(), l) == kept.end()) {
      throw StalenessError(std::string(which) + " cache '" + path.string() + "' lacks layer " +
                           std::to_string(l) + " required by the layer plan; rebuild the cache");
    }
  }
  std::map<ItemId, backbone::HiddenStateStack> out;
  for (std::size_t i = 0; i < reader.header().item_count; ++i) {
    auto s = reader.read_at(i);
    const ItemId id = s.item_id;
    out.emplace(id, s.layers == layers ? std::move(s) : s.pruned(layers));
  }
  return out;
}

const RecommenderConfig& validated(const RecommenderConfig& cfg) {
  cfg.validate();
  return cfg;
}

template <typename T>
ad::Tensor<T> head_init(std::uint64_t seed, std::size_t rows, std::size_t cols) {
  Rng rng(mix64(seed, fnv1a("epeft.head")));
  const double s = 1.0 / std::sqrt(static_cast<double>(rows));
  ad::Tensor<T> t(rows, cols);
  for (auto& v : t.data()) v = static_cast<T>(static_cast<float>(rng.normal() * s));
  return t;
}

}  // namespace

template <typename T>
Recommender<T>::Recommender(const RecommenderConfig& cfg)
    : cfg_(validated(cfg)),
      text_(cfg_.text, "backbone.text"),
      image_(cfg_.image, "backbone.image"),
      seq_(cfg_.seq) {
  switch (cfg_.regime) {
    case Regime::kFFT:
      text_.unfreeze();
      image_.unfreeze();
      model_ = std::make_unique<sanet::SideNetwork<T>>(cfg_.san);
      break;
    case Regime::kEPEFT: {
      text_adapters_ = std::make_unique<backbone::EmbeddedAdapters<T>>(
          cfg_.text, cfg_.epeft_bottleneck, cfg_.san.seed, "adapter.text");
      image_adapters_ = std::make_unique<backbone::EmbeddedAdapters<T>>(
          cfg_.image, cfg_.epeft_bottleneck, cfg_.san.seed, "adapter.image");
      epeft_head_ = std::make_unique<ad::ParameterStore<T>>();
      const std::size_t in = cfg_.image.hidden + cfg_.text.hidden;
      epeft_head_->add("epeft.fusion.weight", head_init<T>(cfg_.san.seed, in, cfg_.san.d_seq));
      epeft_head_->add("epeft.fusion.bias", ad::Tensor<T>(1, cfg_.san.d_seq));
      break;
    }
    case Regime::kDPEFTCached:
      text_cache_ = load_cache(cfg_.text_cache, text_.fingerprint(),
                               cfg_.san.text_plan.cache_layers(), "text");
      image_cache_ = load_cache(cfg_.image_cache, image_.fingerprint(),
                                cfg_.san.image_plan.cache_layers(), "image");
      model_ = std::make_unique<sanet::SideNetwork<T>>(cfg_.san);
      break;
    case Regime::kDPEFTUncached:
      model_ = std::make_unique<sanet::SideNetwork<T>>(cfg_.san);
      break;
  }
}

template <typename T>
std::vector<ad::ParameterStore<T>*> Recommender<T>::stores() {
  std::vector<ad::ParameterStore<T>*> out{&seq_.parameters()};
  if (model_) out.push_back(&model_->parameters());
  if (text_adapters_) {
    out.push_back(&text_adapters_->parameters());
    out.push_back(&image_adapters_->parameters());
    out.push_back(epeft_head_.get());
  }
  out.push_back(&text_.parameters());
  out.push_back(&image_.parameters());
  return out;
}

template <typename T>
std::vector<const ad::ParameterStore<T>*> Recommender<T>::stores() const {
  auto mut = const_cast<Recommender*>(this)->stores();
  return {mut.begin(), mut.end()};
}

template <typename T>
std::vector<ad::ParameterStore<T>*> Recommender<T>::checkpoint_stores() {
  auto all = stores();
  if (cfg_.regime != Regime::kFFT) all.resize(all.size() - 2);
  return all;
}

template <typename T>
std::vector<const ad::ParameterStore<T>*> Recommender<T>::checkpoint_stores() const {
  auto mut = const_cast<Recommender*>(this)->checkpoint_stores();
  return {mut.begin(), mut.end()};
}

template <typename T>
const backbone::HiddenStateStack& Recommender<T>::cached(
    const std::map<ItemId, backbone::HiddenStateStack>& table, ItemId item,
    const char* which) const {
  auto it = table.find(item);
  if (it == table.end()) {
    throw StalenessError(std::string(which) + " cache has no entry for item " +
                         std::to_string(item) + "; rebuild the cache for this dataset");
  }
  return it->second;
}

template <typename T>
ad::Var<T> Recommender<T>::item_embeddings(ad::Tape<T>& tape, std::span<const ItemId> items) const {
  if (items.empty()) throw ContractError("item_embeddings: no items");
  const auto text_layers = cfg_.san.text_plan.cache_layers();
  const auto image_layers = cfg_.san.image_plan.cache_layers();

  switch (cfg_.regime) {
    case Regime::kDPEFTCached: {
      std::vector<const backbone::HiddenStateStack*> ts, is;
      for (ItemId id : items) {
        ts.push_back(&cached(text_cache_, id, "text"));
        is.push_back(&cached(image_cache_, id, "image"));
      }
      return model_->item_embed(tape, sanet::stack_entries<T>(tape, ts, text_layers),
                                sanet::stack_entries<T>(tape, is, image_layers));
    }
    case Regime::kDPEFTUncached: {
      std::vector<backbone::HiddenStateStack> ts, is;
      for (ItemId id : items) {
        ts.push_back(text_.encode_item(id));
        is.push_back(image_.encode_item(id));
      }
      std::vector<const backbone::HiddenStateStack*> tp, ip;
      for (std::size_t i = 0; i < ts.size(); ++i) {
        tp.push_back(&ts[i]);
        ip.push_back(&is[i]);
      }
      return model_->item_embed(tape, sanet::stack_entries<T>(tape, tp, text_layers),
                                sanet::stack_entries<T>(tape, ip, image_layers));
    }
    case Regime::kFFT: {
      std::vector<std::vector<ad::Var<T>>> tp, ip;
      for (ItemId id : items) {
        tp.push_back(text_.forward(tape, text_.content(id)));
        ip.push_back(image_.forward(tape, image_.content(id)));
      }
      return model_->item_embed(tape, sanet::stack_entries(tp, text_layers),
                                sanet::stack_entries(ip, image_layers));
    }
    case Regime::kEPEFT: {
      std::vector<ad::Var<T>> rows;
      for (ItemId id : items) {
        auto t = text_.forward(tape, text_.content(id), text_adapters_.get()).back();
        auto i = image_.forward(tape, image_.content(id), image_adapters_.get()).back();
        rows.push_back(ad::concat_cols<T>({i, t}));
      }
      return ad::linear(ad::concat_rows(rows), tape.param(epeft_head_->at("epeft.fusion.weight")),
                        tape.param(epeft_head_->at("epeft.fusion.bias")));
    }
  }
  throw ContractError("unknown regime");
}

template class Recommender<float>;
template class Recommender<double>;

}  // namespace sanrec::recsys
