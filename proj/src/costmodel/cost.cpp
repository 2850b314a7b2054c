// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#include "sanrec/costmodel/cost.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "sanrec/cache/cache.hpp"
#include "sanrec/error.hpp"
#include "sanrec/rng.hpp"

namespace sanrec::costmodel {
namespace {

using u64 = std::uint64_t;

constexpr u64 kBytesPerValue = 4;

u64 sanb_flops(u64 width, u64 d) { return 4 * width * d; }
u64 sanb_params(u64 width, u64 d) { return 2 * width * d + d + width; }
// down input, gelu input, up input
u64 sanb_activations(u64 width, u64 d) { return width + 2 * d; }

// Per token per block.
u64 block_activations_trainable(u64 s, u64 h) { return 16 * h + backbone::kEncoderHeads * s; }
u64 block_activations_frozen(u64 s, u64 h) { return 9 * h + backbone::kEncoderHeads * s; }
u64 adapter_activations(u64 h, u64 d) { return h + 2 * d; }

u64 tower_activations(const sanet::SanConfig& san) {
  const u64 m = san.m();
  const u64 d = san.bottleneck;
  const u64 ht = san.text_hidden;
  const u64 hi = san.image_hidden;
  u64 a = m * (sanb_activations(ht, d) + 2 * sanb_activations(hi, d));
  a += (m - 1) * 2 * ht + (m - 1) * 2 * hi + m * 2 * hi;  // gate mixing operands
  if (san.variant == sanet::Variant::kVA) a += m * ht;     // dimension transform inputs
  a += san.fusion_width();
  return a;
}

u64 epeft_head_flops(const Workload& w) { return 2 * (w.image.hidden + w.text.hidden) * w.san.d_seq; }
u64 epeft_head_params(const Workload& w) {
  return (w.image.hidden + w.text.hidden) * w.san.d_seq + w.san.d_seq;
}

u64 adapter_flops(const backbone::EncoderConfig& cfg, u64 s, u64 d) {
  return cfg.layers * 2 * (2 * s * cfg.hidden * d);
}

}  // namespace

u64 Workload::hash() const {
  u64 h = mix64(text.fingerprint(), image.fingerprint());
  h = mix64(h, san.hash());
  for (u64 v : {batch, text_tokens(), image_tokens(), epeft_bottleneck, cache_items}) h = mix64(h, v);
  return h;
}

std::string CostReport::line() const {
  std::ostringstream os;
  os << "COST regime=" << to_string(regime) << " fwdB=" << fwd_backbone_flops
     << " fwdP=" << fwd_peft_flops << " bwd=" << bwd_flops << " act=" << activation_bytes
     << " params=" << trainable_params << " cache=" << cache_bytes;
  return os.str();
}

u64 block_flops(u64 s, u64 hidden) { return 24 * s * hidden * hidden + 4 * s * s * hidden; }

u64 encoder_flops(const backbone::EncoderConfig& cfg, u64 s) {
  return cfg.layers * block_flops(s, cfg.hidden);
}

u64 tower_flops(const sanet::SanConfig& san) {
  const u64 m = san.m();
  const u64 d = san.bottleneck;
  u64 f = m * (sanb_flops(san.text_hidden, d) + 2 * sanb_flops(san.image_hidden, d));
  if (san.variant == sanet::Variant::kVA) f += m * 2 * san.text_hidden * san.image_hidden;
  f += 2 * san.fusion_width() * san.d_seq;
  return f;
}

u64 encoder_params(const backbone::EncoderConfig& cfg) {
  const u64 h = cfg.hidden;
  return (cfg.vocab + cfg.max_positions) * h + cfg.layers * (12 * h * h + 13 * h);
}

u64 tower_params(const sanet::SanConfig& san) {
  const u64 m = san.m();
  const u64 d = san.bottleneck;
  u64 p = m * (sanb_params(san.text_hidden, d) + 2 * sanb_params(san.image_hidden, d));
  p += (m - 1) * 2 + m;  // gates
  if (san.variant == sanet::Variant::kVA) p += san.text_hidden * san.image_hidden + san.image_hidden;
  p += san.fusion_width() * san.d_seq + san.d_seq;
  return p;
}

u64 adapter_params(const backbone::EncoderConfig& cfg, u64 bottleneck) {
  return cfg.layers * (2 * cfg.hidden * bottleneck + bottleneck + cfg.hidden);
}

CostReport estimate(const Workload& w, Regime regime) {
  w.san.validate();
  const u64 b = w.batch;
  const u64 st = w.text_tokens();
  const u64 si = w.image_tokens();
  const u64 backbone = encoder_flops(w.text, st) + encoder_flops(w.image, si);

  CostReport r;
  r.regime = regime;
  r.workload = w.hash();
  switch (regime) {
    case Regime::kFFT: {
      r.fwd_backbone_flops = b * backbone;
      r.fwd_peft_flops = b * tower_flops(w.san);
      r.bwd_flops = 2 * (r.fwd_backbone_flops + r.fwd_peft_flops);
      const u64 act = w.text.layers * st * block_activations_trainable(st, w.text.hidden) +
                      w.image.layers * si * block_activations_trainable(si, w.image.hidden) +
                      tower_activations(w.san);
      r.activation_bytes = kBytesPerValue * b * act;
      r.trainable_params = encoder_params(w.text) + encoder_params(w.image) + tower_params(w.san);
      break;
    }
    case Regime::kEPEFT: {
      const u64 d = w.epeft_bottleneck;
      r.fwd_backbone_flops = b * backbone;
      r.fwd_peft_flops =
          b * (adapter_flops(w.text, st, d) + adapter_flops(w.image, si, d) + epeft_head_flops(w));
      r.bwd_flops = r.fwd_backbone_flops + 2 * r.fwd_peft_flops;
      const u64 act =
          w.text.layers * st *
              (block_activations_frozen(st, w.text.hidden) + adapter_activations(w.text.hidden, d)) +
          w.image.layers * si *
              (block_activations_frozen(si, w.image.hidden) + adapter_activations(w.image.hidden, d)) +
          w.image.hidden + w.text.hidden;
      r.activation_bytes = kBytesPerValue * b * act;
      r.trainable_params = adapter_params(w.text, d) + adapter_params(w.image, d) + epeft_head_params(w);
      break;
    }
    case Regime::kDPEFTUncached:
    case Regime::kDPEFTCached: {
      r.fwd_backbone_flops = regime == Regime::kDPEFTCached ? 0 : b * backbone;
      r.fwd_peft_flops = b * tower_flops(w.san);
      r.bwd_flops = 2 * r.fwd_peft_flops;
      r.activation_bytes = kBytesPerValue * b * tower_activations(w.san);
      r.trainable_params = tower_params(w.san);
      if (regime == Regime::kDPEFTCached) {
        r.cache_bytes = cache::file_size(w.cache_items, w.san.text_plan.m() + 1, w.text.hidden) +
                        cache::file_size(w.cache_items, w.san.image_plan.m() + 1, w.image.hidden);
      }
      break;
    }
  }
  return r;
}

std::vector<std::string> gradient_groups(Regime regime) {
  const std::vector<std::string> towers{"intra_text.", "intra_image.", "inter.", "dtl.", "fusion."};
  switch (regime) {
    case Regime::kFFT: {
      auto g = towers;
      g.push_back("backbone.");
      return g;
    }
    case Regime::kEPEFT: return {"adapter.", "epeft."};
    case Regime::kDPEFTUncached:
    case Regime::kDPEFTCached: return towers;
  }
  return {};
}

bool ProbeResult::any_backbone_gradient() const {
  return std::any_of(with_gradients.begin(), with_gradients.end(),
                     [](const std::string& n) { return n.starts_with("backbone."); });
}

ProbeResult make_probe(Regime regime, const std::set<std::string>& reached,
                       std::size_t backbone_nodes_retained) {
  ProbeResult p;
  p.regime = regime;
  p.backbone_nodes_retained = backbone_nodes_retained;
  for (const auto& n : reached) {
    if (!n.starts_with("seq.")) p.with_gradients.insert(n);
  }
  return p;
}

namespace {

int chain_position(Regime r) {
  switch (r) {
    case Regime::kDPEFTCached: return 0;
    case Regime::kDPEFTUncached: return 1;
    case Regime::kEPEFT: return 2;
    case Regime::kFFT: return 3;
  }
  return 4;
}

}  // namespace

Comparison compare(const std::vector<CostReport>& reports) {
  Comparison c;
  c.reports = reports;
  for (const auto& r : reports) {
    if (r.workload != reports.front().workload) {
      throw ContractError("compare: reports describe different workloads");
    }
  }
  std::stable_sort(c.reports.begin(), c.reports.end(), [](const CostReport& a, const CostReport& b) {
    return chain_position(a.regime) < chain_position(b.regime);
  });
  if (c.reports.size() < 2) return c;
  c.has_verdict = true;
  for (std::size_t i = 1; i < c.reports.size(); ++i) {
    const auto& lo = c.reports[i - 1];
    const auto& hi = c.reports[i];
    if (lo.activation_bytes > hi.activation_bytes) {
      c.failures.push_back("activation bytes: " + to_string(lo.regime) + " > " + to_string(hi.regime));
    }
    if (lo.bwd_flops > hi.bwd_flops) {
      c.failures.push_back("backward FLOPs: " + to_string(lo.regime) + " > " + to_string(hi.regime));
    }
  }
  c.pass = c.failures.empty();
  return c;
}

std::string Comparison::table() const {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-15s %16s %16s %16s %14s %12s %12s\n", "regime", "fwd_backbone",
                "fwd_peft", "bwd", "activation_B", "params", "cache_B");
  os << buf;
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%-15s %16llu %16llu %16llu %14llu %12llu %12llu\n",
                  to_string(r.regime).c_str(), static_cast<unsigned long long>(r.fwd_backbone_flops),
                  static_cast<unsigned long long>(r.fwd_peft_flops),
                  static_cast<unsigned long long>(r.bwd_flops),
                  static_cast<unsigned long long>(r.activation_bytes),
                  static_cast<unsigned long long>(r.trainable_params),
                  static_cast<unsigned long long>(r.cache_bytes));
    os << buf;
  }
  auto order_by = [&](const char* name, auto field) {
    auto sorted = reports;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [&](const CostReport& a, const CostReport& b) { return field(a) < field(b); });
    os << "order by " << name << ":";
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      if (i > 0) os << (field(sorted[i - 1]) == field(sorted[i]) ? " =" : " <");
      os << " " << to_string(sorted[i].regime);
    }
    os << "\n";
  };
  order_by("activation_bytes", [](const CostReport& r) { return r.activation_bytes; });
  order_by("bwd_flops", [](const CostReport& r) { return r.bwd_flops; });
  order_by("fwd_backbone", [](const CostReport& r) { return r.fwd_backbone_flops; });
  order_by("params", [](const CostReport& r) { return r.trainable_params; });
  if (!has_verdict) {
    os << "VERDICT NONE (fewer than two regimes)\n";
  } else {
    os << "VERDICT " << (pass ? "PASS" : "FAIL") << "\n";
    for (const auto& f : failures) os << "  violated: " << f << "\n";
  }
  return os.str();
}

}  // namespace sanrec::costmodel
