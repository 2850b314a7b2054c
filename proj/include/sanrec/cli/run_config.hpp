// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Run configuration: line-oriented `key = value` text, `#` starts a comment.
// Precedence is flags > file > defaults. serialize() lists every key in a
// fixed order and hash() is taken over that text, so two runs with the same
// hash used the same settings.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sanrec/backbone/encoder.hpp"
#include "sanrec/cli/synthetic.hpp"
#include "sanrec/costmodel/cost.hpp"
#include "sanrec/recsys/recommender.hpp"
#include "sanrec/recsys/trainer.hpp"
#include "sanrec/regime.hpp"
#include "sanrec/sanet/layerdrop.hpp"
#include "sanrec/sanet/model.hpp"

namespace sanrec::cli {

struct RunConfig {
  sanet::Variant variant = sanet::Variant::kVS;
  Regime regime = Regime::kDPEFTCached;
  backbone::EncoderConfig text = backbone::EncoderConfig::text_default();
  backbone::EncoderConfig image = backbone::EncoderConfig::image_default();
  /// Text plan under VA (VS is always symmetric_even).
  sanet::PlanMode text_plan = sanet::PlanMode::kAsymEvenAll;
  std::size_t bottleneck = 16;
  std::size_t d_seq = 64;
  std::size_t max_seq_len = 10;
  std::size_t seq_heads = 2;
  std::size_t seq_blocks = 2;
  double dropout = 0.1;
  std::size_t epeft_bottleneck = 16;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  std::size_t epochs = 10;
  /// Training order, dropout and adapter/sequence-encoder initialization.
  std::uint64_t seed = 1;
  std::size_t workers = 4;
  SyntheticSpec data;
  /// Items per step for `profile`.
  std::size_t profile_batch = 32;

  /// Empty paths resolve under `out`.
  std::filesystem::path out = "sanrec-out";
  std::filesystem::path data_path;
  std::filesystem::path text_cache;
  std::filesystem::path image_cache;
  std::filesystem::path checkpoint;
  std::filesystem::path reports;

  /// Throws ConfigError on an unknown key or unparsable value.
  void set(const std::string& key, const std::string& value);
  /// Applies `key = value` lines. ConfigError names the line.
  void apply_text(const std::string& text, const std::string& origin = "config");
  /// Missing file: ConfigError.
  void load_file(const std::filesystem::path& path);

  /// Every key in fixed order, one `key = value` per line.
  std::string serialize() const;
  std::uint64_t hash() const;
  std::string hash_hex() const;
  static std::vector<std::string> keys();

  std::filesystem::path resolved_data() const;
  std::filesystem::path resolved_text_cache() const;
  std::filesystem::path resolved_image_cache() const;
  std::filesystem::path resolved_checkpoint() const;
  std::filesystem::path resolved_reports() const;

  sanet::SanConfig san() const;
  recsys::RecommenderConfig recommender() const;
  recsys::TrainOptions train_options() const;
  costmodel::Workload workload() const;
  /// Builds every derived config; throws ConfigError on inconsistency.
  void validate() const;
};

}  // namespace sanrec::cli
