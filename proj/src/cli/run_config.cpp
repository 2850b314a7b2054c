// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#include "sanrec/cli/run_config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "sanrec/error.hpp"
#include "sanrec/rng.hpp"

namespace sanrec::cli {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& v) {
  Int out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("'" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  }
  return out;
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <typename Int>
Field int_field(std::string key, Int RunConfig::*member) {
  return {key, [member](const RunConfig& c) { return std::to_string(c.*member); },
          [key, member](RunConfig& c, const std::string& v) { c.*member = parse_int<Int>(key, v); }};
}

Field double_field(std::string key, double RunConfig::*member) {
  return {key, [member](const RunConfig& c) { return fmt_double(c.*member); },
          [key, member](RunConfig& c, const std::string& v) { c.*member = parse_double(key, v); }};
}

Field path_field(std::string key, std::filesystem::path RunConfig::*member) {
  return {key, [member](const RunConfig& c) { return (c.*member).string(); },
          [member](RunConfig& c, const std::string& v) { c.*member = v; }};
}

template <typename Int>
Field encoder_field(std::string key, backbone::EncoderConfig RunConfig::*enc,
                    Int backbone::EncoderConfig::*member) {
  return {key, [enc, member](const RunConfig& c) { return std::to_string(c.*enc.*member); },
          [key, enc, member](RunConfig& c, const std::string& v) {
            c.*enc.*member = parse_int<Int>(key, v);
          }};
}

template <typename Int>
Field data_field(std::string key, Int SyntheticSpec::*member) {
  return {key, [member](const RunConfig& c) { return std::to_string(c.data.*member); },
          [key, member](RunConfig& c, const std::string& v) { c.data.*member = parse_int<Int>(key, v); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    using E = backbone::EncoderConfig;
    std::vector<Field> f;
    f.push_back({"variant", [](const RunConfig& c) { return sanet::to_string(c.variant); },
                 [](RunConfig& c, const std::string& v) { c.variant = sanet::parse_variant(v); }});
    f.push_back({"regime", [](const RunConfig& c) { return to_string(c.regime); },
                 [](RunConfig& c, const std::string& v) { c.regime = parse_regime(v); }});
    for (auto [name, enc] : {std::pair{"text", &RunConfig::text}, {"image", &RunConfig::image}}) {
      const std::string p = name;
      f.push_back(encoder_field(p + ".layers", enc, &E::layers));
      f.push_back(encoder_field(p + ".hidden", enc, &E::hidden));
      f.push_back(encoder_field(p + ".vocab", enc, &E::vocab));
      f.push_back(encoder_field(p + ".max_positions", enc, &E::max_positions));
      f.push_back(encoder_field(p + ".tokens", enc, &E::item_tokens));
      f.push_back(encoder_field(p + ".seed", enc, &E::seed));
    }
    f.push_back({"text.plan", [](const RunConfig& c) { return sanet::to_string(c.text_plan); },
                 [](RunConfig& c, const std::string& v) { c.text_plan = sanet::parse_plan_mode(v); }});
    f.push_back(int_field("san.bottleneck", &RunConfig::bottleneck));
    f.push_back(int_field("d_seq", &RunConfig::d_seq));
    f.push_back(int_field("max_seq_len", &RunConfig::max_seq_len));
    f.push_back(int_field("seq.heads", &RunConfig::seq_heads));
    f.push_back(int_field("seq.blocks", &RunConfig::seq_blocks));
    f.push_back(double_field("dropout", &RunConfig::dropout));
    f.push_back(int_field("epeft.bottleneck", &RunConfig::epeft_bottleneck));
    f.push_back(int_field("batch_size", &RunConfig::batch_size));
    f.push_back(double_field("lr", &RunConfig::lr));
    f.push_back(int_field("epochs", &RunConfig::epochs));
    f.push_back(int_field("seed", &RunConfig::seed));
    f.push_back(int_field("workers", &RunConfig::workers));
    f.push_back(data_field("data.users", &SyntheticSpec::users));
    f.push_back(data_field("data.items", &SyntheticSpec::items));
    f.push_back(data_field("data.min_len", &SyntheticSpec::min_len));
    f.push_back(data_field("data.max_len", &SyntheticSpec::max_len));
    f.push_back({"data.strength", [](const RunConfig& c) { return fmt_double(c.data.strength); },
                 [](RunConfig& c, const std::string& v) {
                   c.data.strength = parse_double("data.strength", v);
                 }});
    f.push_back(data_field("data.seed", &SyntheticSpec::seed));
    f.push_back(int_field("profile.batch", &RunConfig::profile_batch));
    f.push_back(path_field("out", &RunConfig::out));
    f.push_back(path_field("data", &RunConfig::data_path));
    f.push_back(path_field("text_cache", &RunConfig::text_cache));
    f.push_back(path_field("image_cache", &RunConfig::image_cache));
    f.push_back(path_field("checkpoint", &RunConfig::checkpoint));
    f.push_back(path_field("reports", &RunConfig::reports));
    return f;
  }();
  return table;
}

std::filesystem::path or_default(const std::filesystem::path& p, const std::filesystem::path& out,
                                 const char* name) {
  return p.empty() ? out / name : p;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(*this, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void RunConfig::apply_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + " line " + std::to_string(n) + ": expected 'key = value'");
    }
    try {
      set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + " line " + std::to_string(n) + ": " + e.what());
    }
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  apply_text(ss.str(), path.string());
}

std::string RunConfig::serialize() const {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(*this) + "\n";
  return out;
}

std::uint64_t RunConfig::hash() const { return fnv1a(serialize()); }

std::string RunConfig::hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
  return buf;
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> k;
  for (const auto& f : fields()) k.push_back(f.key);
  return k;
}

std::filesystem::path RunConfig::resolved_data() const {
  return or_default(data_path, out, "interactions.tsv");
}
std::filesystem::path RunConfig::resolved_text_cache() const {
  return or_default(text_cache, out, "text.iisc");
}
std::filesystem::path RunConfig::resolved_image_cache() const {
  return or_default(image_cache, out, "image.iisc");
}
std::filesystem::path RunConfig::resolved_checkpoint() const {
  return or_default(checkpoint, out, "model.iism");
}
std::filesystem::path RunConfig::resolved_reports() const {
  return or_default(reports, out, "reports");
}

sanet::SanConfig RunConfig::san() const {
  auto cfg = sanet::SanConfig::for_encoders(variant, text, image, text_plan);
  cfg.bottleneck = bottleneck;
  cfg.d_seq = d_seq;
  cfg.seed = mix64(seed, fnv1a("san"));
  return cfg;
}

recsys::RecommenderConfig RunConfig::recommender() const {
  recsys::RecommenderConfig cfg;
  cfg.regime = regime;
  cfg.text = text;
  cfg.image = image;
  cfg.san = san();
  cfg.seq.d_model = d_seq;
  cfg.seq.heads = seq_heads;
  cfg.seq.blocks = seq_blocks;
  cfg.seq.max_len = max_seq_len;
  cfg.seq.dropout = dropout;
  cfg.seq.seed = mix64(seed, fnv1a("seq"));
  cfg.epeft_bottleneck = epeft_bottleneck;
  cfg.text_cache = resolved_text_cache();
  cfg.image_cache = resolved_image_cache();
  return cfg;
}

recsys::TrainOptions RunConfig::train_options() const {
  return recsys::TrainOptions{epochs, batch_size, lr, seed};
}

costmodel::Workload RunConfig::workload() const {
  costmodel::Workload w;
  w.text = text;
  w.image = image;
  w.san = san();
  w.batch = profile_batch;
  w.epeft_bottleneck = epeft_bottleneck;
  w.cache_items = data.items;
  return w;
}

void RunConfig::validate() const {
  text.validate();
  image.validate();
  data.validate();
  recommender().validate();
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (epochs == 0) throw ConfigError("epochs must be >= 1");
  if (!(lr >= 0.0)) throw ConfigError("lr must be >= 0");
  if (profile_batch == 0) throw ConfigError("profile.batch must be >= 1");
  if (workers == 0) throw ConfigError("workers must be >= 1");
}

}  // namespace sanrec::cli
