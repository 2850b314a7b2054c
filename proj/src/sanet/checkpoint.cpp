// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#include "sanrec/sanet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include "sanrec/error.hpp"

namespace sanrec::sanet {
namespace {

class Writer {
 public:
  void raw(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void uint(std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f32(float f) { uint(std::bit_cast<std::uint32_t>(f), 4); }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::vector<unsigned char> bytes) : buf_(std::move(bytes)) {}
  std::uint64_t uint(int bytes) {
    need(static_cast<std::size_t>(bytes));
    std::uint64_t v = 0;
    for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | buf_[pos_ + static_cast<std::size_t>(i)];
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }
  float f32() { return std::bit_cast<float>(static_cast<std::uint32_t>(uint(4))); }
  const unsigned char* take(std::size_t n) {
    need(n);
    const unsigned char* p = buf_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > buf_.size()) throw FormatError("checkpoint: truncated", buf_.size());
  }
  std::vector<unsigned char> buf_;
  std::size_t pos_ = 0;
};

void write_plan(Writer& w, const LayerDropPlan& p) {
  w.u8(static_cast<std::uint8_t>(p.mode));
  w.uint(p.source_layers, 2);
  w.uint(p.group_size, 2);
  w.uint(p.kept.size(), 2);
  for (auto k : p.kept) w.uint(k, 2);
}

LayerDropPlan read_plan(Reader& r) {
  LayerDropPlan p;
  const std::size_t at = r.pos();
  const auto mode = r.uint(1);
  if (mode > 2) throw FormatError("checkpoint: unknown plan mode", at);
  p.mode = static_cast<PlanMode>(mode);
  p.source_layers = r.uint(2);
  p.group_size = r.uint(2);
  const auto m = r.uint(2);
  for (std::uint64_t i = 0; i < m; ++i) p.kept.push_back(static_cast<std::uint16_t>(r.uint(2)));
  try {
    p.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint: ") + e.what(), at);
  }
  return p;
}

Reader open(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open '" + path.string() + "'");
  return Reader({std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()});
}

CheckpointInfo read_info(Reader& r) {
  if (std::memcmp(r.take(4), kCheckpointMagic, 4) != 0) {
    throw FormatError("checkpoint: bad magic", 0);
  }
  const auto version = r.uint(2);
  if (version != kCheckpointVersion) {
    throw VersionError("checkpoint: unsupported version " + std::to_string(version), 4);
  }
  CheckpointInfo info;
  const auto variant = r.uint(1);
  if (variant > 1) throw FormatError("checkpoint: unknown variant", 6);
  info.variant = static_cast<Variant>(variant);
  info.text_plan = read_plan(r);
  info.image_plan = read_plan(r);
  info.config_hash = r.uint(8);
  info.parameter_count = static_cast<std::uint32_t>(r.uint(4));
  return info;
}

}  // namespace

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const CheckpointInfo& info,
                     const std::vector<const ad::ParameterStore<T>*>& stores) {
  Writer w;
  w.raw(kCheckpointMagic, 4);
  w.uint(kCheckpointVersion, 2);
  w.u8(static_cast<std::uint8_t>(info.variant));
  write_plan(w, info.text_plan);
  write_plan(w, info.image_plan);
  w.uint(info.config_hash, 8);
  std::size_t count = 0;
  for (const auto* s : stores) count += s->size();
  w.uint(count, 4);
  for (const auto* s : stores) {
    for (std::size_t i = 0; i < s->size(); ++i) {
      const auto& t = (*s)[i].value;
      w.uint(t.size(), 4);
      for (T v : t.data()) w.f32(static_cast<float>(v));
    }
  }
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw IoError("checkpoint: cannot write '" + path.string() + "'");
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path) {
  Reader r = open(path);
  return read_info(r);
}

template <typename T>
CheckpointInfo load_checkpoint(const std::filesystem::path& path,
                               const std::vector<ad::ParameterStore<T>*>& stores,
                               std::uint64_t expected_hash) {
  Reader r = open(path);
  CheckpointInfo info = read_info(r);
  if (info.config_hash != expected_hash) {
    throw StalenessError("checkpoint '" + path.string() +
                         "' was written for a different model configuration");
  }
  std::size_t count = 0;
  for (const auto* s : stores) count += s->size();
  if (info.parameter_count != count) {
    throw FormatError("checkpoint: holds " + std::to_string(info.parameter_count) +
                          " parameters, model has " + std::to_string(count),
                      r.pos() - 4);
  }
  // Decode into scratch first so a bad file leaves the model untouched.
  std::vector<std::vector<T>> values;
  for (const auto* s : stores) {
    for (std::size_t i = 0; i < s->size(); ++i) {
      const auto& p = (*s)[i];
      const std::size_t at = r.pos();
      const auto n = r.uint(4);
      if (n != p.value.size()) {
        throw FormatError("checkpoint: parameter '" + p.name + "' has " + std::to_string(n) +
                              " elements, expected " + std::to_string(p.value.size()),
                          at);
      }
      std::vector<T> v(n);
      for (auto& x : v) x = static_cast<T>(r.f32());
      values.push_back(std::move(v));
    }
  }
  if (!r.done()) throw FormatError("checkpoint: trailing bytes", r.pos());
  std::size_t k = 0;
  for (auto* s : stores) {
    for (std::size_t i = 0; i < s->size(); ++i) {
      auto& dst = (*s)[i].value.data();
      std::copy(values[k].begin(), values[k].end(), dst.begin());
      ++k;
    }
  }
  return info;
}

template void save_checkpoint<float>(const std::filesystem::path&, const CheckpointInfo&,
                                     const std::vector<const ad::ParameterStore<float>*>&);
template void save_checkpoint<double>(const std::filesystem::path&, const CheckpointInfo&,
                                      const std::vector<const ad::ParameterStore<double>*>&);
template CheckpointInfo load_checkpoint<float>(const std::filesystem::path&,
                                               const std::vector<ad::ParameterStore<float>*>&,
                                               std::uint64_t);
template CheckpointInfo load_checkpoint<double>(const std::filesystem::path&,
                                                const std::vector<ad::ParameterStore<double>*>&,
                                                std::uint64_t);

}  // namespace sanrec::sanet
