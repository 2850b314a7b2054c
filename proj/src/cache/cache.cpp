// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#include "sanrec/cache/cache.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <thread>

namespace sanrec::cache {
namespace {

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}
void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

std::uint64_t get_le(const unsigned char* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}
float get_f32(const unsigned char* p) {
  return std::bit_cast<float>(static_cast<std::uint32_t>(get_le(p, 4)));
}

void validate_layers(std::span<const std::uint16_t> layers) {
  if (layers.empty()) throw ConfigError("cache: at least one layer must be kept");
  for (std::size_t i = 1; i < layers.size(); ++i) {
    if (layers[i] <= layers[i - 1]) {
      throw ConfigError("cache: kept layer indices must be strictly increasing");
    }
  }
}

std::string encode_header(const CacheHeader& h) {
  std::string out(kMagic, 4);
  put_u16(out, h.version);
  put_u64(out, h.encoder_fingerprint);
  put_u32(out, h.item_count);
  put_u16(out, static_cast<std::uint16_t>(h.kept_layers.size()));
  for (auto l : h.kept_layers) put_u16(out, l);
  put_u32(out, h.hidden);
  return out;
}

// Parses the header from `bytes` (which holds at least the first `size`
// bytes of the file). Throws FormatError / VersionError.
CacheHeader decode_header(const unsigned char* bytes, std::uint64_t size) {
  if (size < 4) throw FormatError("cache: file too short for magic", size);
  if (std::memcmp(bytes, kMagic, 4) != 0) throw FormatError("cache: bad magic", 0);
  if (size < 20) throw FormatError("cache: truncated header", size);
  CacheHeader h;
  h.version = static_cast<std::uint16_t>(get_le(bytes + 4, 2));
  if (h.version != kVersion) {
    throw VersionError("cache: unsupported version " + std::to_string(h.version), 4);
  }
  h.encoder_fingerprint = get_le(bytes + 6, 8);
  h.item_count = static_cast<std::uint32_t>(get_le(bytes + 14, 4));
  const std::uint64_t m = get_le(bytes + 18, 2);
  if (m == 0) throw FormatError("cache: zero kept layers", 18);
  if (size < header_size(m)) throw FormatError("cache: truncated header", size);
  for (std::uint64_t i = 0; i < m; ++i) {
    const auto layer = static_cast<std::uint16_t>(get_le(bytes + 20 + 2 * i, 2));
    if (!h.kept_layers.empty() && layer <= h.kept_layers.back()) {
      throw FormatError("cache: kept layer indices not strictly increasing", 20 + 2 * i);
    }
    h.kept_layers.push_back(layer);
  }
  h.hidden = static_cast<std::uint32_t>(get_le(bytes + 20 + 2 * m, 4));
  if (h.hidden == 0) throw FormatError("cache: zero hidden dim", 20 + 2 * m);
  return h;
}

std::vector<unsigned char> read_range(std::ifstream& in, std::uint64_t offset, std::uint64_t n) {
  std::vector<unsigned char> buf(n);
  in.clear();
  in.seekg(static_cast<std::streamoff>(offset));
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
  if (static_cast<std::uint64_t>(in.gcount()) != n) {
    throw FormatError("cache: short read", offset + static_cast<std::uint64_t>(in.gcount()));
  }
  return buf;
}

}  // namespace

std::uint64_t CacheHeader::header_bytes() const { return header_size(kept_layers.size()); }
std::uint64_t CacheHeader::record_bytes() const { return record_size(kept_layers.size(), hidden); }

BuildSummary write_cache(const std::filesystem::path& path, std::uint64_t fingerprint,
                         std::span<const std::uint16_t> kept_layers, std::uint32_t hidden,
                         std::vector<backbone::HiddenStateStack> stacks) {
  validate_layers(kept_layers);
  if (stacks.empty()) throw InputError("cache: no items to write");
  std::sort(stacks.begin(), stacks.end(),
            [](const auto& a, const auto& b) { return a.item_id < b.item_id; });
  for (std::size_t i = 0; i < stacks.size(); ++i) {
    const auto& s = stacks[i];
    if (i > 0 && s.item_id == stacks[i - 1].item_id) {
      throw InputError("cache: duplicate item id " + std::to_string(s.item_id));
    }
    if (!std::equal(s.layers.begin(), s.layers.end(), kept_layers.begin(), kept_layers.end()) ||
        s.hidden() != hidden) {
      throw ConfigError("cache: stack for item " + std::to_string(s.item_id) +
                        " does not match the kept layers / hidden dim");
    }
  }

  CacheHeader h;
  h.encoder_fingerprint = fingerprint;
  h.item_count = static_cast<std::uint32_t>(stacks.size());
  h.kept_layers.assign(kept_layers.begin(), kept_layers.end());
  h.hidden = hidden;

  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cache: cannot open '" + path.string() + "' for writing");
  const std::string header = encode_header(h);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  std::string record;
  record.reserve(h.record_bytes());
  for (const auto& s : stacks) {
    record.clear();
    put_u64(record, s.item_id);
    for (float v : s.states.data()) put_f32(record, v);
    out.write(record.data(), static_cast<std::streamsize>(record.size()));
  }
  out.flush();
  if (!out) throw IoError("cache: write to '" + path.string() + "' failed");

  return BuildSummary{path, fingerprint, stacks.size(),
                      file_size(stacks.size(), kept_layers.size(), hidden)};
}

template <typename T>
BuildSummary build_cache(const backbone::Encoder<T>& encoder, std::span<const std::uint64_t> items,
                         std::span<const std::uint16_t> keep_layers,
                         const std::filesystem::path& path, std::size_t workers) {
  if (items.empty()) throw InputError("cache: no items to encode");
  validate_layers(keep_layers);
  if (keep_layers.back() > encoder.config().layers) {
    throw ConfigError("cache: layer index " + std::to_string(keep_layers.back()) +
                      " exceeds encoder depth " + std::to_string(encoder.config().layers));
  }
  std::vector<backbone::HiddenStateStack> stacks(items.size());
  workers = std::clamp<std::size_t>(workers, 1, items.size());
  auto encode_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      stacks[i] = encoder.encode_item(items[i]).pruned(keep_layers);
    }
  };
  if (workers == 1) {
    encode_range(0, items.size());
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (items.size() + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(items.size(), begin + chunk);
      if (begin < end) pool.emplace_back(encode_range, begin, end);
    }
  }
  return write_cache(path, encoder.fingerprint(), keep_layers,
                     static_cast<std::uint32_t>(encoder.config().hidden), std::move(stacks));
}

CacheReader::CacheReader(const std::filesystem::path& path) : path_(path) {
  in_.open(path, std::ios::binary);
  if (!in_) throw IoError("cache: cannot open '" + path.string() + "'");
  std::error_code ec;
  const std::uint64_t size = std::filesystem::file_size(path, ec);
  if (ec) throw IoError("cache: cannot stat '" + path.string() + "'");

  const std::uint64_t probe = std::min<std::uint64_t>(size, header_size(0xFFFF));
  const auto head = read_range(in_, 0, probe);
  header_ = decode_header(head.data(), probe);

  const std::uint64_t expected =
      file_size(header_.item_count, header_.kept_layers.size(), header_.hidden);
  if (size < expected) {
    throw FormatError("cache: truncated, header promises " + std::to_string(header_.item_count) +
                          " records (" + std::to_string(expected) + " bytes)",
                      size);
  }
  if (size > expected) {
    throw FormatError("cache: " + std::to_string(size - expected) +
                          " trailing bytes beyond the header's record count",
                      expected);
  }

  ids_.reserve(header_.item_count);
  for (std::size_t i = 0; i < header_.item_count; ++i) {
    const std::uint64_t off = header_.header_bytes() + i * header_.record_bytes();
    const auto id_bytes = read_range(in_, off, 8);
    const std::uint64_t id = get_le(id_bytes.data(), 8);
    if (!ids_.empty() && id <= ids_.back()) {
      throw FormatError("cache: records not sorted by item id", off);
    }
    index_.emplace(id, i);
    ids_.push_back(id);
  }
}

void CacheReader::expect_fingerprint(std::uint64_t expected) const {
  if (header_.encoder_fingerprint != expected) {
    throw StalenessError("cache '" + path_.string() + "' was built by encoder " +
                         std::to_string(header_.encoder_fingerprint) + ", expected " +
                         std::to_string(expected) + "; rebuild the cache");
  }
}

backbone::HiddenStateStack CacheReader::read_at(std::size_t record) {
  if (record >= header_.item_count) {
    throw NotFoundError("cache: record " + std::to_string(record) + " out of range");
  }
  const std::uint64_t off = header_.header_bytes() + record * header_.record_bytes();
  const auto bytes = read_range(in_, off, header_.record_bytes());
  backbone::HiddenStateStack s;
  s.item_id = get_le(bytes.data(), 8);
  s.encoder_fingerprint = header_.encoder_fingerprint;
  s.layers = header_.kept_layers;
  s.states = ad::Tensor<float>(header_.kept_layers.size(), header_.hidden);
  for (std::size_t i = 0; i < s.states.size(); ++i) s.states[i] = get_f32(bytes.data() + 8 + 4 * i);
  return s;
}

backbone::HiddenStateStack CacheReader::read_item(std::uint64_t item_id) {
  auto it = index_.find(item_id);
  if (it == index_.end()) {
    throw NotFoundError("cache: item " + std::to_string(item_id) + " not in '" + path_.string() +
                        "'");
  }
  return read_at(it->second);
}

backbone::HiddenStateStack CacheReader::read_item(std::uint64_t item_id,
                                                  std::uint64_t expected_fingerprint) {
  expect_fingerprint(expected_fingerprint);
  return read_item(item_id);
}

backbone::HiddenStateStack read_item(const std::filesystem::path& path, std::uint64_t item_id,
                                     std::optional<std::uint64_t> expected_fingerprint) {
  CacheReader reader(path);
  if (expected_fingerprint) reader.expect_fingerprint(*expected_fingerprint);
  return reader.read_item(item_id);
}

std::string to_string(IssueKind kind) {
  switch (kind) {
    case IssueKind::kIo: return "io";
    case IssueKind::kMagic: return "magic";
    case IssueKind::kVersion: return "version";
    case IssueKind::kLayers: return "layers";
    case IssueKind::kSize: return "size";
    case IssueKind::kCount: return "count";
    case IssueKind::kOrder: return "order";
    case IssueKind::kNonFinite: return "non-finite";
  }
  return "unknown";
}

bool VerifyReport::has(IssueKind kind) const {
  return std::any_of(issues.begin(), issues.end(), [&](const auto& i) { return i.kind == kind; });
}

VerifyReport verify_cache(const std::filesystem::path& path) {
  VerifyReport report;
  report.path = path;
  auto issue = [&](IssueKind k, std::string msg) { report.issues.push_back({k, std::move(msg)}); };

  std::ifstream in(path, std::ios::binary);
  if (!in) {
    issue(IssueKind::kIo, "cannot open '" + path.string() + "'");
    return report;
  }
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const std::uint64_t size = bytes.size();

  if (size < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    issue(IssueKind::kMagic, "magic bytes are not \"IISC\"");
    return report;
  }
  if (size < 20) {
    issue(IssueKind::kSize, "file shorter than the fixed header");
    return report;
  }
  const auto version = get_le(bytes.data() + 4, 2);
  if (version != kVersion) {
    issue(IssueKind::kVersion, "unsupported version " + std::to_string(version));
    return report;
  }
  const std::uint64_t count = get_le(bytes.data() + 14, 4);
  const std::uint64_t m = get_le(bytes.data() + 18, 2);
  if (m == 0) {
    issue(IssueKind::kLayers, "zero kept layers");
    return report;
  }
  if (size < header_size(m)) {
    issue(IssueKind::kSize, "file shorter than its header");
    return report;
  }
  for (std::uint64_t i = 1; i < m; ++i) {
    if (get_le(bytes.data() + 20 + 2 * i, 2) <= get_le(bytes.data() + 18 + 2 * i, 2)) {
      issue(IssueKind::kLayers, "kept layer indices not strictly increasing at position " +
                                    std::to_string(i));
    }
  }
  const std::uint64_t hidden = get_le(bytes.data() + 20 + 2 * m, 4);
  if (hidden == 0) {
    issue(IssueKind::kSize, "zero hidden dim");
    return report;
  }
  const std::uint64_t rec = record_size(m, hidden);
  const std::uint64_t body = size - header_size(m);
  if (body % rec != 0) {
    issue(IssueKind::kSize, "payload of " + std::to_string(body) +
                                " bytes is not a whole number of " + std::to_string(rec) +
                                "-byte records");
  }
  const std::uint64_t present = body / rec;
  if (present != count) {
    issue(IssueKind::kCount, "header declares " + std::to_string(count) + " records, file holds " +
                                 std::to_string(present));
  }

  std::uint64_t prev_id = 0;
  for (std::uint64_t r = 0; r < present; ++r) {
    const unsigned char* p = bytes.data() + header_size(m) + r * rec;
    const std::uint64_t id = get_le(p, 8);
    if (r > 0 && id <= prev_id) {
      issue(IssueKind::kOrder, "record " + std::to_string(r) + " breaks ascending id order");
      break;
    }
    prev_id = id;
  }
  for (std::uint64_t r = 0; r < present; r += 100) {
    const unsigned char* p = bytes.data() + header_size(m) + r * rec + 8;
    ++report.records_checked;
    for (std::uint64_t k = 0; k < m * hidden; ++k) {
      if (!std::isfinite(get_f32(p + 4 * k))) {
        issue(IssueKind::kNonFinite, "non-finite value in record " + std::to_string(r));
        break;
      }
    }
  }
  return report;
}

template BuildSummary build_cache(const backbone::Encoder<float>&, std::span<const std::uint64_t>,
                                  std::span<const std::uint16_t>, const std::filesystem::path&,
                                  std::size_t);
template BuildSummary build_cache(const backbone::Encoder<double>&, std::span<const std::uint64_t>,
                                  std::span<const std::uint16_t>, const std::filesystem::path&,
                                  std::size_t);

}  // namespace sanrec::cache
