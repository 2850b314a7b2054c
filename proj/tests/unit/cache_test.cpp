// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>
#include <numeric>
#include <vector>

#include "sanrec/backbone/encoder.hpp"
#include "sanrec/cache/cache.hpp"
#include "sanrec/error.hpp"
#include "test_util.hpp"

using namespace sanrec;
using backbone::Encoder;
using backbone::EncoderConfig;
using backbone::Modality;

namespace {

EncoderConfig small_config() { return EncoderConfig{Modality::kText, 3, 8, 50, 8, 4, 17}; }

std::vector<std::uint64_t> ids(std::uint64_t n) {
  std::vector<std::uint64_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

std::vector<unsigned char> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::filesystem::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("size formula") {
  // 1000 items, 7 layers of width 64.
  CHECK(cache::file_size(1000, 7, 64) - cache::header_size(7) == 1'800'000);
  CHECK(cache::header_size(7) == 38);
  // Pruning 81 stored states to 6 shrinks the payload by 13.5x.
  const double ratio = static_cast<double>(cache::record_size(81, 64) - 8) /
                       static_cast<double>(cache::record_size(6, 64) - 8);
  CHECK(ratio == 13.5);
}

TEST_CASE("header bytes are laid out little-endian") {
  testing::TempDir dir("sanrec-cache");
  Encoder<float> enc(small_config());
  const std::vector<std::uint16_t> keep{0, 2};
  const auto items = ids(3);
  auto summary = cache::build_cache(enc, std::span<const std::uint64_t>(items), keep,
                                    dir.path() / "c.iisc");
  auto bytes = slurp(summary.path);
  REQUIRE(bytes.size() == summary.bytes);
  CHECK(bytes.size() == cache::file_size(3, 2, 8));
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "IISC");
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 0);
  std::uint64_t fp = 0;
  for (int i = 7; i >= 0; --i) fp = (fp << 8) | bytes[6 + i];
  CHECK(fp == enc.fingerprint());
  CHECK(bytes[14] == 3);
  CHECK(bytes[18] == 2);
  CHECK(bytes[20] == 0);
  CHECK(bytes[22] == 2);
  CHECK(bytes[24] == 8);
  // First record id follows the 28-byte header.
  CHECK(bytes[28] == 0);
}

TEST_CASE("full-depth roundtrip is bit exact") {
  testing::TempDir dir("sanrec-cache");
  Encoder<float> enc(small_config());
  std::vector<std::uint16_t> keep{0, 1, 2, 3};
  const auto items = ids(25);
  auto path = dir.path() / "full.iisc";
  auto summary = cache::build_cache(enc, std::span<const std::uint64_t>(items), keep, path, 4);
  CHECK(summary.item_count == 25);
  CHECK(std::filesystem::file_size(path) == summary.bytes);

  cache::CacheReader reader(path);
  CHECK(reader.header().kept_layers == keep);
  for (auto id : items) {
    auto expected = enc.encode_item(id);
    auto got = reader.read_item(id, enc.fingerprint());
    CHECK(got.layers == expected.layers);
    CHECK(testing::bit_equal(got.states, expected.states));
  }
  auto imported = backbone::import_hidden_states(path);
  REQUIRE(imported.size() == 25);
  CHECK(imported[3].item_id == 3);
  CHECK(imported[3].encoder_fingerprint == enc.fingerprint());
}

TEST_CASE("pruned roundtrip keeps only the requested layers") {
  testing::TempDir dir("sanrec-cache");
  Encoder<float> enc(small_config());
  std::vector<std::uint16_t> keep{0, 3};
  const std::vector<std::uint64_t> items{90, 4, 17};
  auto path = dir.path() / "pruned.iisc";
  cache::build_cache(enc, std::span<const std::uint64_t>(items), keep, path);
  cache::CacheReader reader(path);
  CHECK(reader.item_ids() == std::vector<std::uint64_t>{4, 17, 90});
  auto got = cache::read_item(path, 17);
  CHECK(got.layers == keep);
  CHECK(testing::bit_equal(got.states, enc.encode_item(17).pruned(keep).states));
}

TEST_CASE("lookup errors") {
  testing::TempDir dir("sanrec-cache");
  Encoder<float> enc(small_config());
  const std::vector<std::uint16_t> keep{0, 1};
  const auto items = ids(4);
  auto path = dir.path() / "c.iisc";
  cache::build_cache(enc, std::span<const std::uint64_t>(items), keep, path);
  CHECK_THROWS_AS(cache::read_item(path, 99), NotFoundError);
  CHECK_THROWS_AS(cache::read_item(path, 1, enc.fingerprint() + 1), StalenessError);
  CHECK_NOTHROW(cache::read_item(path, 1, enc.fingerprint()));
  CHECK_THROWS_AS(cache::CacheReader(dir.path() / "missing.iisc"), IoError);
}

TEST_CASE("build preconditions") {
  testing::TempDir dir("sanrec-cache");
  Encoder<float> enc(small_config());
  const auto items = ids(2);
  const std::span<const std::uint64_t> span(items);
  const std::vector<std::uint16_t> too_deep{0, 4};
  CHECK_THROWS_AS(cache::build_cache(enc, span, too_deep, dir.path() / "a"), ConfigError);
  const std::vector<std::uint16_t> unordered{2, 1};
  CHECK_THROWS_AS(cache::build_cache(enc, span, unordered, dir.path() / "b"), ConfigError);
  const std::vector<std::uint16_t> keep{0};
  CHECK_THROWS_AS(cache::build_cache(enc, std::span<const std::uint64_t>(), keep, dir.path() / "c"),
                  InputError);
  auto blocker = dir.path() / "file";
  spit(blocker, {1});
  CHECK_THROWS_AS(cache::build_cache(enc, span, keep, blocker / "sub" / "x.iisc"), IoError);
}

TEST_CASE("malformed files") {
  testing::TempDir dir("sanrec-cache");
  Encoder<float> enc(small_config());
  const std::vector<std::uint16_t> keep{0, 1, 3};
  const auto items = ids(6);
  auto path = dir.path() / "good.iisc";
  cache::build_cache(enc, std::span<const std::uint64_t>(items), keep, path);
  const auto good = slurp(path);
  CHECK(cache::verify_cache(path).clean());
  CHECK(cache::verify_cache(path).records_checked == 1);

  SUBCASE("truncated") {
    auto bad = good;
    bad.resize(bad.size() - 5);
    spit(path, bad);
    CHECK_THROWS_AS(backbone::import_hidden_states(path), FormatError);
    try {
      cache::CacheReader reader(path);
    } catch (const FormatError& e) {
      CHECK(e.offset() == bad.size());
    }
    CHECK(cache::verify_cache(path).has(cache::IssueKind::kSize));
  }
  SUBCASE("unknown version") {
    auto bad = good;
    bad[4] = 2;
    spit(path, bad);
    CHECK_THROWS_AS(backbone::import_hidden_states(path), VersionError);
    CHECK(cache::verify_cache(path).has(cache::IssueKind::kVersion));
  }
  SUBCASE("flipped magic") {
    auto bad = good;
    bad[0] ^= 0x01;
    spit(path, bad);
    try {
      cache::CacheReader reader(path);
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(e.offset() == 0);
    }
    auto report = cache::verify_cache(path);
    CHECK(report.has(cache::IssueKind::kMagic));
    CHECK_FALSE(report.clean());
  }
  SUBCASE("record count mismatch") {
    auto bad = good;
    bad[14] = 7;
    spit(path, bad);
    CHECK_THROWS_AS(cache::CacheReader{path}, FormatError);
    CHECK(cache::verify_cache(path).has(cache::IssueKind::kCount));
  }
  SUBCASE("non-monotone layers") {
    auto bad = good;
    bad[22] = 0;
    spit(path, bad);
    CHECK_THROWS_AS(cache::CacheReader{path}, FormatError);
    CHECK(cache::verify_cache(path).has(cache::IssueKind::kLayers));
  }
  SUBCASE("non-finite payload") {
    auto bad = good;
    const std::size_t first_value = cache::header_size(3) + 8;
    bad[first_value + 0] = 0x00;
    bad[first_value + 1] = 0x00;
    bad[first_value + 2] = 0xC0;
    bad[first_value + 3] = 0x7F;
    spit(path, bad);
    CHECK(cache::verify_cache(path).has(cache::IssueKind::kNonFinite));
  }
  SUBCASE("unsorted records") {
    auto bad = good;
    const std::size_t second_id = cache::header_size(3) + cache::record_size(3, 8);
    bad[second_id] = 0;
    spit(path, bad);
    CHECK_THROWS_AS(cache::CacheReader{path}, FormatError);
    CHECK(cache::verify_cache(path).has(cache::IssueKind::kOrder));
  }
}
