// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#include "sanrec/recsys/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <string>
#include <string_view>

#include "sanrec/error.hpp"

namespace sanrec::recsys {
namespace {

std::uint64_t parse_id(std::string_view tok, std::size_t line_no, const char* what) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw InputError("line " + std::to_string(line_no) + ": bad " + what + " '" +
                     std::string(tok) + "'");
  }
  return v;
}

}  // namespace

std::size_t InteractionDataset::interaction_count() const {
  std::size_t n = 0;
  for (const auto& [u, seq] : users) n += seq.size();
  return n;
}

void InteractionDataset::rebuild_catalog() {
  std::set<ItemId> items;
  for (const auto& [u, seq] : users) items.insert(seq.begin(), seq.end());
  catalog.assign(items.begin(), items.end());
}

InteractionDataset read_interactions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw InputError("cannot open interaction file '" + path.string() +
                     "' (generate one with the gen command)");
  }
  InteractionDataset data;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw InputError("line " + std::to_string(line_no) + ": expected user<TAB>items");
    }
    const UserId user = parse_id(std::string_view(line).substr(0, tab), line_no, "user id");
    auto& seq = data.users[user];
    std::string_view rest = std::string_view(line).substr(tab + 1);
    std::size_t pos = 0;
    while (pos < rest.size()) {
      const auto next = rest.find(' ', pos);
      const auto tok = rest.substr(pos, next == std::string_view::npos ? rest.npos : next - pos);
      if (!tok.empty()) seq.push_back(parse_id(tok, line_no, "item id"));
      if (next == std::string_view::npos) break;
      pos = next + 1;
    }
  }
  data.rebuild_catalog();
  return data;
}

void write_interactions(const std::filesystem::path& path, const InteractionDataset& data) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  for (const auto& [user, seq] : data.users) {
    out << user << '\t';
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (i > 0) out << ' ';
      out << seq[i];
    }
    out << '\n';
  }
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

std::vector<ItemId> UserSplit::test_prefix() const {
  std::vector<ItemId> p = train;
  p.push_back(validation);
  return p;
}

Split split_leave_one_out(const InteractionDataset& data) {
  if (data.users.empty()) throw InputError("dataset has no users");
  Split split;
  for (const auto& [user, seq] : data.users) {
    if (seq.size() < 3) {
      ++split.dropped;
      continue;
    }
    UserSplit us;
    us.user = user;
    us.train.assign(seq.begin(), seq.end() - 2);
    us.validation = seq[seq.size() - 2];
    us.test = seq.back();
    split.users.push_back(std::move(us));
  }
  if (split.users.empty()) {
    throw InputError("no user has the 3 interactions a leave-one-out split needs");
  }
  return split;
}

Popularity::Popularity(const Split& split, const std::vector<ItemId>& catalog)
    : catalog_(catalog) {
  if (!std::is_sorted(catalog_.begin(), catalog_.end())) {
    std::sort(catalog_.begin(), catalog_.end());
  }
  std::vector<std::size_t> counts(catalog_.size(), 0);
  std::size_t total = 0;
  for (const auto& u : split.users) {
    for (ItemId item : u.train) {
      auto it = std::lower_bound(catalog_.begin(), catalog_.end(), item);
      if (it == catalog_.end() || *it != item) {
        throw InputError("training item " + std::to_string(item) + " missing from the catalog");
      }
      ++counts[static_cast<std::size_t>(it - catalog_.begin())];
      ++total;
    }
  }
  const double denom = static_cast<double>(total + catalog_.size());
  p_.resize(catalog_.size());
  for (std::size_t i = 0; i < p_.size(); ++i) {
    p_[i] = static_cast<double>(counts[i] + 1) / denom;
  }
}

double Popularity::at(ItemId item) const {
  auto it = std::lower_bound(catalog_.begin(), catalog_.end(), item);
  if (it == catalog_.end() || *it != item) {
    throw NotFoundError("item " + std::to_string(item) + " not in the catalog");
  }
  return p_[static_cast<std::size_t>(it - catalog_.begin())];
}

}  // namespace sanrec::recsys
