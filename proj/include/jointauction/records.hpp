#pragma once

// Line-oriented auction records, used both for generated datasets and for
// ingesting logs. One record per line, whitespace-separated key=value tokens:
//
//   ctrs=0.5,0.3 stores=s1:0.8,s2:0.4:0.45 brands=b1:0.6 pairs=s1:b1,s2:b1
//
// `ctrs` are the slot CTRs. `stores` / `brands` list id:bid or id:bid:value;
// ids are non-empty and contain no ':' ',' '=' or whitespace. `pairs` lists
// store:brand relationships and may be empty ("pairs="). Blank lines and
// lines starting with '#' are ignored. Numbers are written with %.17g so a
// write / read round trip is exact.

#include <algorithm>
#include <cmath>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "jointauction/core.hpp"

namespace jointauction {

struct Advertiser {
  std::string id;
  double bid = 0.0;
  std::optional<double> value;
};

struct LogRecord {
  std::vector<double> ctrs;
  std::vector<Advertiser> stores;
  std::vector<Advertiser> brands;
  std::vector<std::pair<std::string, std::string>> pairs;
};

namespace detail {

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  if (s.empty()) return out;
  std::size_t start = 0;
  for (;;) {
    const auto at = s.find(sep, start);
    out.push_back(s.substr(start, at == std::string_view::npos ? std::string_view::npos : at - start));
    if (at == std::string_view::npos) return out;
    start = at + 1;
  }
}

inline double parse_number(std::string_view s) {
  double x = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, x);
  if (ec != std::errc() || ptr != end || !std::isfinite(x))
    throw Error("bad number '" + std::string(s) + "'");
  return x;
}

inline std::string format_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline bool valid_id(std::string_view id) {
  if (id.empty()) return false;
  for (char c : id)
    if (c == ':' || c == ',' || c == '=' || std::isspace(static_cast<unsigned char>(c)))
      return false;
  return true;
}

inline std::vector<Advertiser> parse_advertisers(std::string_view s) {
  std::vector<Advertiser> out;
  for (auto item : split(s, ',')) {
    const auto f = split(item, ':');
    if (f.size() != 2 && f.size() != 3) throw Error("advertiser must be id:bid[:value]");
    if (!valid_id(f[0])) throw Error("bad advertiser id");
    Advertiser a{std::string(f[0]), parse_number(f[1]), std::nullopt};
    if (a.bid < 0.0) throw Error("negative bid for " + a.id);
    if (f.size() == 3) {
      a.value = parse_number(f[2]);
      if (*a.value < 0.0) throw Error("negative value for " + a.id);
    }
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace detail

/// Parses one line; throws Error with a reason when malformed.
inline LogRecord parse_record(std::string_view line) {
  LogRecord r;
  bool seen[4] = {false, false, false, false};
  std::istringstream in{std::string(line)};
  std::string token;
  while (in >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw Error("token without '=': " + token);
    const std::string key = token.substr(0, eq);
    const std::string_view val = std::string_view(token).substr(eq + 1);
    int slot = key == "ctrs" ? 0 : key == "stores" ? 1 : key == "brands" ? 2 : key == "pairs" ? 3 : -1;
    if (slot < 0) throw Error("unknown key '" + key + "'");
    if (seen[slot]) throw Error("duplicate key '" + key + "'");
    seen[slot] = true;
    switch (slot) {
      case 0:
        for (auto x : detail::split(val, ',')) r.ctrs.push_back(detail::parse_number(x));
        break;
      case 1: r.stores = detail::parse_advertisers(val); break;
      case 2: r.brands = detail::parse_advertisers(val); break;
      case 3:
        for (auto item : detail::split(val, ',')) {
          const auto f = detail::split(item, ':');
          if (f.size() != 2) throw Error("pair must be store:brand");
          r.pairs.emplace_back(std::string(f[0]), std::string(f[1]));
        }
        break;
    }
  }
  for (int i = 0; i < 4; ++i)
    if (!seen[i]) throw Error("missing key");
  SlotProfile check(r.ctrs);  // throws on bad CTRs
  auto ids_unique = [](const std::vector<Advertiser>& v) {
    std::vector<std::string> ids;
    for (const auto& a : v) ids.push_back(a.id);
    std::sort(ids.begin(), ids.end());
    return std::adjacent_find(ids.begin(), ids.end()) == ids.end();
  };
  if (!ids_unique(r.stores) || !ids_unique(r.brands)) throw Error("duplicate advertiser id");
  for (const auto& [s, b] : r.pairs) {
    const bool ok_s = std::any_of(r.stores.begin(), r.stores.end(), [&](auto& a) { return a.id == s; });
    const bool ok_b = std::any_of(r.brands.begin(), r.brands.end(), [&](auto& a) { return a.id == b; });
    if (!ok_s || !ok_b) throw Error("pair references an unlisted id");
  }
  return r;
}

inline std::string format_record(const LogRecord& r) {
  std::string out = "ctrs=";
  for (std::size_t k = 0; k < r.ctrs.size(); ++k)
    out += (k ? "," : "") + detail::format_number(r.ctrs[k]);
  auto adv = [&](const char* key, const std::vector<Advertiser>& list) {
    out += ' ';
    out += key;
    out += '=';
    for (std::size_t i = 0; i < list.size(); ++i) {
      out += (i ? "," : "") + list[i].id + ":" + detail::format_number(list[i].bid);
      if (list[i].value) out += ":" + detail::format_number(*list[i].value);
    }
  };
  adv("stores", r.stores);
  adv("brands", r.brands);
  out += " pairs=";
  for (std::size_t i = 0; i < r.pairs.size(); ++i)
    out += (i ? "," : "") + r.pairs[i].first + ":" + r.pairs[i].second;
  return out;
}

inline LogRecord to_record(const AuctionSample& s) {
  LogRecord r;
  r.ctrs = s.slots.values();
  for (std::size_t i = 0; i < s.stores(); ++i)
    r.stores.push_back({"s" + std::to_string(i), s.bids.stores[i],
                        s.values ? std::optional(s.values->stores[i]) : std::nullopt});
  for (std::size_t j = 0; j < s.brands(); ++j)
    r.brands.push_back({"b" + std::to_string(j), s.bids.brands[j],
                        s.values ? std::optional(s.values->brands[j]) : std::nullopt});
  for (std::size_t i = 0; i < s.stores(); ++i)
    for (std::size_t j = 0; j < s.brands(); ++j)
      if (s.relation(i, j)) r.pairs.emplace_back(r.stores[i].id, r.brands[j].id);
  return r;
}

namespace detail {

/// Keeps the `target` highest bids (ties by position) in their original
/// order, then appends zero-bid padding advertisers.
inline std::vector<Advertiser> trim_or_pad(std::vector<Advertiser> list, std::size_t target,
                                           const char* pad_prefix) {
  if (list.size() > target) {
    std::vector<std::size_t> order(list.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return list[a].bid > list[b].bid; });
    order.resize(target);
    std::sort(order.begin(), order.end());
    std::vector<Advertiser> kept;
    for (auto i : order) kept.push_back(std::move(list[i]));
    list = std::move(kept);
  }
  const bool with_values = std::any_of(list.begin(), list.end(), [](auto& a) { return a.value.has_value(); });
  for (std::size_t p = 0; list.size() < target; ++p) {
    std::string id = std::string(pad_prefix) + std::to_string(p);
    if (std::any_of(list.begin(), list.end(), [&](auto& a) { return a.id == id; })) continue;
    list.push_back({id, 0.0, with_values ? std::optional(0.0) : std::nullopt});
  }
  return list;
}

}  // namespace detail

/// Record -> sample with exactly m stores and n brands. Values are kept
/// only when every advertiser carries one.
inline AuctionSample record_to_sample(const LogRecord& rec, std::size_t m, std::size_t n) {
  const auto stores = detail::trim_or_pad(rec.stores, m, "_pad_s");
  const auto brands = detail::trim_or_pad(rec.brands, n, "_pad_b");
  AuctionSample s;
  s.slots = SlotProfile(rec.ctrs);
  s.relation = JointRelation(m, n);
  std::map<std::string, std::size_t> si, bi;
  for (std::size_t i = 0; i < m; ++i) si[stores[i].id] = i;
  for (std::size_t j = 0; j < n; ++j) bi[brands[j].id] = j;
  for (const auto& [a, b] : rec.pairs) {
    const auto fs = si.find(a);
    const auto fb = bi.find(b);
    if (fs != si.end() && fb != bi.end()) s.relation.set(fs->second, fb->second, true);
  }
  const bool all_values =
      std::all_of(stores.begin(), stores.end(), [](auto& a) { return a.value.has_value(); }) &&
      std::all_of(brands.begin(), brands.end(), [](auto& a) { return a.value.has_value(); });
  for (const auto& a : stores) s.bids.stores.push_back(a.bid);
  for (const auto& a : brands) s.bids.brands.push_back(a.bid);
  if (all_values) {
    Profile v;
    for (const auto& a : stores) v.stores.push_back(*a.value);
    for (const auto& a : brands) v.brands.push_back(*a.value);
    s.values = std::move(v);
  }
  return zero_pad_partnerless(std::move(s));
}

struct SkippedRecord {
  std::size_t line = 0;
  std::string reason;
};

struct IngestResult {
  std::vector<AuctionSample> samples;
  std::vector<SkippedRecord> skipped;
};

/// Reads every record, trimming / padding to m x n. A record whose slot
/// count differs from `slots` (or from the first good record when `slots`
/// is 0) is malformed.
inline IngestResult ingest_log(const std::filesystem::path& path, std::size_t m, std::size_t n,
                               std::size_t slots = 0) {
  if (m == 0 || n == 0) throw Error("ingest_log: target dimensions must be >= 1");
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  IngestResult res;
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    try {
      const auto rec = parse_record(line);
      if (slots == 0) slots = rec.ctrs.size();
      if (rec.ctrs.size() != slots)
        throw Error("expected " + std::to_string(slots) + " slots, got " +
                    std::to_string(rec.ctrs.size()));
      res.samples.push_back(record_to_sample(rec, m, n));
    } catch (const Error& e) {
      res.skipped.push_back({no, e.what()});
    }
  }
  return res;
}

inline void write_dataset(const std::filesystem::path& path,
                          std::span<const AuctionSample> samples) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& s : samples) out << format_record(to_record(s)) << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace jointauction
