#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tagweave/common.hpp"
#include "tagweave/dataset.hpp"
#include "tagweave/rng.hpp"

namespace tagweave {

struct MonolabelEntry {
  TrackRef track;
  index_t tag = 0;
};

// Monolabel training set: one tag per entry, album-coherent by construction.
struct MonolabelAssignment {
  TagSystem tags;
  std::vector<MonolabelEntry> entries;
  std::vector<std::string> dropped_tags;  // tags left with zero entries by balance()

  std::vector<std::int64_t> tag_counts() const {
    std::vector<std::int64_t> counts(static_cast<std::size_t>(tags.size()), 0);
    for (const auto& e : entries) ++counts[static_cast<std::size_t>(e.tag)];
    return counts;
  }
};

// Draws one tag per album from the union of the album's tags, with
// probability proportional to 1 / global popularity, then assigns it to every
// track of the album. Rare tags survive; common tags thin out.
inline MonolabelAssignment sample_monolabel(const AnnotationSet& set,
                                            std::span<const std::int64_t> popularity,
                                            std::uint64_t seed) {
  if (static_cast<index_t>(popularity.size()) != set.n_tags())
    fail(errc::shape, "popularity vector length does not match tag count");

  // Albums in first-appearance order; member rows in row order.
  std::vector<std::string> albums;
  std::unordered_map<std::string, std::vector<index_t>> rows_of;
  for (index_t row = 0; row < set.n_tracks(); ++row) {
    const auto& album = set.track(row).album_id;
    auto [it, inserted] = rows_of.try_emplace(album);
    if (inserted) albums.push_back(album);
    it->second.push_back(row);
  }

  Rng rng(seed);
  MonolabelAssignment result;
  result.tags = set.tag_system();
  result.entries.reserve(static_cast<std::size_t>(set.n_tracks()));

  for (const auto& album : albums) {
    const auto& rows = rows_of[album];
    std::vector<std::uint8_t> in_album(static_cast<std::size_t>(set.n_tags()), 0);
    for (index_t row : rows)
      for (index_t t = 0; t < set.n_tags(); ++t)
        if (set.has_tag(row, t)) in_album[static_cast<std::size_t>(t)] = 1;

    std::vector<index_t> album_tags;
    std::vector<double> weight;
    for (index_t t = 0; t < set.n_tags(); ++t) {
      if (!in_album[static_cast<std::size_t>(t)]) continue;
      const auto pop = popularity[static_cast<std::size_t>(t)];
      if (pop < 1)
        fail(errc::param, "tag " + set.tag_system().tag(t) +
                              " is annotated but has zero popularity");
      album_tags.push_back(t);
      weight.push_back(1.0 / static_cast<double>(pop));
    }
    if (album_tags.empty())
      fail(errc::empty_dataset, "album without tags: " + album);

    const double total = std::accumulate(weight.begin(), weight.end(), 0.0);
    const double u = rng.uniform01() * total;
    double cumulative = 0.0;
    index_t chosen = album_tags.back();
    for (std::size_t i = 0; i < album_tags.size(); ++i) {
      cumulative += weight[i];
      if (u < cumulative) {
        chosen = album_tags[i];
        break;
      }
    }
    for (index_t row : rows)
      result.entries.push_back(MonolabelEntry{set.track(row), chosen});
  }
  return result;
}

// Enforces `cap` entries per tag: oversized tags are downsampled uniformly,
// undersized ones upsampled by cycling their entries with an incremented
// excerpt_index per reuse. Tags with no entries are dropped and reported.
inline MonolabelAssignment balance(const MonolabelAssignment& assignment,
                                   std::int64_t cap, std::uint64_t seed) {
  if (cap < 1) fail(errc::param, "balance cap must be at least 1");

  std::vector<std::vector<const MonolabelEntry*>> by_tag(
      static_cast<std::size_t>(assignment.tags.size()));
  for (const auto& e : assignment.entries)
    by_tag[static_cast<std::size_t>(e.tag)].push_back(&e);

  Rng rng(seed);
  MonolabelAssignment result;
  result.tags = assignment.tags;
  for (index_t t = 0; t < assignment.tags.size(); ++t) {
    auto& entries = by_tag[static_cast<std::size_t>(t)];
    if (entries.empty()) {
      result.dropped_tags.push_back(assignment.tags.tag(t));
      continue;
    }
    const auto n = static_cast<std::int64_t>(entries.size());
    if (n > cap) {
      // Uniform downsample: shuffle, keep the first `cap`, restore order.
      std::vector<std::size_t> keep(entries.size());
      std::iota(keep.begin(), keep.end(), 0);
      rng.shuffle(keep);
      keep.resize(static_cast<std::size_t>(cap));
      std::sort(keep.begin(), keep.end());
      for (std::size_t i : keep) result.entries.push_back(*entries[i]);
    } else {
      for (std::int64_t k = 0; k < cap; ++k) {
        MonolabelEntry copy = *entries[static_cast<std::size_t>(k % n)];
        copy.track.excerpt_index += static_cast<std::uint32_t>(k / n);
        result.entries.push_back(copy);
      }
    }
  }
  return result;
}

// Artificial duplicate-tag experiment: artists are split into two balanced
// groups; every tag t with artists on both sides becomes t1/t2 per the row's
// artist group. Tags that cannot be split stay unchanged and are listed.
struct DuplicationPlan {
  TagSystem original;
  TagSystem duplicated;
  std::unordered_map<std::string, int> artist_group;  // artist_id -> 1 or 2
  std::vector<std::pair<std::string, std::string>> pairs;
  std::vector<std::string> skipped;
};

inline std::pair<DuplicationPlan, AnnotationSet> duplicate_tags(
    const AnnotationSet& set, std::uint64_t seed) {
  const TagSystem& tags = set.tag_system();

  std::vector<std::string> artists;
  {
    std::unordered_map<std::string, bool> seen;
    for (index_t row = 0; row < set.n_tracks(); ++row) {
      const auto& a = set.track(row).artist_id;
      if (seen.emplace(a, true).second) artists.push_back(a);
    }
  }
  Rng rng(seed);
  rng.shuffle(artists);

  DuplicationPlan plan;
  plan.original = tags;
  for (std::size_t i = 0; i < artists.size(); ++i)
    plan.artist_group.emplace(artists[i], i < (artists.size() + 1) / 2 ? 1 : 2);

  // A tag splits only if both groups actually carry it.
  std::vector<std::array<bool, 2>> group_has(
      static_cast<std::size_t>(tags.size()), {false, false});
  for (index_t row = 0; row < set.n_tracks(); ++row) {
    const int g = plan.artist_group.at(set.track(row).artist_id);
    for (index_t t = 0; t < set.n_tags(); ++t)
      if (set.has_tag(row, t))
        group_has[static_cast<std::size_t>(t)][static_cast<std::size_t>(g - 1)] = true;
  }

  std::vector<std::string> new_names;
  std::vector<std::array<index_t, 2>> column_of(  // per original tag: group1/group2 column
      static_cast<std::size_t>(tags.size()));
  std::vector<bool> split(static_cast<std::size_t>(tags.size()), false);
  for (index_t t = 0; t < tags.size(); ++t) {
    const auto& name = tags.tag(t);
    if (group_has[static_cast<std::size_t>(t)][0] &&
        group_has[static_cast<std::size_t>(t)][1]) {
      split[static_cast<std::size_t>(t)] = true;
      column_of[static_cast<std::size_t>(t)] = {
          static_cast<index_t>(new_names.size()),
          static_cast<index_t>(new_names.size()) + 1};
      new_names.push_back(name + "1");
      new_names.push_back(name + "2");
      plan.pairs.emplace_back(name + "1", name + "2");
    } else {
      column_of[static_cast<std::size_t>(t)] = {
          static_cast<index_t>(new_names.size()),
          static_cast<index_t>(new_names.size())};
      new_names.push_back(name);
      plan.skipped.push_back(name);
    }
  }
  plan.duplicated = TagSystem(tags.name() + "-dup", new_names);

  const auto n_new = static_cast<std::size_t>(plan.duplicated.size());
  std::vector<TrackRef> tracks(set.tracks());
  std::vector<std::uint8_t> occ(tracks.size() * n_new, 0);
  for (index_t row = 0; row < set.n_tracks(); ++row) {
    const int g = plan.artist_group.at(set.track(row).artist_id);
    for (index_t t = 0; t < set.n_tags(); ++t) {
      if (!set.has_tag(row, t)) continue;
      const index_t col = split[static_cast<std::size_t>(t)]
                              ? column_of[static_cast<std::size_t>(t)]
                                         [static_cast<std::size_t>(g - 1)]
                              : column_of[static_cast<std::size_t>(t)][0];
      occ[static_cast<std::size_t>(row) * n_new + static_cast<std::size_t>(col)] = 1;
    }
  }
  AnnotationSet rewritten(plan.duplicated, std::move(tracks), std::move(occ));
  return {std::move(plan), std::move(rewritten)};
}

// Monolabel assignment file: `track_id<TAB>excerpt_index<TAB>tag`.
inline void save_monolabel(const std::filesystem::path& path,
                           const MonolabelAssignment& assignment) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(errc::io, "cannot open for writing: " + path.string());
  for (const auto& e : assignment.entries)
    out << e.track.track_id << '\t' << e.track.excerpt_index << '\t'
        << assignment.tags.tag(e.tag) << '\n';
}

// Track ids are resolved against `set` to recover album/artist fields.
inline MonolabelAssignment load_monolabel(const std::filesystem::path& path,
                                          const AnnotationSet& set) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(errc::io, "cannot open: " + path.string());
  std::unordered_map<std::string, index_t> row_of;
  for (index_t row = 0; row < set.n_tracks(); ++row)
    row_of.emplace(set.track(row).track_id, row);

  MonolabelAssignment result;
  result.tags = set.tag_system();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab1 = line.find('\t');
    const auto tab2 = tab1 == std::string::npos ? std::string::npos
                                                : line.find('\t', tab1 + 1);
    if (tab2 == std::string::npos)
      fail(errc::parse, path.string() + ":" + std::to_string(line_no) +
                            ": expected `track<TAB>excerpt<TAB>tag`");
    const std::string track_id = line.substr(0, tab1);
    const std::string excerpt_text = line.substr(tab1 + 1, tab2 - tab1 - 1);
    const std::string tag_name = line.substr(tab2 + 1);

    const auto it = row_of.find(track_id);
    if (it == row_of.end())
      fail(errc::vocabulary, path.string() + ":" + std::to_string(line_no) +
                                 ": track not in annotations: " + track_id);
    MonolabelEntry entry;
    entry.track = set.track(it->second);
    try {
      entry.track.excerpt_index = static_cast<std::uint32_t>(std::stoul(excerpt_text));
    } catch (const std::exception&) {
      fail(errc::parse, path.string() + ":" + std::to_string(line_no) +
                            ": bad excerpt index: " + excerpt_text);
    }
    entry.tag = result.tags.index_of(tag_name);
    result.entries.push_back(std::move(entry));
  }
  if (result.entries.empty())
    fail(errc::empty_dataset, "no entries in: " + path.string());
  return result;
}

}  // namespace tagweave
