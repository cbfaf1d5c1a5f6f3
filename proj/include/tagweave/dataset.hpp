#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tagweave/common.hpp"
#include "tagweave/rng.hpp"

namespace tagweave {

// One 30s excerpt of a track. excerpt_index > 0 marks re-used tracks where a
// different excerpt position stands in for a fresh sample.
struct TrackRef {
  std::string track_id;
  std::string album_id;
  std::string artist_id;
  std::uint32_t excerpt_index = 0;
};

// Ordered tag vocabulary. The file order of the tag definitions fixes the
// column index of every matrix in the pipeline; it is never re-sorted.
class TagSystem {
 public:
  TagSystem() = default;

  TagSystem(std::string name, std::vector<std::string> tags)
      : name_(std::move(name)), tags_(std::move(tags)) {
    for (index_t i = 0; i < size(); ++i) {
      const auto [it, inserted] = index_.emplace(tags_[static_cast<std::size_t>(i)], i);
      if (!inserted)
        fail(errc::vocabulary, "duplicate tag name: " + tags_[static_cast<std::size_t>(i)]);
    }
  }

  const std::string& name() const { return name_; }
  index_t size() const { return static_cast<index_t>(tags_.size()); }
  const std::string& tag(index_t i) const { return tags_[static_cast<std::size_t>(i)]; }
  const std::vector<std::string>& tags() const { return tags_; }

  std::optional<index_t> find(const std::string& tag) const {
    const auto it = index_.find(tag);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  index_t index_of(const std::string& tag) const {
    const auto idx = find(tag);
    if (!idx) fail(errc::vocabulary, "unknown tag: " + tag);
    return *idx;
  }

  bool contains(const std::string& tag) const { return index_.count(tag) > 0; }

 private:
  std::string name_;
  std::vector<std::string> tags_;
  std::unordered_map<std::string, index_t> index_;
};

struct TaxonomyEdge {
  std::string child;
  std::string parent;
};

// Multilabel occurrence matrix: rows follow track order, columns follow tag
// order. Stored dense (uint8); corpora here stay in the low millions of cells.
class AnnotationSet {
 public:
  AnnotationSet() = default;

  AnnotationSet(TagSystem tags, std::vector<TrackRef> tracks,
                std::vector<std::uint8_t> occurrence)
      : tags_(std::move(tags)),
        tracks_(std::move(tracks)),
        occurrence_(std::move(occurrence)) {
    if (occurrence_.size() !=
        tracks_.size() * static_cast<std::size_t>(tags_.size()))
      fail(errc::shape, "annotation matrix size does not match tracks x tags");
    for (index_t row = 0; row < n_tracks(); ++row) {
      if (row_tag_count(row) == 0)
        fail(errc::empty_dataset,
             "track without tags: " + tracks_[static_cast<std::size_t>(row)].track_id);
    }
  }

  const TagSystem& tag_system() const { return tags_; }
  index_t n_tracks() const { return static_cast<index_t>(tracks_.size()); }
  index_t n_tags() const { return tags_.size(); }

  const TrackRef& track(index_t row) const {
    return tracks_[static_cast<std::size_t>(row)];
  }
  const std::vector<TrackRef>& tracks() const { return tracks_; }

  bool has_tag(index_t row, index_t tag) const {
    return occurrence_[cell(row, tag)] != 0;
  }

  std::vector<index_t> row_tags(index_t row) const {
    std::vector<index_t> out;
    for (index_t t = 0; t < n_tags(); ++t)
      if (has_tag(row, t)) out.push_back(t);
    return out;
  }

  index_t row_tag_count(index_t row) const {
    index_t n = 0;
    for (index_t t = 0; t < n_tags(); ++t) n += has_tag(row, t) ? 1 : 0;
    return n;
  }

  std::int64_t column_sum(index_t tag) const {
    std::int64_t n = 0;
    for (index_t row = 0; row < n_tracks(); ++row) n += has_tag(row, tag) ? 1 : 0;
    return n;
  }

  const std::vector<std::uint8_t>& raw() const { return occurrence_; }

 private:
  std::size_t cell(index_t row, index_t tag) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(n_tags()) +
           static_cast<std::size_t>(tag);
  }

  TagSystem tags_;
  std::vector<TrackRef> tracks_;
  std::vector<std::uint8_t> occurrence_;  // row-major n_tracks x n_tags
};

enum class Partition { train, valid, test };

inline const char* partition_name(Partition p) {
  switch (p) {
    case Partition::train: return "train";
    case Partition::valid: return "valid";
    case Partition::test: return "test";
  }
  return "train";
}

inline Partition parse_partition(const std::string& name) {
  if (name == "train") return Partition::train;
  if (name == "valid") return Partition::valid;
  if (name == "test") return Partition::test;
  fail(errc::parse, "unknown partition name: " + name);
}

struct DatasetSplit {
  std::vector<index_t> train;
  std::vector<index_t> valid;
  std::vector<index_t> test;
  std::array<double, 3> fractions{0.70, 0.10, 0.20};

  const std::vector<index_t>& part(Partition p) const {
    switch (p) {
      case Partition::train: return train;
      case Partition::valid: return valid;
      case Partition::test: return test;
    }
    return train;
  }
};

// --- file formats -----------------------------------------------------------

// Tag-system file: one tag name per line.
inline TagSystem load_tag_system(const std::filesystem::path& path,
                                 const std::string& name = "") {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(errc::io, "cannot open: " + path.string());
  std::vector<std::string> tags;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    tags.push_back(line);
  }
  if (tags.empty()) fail(errc::empty_dataset, "empty tag system file: " + path.string());
  return TagSystem(name.empty() ? path.stem().string() : name, std::move(tags));
}

inline void save_tag_system(const std::filesystem::path& path,
                            const TagSystem& tags) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(errc::io, "cannot open for writing: " + path.string());
  for (const auto& t : tags.tags()) out << t << '\n';
}

// Taxonomy file: `child<TAB>parent` per line. Names are validated against
// the tag system when one is given.
inline std::vector<TaxonomyEdge> load_taxonomy(const std::filesystem::path& path,
                                               const TagSystem* tags = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(errc::io, "cannot open: " + path.string());
  std::vector<TaxonomyEdge> edges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size())
      fail(errc::parse, path.string() + ":" + std::to_string(line_no) +
                            ": expected `child<TAB>parent`");
    TaxonomyEdge edge{line.substr(0, tab), line.substr(tab + 1)};
    if (tags != nullptr) {
      if (!tags->contains(edge.child))
        fail(errc::vocabulary, path.string() + ":" + std::to_string(line_no) +
                                   ": unknown child tag: " + edge.child);
      if (!tags->contains(edge.parent))
        fail(errc::vocabulary, path.string() + ":" + std::to_string(line_no) +
                                   ": unknown parent tag: " + edge.parent);
    }
    edges.push_back(std::move(edge));
  }
  return edges;
}

inline void save_taxonomy(const std::filesystem::path& path,
                          std::span<const TaxonomyEdge> edges) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(errc::io, "cannot open for writing: " + path.string());
  for (const auto& e : edges) out << e.child << '\t' << e.parent << '\n';
}

// Annotations file: `track_id<TAB>album_id<TAB>artist_id<TAB>tag1,tag2,...`.
// Unknown tags are a hard error; album-inconsistent tag sets only warn, since
// crowd-sourced sources do ship such rows.
inline AnnotationSet load_annotations(const std::filesystem::path& path,
                                      const TagSystem& tags,
                                      WarningList* warnings = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(errc::io, "cannot open: " + path.string());

  std::vector<TrackRef> tracks;
  std::vector<std::uint8_t> occ;
  std::vector<std::string> unknown;
  std::string line;
  std::size_t line_no = 0;
  const auto n_tags = static_cast<std::size_t>(tags.size());

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::array<std::string, 4> field;
    std::size_t start = 0;
    int n_fields = 0;
    for (; n_fields < 3; ++n_fields) {
      const auto tab = line.find('\t', start);
      if (tab == std::string::npos) break;
      field[static_cast<std::size_t>(n_fields)] = line.substr(start, tab - start);
      start = tab + 1;
    }
    field[3] = line.substr(start);
    if (n_fields != 3 || field[0].empty() || field[1].empty() ||
        field[2].empty() || field[3].empty())
      fail(errc::parse, path.string() + ":" + std::to_string(line_no) +
                            ": expected `track<TAB>album<TAB>artist<TAB>tags`");

    std::vector<std::uint8_t> row(n_tags, 0);
    std::stringstream tag_list(field[3]);
    std::string tag_name;
    bool any = false;
    while (std::getline(tag_list, tag_name, ',')) {
      if (tag_name.empty())
        fail(errc::parse, path.string() + ":" + std::to_string(line_no) +
                              ": empty tag in tag list");
      const auto idx = tags.find(tag_name);
      if (!idx) {
        unknown.push_back(path.string() + ":" + std::to_string(line_no) + ": " + tag_name);
        continue;
      }
      row[static_cast<std::size_t>(*idx)] = 1;
      any = true;
    }
    if (unknown.empty() && !any)
      fail(errc::parse, path.string() + ":" + std::to_string(line_no) +
                            ": track has no tags");

    tracks.push_back(TrackRef{field[0], field[1], field[2], 0});
    occ.insert(occ.end(), row.begin(), row.end());
  }

  if (!unknown.empty()) {
    std::string msg = "tags not in the tag system:";
    for (const auto& u : unknown) msg += "\n  " + u;
    fail(errc::vocabulary, msg);
  }
  if (tracks.empty()) fail(errc::empty_dataset, "no tracks in: " + path.string());

  AnnotationSet set(tags, std::move(tracks), std::move(occ));

  // Album consistency check (warn only).
  std::unordered_map<std::string, index_t> first_row_of_album;
  for (index_t row = 0; row < set.n_tracks(); ++row) {
    const auto& album = set.track(row).album_id;
    const auto [it, inserted] = first_row_of_album.emplace(album, row);
    if (!inserted && set.row_tags(row) != set.row_tags(it->second))
      warn(warnings, "album " + album + " has inconsistent tag sets (tracks " +
                         set.track(it->second).track_id + ", " +
                         set.track(row).track_id + ")");
  }
  return set;
}

inline void save_annotations(const std::filesystem::path& path,
                             const AnnotationSet& set) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(errc::io, "cannot open for writing: " + path.string());
  for (index_t row = 0; row < set.n_tracks(); ++row) {
    const auto& t = set.track(row);
    out << t.track_id << '\t' << t.album_id << '\t' << t.artist_id << '\t';
    bool first = true;
    for (index_t tag : set.row_tags(row)) {
      if (!first) out << ',';
      out << set.tag_system().tag(tag);
      first = false;
    }
    out << '\n';
  }
}

// --- operations --------------------------------------------------------------

// Column sums of the occurrence matrix.
inline std::vector<std::int64_t> global_popularity(const AnnotationSet& set) {
  std::vector<std::int64_t> counts(static_cast<std::size_t>(set.n_tags()), 0);
  for (index_t row = 0; row < set.n_tracks(); ++row)
    for (index_t t = 0; t < set.n_tags(); ++t)
      if (set.has_tag(row, t)) ++counts[static_cast<std::size_t>(t)];
  return counts;
}

// Artist-level split: artists (in first-appearance order) are shuffled with
// the seeded generator, then assigned greedily to train/valid/test while the
// partition's cumulative track count is below its target. Every artist lands
// in exactly one partition.
inline DatasetSplit artist_split(const AnnotationSet& set,
                                 std::array<double, 3> fractions,
                                 std::uint64_t seed) {
  double total = 0.0;
  for (double f : fractions) {
    if (f <= 0.0) fail(errc::param, "split fractions must be positive");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9)
    fail(errc::param, "split fractions must sum to 1");
  if (set.n_tracks() == 0) fail(errc::empty_dataset, "cannot split an empty dataset");

  std::vector<std::string> artists;
  std::unordered_map<std::string, std::vector<index_t>> rows_of;
  for (index_t row = 0; row < set.n_tracks(); ++row) {
    const auto& artist = set.track(row).artist_id;
    auto [it, inserted] = rows_of.try_emplace(artist);
    if (inserted) artists.push_back(artist);
    it->second.push_back(row);
  }
  if (artists.size() < 3)
    fail(errc::split_infeasible,
         "need at least 3 artists for a train/valid/test split, have " +
             std::to_string(artists.size()));

  Rng rng(seed);
  rng.shuffle(artists);

  const double n = static_cast<double>(set.n_tracks());
  const std::array<double, 2> thresholds{fractions[0] * n,
                                         (fractions[0] + fractions[1]) * n};

  DatasetSplit split;
  split.fractions = fractions;
  std::array<std::vector<index_t>*, 3> parts{&split.train, &split.valid, &split.test};
  std::size_t part = 0;
  double cumulative = 0.0;
  for (std::size_t i = 0; i < artists.size(); ++i) {
    const auto& rows = rows_of[artists[i]];
    parts[part]->insert(parts[part]->end(), rows.begin(), rows.end());
    cumulative += static_cast<double>(rows.size());
    const std::size_t artists_left = artists.size() - (i + 1);
    const std::size_t parts_after = 2 - part;
    if (part < 2 &&
        (cumulative >= thresholds[part] || artists_left <= parts_after))
      ++part;
  }
  for (auto* p : parts) std::sort(p->begin(), p->end());
  return split;
}

// Materializes the sub-dataset given by `rows` (row order preserved).
inline AnnotationSet subset(const AnnotationSet& set, std::span<const index_t> rows) {
  std::vector<TrackRef> tracks;
  std::vector<std::uint8_t> occ;
  tracks.reserve(rows.size());
  occ.reserve(rows.size() * static_cast<std::size_t>(set.n_tags()));
  for (index_t row : rows) {
    if (row < 0 || row >= set.n_tracks()) fail(errc::param, "subset row out of range");
    tracks.push_back(set.track(row));
    for (index_t t = 0; t < set.n_tags(); ++t)
      occ.push_back(set.has_tag(row, t) ? 1 : 0);
  }
  if (tracks.empty()) fail(errc::empty_dataset, "subset selects no rows");
  return AnnotationSet(set.tag_system(), std::move(tracks), std::move(occ));
}

// Split file: `track_id<TAB>{train|valid|test}` in track order.
inline void save_split(const std::filesystem::path& path, const AnnotationSet& set,
                       const DatasetSplit& split) {
  std::vector<const char*> label(static_cast<std::size_t>(set.n_tracks()), nullptr);
  for (Partition p : {Partition::train, Partition::valid, Partition::test})
    for (index_t row : split.part(p))
      label[static_cast<std::size_t>(row)] = partition_name(p);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(errc::io, "cannot open for writing: " + path.string());
  for (index_t row = 0; row < set.n_tracks(); ++row) {
    if (label[static_cast<std::size_t>(row)] == nullptr)
      fail(errc::internal, "split does not cover row " + std::to_string(row));
    out << set.track(row).track_id << '\t' << label[static_cast<std::size_t>(row)] << '\n';
  }
}

inline DatasetSplit load_split(const std::filesystem::path& path,
                               const AnnotationSet& set) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(errc::io, "cannot open: " + path.string());
  std::unordered_map<std::string, index_t> row_of;
  for (index_t row = 0; row < set.n_tracks(); ++row)
    row_of.emplace(set.track(row).track_id, row);

  DatasetSplit split;
  std::string line;
  std::size_t line_no = 0;
  std::vector<bool> seen(static_cast<std::size_t>(set.n_tracks()), false);
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      fail(errc::parse, path.string() + ":" + std::to_string(line_no) +
                            ": expected `track_id<TAB>partition`");
    const std::string track_id = line.substr(0, tab);
    const auto it = row_of.find(track_id);
    if (it == row_of.end())
      fail(errc::vocabulary, path.string() + ":" + std::to_string(line_no) +
                                 ": track not in annotations: " + track_id);
    if (seen[static_cast<std::size_t>(it->second)])
      fail(errc::parse, path.string() + ":" + std::to_string(line_no) +
                            ": duplicate track: " + track_id);
    seen[static_cast<std::size_t>(it->second)] = true;
    switch (parse_partition(line.substr(tab + 1))) {
      case Partition::train: split.train.push_back(it->second); break;
      case Partition::valid: split.valid.push_back(it->second); break;
      case Partition::test: split.test.push_back(it->second); break;
    }
  }
  if (split.train.size() + split.valid.size() + split.test.size() !=
      static_cast<std::size_t>(set.n_tracks()))
    fail(errc::parse, "split file does not cover every track: " + path.string());
  for (auto* p : {&split.train, &split.valid, &split.test})
    std::sort(p->begin(), p->end());
  return split;
}

}  // namespace tagweave
