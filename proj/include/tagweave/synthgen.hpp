#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tagweave/common.hpp"
#include "tagweave/dataset.hpp"
#include "tagweave/rng.hpp"
#include "tagweave/sampling.hpp"

namespace tagweave {

// Latent-hierarchy corpus: genre centers with style offsets, iid tracks per
// style, albums owned by artists. A known generative process is the oracle
// every evaluation is checked against.
struct GeneratorConfig {
  int n_genres = 15;
  int styles_per_genre = 4;
  index_t feature_dim = 64;
  double sigma_genre = 10.0;    // genre center scale
  double sigma_style = 2.0;     // style offset from its genre center
  double sigma_noise = 1.0;     // per-track noise around the style center
  double sigma_excerpt = 0.25;  // jitter between excerpts of one track
  int tracks_per_style = 100;
  int tracks_per_album = 5;
  int albums_per_artist = 2;
  double parent_cooccurrence = 1.0;  // probability a track also carries its genre tag
  std::uint64_t seed = 0;

  void validate() const {
    if (n_genres < 1 || styles_per_genre < 1 || feature_dim < 1 ||
        tracks_per_style < 1 || tracks_per_album < 1 || albums_per_artist < 1)
      fail(errc::config, "generator counts must be at least 1");
    if (sigma_genre < 0 || sigma_style < 0 || sigma_noise < 0 || sigma_excerpt < 0)
      fail(errc::config, "generator scales must be non-negative");
    if (parent_cooccurrence < 0.0 || parent_cooccurrence > 1.0)
      fail(errc::config, "parent cooccurrence must lie in [0, 1]");
  }
};

struct GroundTruth {
  std::vector<TaxonomyEdge> edges;
  std::vector<std::string> center_tags;  // row i of `centers` belongs to this tag
  Eigen::MatrixXd centers;
  std::vector<std::pair<std::string, std::string>> pairs;  // twin-system tag pairing
};

struct SyntheticCorpus {
  GeneratorConfig config;
  TagSystem tags;
  std::vector<TaxonomyEdge> edges;
  AnnotationSet annotations;
  Eigen::MatrixXd features;  // row k = excerpt-0 feature of track k
  GroundTruth truth;
};

namespace detail {

inline std::string zero_pad(const char* prefix, int value, int width) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s%0*d", prefix, width, value);
  return buf;
}

struct LatentCenters {
  Eigen::MatrixXd genre;  // n_genres x d
  Eigen::MatrixXd style;  // n_genres*styles_per_genre x d, genre-major
};

inline LatentCenters draw_centers(const GeneratorConfig& cfg, Rng& rng) {
  LatentCenters c;
  c.genre.resize(cfg.n_genres, cfg.feature_dim);
  for (int g = 0; g < cfg.n_genres; ++g)
    for (index_t k = 0; k < cfg.feature_dim; ++k)
      c.genre(g, k) = rng.normal(0.0, cfg.sigma_genre);
  c.style.resize(static_cast<index_t>(cfg.n_genres) * cfg.styles_per_genre,
                 cfg.feature_dim);
  for (int g = 0; g < cfg.n_genres; ++g)
    for (int s = 0; s < cfg.styles_per_genre; ++s) {
      const Eigen::Index row = static_cast<Eigen::Index>(g) * cfg.styles_per_genre + s;
      for (index_t k = 0; k < cfg.feature_dim; ++k)
        c.style(row, k) = c.genre(g, k) + rng.normal(0.0, cfg.sigma_style);
    }
  return c;
}

// Tracks, albums, artists and features for one tag system drawn around the
// given centers. `id_prefix` keeps twin corpora disjoint.
inline SyntheticCorpus assemble(const GeneratorConfig& cfg, const LatentCenters& centers,
                                Rng rng, const std::string& id_prefix) {
  const int n_styles = cfg.n_genres * cfg.styles_per_genre;

  std::vector<std::string> tag_names;
  for (int g = 0; g < cfg.n_genres; ++g)
    tag_names.push_back(zero_pad("genre", g, 2));
  std::vector<TaxonomyEdge> edges;
  for (int g = 0; g < cfg.n_genres; ++g)
    for (int s = 0; s < cfg.styles_per_genre; ++s) {
      tag_names.push_back(zero_pad("style", g, 2) + "_" + std::to_string(s));
      edges.push_back(TaxonomyEdge{tag_names.back(), tag_names[static_cast<std::size_t>(g)]});
    }
  TagSystem tags(id_prefix.empty() ? "synthetic" : id_prefix, tag_names);

  const int albums_per_style =
      (cfg.tracks_per_style + cfg.tracks_per_album - 1) / cfg.tracks_per_album;

  std::vector<TrackRef> tracks;
  std::vector<std::uint8_t> occ;
  const auto n_tags = static_cast<std::size_t>(tags.size());
  Eigen::MatrixXd features(static_cast<Eigen::Index>(n_styles) * cfg.tracks_per_style,
                           cfg.feature_dim);

  int track_counter = 0, album_counter = 0, artist_counter = 0;
  for (int g = 0; g < cfg.n_genres; ++g) {
    for (int s = 0; s < cfg.styles_per_genre; ++s) {
      const int style_index = g * cfg.styles_per_genre + s;
      const index_t style_tag = cfg.n_genres + style_index;
      const index_t genre_tag = g;
      int produced = 0;
      for (int a = 0; a < albums_per_style; ++a) {
        // Albums are style-pure; an artist owns whole albums of one style.
        const int artist_ordinal = artist_counter + a / cfg.albums_per_artist;
        const std::string album_id = id_prefix + zero_pad("al", album_counter++, 6);
        const std::string artist_id = id_prefix + zero_pad("ar", artist_ordinal, 5);
        for (int t = 0; t < cfg.tracks_per_album && produced < cfg.tracks_per_style;
             ++t, ++produced) {
          const std::string track_id = id_prefix + zero_pad("t", track_counter, 7);
          tracks.push_back(TrackRef{track_id, album_id, artist_id, 0});
          std::vector<std::uint8_t> row(n_tags, 0);
          row[static_cast<std::size_t>(style_tag)] = 1;
          if (rng.uniform01() < cfg.parent_cooccurrence)
            row[static_cast<std::size_t>(genre_tag)] = 1;
          occ.insert(occ.end(), row.begin(), row.end());
          for (index_t k = 0; k < cfg.feature_dim; ++k)
            features(track_counter, k) =
                centers.style(style_index, k) + rng.normal(0.0, cfg.sigma_noise);
          ++track_counter;
        }
      }
      artist_counter += (albums_per_style + cfg.albums_per_artist - 1) /
                        cfg.albums_per_artist;
    }
  }

  SyntheticCorpus corpus;
  corpus.config = cfg;
  corpus.tags = tags;
  corpus.edges = edges;
  corpus.annotations = AnnotationSet(tags, std::move(tracks), std::move(occ));
  corpus.features = std::move(features);
  corpus.truth.edges = corpus.edges;
  corpus.truth.center_tags = tag_names;
  corpus.truth.centers.resize(tags.size(), cfg.feature_dim);
  corpus.truth.centers.topRows(cfg.n_genres) = centers.genre;
  corpus.truth.centers.bottomRows(n_styles) = centers.style;
  return corpus;
}

}  // namespace detail

inline SyntheticCorpus generate(const GeneratorConfig& cfg) {
  cfg.validate();
  Rng center_rng(mix_seed(cfg.seed, 0));
  const detail::LatentCenters centers = detail::draw_centers(cfg, center_rng);
  return detail::assemble(cfg, centers, Rng(mix_seed(cfg.seed, 1)), "");
}

// Two corpora drawn around identical latent centers with disjoint tracks.
// `rename_fraction` of the second system's tags get opaque alias names, so
// string matching fails while the latent pairing still holds.
struct TwinCorpora {
  SyntheticCorpus a;
  SyntheticCorpus b;
  std::vector<std::pair<std::string, std::string>> pairs;  // (tag in A, tag in B)
};

inline TwinCorpora generate_twin_systems(const GeneratorConfig& cfg,
                                         double rename_fraction) {
  cfg.validate();
  if (rename_fraction < 0.0 || rename_fraction > 1.0)
    fail(errc::config, "rename_fraction must lie in [0, 1]");

  Rng center_rng(mix_seed(cfg.seed, 0));
  const detail::LatentCenters centers = detail::draw_centers(cfg, center_rng);

  TwinCorpora twin;
  twin.a = detail::assemble(cfg, centers, Rng(mix_seed(cfg.seed, 1)), "A_");
  twin.b = detail::assemble(cfg, centers, Rng(mix_seed(cfg.seed, 2)), "B_");

  const auto n_tags = static_cast<std::size_t>(twin.b.tags.size());
  const auto n_renamed = static_cast<std::size_t>(
      std::llround(rename_fraction * static_cast<double>(n_tags)));
  std::vector<std::size_t> positions(n_tags);
  for (std::size_t i = 0; i < n_tags; ++i) positions[i] = i;
  Rng rename_rng(mix_seed(cfg.seed, 3));
  rename_rng.shuffle(positions);

  std::vector<std::string> b_names = twin.b.tags.tags();
  for (std::size_t i = 0; i < n_renamed; ++i)
    b_names[positions[i]] = detail::zero_pad("alias", static_cast<int>(i), 3);

  // Rewrite system B with the new names (indices are unchanged).
  const TagSystem renamed(twin.b.tags.name(), b_names);
  std::unordered_map<std::string, std::string> rename_of;
  for (index_t t = 0; t < twin.b.tags.size(); ++t)
    rename_of.emplace(twin.b.tags.tag(t), b_names[static_cast<std::size_t>(t)]);
  for (auto& e : twin.b.edges) {
    e.child = rename_of.at(e.child);
    e.parent = rename_of.at(e.parent);
  }
  twin.b.truth.edges = twin.b.edges;
  for (auto& name : twin.b.truth.center_tags) name = rename_of.at(name);
  twin.b.annotations = AnnotationSet(renamed, twin.b.annotations.tracks(),
                                     twin.b.annotations.raw());
  twin.b.tags = renamed;

  for (index_t t = 0; t < twin.a.tags.size(); ++t)
    twin.pairs.emplace_back(twin.a.tags.tag(t), b_names[static_cast<std::size_t>(t)]);
  twin.a.truth.pairs = twin.pairs;
  twin.b.truth.pairs = twin.pairs;
  return twin;
}

// Concatenates twin corpora into one training corpus. Tag names get system
// prefixes (label ":"), the way two catalogs would be merged for a joint
// classifier; the returned ground truth carries the prefixed pairing.
inline SyntheticCorpus merge_twin(const TwinCorpora& twin,
                                  const std::string& label_a = "A",
                                  const std::string& label_b = "B") {
  const auto& a = twin.a;
  const auto& b = twin.b;
  if (a.features.cols() != b.features.cols())
    fail(errc::shape, "twin corpora have different feature dimensions");

  std::vector<std::string> names;
  for (const auto& t : a.tags.tags()) names.push_back(label_a + ":" + t);
  for (const auto& t : b.tags.tags()) names.push_back(label_b + ":" + t);
  TagSystem merged_tags(label_a + "+" + label_b, names);

  std::vector<TrackRef> tracks = a.annotations.tracks();
  {
    std::unordered_map<std::string, bool> ids;
    for (const auto& t : tracks) ids.emplace(t.track_id, true);
    for (const auto& t : b.annotations.tracks())
      if (!ids.emplace(t.track_id, true).second)
        fail(errc::conflict, "track id present in both corpora: " + t.track_id);
  }
  tracks.insert(tracks.end(), b.annotations.tracks().begin(),
                b.annotations.tracks().end());

  const auto na = static_cast<std::size_t>(a.tags.size());
  const auto nb = static_cast<std::size_t>(b.tags.size());
  std::vector<std::uint8_t> occ(tracks.size() * (na + nb), 0);
  for (index_t row = 0; row < a.annotations.n_tracks(); ++row)
    for (index_t t = 0; t < a.annotations.n_tags(); ++t)
      if (a.annotations.has_tag(row, t))
        occ[static_cast<std::size_t>(row) * (na + nb) + static_cast<std::size_t>(t)] = 1;
  const auto offset_rows = static_cast<std::size_t>(a.annotations.n_tracks());
  for (index_t row = 0; row < b.annotations.n_tracks(); ++row)
    for (index_t t = 0; t < b.annotations.n_tags(); ++t)
      if (b.annotations.has_tag(row, t))
        occ[(offset_rows + static_cast<std::size_t>(row)) * (na + nb) + na +
            static_cast<std::size_t>(t)] = 1;

  SyntheticCorpus merged;
  merged.config = a.config;
  merged.tags = merged_tags;
  for (const auto& e : a.edges)
    merged.edges.push_back(TaxonomyEdge{label_a + ":" + e.child, label_a + ":" + e.parent});
  for (const auto& e : b.edges)
    merged.edges.push_back(TaxonomyEdge{label_b + ":" + e.child, label_b + ":" + e.parent});
  merged.annotations = AnnotationSet(merged_tags, std::move(tracks), std::move(occ));
  merged.features.resize(a.features.rows() + b.features.rows(), a.features.cols());
  merged.features.topRows(a.features.rows()) = a.features;
  merged.features.bottomRows(b.features.rows()) = b.features;
  merged.truth.edges = merged.edges;
  for (const auto& [ta, tb] : twin.pairs)
    merged.truth.pairs.emplace_back(label_a + ":" + ta, label_b + ":" + tb);
  return merged;
}

// Feature rows for monolabel entries. Excerpt 0 returns the stored row;
// higher excerpt indices add jitter drawn deterministically from
// (seed, track row, excerpt), standing in for a different 30s window.
inline Eigen::MatrixXd assemble_features(const Eigen::MatrixXd& base,
                                         const AnnotationSet& aligned_with,
                                         std::span<const MonolabelEntry> entries,
                                         double sigma_excerpt, std::uint64_t seed) {
  if (base.rows() != aligned_with.n_tracks())
    fail(errc::shape, "feature rows do not match annotation rows");
  std::unordered_map<std::string, index_t> row_of;
  for (index_t row = 0; row < aligned_with.n_tracks(); ++row)
    row_of.emplace(aligned_with.track(row).track_id, row);

  Eigen::MatrixXd out(static_cast<Eigen::Index>(entries.size()), base.cols());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto it = row_of.find(entries[i].track.track_id);
    if (it == row_of.end())
      fail(errc::vocabulary, "track not in annotations: " + entries[i].track.track_id);
    out.row(static_cast<Eigen::Index>(i)) = base.row(it->second);
    const std::uint32_t excerpt = entries[i].track.excerpt_index;
    if (excerpt > 0 && sigma_excerpt > 0.0) {
      Rng jitter(mix_seed(mix_seed(seed, static_cast<std::uint64_t>(it->second)), excerpt));
      for (Eigen::Index k = 0; k < base.cols(); ++k)
        out(static_cast<Eigen::Index>(i), k) += jitter.normal(0.0, sigma_excerpt);
    }
  }
  return out;
}

inline std::vector<index_t> entry_labels(std::span<const MonolabelEntry> entries) {
  std::vector<index_t> labels;
  labels.reserve(entries.size());
  for (const auto& e : entries) labels.push_back(e.tag);
  return labels;
}

}  // namespace tagweave
