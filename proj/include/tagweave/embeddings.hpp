#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tagweave/classifier.hpp"
#include "tagweave/common.hpp"
#include "tagweave/dataset.hpp"
#include "tagweave/matrix_io.hpp"
#include "tagweave/parallel.hpp"

namespace tagweave {

enum class EmbeddingKind { weights, columns, mean, dist };

inline const char* to_string(EmbeddingKind k) {
  switch (k) {
    case EmbeddingKind::weights: return "weights";
    case EmbeddingKind::columns: return "columns";
    case EmbeddingKind::mean: return "mean";
    case EmbeddingKind::dist: return "dist";
  }
  return "weights";
}

inline EmbeddingKind parse_embedding_kind(const std::string& name) {
  if (name == "weights") return EmbeddingKind::weights;
  if (name == "columns") return EmbeddingKind::columns;
  if (name == "mean") return EmbeddingKind::mean;
  if (name == "dist") return EmbeddingKind::dist;
  fail(errc::config, "unknown embedding kind: " + name);
}

// One vector per tag, all of equal dimension. Tags the construction had no
// data for are absent from `tag_names` and listed in `omitted_tags`.
struct TagEmbedding {
  EmbeddingKind kind = EmbeddingKind::weights;
  std::vector<std::string> tag_names;  // row i of `vectors` embeds tag_names[i]
  Eigen::MatrixXd vectors;
  std::vector<std::string> omitted_tags;

  index_t dim() const { return vectors.cols(); }
  index_t size() const { return vectors.rows(); }

  index_t index_of(const std::string& tag) const {
    for (std::size_t i = 0; i < tag_names.size(); ++i)
      if (tag_names[i] == tag) return static_cast<index_t>(i);
    fail(errc::vocabulary, "tag not in embedding: " + tag);
  }

  bool contains(const std::string& tag) const {
    return std::find(tag_names.begin(), tag_names.end(), tag) != tag_names.end();
  }

  // Rows for the named tags, in the given order.
  TagEmbedding subset(std::span<const std::string> names) const {
    TagEmbedding out;
    out.kind = kind;
    out.vectors.resize(static_cast<Eigen::Index>(names.size()), vectors.cols());
    for (std::size_t i = 0; i < names.size(); ++i) {
      out.vectors.row(static_cast<Eigen::Index>(i)) = vectors.row(index_of(names[i]));
      out.tag_names.push_back(names[i]);
    }
    return out;
  }
};

namespace detail {

inline void check_posteriors(const Eigen::MatrixXd& p) {
  if (p.rows() == 0 || p.cols() == 0)
    fail(errc::shape, "posterior matrix is empty");
  if ((p.array() < 0.0).any())
    fail(errc::domain, "posterior matrix has negative entries");
  // f32 round-tripped files drift a little; anything worse is not a
  // posterior matrix.
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    if (std::abs(p.row(i).sum() - 1.0) > 1e-3)
      fail(errc::domain, "posterior row " + std::to_string(i) +
                             " does not sum to 1 (got " +
                             std::to_string(p.row(i).sum()) + ")");
}

}  // namespace detail

// Embedding from the last-layer weight matrix: tag i gets column i.
inline TagEmbedding embed_weights(const Eigen::MatrixXd& last_layer_weights,
                                  const TagSystem& tags) {
  if (last_layer_weights.cols() != tags.size())
    fail(errc::shape, "weight matrix has " + std::to_string(last_layer_weights.cols()) +
                          " columns for " + std::to_string(tags.size()) + " tags");
  TagEmbedding e;
  e.kind = EmbeddingKind::weights;
  e.tag_names = tags.tags();
  e.vectors = last_layer_weights.transpose();
  return e;
}

template <ProbabilisticClassifier C>
TagEmbedding embed_weights(const C& classifier, const TagSystem& tags) {
  return embed_weights(Eigen::MatrixXd(classifier.last_layer_weights()), tags);
}

// Embedding from posterior columns: tag i gets column i of P. Needs no
// annotations; the Gram matrix of these vectors reads as a normalized
// confusion matrix.
inline TagEmbedding embed_columns(const Eigen::MatrixXd& posteriors,
                                  const TagSystem& tags) {
  detail::check_posteriors(posteriors);
  if (posteriors.cols() != tags.size())
    fail(errc::shape, "posterior matrix has " + std::to_string(posteriors.cols()) +
                          " columns for " + std::to_string(tags.size()) + " tags");
  TagEmbedding e;
  e.kind = EmbeddingKind::columns;
  e.tag_names = tags.tags();
  e.vectors = posteriors.transpose();
  return e;
}

// Embedding from mean posteriors: tag i gets the average of the posterior
// rows of its annotated test tracks. Tags with no test tracks are omitted.
inline TagEmbedding embed_mean(const Eigen::MatrixXd& posteriors,
                               const AnnotationSet& test_annotations,
                               WarningList* warnings = nullptr) {
  detail::check_posteriors(posteriors);
  if (posteriors.rows() != test_annotations.n_tracks())
    fail(errc::shape, "posterior rows (" + std::to_string(posteriors.rows()) +
                          ") do not match annotation rows (" +
                          std::to_string(test_annotations.n_tracks()) + ")");
  if (posteriors.cols() != test_annotations.n_tags())
    fail(errc::shape, "posterior columns do not match tag count");

  // Exact simplex rows regardless of storage precision upstream.
  Eigen::MatrixXd p = posteriors;
  for (Eigen::Index i = 0; i < p.rows(); ++i) p.row(i) /= p.row(i).sum();

  const TagSystem& tags = test_annotations.tag_system();
  TagEmbedding e;
  e.kind = EmbeddingKind::mean;

  std::vector<Eigen::VectorXd> rows;
  for (index_t t = 0; t < tags.size(); ++t) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(p.cols());
    std::int64_t count = 0;
    for (index_t row = 0; row < test_annotations.n_tracks(); ++row) {
      if (!test_annotations.has_tag(row, t)) continue;
      sum += p.row(row).transpose();
      ++count;
    }
    if (count == 0) {
      e.omitted_tags.push_back(tags.tag(t));
      warn(warnings, "tag " + tags.tag(t) + " has no test tracks; omitted from mean embedding");
      continue;
    }
    e.tag_names.push_back(tags.tag(t));
    rows.push_back(sum / static_cast<double>(count));
  }
  if (rows.empty())
    fail(errc::empty_dataset, "no tag has test tracks; mean embedding is empty");
  e.vectors.resize(static_cast<Eigen::Index>(rows.size()), p.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    e.vectors.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return e;
}

// Occurrence embedding: tag i gets the binary column i of the annotation
// matrix. Not audio-based; serves as the cooccurrence reference.
inline TagEmbedding embed_dist(const AnnotationSet& annotations) {
  TagEmbedding e;
  e.kind = EmbeddingKind::dist;
  e.tag_names = annotations.tag_system().tags();
  e.vectors.resize(annotations.n_tags(), annotations.n_tracks());
  for (index_t t = 0; t < annotations.n_tags(); ++t)
    for (index_t row = 0; row < annotations.n_tracks(); ++row)
      e.vectors(t, row) = annotations.has_tag(row, t) ? 1.0 : 0.0;
  return e;
}

// Extends a mean embedding with a new tag scored by the same model. Existing
// vectors are untouched.
inline TagEmbedding incorporate_tag(const TagEmbedding& embedding,
                                    const Eigen::MatrixXd& new_tag_posteriors,
                                    const std::string& new_tag) {
  if (embedding.kind != EmbeddingKind::mean)
    fail(errc::param, "incorporate_tag applies to mean embeddings only");
  if (embedding.contains(new_tag))
    fail(errc::conflict, "tag already in embedding: " + new_tag);
  detail::check_posteriors(new_tag_posteriors);
  if (new_tag_posteriors.cols() != embedding.dim())
    fail(errc::shape, "posterior columns do not match embedding dimension");

  Eigen::MatrixXd p = new_tag_posteriors;
  for (Eigen::Index i = 0; i < p.rows(); ++i) p.row(i) /= p.row(i).sum();

  TagEmbedding out = embedding;
  out.tag_names.push_back(new_tag);
  out.vectors.conservativeResize(out.vectors.rows() + 1, Eigen::NoChange);
  out.vectors.row(out.vectors.rows() - 1) = p.colwise().mean();
  return out;
}

// Cosine similarity between all row pairs of two embeddings of the same kind
// and dimension. A zero vector is assigned similarity 0 with a warning.
struct SimilarityMatrix {
  std::vector<std::string> row_tags;
  std::vector<std::string> col_tags;
  Eigen::MatrixXd values;

  index_t row_of(const std::string& tag) const {
    for (std::size_t i = 0; i < row_tags.size(); ++i)
      if (row_tags[i] == tag) return static_cast<index_t>(i);
    fail(errc::vocabulary, "tag not in similarity rows: " + tag);
  }

  index_t col_of(const std::string& tag) const {
    for (std::size_t i = 0; i < col_tags.size(); ++i)
      if (col_tags[i] == tag) return static_cast<index_t>(i);
    fail(errc::vocabulary, "tag not in similarity columns: " + tag);
  }
};

inline SimilarityMatrix similarity_matrix(const TagEmbedding& a,
                                          const TagEmbedding& b,
                                          WarningList* warnings = nullptr) {
  if (a.kind != b.kind)
    fail(errc::param, std::string("embedding kinds differ: ") + to_string(a.kind) +
                          " vs " + to_string(b.kind));
  if (a.dim() != b.dim())
    fail(errc::shape, "embedding dimensions differ: " + std::to_string(a.dim()) +
                          " vs " + std::to_string(b.dim()));

  const Eigen::VectorXd norm_a = a.vectors.rowwise().norm();
  const Eigen::VectorXd norm_b = b.vectors.rowwise().norm();
  for (Eigen::Index i = 0; i < norm_a.size(); ++i)
    if (norm_a(i) == 0.0)
      warn(warnings, "zero vector for tag " + a.tag_names[static_cast<std::size_t>(i)] +
                         "; its similarities are set to 0");
  if (&a != &b)
    for (Eigen::Index j = 0; j < norm_b.size(); ++j)
      if (norm_b(j) == 0.0)
        warn(warnings, "zero vector for tag " + b.tag_names[static_cast<std::size_t>(j)] +
                           "; its similarities are set to 0");

  SimilarityMatrix sim;
  sim.row_tags = a.tag_names;
  sim.col_tags = b.tag_names;
  sim.values.resize(a.size(), b.size());
  parallel_for(static_cast<std::size_t>(a.size()), [&](std::size_t i) {
    const auto row = static_cast<Eigen::Index>(i);
    if (norm_a(row) == 0.0) {
      sim.values.row(row).setZero();
      return;
    }
    for (Eigen::Index col = 0; col < b.size(); ++col)
      sim.values(row, col) =
          norm_b(col) == 0.0
              ? 0.0
              : a.vectors.row(row).dot(b.vectors.row(col)) / (norm_a(row) * norm_b(col));
  });
  return sim;
}

// --- persistence -------------------------------------------------------------

inline void save_embedding(const std::filesystem::path& path, const TagEmbedding& e) {
  save_matrix(path, e.vectors);
  save_lines(path.string() + ".tags", e.tag_names);
}

inline TagEmbedding load_embedding(const std::filesystem::path& path,
                                   EmbeddingKind kind) {
  TagEmbedding e;
  e.kind = kind;
  e.vectors = load_matrix(path);
  e.tag_names = load_lines(path.string() + ".tags");
  while (!e.tag_names.empty() && e.tag_names.back().empty()) e.tag_names.pop_back();
  if (static_cast<index_t>(e.tag_names.size()) != e.vectors.rows())
    fail(errc::shape, "tag sidecar lists " + std::to_string(e.tag_names.size()) +
                          " tags for " + std::to_string(e.vectors.rows()) + " rows");
  return e;
}

inline void save_similarity(const std::filesystem::path& path,
                            const SimilarityMatrix& sim) {
  save_matrix(path, sim.values);
  save_lines(path.string() + ".rows", sim.row_tags);
  save_lines(path.string() + ".cols", sim.col_tags);
}

inline SimilarityMatrix load_similarity(const std::filesystem::path& path) {
  SimilarityMatrix sim;
  sim.values = load_matrix(path);
  sim.row_tags = load_lines(path.string() + ".rows");
  sim.col_tags = load_lines(path.string() + ".cols");
  while (!sim.row_tags.empty() && sim.row_tags.back().empty()) sim.row_tags.pop_back();
  while (!sim.col_tags.empty() && sim.col_tags.back().empty()) sim.col_tags.pop_back();
  if (static_cast<index_t>(sim.row_tags.size()) != sim.values.rows() ||
      static_cast<index_t>(sim.col_tags.size()) != sim.values.cols())
    fail(errc::shape, "similarity sidecars do not match matrix shape");
  return sim;
}

inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Human-readable export: every pair, sorted by descending similarity, ties by
// ascending (row, col) index.
inline void write_similarity_csv(const std::filesystem::path& path,
                                 const SimilarityMatrix& sim) {
  struct Cell {
    double value;
    index_t row, col;
  };
  std::vector<Cell> cells;
  cells.reserve(static_cast<std::size_t>(sim.values.size()));
  for (Eigen::Index i = 0; i < sim.values.rows(); ++i)
    for (Eigen::Index j = 0; j < sim.values.cols(); ++j)
      cells.push_back(Cell{sim.values(i, j), i, j});
  std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) {
    if (a.value != b.value) return a.value > b.value;
    if (a.row != b.row) return a.row < b.row;
    return a.col < b.col;
  });
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(errc::io, "cannot open for writing: " + path.string());
  out << "row_tag,col_tag,similarity\n";
  for (const Cell& c : cells)
    out << sim.row_tags[static_cast<std::size_t>(c.row)] << ','
        << sim.col_tags[static_cast<std::size_t>(c.col)] << ','
        << format_double(c.value) << '\n';
}

}  // namespace tagweave
