#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <vector>

#include "tagweave/classifier.hpp"
#include "tagweave/common.hpp"
#include "tagweave/dataset.hpp"
#include "tagweave/embeddings.hpp"
#include "tagweave/evaluation.hpp"
#include "tagweave/sampling.hpp"
#include "tagweave/synthgen.hpp"

namespace tagweave {

// End-to-end settings for one split/sample/train/predict pass. Stage seeds
// are derived from the master seed, so one value pins the whole run.
struct PipelineConfig {
  std::array<double, 3> fractions{0.70, 0.10, 0.20};
  std::int64_t balance_cap = 150;
  TrainingConfig training;
  EvalOptions eval;
  std::uint64_t seed = 0;

  PipelineConfig() {
    training.hidden = 128;
    training.batch_size = 64;
    training.max_epochs = 30;
    training.patience = 3;
  }
};

struct ClassifierStage {
  DatasetSplit split;
  AnnotationSet test_annotations;
  MonolabelAssignment train_set;  // sampled and balanced
  MonolabelAssignment valid_set;  // sampled only
  ClassifierModel model;
  Eigen::MatrixXd posteriors;  // P over the test rows, in test row order
};

// Split, monolabel-sample, balance, train, and score the test partition.
inline ClassifierStage run_classifier_stage(const AnnotationSet& annotations,
                                            const Eigen::MatrixXd& features,
                                            double sigma_excerpt,
                                            const PipelineConfig& cfg) {
  if (features.rows() != annotations.n_tracks())
    fail(errc::shape, "feature rows do not match annotation rows");

  ClassifierStage stage;
  stage.split = artist_split(annotations, cfg.fractions, mix_seed(cfg.seed, 101));

  const AnnotationSet train_ann = subset(annotations, stage.split.train);
  const AnnotationSet valid_ann = subset(annotations, stage.split.valid);
  stage.test_annotations = subset(annotations, stage.split.test);

  const auto train_pop = global_popularity(train_ann);
  const auto valid_pop = global_popularity(valid_ann);
  const MonolabelAssignment sampled =
      sample_monolabel(train_ann, train_pop, mix_seed(cfg.seed, 102));
  stage.train_set = balance(sampled, cfg.balance_cap, mix_seed(cfg.seed, 103));
  stage.valid_set = sample_monolabel(valid_ann, valid_pop, mix_seed(cfg.seed, 104));

  const Eigen::MatrixXd x_train =
      assemble_features(features, annotations, stage.train_set.entries,
                        sigma_excerpt, mix_seed(cfg.seed, 105));
  const Eigen::MatrixXd x_valid =
      assemble_features(features, annotations, stage.valid_set.entries,
                        sigma_excerpt, mix_seed(cfg.seed, 105));

  TrainingConfig training = cfg.training;
  training.seed = mix_seed(cfg.seed, 106);
  stage.model = train(x_train, entry_labels(stage.train_set.entries), x_valid,
                      entry_labels(stage.valid_set.entries),
                      annotations.n_tags(), training);

  Eigen::MatrixXd x_test(static_cast<Eigen::Index>(stage.split.test.size()),
                         features.cols());
  for (std::size_t i = 0; i < stage.split.test.size(); ++i)
    x_test.row(static_cast<Eigen::Index>(i)) = features.row(stage.split.test[i]);
  stage.posteriors = stage.model.predict_proba(x_test);
  return stage;
}

// The four embeddings, built from a finished stage.
inline TagEmbedding stage_embedding(const ClassifierStage& stage,
                                    const TagSystem& tags, EmbeddingKind kind,
                                    WarningList* warnings = nullptr) {
  switch (kind) {
    case EmbeddingKind::weights:
      return embed_weights(stage.model, tags);
    case EmbeddingKind::columns:
      return embed_columns(stage.posteriors, tags);
    case EmbeddingKind::mean:
      return embed_mean(stage.posteriors, stage.test_annotations, warnings);
    case EmbeddingKind::dist:
      return embed_dist(stage.test_annotations);
  }
  fail(errc::internal, "unknown embedding kind");
}

}  // namespace tagweave
