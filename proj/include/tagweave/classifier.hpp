#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "tagweave/common.hpp"
#include "tagweave/rng.hpp"

namespace tagweave {

struct TrainingConfig {
  index_t hidden = 512;
  index_t batch_size = 64;
  int max_epochs = 100;
  int patience = 5;  // epochs without validation improvement before stopping
  double rho = 0.95;
  double epsilon = 1e-6;
  std::uint64_t seed = 0;

  void validate() const {
    if (hidden < 1) fail(errc::config, "hidden size must be positive");
    if (batch_size < 1) fail(errc::config, "batch size must be positive");
    if (max_epochs < 1) fail(errc::config, "max epochs must be positive");
    if (patience < 0 || patience > max_epochs)
      fail(errc::config, "patience must lie in [0, max_epochs]");
    if (!(rho > 0.0 && rho < 1.0)) fail(errc::config, "rho must lie in (0, 1)");
    if (!(epsilon > 0.0)) fail(errc::config, "epsilon must be positive");
  }
};

struct EpochStats {
  double train_loss = 0.0;
  double valid_loss = 0.0;
};

struct TrainingLog {
  std::vector<EpochStats> epochs;
  int best_epoch = -1;
  WarningList warnings;
};

namespace detail {

inline Eigen::MatrixXd softmax_rows(Eigen::MatrixXd logits) {
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    logits.row(i) = (logits.row(i).array() - m).exp();
    logits.row(i) /= logits.row(i).sum();
  }
  return logits;
}

}  // namespace detail

// One rectifier hidden layer, softmax output. The output weight matrix
// (hidden x n_classes) is the quantity the embeddings module consumes.
class ClassifierModel {
 public:
  Eigen::MatrixXd hidden_weights;  // input_dim x hidden
  Eigen::VectorXd hidden_bias;     // hidden
  Eigen::MatrixXd output_weights;  // hidden x n_classes
  Eigen::VectorXd output_bias;     // n_classes
  TrainingLog log;

  index_t input_dim() const { return hidden_weights.rows(); }
  index_t hidden_dim() const { return hidden_weights.cols(); }
  index_t n_classes() const { return output_weights.cols(); }

  Eigen::MatrixXd logits(const Eigen::MatrixXd& x) const {
    if (x.cols() != input_dim())
      fail(errc::shape, "feature dim " + std::to_string(x.cols()) +
                            " does not match model input dim " +
                            std::to_string(input_dim()));
    const Eigen::MatrixXd h =
        ((x * hidden_weights).rowwise() + hidden_bias.transpose()).cwiseMax(0.0);
    return (h * output_weights).rowwise() + output_bias.transpose();
  }

  // Softmax posteriors, one simplex row per input row.
  Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& x) const {
    return detail::softmax_rows(logits(x));
  }

  const Eigen::MatrixXd& last_layer_weights() const { return output_weights; }
};

// Anything exposing simplex posteriors and a last-layer weight matrix can
// feed the embeddings module.
template <typename C>
concept ProbabilisticClassifier = requires(const C& c, const Eigen::MatrixXd& x) {
  { c.predict_proba(x) } -> std::convertible_to<Eigen::MatrixXd>;
  { c.last_layer_weights() } -> std::convertible_to<Eigen::MatrixXd>;
};

inline Eigen::MatrixXd predict_proba(const ClassifierModel& model,
                                     const Eigen::MatrixXd& x) {
  return model.predict_proba(x);
}

inline std::vector<index_t> predict_labels(const ClassifierModel& model,
                                           const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd p = model.predict_proba(x);
  std::vector<index_t> labels(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    Eigen::Index best = 0;
    p.row(i).maxCoeff(&best);
    labels[static_cast<std::size_t>(i)] = best;
  }
  return labels;
}

// Adadelta accumulators for one tensor. Both running averages are convex
// combinations of squares, hence non-negative for the whole run.
struct AdadeltaState {
  Eigen::ArrayXXd avg_sq_grad;
  Eigen::ArrayXXd avg_sq_update;

  explicit AdadeltaState(Eigen::Index rows, Eigen::Index cols)
      : avg_sq_grad(Eigen::ArrayXXd::Zero(rows, cols)),
        avg_sq_update(Eigen::ArrayXXd::Zero(rows, cols)) {}
};

inline void adadelta_step(Eigen::Ref<Eigen::MatrixXd> param,
                          const Eigen::MatrixXd& grad, AdadeltaState& state,
                          double rho, double epsilon) {
  const Eigen::ArrayXXd g = grad.array();
  state.avg_sq_grad = rho * state.avg_sq_grad + (1.0 - rho) * g.square();
  const Eigen::ArrayXXd update =
      -((state.avg_sq_update + epsilon).sqrt() /
        (state.avg_sq_grad + epsilon).sqrt()) *
      g;
  state.avg_sq_update = rho * state.avg_sq_update + (1.0 - rho) * update.square();
  param.array() += update;
}

namespace detail {

struct Gradients {
  Eigen::MatrixXd hidden_weights;
  Eigen::VectorXd hidden_bias;
  Eigen::MatrixXd output_weights;
  Eigen::VectorXd output_bias;
};

// Mean cross-entropy of the softmax outputs, computed from logits via
// log-sum-exp.
inline double cross_entropy(const ClassifierModel& model, const Eigen::MatrixXd& x,
                            std::span<const index_t> y) {
  const Eigen::MatrixXd logits = model.logits(x);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
    loss += lse - logits(i, static_cast<Eigen::Index>(y[static_cast<std::size_t>(i)]));
  }
  return loss / static_cast<double>(logits.rows());
}

inline Gradients backward(const ClassifierModel& model, const Eigen::MatrixXd& x,
                          std::span<const index_t> y) {
  const Eigen::Index n = x.rows();
  const Eigen::MatrixXd z =
      (x * model.hidden_weights).rowwise() + model.hidden_bias.transpose();
  const Eigen::MatrixXd h = z.cwiseMax(0.0);
  Eigen::MatrixXd p = softmax_rows(
      ((h * model.output_weights).rowwise() + model.output_bias.transpose()).eval());

  for (Eigen::Index i = 0; i < n; ++i)
    p(i, static_cast<Eigen::Index>(y[static_cast<std::size_t>(i)])) -= 1.0;
  p /= static_cast<double>(n);

  Gradients g;
  g.output_weights = h.transpose() * p;
  g.output_bias = p.colwise().sum().transpose();
  Eigen::MatrixXd dh = p * model.output_weights.transpose();
  dh = (z.array() > 0.0).select(dh, 0.0);
  g.hidden_weights = x.transpose() * dh;
  g.hidden_bias = dh.colwise().sum().transpose();
  return g;
}

}  // namespace detail

// Minibatch Adadelta with early stopping on the validation loss. Returns the
// parameters of the best validation epoch; per-epoch losses are in the log.
inline ClassifierModel train(const Eigen::MatrixXd& train_features,
                             std::span<const index_t> train_labels,
                             const Eigen::MatrixXd& valid_features,
                             std::span<const index_t> valid_labels,
                             index_t n_classes, const TrainingConfig& config) {
  config.validate();
  if (n_classes < 2) fail(errc::param, "need at least 2 classes");
  if (train_features.rows() == 0 || valid_features.rows() == 0)
    fail(errc::empty_dataset, "training and validation sets must be non-empty");
  if (static_cast<index_t>(train_labels.size()) != train_features.rows() ||
      static_cast<index_t>(valid_labels.size()) != valid_features.rows())
    fail(errc::shape, "label count does not match feature rows");
  if (train_features.cols() != valid_features.cols())
    fail(errc::shape, "train and validation feature dims differ");
  for (const auto labels : {train_labels, valid_labels})
    for (index_t label : labels)
      if (label < 0 || label >= n_classes)
        fail(errc::param, "label out of range: " + std::to_string(label));

  const Eigen::Index d = train_features.cols();
  const Eigen::Index h = config.hidden;

  ClassifierModel model;
  Rng rng(config.seed);
  const auto glorot = [&rng](Eigen::MatrixXd& w, Eigen::Index rows, Eigen::Index cols) {
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    w.resize(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) w(i, j) = rng.uniform(-bound, bound);
  };
  glorot(model.hidden_weights, d, h);
  model.hidden_bias = Eigen::VectorXd::Zero(h);
  glorot(model.output_weights, h, n_classes);
  model.output_bias = Eigen::VectorXd::Zero(n_classes);

  {
    std::vector<std::int64_t> class_count(static_cast<std::size_t>(n_classes), 0);
    for (index_t label : train_labels) ++class_count[static_cast<std::size_t>(label)];
    for (index_t c = 0; c < n_classes; ++c)
      if (class_count[static_cast<std::size_t>(c)] == 0)
        warn(&model.log.warnings,
             "class " + std::to_string(c) + " has no training samples");
  }

  AdadeltaState s_w1(d, h), s_b1(h, 1), s_w2(h, n_classes), s_b2(n_classes, 1);

  ClassifierModel best = model;
  double best_valid = std::numeric_limits<double>::infinity();
  int epochs_since_best = 0;

  std::vector<index_t> order(static_cast<std::size_t>(train_features.rows()));
  std::iota(order.begin(), order.end(), index_t{0});

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
      const auto b = static_cast<Eigen::Index>(end - begin);
      Eigen::MatrixXd xb(b, d);
      std::vector<index_t> yb(static_cast<std::size_t>(b));
      for (Eigen::Index i = 0; i < b; ++i) {
        xb.row(i) = train_features.row(order[begin + static_cast<std::size_t>(i)]);
        yb[static_cast<std::size_t>(i)] =
            train_labels[static_cast<std::size_t>(order[begin + static_cast<std::size_t>(i)])];
      }
      loss_sum += detail::cross_entropy(model, xb, yb) * static_cast<double>(b);
      const detail::Gradients g = detail::backward(model, xb, yb);
      adadelta_step(model.hidden_weights, g.hidden_weights, s_w1, config.rho, config.epsilon);
      adadelta_step(model.hidden_bias, g.hidden_bias, s_b1, config.rho, config.epsilon);
      adadelta_step(model.output_weights, g.output_weights, s_w2, config.rho, config.epsilon);
      adadelta_step(model.output_bias, g.output_bias, s_b2, config.rho, config.epsilon);
    }
    const double train_loss = loss_sum / static_cast<double>(order.size());
    const double valid_loss = detail::cross_entropy(model, valid_features, valid_labels);
    if (!std::isfinite(train_loss) || !std::isfinite(valid_loss))
      fail(errc::divergence, "non-finite loss at epoch " + std::to_string(epoch));
    model.log.epochs.push_back(EpochStats{train_loss, valid_loss});

    if (valid_loss < best_valid) {
      best_valid = valid_loss;
      best.hidden_weights = model.hidden_weights;
      best.hidden_bias = model.hidden_bias;
      best.output_weights = model.output_weights;
      best.output_bias = model.output_bias;
      model.log.best_epoch = epoch;
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
    }
    if (epochs_since_best >= config.patience) break;
  }

  best.log = model.log;
  return best;
}

// Compares the analytic gradient against central finite differences on a
// small batch. Kept cheap by bounding the problem size.
inline double gradient_check(ClassifierModel model, const Eigen::MatrixXd& x,
                             std::span<const index_t> y, double step = 1e-4) {
  if (x.rows() > 8) fail(errc::param, "gradient_check batch must be <= 8 rows");
  if (model.input_dim() > 32 || model.hidden_dim() > 32 || model.n_classes() > 32)
    fail(errc::param, "gradient_check model dims must be <= 32");
  if (static_cast<index_t>(y.size()) != x.rows())
    fail(errc::shape, "label count does not match feature rows");

  const detail::Gradients analytic = detail::backward(model, x, y);

  double max_discrepancy = 0.0;
  const auto probe = [&](Eigen::MatrixXd& param, const Eigen::MatrixXd& grad) {
    for (Eigen::Index i = 0; i < param.rows(); ++i)
      for (Eigen::Index j = 0; j < param.cols(); ++j) {
        const double saved = param(i, j);
        param(i, j) = saved + step;
        const double up = detail::cross_entropy(model, x, y);
        param(i, j) = saved - step;
        const double down = detail::cross_entropy(model, x, y);
        param(i, j) = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double discrepancy =
            std::abs(grad(i, j) - numeric) / std::max(1.0, std::abs(numeric));
        max_discrepancy = std::max(max_discrepancy, discrepancy);
      }
  };
  const auto probe_vector = [&](Eigen::VectorXd& param, const Eigen::VectorXd& grad) {
    for (Eigen::Index i = 0; i < param.size(); ++i) {
      const double saved = param(i);
      param(i) = saved + step;
      const double up = detail::cross_entropy(model, x, y);
      param(i) = saved - step;
      const double down = detail::cross_entropy(model, x, y);
      param(i) = saved;
      const double numeric = (up - down) / (2.0 * step);
      max_discrepancy = std::max(max_discrepancy, std::abs(grad(i) - numeric) /
                                                      std::max(1.0, std::abs(numeric)));
    }
  };
  probe(model.hidden_weights, analytic.hidden_weights);
  probe(model.output_weights, analytic.output_weights);
  probe_vector(model.hidden_bias, analytic.hidden_bias);
  probe_vector(model.output_bias, analytic.output_bias);
  return max_discrepancy;
}

// TWML model file: magic, version byte, dims as u64, parameters as f64 in
// declaration order (hidden weights row-major, hidden bias, output weights
// row-major, output bias).
inline void save_model(const std::filesystem::path& path, const ClassifierModel& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(errc::io, "cannot open for writing: " + path.string());
  out.write("TWML", 4);
  const unsigned char version = 1;
  out.write(reinterpret_cast<const char*>(&version), 1);
  const auto write_u64 = [&out](std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(buf), 8);
  };
  write_u64(static_cast<std::uint64_t>(m.input_dim()));
  write_u64(static_cast<std::uint64_t>(m.hidden_dim()));
  write_u64(static_cast<std::uint64_t>(m.n_classes()));
  const auto write_matrix = [&out](const Eigen::MatrixXd& w) {
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        const double v = w(i, j);
        out.write(reinterpret_cast<const char*>(&v), sizeof(double));
      }
  };
  write_matrix(m.hidden_weights);
  write_matrix(m.hidden_bias);
  write_matrix(m.output_weights);
  write_matrix(m.output_bias);
  if (!out) fail(errc::io, "write failed: " + path.string());
}

inline ClassifierModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(errc::io, "cannot open: " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::string_view(magic, 4) != "TWML")
    fail(errc::parse, "not a TWML model file: " + path.string());
  unsigned char version = 0;
  in.read(reinterpret_cast<char*>(&version), 1);
  if (version != 1)
    fail(errc::parse, "unsupported TWML version " + std::to_string(version));
  const auto read_u64 = [&in]() {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
  };
  const auto d = static_cast<Eigen::Index>(read_u64());
  const auto h = static_cast<Eigen::Index>(read_u64());
  const auto c = static_cast<Eigen::Index>(read_u64());
  if (!in || d < 1 || h < 1 || c < 1)
    fail(errc::parse, "bad TWML header: " + path.string());
  ClassifierModel m;
  const auto read_matrix = [&in, &path](Eigen::MatrixXd& w, Eigen::Index rows,
                                        Eigen::Index cols) {
    w.resize(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) {
        double v = 0.0;
        in.read(reinterpret_cast<char*>(&v), sizeof(double));
        if (!in) fail(errc::parse, "truncated TWML payload: " + path.string());
        w(i, j) = v;
      }
  };
  read_matrix(m.hidden_weights, d, h);
  Eigen::MatrixXd b1, b2;
  read_matrix(b1, h, 1);
  m.hidden_bias = b1;
  read_matrix(m.output_weights, h, c);
  read_matrix(b2, c, 1);
  m.output_bias = b2;
  return m;
}

}  // namespace tagweave
