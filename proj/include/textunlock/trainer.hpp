#pragma once

// Distillation of a frozen linear classifier into the text-embedding space.
// Only the mapper is trained; features, head weights and class embeddings
// are read-only and no labels are consumed.

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "textunlock/error.hpp"
#include "textunlock/loss.hpp"
#include "textunlock/mapper.hpp"
#include "textunlock/matrix.hpp"
#include "textunlock/optim.hpp"
#include "textunlock/random.hpp"

namespace textunlock {

struct TrainConfig {
  std::size_t batch_size = 256;
  double base_lr = 1e-4;
  std::size_t epochs = 10;
  AdamConfig adam;
  std::uint64_t seed = 0;
  bool shuffle = true;
  /// Trailing fraction of the samples kept out of training for the report.
  double holdout_fraction = 0.1;
  std::size_t dim_out_factor = 2;
  double dropout_p = 0.5;
  std::size_t hidden_layers = 2;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct TrainReport {
  std::vector<double> epoch_loss;  // sample-weighted mean loss per epoch
  std::size_t steps = 0;
  std::size_t train_size = 0;
  std::size_t holdout_size = 0;
  std::optional<double> holdout_kl;         // mean KL(teacher || student)
  std::optional<double> holdout_agreement;  // argmax agreement with the teacher

  friend bool operator==(const TrainReport&, const TrainReport&) = default;
};

struct TrainResult {
  MapperParamsF params;
  TrainReport report;
};

/// Thrown when a batch loss turns non-finite; carries the parameters from
/// before the failing step.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(std::size_t step, MapperParamsF last_good)
      : Error(ErrorKind::diverged, "training diverged at step " + std::to_string(step)),
        step_(step),
        last_good_(std::move(last_good)) {}

  std::size_t step() const noexcept { return step_; }
  const MapperParamsF& last_good() const noexcept { return last_good_; }

 private:
  std::size_t step_;
  MapperParamsF last_good_;
};

/// softmax(features * head) in double precision. The head is frozen, so this
/// is computed once per run.
template <typename T>
MatrixD compute_teacher(const Matrix<T>& features, const Matrix<T>& head) {
  require(features.cols() == head.rows(), ErrorKind::dim_mismatch,
          "teacher: features have " + std::to_string(features.cols()) + " columns but head has " +
              std::to_string(head.rows()) + " rows");
  return softmax_rows(matmul(cast<double>(features), cast<double>(head)));
}

inline void validate_train_config(const TrainConfig& c) {
  require(c.batch_size >= 1, ErrorKind::invalid_argument, "train: batch_size must be >= 1");
  require(c.base_lr > 0.0, ErrorKind::invalid_argument, "train: base_lr must be > 0");
  require(c.holdout_fraction >= 0.0 && c.holdout_fraction < 1.0, ErrorKind::invalid_argument,
          "train: holdout_fraction must be in [0, 1)");
}

inline void require_unit_rows(const MatrixF& u, const char* what) {
  for (std::size_t i = 0; i < u.rows(); ++i) {
    double sq = 0.0;
    for (float v : u.row(i)) sq += static_cast<double>(v) * v;
    require(std::abs(std::sqrt(sq) - 1.0) <= 1e-5, ErrorKind::invalid_argument,
            std::string(what) + ": row " + std::to_string(i) + " is not unit-normalized");
  }
}

namespace detail {

/// Student logits: normalize(mapper(x)) * U^T.
inline MatrixD student_logits(const MapperParamsF& params, const MatrixF& feats, const MatrixD& u) {
  const auto mapped = forward_eval(cast<double>(params), cast<double>(feats));
  return matmul_bt(l2_normalize_rows(mapped).rows, u);
}

}  // namespace detail

/// Trains the mapper so that softmax(normalize(mapper(f)) U^T) matches the
/// teacher softmax(f W). The last `holdout_fraction` of the samples are
/// never trained on and are used for the report's KL and agreement.
inline TrainResult train_mapper(const TrainConfig& config, const MatrixF& features,
                                const MatrixF& head_w, const MatrixF& class_embeddings) {
  validate_train_config(config);
  require(class_embeddings.rows() == head_w.cols(), ErrorKind::dim_mismatch,
          "train: head has " + std::to_string(head_w.cols()) + " classes but class embeddings have " +
              std::to_string(class_embeddings.rows()) + " rows");
  require_unit_rows(class_embeddings, "train: class embeddings");

  const MatrixD teacher = compute_teacher(features, head_w);
  const MatrixD u = cast<double>(class_embeddings);

  MapperHyper hyper;
  hyper.n = features.cols();
  hyper.m = class_embeddings.cols();
  hyper.dim_out_factor = config.dim_out_factor;
  hyper.dropout_p = config.dropout_p;
  hyper.hidden_layers = config.hidden_layers;

  TrainResult result{init_mapper<float>(hyper, derive_seed(config.seed, SeedStream::init)), {}};
  auto& report = result.report;
  const std::size_t total = features.rows();
  report.holdout_size = static_cast<std::size_t>(std::floor(static_cast<double>(total) * config.holdout_fraction));
  report.train_size = total - report.holdout_size;
  if (config.epochs == 0) return result;
  require(report.train_size > 0, ErrorKind::invalid_argument, "train: no training samples");

  const std::size_t steps_per_epoch = (report.train_size + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = steps_per_epoch * config.epochs;
  const std::uint64_t dropout_root = derive_seed(config.seed, SeedStream::dropout);
  Rng shuffle_rng(derive_seed(config.seed, SeedStream::shuffle));
  AdamState state = AdamState::for_params(result.params);
  MapperParamsF last_good = result.params;

  std::vector<std::size_t> order(report.train_size);
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.shuffle) {
      order = shuffle_rng.permutation(report.train_size);
    } else {
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    }
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < report.train_size; begin += config.batch_size, ++step) {
      const std::size_t end = std::min(begin + config.batch_size, report.train_size);
      const std::span<const std::size_t> idx(order.data() + begin, end - begin);
      const auto x = cast<double>(gather_rows(features, idx));
      const auto target = gather_rows(teacher, idx);
      const auto params_d = cast<double>(result.params);

      auto fwd = forward(params_d, x, Mode::train, derive_seed(dropout_root, step));
      const auto normed = l2_normalize_rows(fwd.output);
      const auto logits = matmul_bt(normed.rows, u);
      const auto lg = soft_cross_entropy_with_grad(logits, target);
      if (!std::isfinite(lg.loss)) throw TrainingDiverged(step, last_good);

      const auto d_mapped = l2_normalize_backward(normed, matmul(lg.grad, u));
      const auto grads = backward(params_d, *fwd.trace, d_mapped);
      last_good = result.params;
      adam_step(result.params, grads, state, cosine_lr(step, total_steps, config.base_lr), config.adam);
      if (!result.params.all_finite()) throw TrainingDiverged(step, last_good);
      epoch_loss += lg.loss * static_cast<double>(idx.size());
    }
    report.epoch_loss.push_back(epoch_loss / static_cast<double>(report.train_size));
  }
  report.steps = step;

  if (report.holdout_size > 0) {
    const auto hold = slice_rows(features, report.train_size, total);
    const auto hold_teacher = slice_rows(teacher, report.train_size, total);
    const auto student = softmax_rows(detail::student_logits(result.params, hold, u));
    report.holdout_kl = kl_divergence(hold_teacher, student);
    const auto a = argmax_rows(hold_teacher);
    const auto b = argmax_rows(student);
    std::size_t same = 0;
    for (std::size_t i = 0; i < a.size(); ++i) same += a[i] == b[i];
    report.holdout_agreement = static_cast<double>(same) / static_cast<double>(a.size());
  }
  return result;
}

}  // namespace textunlock
