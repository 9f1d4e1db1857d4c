#pragma once

// Text-derived linear classifier: class prompts are embedded by a sentence
// encoder (outside this library) and the unit-normalized embeddings U act as
// the weights of a cosine classifier over mapped features.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "textunlock/error.hpp"
#include "textunlock/io.hpp"
#include "textunlock/mapper.hpp"
#include "textunlock/matrix.hpp"

namespace textunlock {

struct ClassHead {
  MatrixF U;  // K x m, unit-norm rows
  std::string prompt_template;
  std::vector<std::string> class_names;
  std::vector<std::string> warnings;

  std::size_t num_classes() const { return U.rows(); }
  std::size_t dim() const { return U.cols(); }
};

inline ClassHead build_class_head(const MatrixF& class_embeddings, std::vector<std::string> names,
                                  std::string prompt_template) {
  require(class_embeddings.rows() == names.size(), ErrorKind::dim_mismatch,
          "class head: " + std::to_string(class_embeddings.rows()) + " embeddings for " +
              std::to_string(names.size()) + " class names");
  require(class_embeddings.all_finite(), ErrorKind::non_finite, "class head: non-finite embedding");
  auto normed = l2_normalize_rows(class_embeddings);
  for (std::size_t i = 0; i < normed.degenerate.size(); ++i)
    require(!normed.degenerate[i], ErrorKind::invalid_argument,
            "class head: embedding for '" + names[i] + "' has zero norm");

  ClassHead head{std::move(normed.rows), std::move(prompt_template), std::move(names), {}};
  for (std::size_t i = 0; i < head.U.rows(); ++i)
    for (std::size_t j = i + 1; j < head.U.rows(); ++j)
      if (std::equal(head.U.row(i).begin(), head.U.row(i).end(), head.U.row(j).begin()))
        head.warnings.push_back("classes '" + head.class_names[i] + "' and '" + head.class_names[j] +
                                "' have identical embeddings and cannot be distinguished");
  return head;
}

inline std::vector<std::string> render_prompts(const std::vector<std::string>& names,
                                               const std::string& prompt_template) {
  io::validate_template(prompt_template);
  const auto pos = prompt_template.find("{}");
  std::vector<std::string> out;
  out.reserve(names.size());
  for (std::size_t i = 0; i < names.size(); ++i) {
    require(!names[i].empty(), ErrorKind::invalid_argument,
            "render_prompts: class " + std::to_string(i) + " has an empty name");
    out.push_back(prompt_template.substr(0, pos) + names[i] + prompt_template.substr(pos + 2));
  }
  return out;
}

/// Cosine logits S = f~ U^T for unit-normalized mapped features.
inline MatrixF score(const MatrixF& mapped_feats, const ClassHead& head) {
  require(mapped_feats.cols() == head.dim(), ErrorKind::dim_mismatch,
          "score: mapped features have dim " + std::to_string(mapped_feats.cols()) +
              ", head expects " + std::to_string(head.dim()));
  return matmul_bt(mapped_feats, head.U);
}

/// normalize(mapper(features)), the representation both the class head and
/// the concept bottleneck consume.
inline MatrixF map_features(const MapperParamsF& mapper, const MatrixF& features) {
  return l2_normalize_rows(forward_eval(mapper, features)).rows;
}

struct EvalResult {
  double top1 = 0.0;
  std::size_t n_samples = 0;
  std::optional<double> delta_vs_original;  // percentage points
  std::vector<double> per_class;            // NaN for classes with no samples
};

/// Fraction of rows whose argmax (lowest index on ties) equals the label.
inline EvalResult top1_accuracy(const MatrixF& logits, const io::LabelVector& labels) {
  require(logits.rows() == labels.size(), ErrorKind::dim_mismatch,
          "top1: " + std::to_string(logits.rows()) + " logit rows vs " + std::to_string(labels.size()) +
              " labels");
  const std::size_t k = logits.cols();
  std::vector<std::size_t> correct(k, 0), count(k, 0);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    require(labels[i] < k, ErrorKind::invalid_argument, "top1: label out of range");
    const bool ok = argmax(logits.row(i)) == labels[i];
    hits += ok;
    correct[labels[i]] += ok;
    ++count[labels[i]];
  }
  EvalResult r;
  r.n_samples = labels.size();
  r.top1 = labels.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(labels.size());
  r.per_class.resize(k);
  for (std::size_t c = 0; c < k; ++c)
    r.per_class[c] = count[c] ? static_cast<double>(correct[c]) / static_cast<double>(count[c])
                              : std::numeric_limits<double>::quiet_NaN();
  return r;
}

/// Fraction of rows with the same argmax in both logit matrices.
inline double argmax_agreement(const MatrixF& a, const MatrixF& b) {
  require(a.rows() == b.rows(), ErrorKind::dim_mismatch, "agreement: row count mismatch");
  if (a.rows() == 0) return 0.0;
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.rows(); ++i) same += argmax(a.row(i)) == argmax(b.row(i));
  return static_cast<double>(same) / static_cast<double>(a.rows());
}

struct HeadComparison {
  std::optional<EvalResult> transformed;  // absent in label-free mode
  std::optional<EvalResult> original;
  std::optional<double> delta;  // transformed - original, percentage points
  double agreement = 0.0;       // argmax agreement between the two heads
  std::size_t n_samples = 0;
};

/// Evaluates the text head against the original linear head on the same
/// features. Without labels only the label-free agreement is reported.
inline HeadComparison compare_heads(const MatrixF& features, const MapperParamsF& mapper,
                                    const ClassHead& head, const MatrixF& original_w,
                                    const std::optional<io::LabelVector>& labels) {
  require(original_w.cols() == head.num_classes(), ErrorKind::dim_mismatch,
          "compare_heads: original head has " + std::to_string(original_w.cols()) +
              " classes, text head has " + std::to_string(head.num_classes()));
  const auto transformed_logits = score(map_features(mapper, features), head);
  const auto original_logits = matmul(features, original_w);

  HeadComparison out;
  out.n_samples = features.rows();
  out.agreement = argmax_agreement(transformed_logits, original_logits);
  if (labels) {
    out.transformed = top1_accuracy(transformed_logits, *labels);
    out.original = top1_accuracy(original_logits, *labels);
    out.delta = 100.0 * (out.transformed->top1 - out.original->top1);
    out.transformed->delta_vs_original = out.delta;
  }
  return out;
}

struct TemplateScore {
  std::string prompt_template;
  std::optional<double> top1;  // with labels
  double agreement = 0.0;      // with the original head
};

/// Prompt-robustness harness: one class head per template (each built from
/// its own exported embeddings), sorted best first.
inline std::vector<TemplateScore> compare_templates(const MatrixF& features, const MapperParamsF& mapper,
                                                    const std::vector<ClassHead>& heads,
                                                    const MatrixF& original_w,
                                                    const std::optional<io::LabelVector>& labels) {
  const auto mapped = map_features(mapper, features);
  const auto original_logits = matmul(features, original_w);
  std::vector<TemplateScore> out;
  for (const auto& head : heads) {
    const auto logits = score(mapped, head);
    TemplateScore s{head.prompt_template, std::nullopt, argmax_agreement(logits, original_logits)};
    if (labels) s.top1 = top1_accuracy(logits, *labels).top1;
    out.push_back(std::move(s));
  }
  std::stable_sort(out.begin(), out.end(), [](const TemplateScore& a, const TemplateScore& b) {
    const double ka = a.top1.value_or(a.agreement), kb = b.top1.value_or(b.agreement);
    return ka > kb;
  });
  return out;
}

}  // namespace textunlock
