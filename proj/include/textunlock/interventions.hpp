#pragma once

// Concept interventions on the bottleneck (remove / keep-and-downscale) and
// ablations of the mapper input and weights, each reported as accuracy
// before and after.

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "textunlock/cbm.hpp"
#include "textunlock/concept_filter.hpp"
#include "textunlock/error.hpp"
#include "textunlock/io.hpp"
#include "textunlock/mapper.hpp"
#include "textunlock/random.hpp"
#include "textunlock/zeroshot_head.hpp"

namespace textunlock {

enum class InterventionMode { remove, keep };

constexpr std::string_view to_string(InterventionMode m) {
  return m == InterventionMode::remove ? "remove" : "keep";
}

struct InterventionSpec {
  InterventionMode mode = InterventionMode::remove;
  double keep_scale = 0.1;
  /// When true, row i uses per_class[label_i]; otherwise every row uses
  /// `global`.
  bool per_class = false;
  std::vector<std::size_t> global;
  std::vector<std::vector<std::size_t>> per_class_sets;
};

inline void validate_spec(const InterventionSpec& spec, std::size_t num_concepts) {
  require(spec.keep_scale >= 0.0 && spec.keep_scale <= 1.0, ErrorKind::invalid_argument,
          "intervention: keep_scale must be in [0, 1]");
  auto check = [&](const std::vector<std::size_t>& s) {
    for (auto i : s)
      require(i < num_concepts, ErrorKind::invalid_argument,
              "intervention: concept index " + std::to_string(i) + " out of range (Z = " +
                  std::to_string(num_concepts) + ")");
  };
  check(spec.global);
  for (const auto& s : spec.per_class_sets) check(s);
}

namespace detail {

inline void remove_row(std::span<float> row, const std::vector<std::size_t>& idx) {
  for (auto i : idx) row[i] = 0.0f;
}

inline void keep_row(std::span<float> row, const std::vector<std::size_t>& idx, double scale,
                     std::vector<char>& marks) {
  std::fill(marks.begin(), marks.end(), 0);
  for (auto i : idx) marks[i] = 1;
  for (std::size_t j = 0; j < row.size(); ++j)
    if (!marks[j]) row[j] = static_cast<float>(row[j] * scale);
}

}  // namespace detail

/// Zeroes the listed concept columns; everything else is untouched.
inline MatrixF intervene_remove(const MatrixF& activations, const std::vector<std::size_t>& indices) {
  InterventionSpec spec;
  spec.global = indices;
  validate_spec(spec, activations.cols());
  MatrixF out = activations;
  for (std::size_t i = 0; i < out.rows(); ++i) detail::remove_row(out.row(i), indices);
  return out;
}

/// Leaves the listed concept columns alone and multiplies the rest by scale.
inline MatrixF intervene_keep(const MatrixF& activations, const std::vector<std::size_t>& indices,
                              double keep_scale) {
  InterventionSpec spec;
  spec.mode = InterventionMode::keep;
  spec.keep_scale = keep_scale;
  spec.global = indices;
  validate_spec(spec, activations.cols());
  MatrixF out = activations;
  std::vector<char> marks(out.cols());
  for (std::size_t i = 0; i < out.rows(); ++i) detail::keep_row(out.row(i), indices, keep_scale, marks);
  return out;
}

/// Applies a spec; per-class specs pick each row's set by its label.
inline MatrixF apply_intervention(const MatrixF& activations, const InterventionSpec& spec,
                                  const io::LabelVector* labels = nullptr) {
  validate_spec(spec, activations.cols());
  if (!spec.per_class) {
    return spec.mode == InterventionMode::remove ? intervene_remove(activations, spec.global)
                                                 : intervene_keep(activations, spec.global, spec.keep_scale);
  }
  require(labels != nullptr && labels->size() == activations.rows(), ErrorKind::invalid_argument,
          "intervention: per-class mode needs one label per row");
  static const std::vector<std::size_t> kEmpty;
  MatrixF out = activations;
  std::vector<char> marks(out.cols());
  for (std::size_t i = 0; i < out.rows(); ++i) {
    const auto y = (*labels)[i];
    const auto& set = y < spec.per_class_sets.size() ? spec.per_class_sets[y] : kEmpty;
    if (spec.mode == InterventionMode::remove) {
      detail::remove_row(out.row(i), set);
    } else {
      detail::keep_row(out.row(i), set, spec.keep_scale, marks);
    }
  }
  return out;
}

struct InterventionResult {
  double accuracy_before = 0.0;
  double accuracy_after = 0.0;
  double delta = 0.0;  // percentage points
  InterventionMode mode = InterventionMode::remove;
  std::size_t n_samples = 0;
};

/// CBM accuracy before and after intervening on the given activations; the
/// logits are recomputed through the same W_con both times.
inline InterventionResult run_intervention_on_activations(const MatrixF& activations,
                                                          const ConceptClassifier& classifier,
                                                          const io::LabelVector& labels,
                                                          const InterventionSpec& spec) {
  const auto before = top1_accuracy(logits_from_activations(activations, classifier), labels);
  const auto modified = apply_intervention(activations, spec, &labels);
  const auto after = top1_accuracy(logits_from_activations(modified, classifier), labels);
  return {before.top1, after.top1, 100.0 * (after.top1 - before.top1), spec.mode, labels.size()};
}

inline InterventionResult run_intervention_eval(const MatrixF& features, const MapperParamsF& mapper,
                                                const ConceptSet& concepts, const ConceptClassifier& classifier,
                                                const io::LabelVector& labels, const InterventionSpec& spec) {
  const auto activations = concept_activations(map_features(mapper, features), concepts);
  return run_intervention_on_activations(activations, classifier, labels, spec);
}

/// Reads an intervention file:
///   {"mode": "remove"|"keep", "keep_scale": 0.1, "scope": "per_class"|"global",
///    "concepts": {"<class or group>": ["concept", ...], ...}}
/// Per-class scope keys must be class names; global scope takes the union of
/// all lists. Unknown concept names are collected and reported together.
inline InterventionSpec parse_intervention_spec(const nlohmann::json& j,
                                                const std::vector<std::string>& concept_names,
                                                const std::vector<std::string>& class_names) {
  InterventionSpec spec;
  std::vector<std::pair<std::string, std::vector<std::string>>> groups;
  std::string scope;
  try {
    const auto mode = j.value("mode", std::string("remove"));
    require(mode == "remove" || mode == "keep", ErrorKind::invalid_argument,
            "intervention spec: mode must be \"remove\" or \"keep\"");
    spec.mode = mode == "remove" ? InterventionMode::remove : InterventionMode::keep;
    spec.keep_scale = j.value("keep_scale", 0.1);
    scope = j.value("scope", std::string("global"));
    require(scope == "global" || scope == "per_class", ErrorKind::invalid_argument,
            "intervention spec: scope must be \"global\" or \"per_class\"");
    for (const auto& [key, list] : j.at("concepts").items())
      groups.emplace_back(key, list.get<std::vector<std::string>>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::invalid_argument, std::string("intervention spec: ") + e.what());
  }

  std::map<std::string, std::size_t> concept_index, class_index;
  for (std::size_t i = 0; i < concept_names.size(); ++i) concept_index.emplace(normalize_term(concept_names[i]), i);
  for (std::size_t i = 0; i < class_names.size(); ++i) class_index.emplace(normalize_term(class_names[i]), i);

  std::vector<std::string> unresolved;
  auto resolve = [&](const std::vector<std::string>& names) {
    std::vector<std::size_t> out;
    for (const auto& n : names) {
      auto it = concept_index.find(normalize_term(n));
      if (it == concept_index.end()) {
        unresolved.push_back(n);
      } else {
        out.push_back(it->second);
      }
    }
    return out;
  };

  spec.per_class = scope == "per_class";
  if (spec.per_class) {
    spec.per_class_sets.resize(class_names.size());
    for (const auto& [cls, names] : groups) {
      auto it = class_index.find(normalize_term(cls));
      require(it != class_index.end(), ErrorKind::invalid_argument,
              "intervention spec: unknown class '" + cls + "'");
      auto idx = resolve(names);
      auto& dst = spec.per_class_sets[it->second];
      dst.insert(dst.end(), idx.begin(), idx.end());
    }
  } else {
    std::set<std::size_t> all;
    for (const auto& [group, names] : groups)
      for (auto i : resolve(names)) all.insert(i);
    spec.global.assign(all.begin(), all.end());
  }
  if (!unresolved.empty()) {
    std::string msg = "intervention spec: unknown concept name(s):";
    for (const auto& u : unresolved) msg += " '" + u + "'";
    throw Error(ErrorKind::unknown_concept, msg);
  }
  validate_spec(spec, concept_names.size());
  return spec;
}

// ---------------------------------------------------------------------------
// Ablations

enum class AblationMode { mean_feature, random_feature, shuffled_feature, random_weights };

constexpr std::string_view to_string(AblationMode m) {
  switch (m) {
    case AblationMode::mean_feature: return "mean_feature";
    case AblationMode::random_feature: return "random_feature";
    case AblationMode::shuffled_feature: return "shuffled_feature";
    case AblationMode::random_weights: return "random_weights";
  }
  return "unknown";
}

inline AblationMode parse_ablation_mode(std::string_view s) {
  for (auto m : {AblationMode::mean_feature, AblationMode::random_feature, AblationMode::shuffled_feature,
                 AblationMode::random_weights})
    if (s == to_string(m)) return m;
  throw Error(ErrorKind::invalid_argument, "unknown ablation mode '" + std::string(s) + "'");
}

struct FeatureStats {
  std::vector<double> mean;
  std::vector<double> std;  // population standard deviation
};

inline FeatureStats feature_statistics(const MatrixF& features) {
  const std::size_t n = features.cols();
  FeatureStats s{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  if (features.rows() == 0) return s;
  for (std::size_t i = 0; i < features.rows(); ++i)
    for (std::size_t j = 0; j < n; ++j) s.mean[j] += features(i, j);
  for (auto& v : s.mean) v /= static_cast<double>(features.rows());
  for (std::size_t i = 0; i < features.rows(); ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double d = features(i, j) - s.mean[j];
      s.std[j] += d * d;
    }
  for (auto& v : s.std) v = std::sqrt(v / static_cast<double>(features.rows()));
  return s;
}

struct AblationSpec {
  AblationMode mode = AblationMode::mean_feature;
  std::uint64_t seed = 0;
  std::optional<FeatureStats> stats;  // required for mean / random modes
};

inline MatrixF ablate_features(const MatrixF& features, const AblationSpec& spec) {
  const std::size_t n = features.cols();
  auto need_stats = [&](bool need_std) {
    require(spec.stats.has_value() && spec.stats->mean.size() == n && (!need_std || spec.stats->std.size() == n),
            ErrorKind::invalid_argument,
            std::string("ablation: ") + std::string(to_string(spec.mode)) + " needs statistics of length n");
  };
  MatrixF out(features.rows(), n);
  switch (spec.mode) {
    case AblationMode::mean_feature:
      need_stats(false);
      for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < n; ++j) out(i, j) = static_cast<float>(spec.stats->mean[j]);
      return out;
    case AblationMode::random_feature: {
      need_stats(true);
      Rng rng(spec.seed);
      for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < n; ++j)
          out(i, j) = static_cast<float>(spec.stats->mean[j] + spec.stats->std[j] * rng.normal());
      return out;
    }
    case AblationMode::shuffled_feature: {
      Rng rng(spec.seed);
      const auto perm = rng.permutation(features.rows());
      return gather_rows(features, perm);
    }
    case AblationMode::random_weights:
      return features;
  }
  return out;
}

/// Fresh initialization with the same hyperparameters.
template <typename T>
MapperParams<T> randomize_mapper(const MapperParams<T>& params, std::uint64_t seed) {
  return init_mapper<T>(params.hyper, seed);
}

struct AblationResult {
  AblationMode mode = AblationMode::mean_feature;
  double agreement_before = 0.0;  // text head vs original head, unablated
  double agreement_after = 0.0;   // ablated text head vs original head on the real features
  double agreement_with_unablated = 0.0;
  std::optional<double> top1_before;
  std::optional<double> top1_after;
  std::size_t n_samples = 0;
};

/// Ablates the mapper input or weights and measures how far the text head
/// drifts from the original classifier. Statistics for the mean / random
/// modes are taken over `features` when the spec carries none.
inline AblationResult run_ablation(const MatrixF& features, const MapperParamsF& mapper, const ClassHead& head,
                                   const MatrixF& original_w, const std::optional<io::LabelVector>& labels,
                                   AblationSpec spec) {
  if (!spec.stats && (spec.mode == AblationMode::mean_feature || spec.mode == AblationMode::random_feature))
    spec.stats = feature_statistics(features);
  const auto original_logits = matmul(features, original_w);
  const auto clean_logits = score(map_features(mapper, features), head);

  const auto ablated_mapper =
      spec.mode == AblationMode::random_weights ? randomize_mapper(mapper, spec.seed) : mapper;
  const auto ablated_logits = score(map_features(ablated_mapper, ablate_features(features, spec)), head);

  AblationResult r;
  r.mode = spec.mode;
  r.n_samples = features.rows();
  r.agreement_before = argmax_agreement(clean_logits, original_logits);
  r.agreement_after = argmax_agreement(ablated_logits, original_logits);
  r.agreement_with_unablated = argmax_agreement(ablated_logits, clean_logits);
  if (labels) {
    r.top1_before = top1_accuracy(clean_logits, *labels).top1;
    r.top1_after = top1_accuracy(ablated_logits, *labels).top1;
  }
  return r;
}

}  // namespace textunlock
