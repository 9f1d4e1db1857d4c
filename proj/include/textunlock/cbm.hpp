#pragma once

// Unsupervised concept bottleneck built on top of a mapped feature space.
//
//   activations  A     = f~ C^T          (N x Z)   concept discovery
//   concept head W_con = C U^T           (Z x K)   text-to-text, no training
//   logits       S_cn  = A W_con = f~ (C^T C) U^T
//
// Production scoring always goes through A (the bottleneck). The C^T C
// route exists only as a diagnostic.

#include <algorithm>
#include <cctype>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "textunlock/error.hpp"
#include "textunlock/mapper.hpp"
#include "textunlock/matrix.hpp"
#include "textunlock/zeroshot_head.hpp"

namespace textunlock {

inline std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

struct ConceptSet {
  std::vector<std::string> names;
  MatrixF C;  // Z x m, unit-norm rows
  std::string provenance;

  std::size_t size() const { return names.size(); }
  std::size_t dim() const { return C.cols(); }
};

/// Normalizes the embedding rows and checks that names are unique
/// case-insensitively.
inline ConceptSet make_concept_set(std::vector<std::string> names, const MatrixF& embeddings,
                                   std::string provenance = {}) {
  require(names.size() == embeddings.rows(), ErrorKind::dim_mismatch,
          "concept set: " + std::to_string(names.size()) + " names for " +
              std::to_string(embeddings.rows()) + " embedding rows");
  std::set<std::string> seen;
  for (const auto& n : names)
    require(seen.insert(to_lower(n)).second, ErrorKind::invalid_argument,
            "concept set: duplicate concept '" + n + "'");
  auto normed = l2_normalize_rows(embeddings);
  for (std::size_t i = 0; i < names.size(); ++i)
    require(!normed.degenerate[i], ErrorKind::invalid_argument,
            "concept set: embedding for '" + names[i] + "' has zero norm");
  return {std::move(names), std::move(normed.rows), std::move(provenance)};
}

struct ConceptClassifier {
  MatrixF W_con;  // Z x K, W_con[i][k] = <C_i, U_k>
  std::vector<std::string> concept_names;
  std::vector<std::string> class_names;

  std::size_t num_concepts() const { return W_con.rows(); }
  std::size_t num_classes() const { return W_con.cols(); }
};

inline ConceptClassifier build_concept_classifier(const ConceptSet& concepts, const ClassHead& head) {
  require(concepts.dim() == head.dim(), ErrorKind::dim_mismatch,
          "concept classifier: concepts have dim " + std::to_string(concepts.dim()) +
              ", class head has dim " + std::to_string(head.dim()));
  return {matmul_bt(concepts.C, head.U), concepts.names, head.class_names};
}

inline MatrixF concept_activations(const MatrixF& mapped_feats, const ConceptSet& concepts) {
  require(mapped_feats.cols() == concepts.dim(), ErrorKind::dim_mismatch,
          "concept activations: mapped features have dim " + std::to_string(mapped_feats.cols()) +
              ", concepts have dim " + std::to_string(concepts.dim()));
  return matmul_bt(mapped_feats, concepts.C);
}

/// S_cn from precomputed (possibly intervened) activations.
inline MatrixF logits_from_activations(const MatrixF& activations, const ConceptClassifier& classifier) {
  require(activations.cols() == classifier.num_concepts(), ErrorKind::dim_mismatch,
          "cbm: activations have " + std::to_string(activations.cols()) + " concepts, classifier has " +
              std::to_string(classifier.num_concepts()));
  return matmul(activations, classifier.W_con);
}

inline constexpr std::size_t kDefaultConceptBlock = 4096;

/// S_cn = (f~ C^T)(C U^T), accumulated over blocks of concepts so only an
/// N x block slice of activations is alive at once.
inline MatrixF cbm_logits(const MatrixF& mapped_feats, const ConceptSet& concepts,
                          const ConceptClassifier& classifier,
                          std::size_t block_size = kDefaultConceptBlock) {
  require(mapped_feats.cols() == concepts.dim(), ErrorKind::dim_mismatch,
          "cbm: mapped features have dim " + std::to_string(mapped_feats.cols()) + ", concepts have dim " +
              std::to_string(concepts.dim()));
  require(classifier.num_concepts() == concepts.size(), ErrorKind::dim_mismatch,
          "cbm: classifier was built for a different concept set");
  require(block_size >= 1, ErrorKind::invalid_argument, "cbm: block size must be >= 1");
  const std::size_t n = mapped_feats.rows(), k = classifier.num_classes(), z = concepts.size();
  std::vector<double> acc(n * k, 0.0);
  for (std::size_t z0 = 0; z0 < z; z0 += block_size) {
    const std::size_t z1 = std::min(z, z0 + block_size);
    const auto act = matmul_bt(mapped_feats, slice_rows(concepts.C, z0, z1));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < z1 - z0; ++c) {
        const double a = act(i, c);
        auto w = classifier.W_con.row(z0 + c);
        for (std::size_t j = 0; j < k; ++j) acc[i * k + j] += a * w[j];
      }
  }
  MatrixF out(n, k);
  for (std::size_t i = 0; i < acc.size(); ++i) out.flat()[i] = static_cast<float>(acc[i]);
  return out;
}

inline MatrixF cbm_logits(const MatrixF& mapped_feats, const ConceptSet& concepts, const ClassHead& head,
                          std::size_t block_size = kDefaultConceptBlock) {
  return cbm_logits(mapped_feats, concepts, build_concept_classifier(concepts, head), block_size);
}

/// C^T C, filled from the upper triangle so it is exactly symmetric.
inline MatrixD gram(const ConceptSet& concepts) {
  const auto& c = concepts.C;
  const std::size_t m = c.cols();
  MatrixD g(m, m);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a; b < m; ++b) {
      double s = 0.0;
      for (std::size_t r = 0; r < c.rows(); ++r) s += static_cast<double>(c(r, a)) * c(r, b);
      g(a, b) = s;
      g(b, a) = s;
    }
  return g;
}

/// Diagnostic route f~ (C^T C) U^T; must agree with cbm_logits.
inline MatrixF cbm_logits_gram_path(const MatrixF& mapped_feats, const ConceptSet& concepts,
                                    const ClassHead& head) {
  require(mapped_feats.cols() == concepts.dim() && head.dim() == concepts.dim(), ErrorKind::dim_mismatch,
          "cbm gram path: dimension mismatch");
  const auto projected = matmul(cast<double>(mapped_feats), gram(concepts));
  return cast<float>(matmul_bt(projected, cast<double>(head.U)));
}

// ---------------------------------------------------------------------------
// Explanations

struct AttributionEntry {
  std::size_t concept_index = 0;
  std::string name;
  double activation = 0.0;
  double weight = 0.0;
  double importance = 0.0;  // activation * weight
};

struct ConceptAttribution {
  std::size_t class_index = 0;
  double logit = 0.0;  // sum of importances over all concepts
  std::vector<AttributionEntry> entries;  // top_n nonzero, importance descending
};

/// Per-concept contributions to one class logit. Entries with zero
/// importance are dropped; `logit` always sums every concept.
inline ConceptAttribution explain_prediction(std::span<const float> activation_row,
                                             const ConceptClassifier& classifier, std::size_t class_k,
                                             std::size_t top_n) {
  require(class_k < classifier.num_classes(), ErrorKind::invalid_argument,
          "explain: class index " + std::to_string(class_k) + " out of range");
  require(activation_row.size() == classifier.num_concepts(), ErrorKind::dim_mismatch,
          "explain: activation row has " + std::to_string(activation_row.size()) + " concepts, classifier has " +
              std::to_string(classifier.num_concepts()));
  ConceptAttribution out;
  out.class_index = class_k;
  std::vector<AttributionEntry> all;
  for (std::size_t i = 0; i < activation_row.size(); ++i) {
    const double a = activation_row[i];
    const double w = classifier.W_con(i, class_k);
    const double imp = a * w;
    out.logit += imp;
    if (imp != 0.0) {
      AttributionEntry e;
      e.concept_index = i;
      if (i < classifier.concept_names.size()) e.name = classifier.concept_names[i];
      e.activation = a;
      e.weight = w;
      e.importance = imp;
      all.push_back(std::move(e));
    }
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const AttributionEntry& x, const AttributionEntry& y) { return x.importance > y.importance; });
  if (all.size() > top_n) all.resize(top_n);
  out.entries = std::move(all);
  return out;
}

/// Indices of the k largest entries, descending, lowest index first on ties.
inline std::vector<std::size_t> top_k_indices(std::span<const float> row, std::size_t k) {
  std::vector<std::size_t> idx(row.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  k = std::min(k, row.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) { return row[a] > row[b] || (row[a] == row[b] && a < b); });
  idx.resize(k);
  return idx;
}

/// How often each concept lands in an image's top-k activations, over a set
/// of images (typically all images of one class), as a distribution.
inline std::vector<double> global_class_concepts(const MatrixF& activations, std::size_t top_k_per_image) {
  require(top_k_per_image >= 1, ErrorKind::invalid_argument, "global concepts: top_k must be >= 1");
  std::vector<double> freq(activations.cols(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < activations.rows(); ++i)
    for (std::size_t z : top_k_indices(activations.row(i), top_k_per_image)) {
      freq[z] += 1.0;
      total += 1.0;
    }
  if (total > 0.0)
    for (auto& f : freq) f /= total;
  return freq;
}

}  // namespace textunlock
