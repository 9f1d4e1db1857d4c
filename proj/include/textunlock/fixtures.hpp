#pragma once

// Built-in synthetic fixtures used by the self-test, the acceptance suite
// and `make-fixture`. Everything is generated from a seed.

#include <bit>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "textunlock/cbm.hpp"
#include "textunlock/io.hpp"
#include "textunlock/loss.hpp"
#include "textunlock/matrix.hpp"
#include "textunlock/random.hpp"
#include "textunlock/trainer.hpp"

namespace textunlock::fixtures {

inline MatrixF gaussian(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  MatrixF m(rows, cols);
  for (auto& v : m.flat()) v = static_cast<float>(scale * rng.normal());
  return m;
}

inline MatrixF unit_rows(const MatrixF& m) { return l2_normalize_rows(m).rows; }

inline std::vector<std::string> class_names(std::size_t k, const std::string& prefix = "class") {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

/// K rows of +-1 entries. When K <= m and m is a power of two the rows are
/// drawn from a randomly sign-flipped Sylvester-Hadamard matrix and are
/// mutually orthogonal; otherwise entries are independent random signs.
/// Orthogonality matters: with correlated rows the soft cross-entropy
/// optimum over unit vectors can rank classes differently from the teacher.
inline MatrixF random_sign_rows(std::size_t k, std::size_t m, Rng& rng) {
  MatrixF out(k, m);
  if (k > m || (m & (m - 1)) != 0) {
    for (auto& v : out.flat()) v = rng.uniform() < 0.5 ? -1.0f : 1.0f;
    return out;
  }
  std::vector<float> col_sign(m);
  for (auto& c : col_sign) c = rng.uniform() < 0.5 ? -1.0f : 1.0f;
  const auto rows = rng.permutation(m);
  for (std::size_t i = 0; i < k; ++i) {
    const float row_sign = rng.uniform() < 0.5 ? -1.0f : 1.0f;
    for (std::size_t j = 0; j < m; ++j) {
      // H[r][j] = (-1)^popcount(r & j)
      const bool odd = std::popcount(rows[i] & j) % 2 != 0;
      out(i, j) = (odd ? -1.0f : 1.0f) * col_sign[j] * row_sign;
    }
  }
  return out;
}

/// Frozen linear teacher over Gaussian features with a random text head.
struct TeacherTask {
  MatrixF train_features;
  MatrixF holdout_features;
  MatrixF head_w;            // n x K
  MatrixF class_embeddings;  // K x m, unit rows
  io::LabelVector train_labels;
  io::LabelVector holdout_labels;
  std::vector<std::string> class_names;
};

struct TeacherTaskShape {
  std::size_t n = 16;
  std::size_t m = 8;
  std::size_t K = 5;
  std::size_t n_train = 2000;
  std::size_t n_holdout = 500;
  /// Norm of every head column; sets how peaked the teacher is.
  double head_scale = 4.0;
};

/// Labels are drawn from the teacher distribution itself, so the original
/// head is accurate but not perfect.
inline TeacherTask make_teacher_task(std::uint64_t seed = 7, const TeacherTaskShape& s = {}) {
  Rng rng(derive_seed(seed, SeedStream::fixture));
  TeacherTask t;
  t.class_names = class_names(s.K);
  t.head_w = gaussian(s.n, s.K, rng);
  for (std::size_t k = 0; k < s.K; ++k) {
    double sq = 0.0;
    for (std::size_t i = 0; i < s.n; ++i) sq += static_cast<double>(t.head_w(i, k)) * t.head_w(i, k);
    const double f = s.head_scale / std::sqrt(sq);
    for (std::size_t i = 0; i < s.n; ++i) t.head_w(i, k) = static_cast<float>(t.head_w(i, k) * f);
  }
  t.class_embeddings = unit_rows(random_sign_rows(s.K, s.m, rng));

  auto sample_labels = [&](const MatrixF& feats) {
    const auto teacher = compute_teacher(feats, t.head_w);
    io::LabelVector labels(feats.rows());
    for (std::size_t i = 0; i < feats.rows(); ++i) {
      double r = rng.uniform(), acc = 0.0;
      std::size_t k = 0;
      for (; k + 1 < s.K; ++k) {
        acc += teacher(i, k);
        if (r < acc) break;
      }
      labels[i] = k;
    }
    return labels;
  };
  t.train_features = gaussian(s.n_train, s.n, rng);
  t.holdout_features = gaussian(s.n_holdout, s.n, rng);
  t.train_labels = sample_labels(t.train_features);
  t.holdout_labels = sample_labels(t.holdout_features);
  return t;
}

/// Training settings for the synthetic teacher task. The full-scale
/// defaults (lr 1e-4, 10 epochs) are far too few steps for 2000 samples.
inline TrainConfig teacher_task_config(std::uint64_t seed = 7) {
  TrainConfig c;
  c.batch_size = 64;
  c.base_lr = 1e-2;
  c.epochs = 300;
  // Half the units of a 16-wide hidden layer is far noisier than at full scale.
  c.dropout_p = 0.1;
  c.seed = seed;
  return c;
}

/// Random unit concept embeddings with names concept0..concept{Z-1}.
inline ConceptSet random_concepts(std::size_t z, std::size_t m, std::uint64_t seed) {
  Rng rng(seed);
  return make_concept_set(class_names(z, "concept"), gaussian(z, m, rng), "synthetic-random");
}

/// Z = m concepts forming an orthonormal basis (random rotation via
/// Gram-Schmidt), so C^T C = I.
inline ConceptSet orthonormal_concepts(std::size_t m, std::uint64_t seed) {
  Rng rng(seed);
  MatrixD q(m, m);
  for (auto& v : q.flat()) v = rng.normal();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      double d = 0.0;
      for (std::size_t c = 0; c < m; ++c) d += q(i, c) * q(j, c);
      for (std::size_t c = 0; c < m; ++c) q(i, c) -= d * q(j, c);
    }
    double nrm = 0.0;
    for (std::size_t c = 0; c < m; ++c) nrm += q(i, c) * q(i, c);
    nrm = std::sqrt(nrm);
    for (std::size_t c = 0; c < m; ++c) q(i, c) /= nrm;
  }
  return make_concept_set(class_names(m, "basis"), cast<float>(q), "synthetic-orthonormal");
}

// ---------------------------------------------------------------------------

/// Concept-filter fixture: class "tiger shark" with an exclusion line for it.
struct FilterFixture {
  ConceptSet concepts;
  std::vector<std::string> class_names;
  std::vector<std::string> exclusion_lines;
};

inline FilterFixture make_filter_fixture(std::size_t m = 8, std::uint64_t seed = 11) {
  std::vector<std::string> names = {"tiger", "Shark", "fin", "fish", "animal", "ocean", "teeth", "stripes"};
  Rng rng(seed);
  return {make_concept_set(names, gaussian(names.size(), m, rng), "filter-fixture"),
          {"tiger shark"},
          {"tiger shark\tfish, animal,Cartilaginous"}};
}

// ---------------------------------------------------------------------------

/// The ten classes and five concepts per class used for the multi-class
/// intervention experiment.
inline const std::vector<std::pair<std::string, std::vector<std::string>>>& multiclass_intervention_concepts() {
  static const std::vector<std::pair<std::string, std::vector<std::string>>> table = {
      {"tench", {"fish", "freshwater", "fins", "dorsal", "olive"}},
      {"english springer", {"dog", "long ears", "brown and white", "playful", "hunting"}},
      {"cassette player", {"portable", "audio", "tape", "speakers", "buttons"}},
      {"chainsaw", {"sharp", "handheld", "cutting", "metal", "wood"}},
      {"church", {"cross", "tower", "architecture", "sacred", "religious"}},
      {"french horn", {"curved", "mouthpiece", "musical instrument", "orchestral", "blow"}},
      {"garbage truck", {"large vehicle", "wheels", "clean", "high load", "lift"}},
      {"gas pump", {"fueling", "hose", "metallic", "gasoline", "handle"}},
      {"golf ball", {"small", "white", "round", "rubber", "dimples"}},
      {"parachute", {"fabric", "fly", "air", "landing", "strings"}},
  };
  return table;
}

/// A constructed CBM in which each class logit is carried mostly by that
/// class's designated concepts, while "background" concepts push a share of
/// the images toward a wrong class. Mirrors the multi-class intervention
/// setup (one designated concept set per class) and the waterbird setup
/// (global keep set = all designated concepts).
struct DominantConceptFixture {
  MatrixF mapped;  // N x m, unit rows
  ConceptSet concepts;
  ClassHead head;
  io::LabelVector labels;
  std::vector<std::vector<std::size_t>> class_concepts;  // per class
  std::vector<std::size_t> background_concepts;
};

struct DominantConceptShape {
  std::size_t K = 10;
  std::size_t m = 64;
  std::size_t per_class = 5;
  std::size_t background_per_class = 3;
  std::size_t samples_per_class = 50;
  double concept_noise = 0.5;     // off-axis component of designated concepts
  double background_pull = 0.8;   // class-axis component of background concepts
  double spurious_strength = 8.0;  // weight of a wrong class's background in a spurious image
  double spurious_fraction = 0.5;
  double feature_noise = 0.3;
};

inline DominantConceptFixture make_dominant_concept_fixture(std::uint64_t seed = 3,
                                                            const DominantConceptShape& s = {}) {
  Rng rng(seed);
  const std::size_t k = s.K, m = s.m;
  auto axis = [&](std::size_t a) {
    std::vector<double> v(m, 0.0);
    v[a] = 1.0;
    return v;
  };
  auto random_background = [&] {
    // Unit direction supported on the non-class axes.
    std::vector<double> v(m, 0.0);
    double nrm = 0.0;
    for (std::size_t a = k; a < m; ++a) {
      v[a] = rng.normal();
      nrm += v[a] * v[a];
    }
    for (auto& x : v) x /= std::sqrt(nrm);
    return v;
  };

  DominantConceptFixture f;
  MatrixF u(k, m);
  for (std::size_t c = 0; c < k; ++c) u(c, c) = 1.0f;
  std::vector<std::string> cls;
  for (std::size_t c = 0; c < k; ++c) cls.push_back("class" + std::to_string(c));
  f.head = build_class_head(u, cls, "an image of a {}");

  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;
  f.class_concepts.resize(k);
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t j = 0; j < s.per_class; ++j) {
      auto v = axis(c);
      const auto bg = random_background();
      for (std::size_t a = 0; a < m; ++a) v[a] += s.concept_noise * bg[a];
      f.class_concepts[c].push_back(rows.size());
      names.push_back("class" + std::to_string(c) + "_concept" + std::to_string(j));
      rows.push_back(std::move(v));
    }
  // Background concepts: a background direction tied to one class.
  std::vector<std::vector<std::vector<double>>> bg_dirs(k);
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t j = 0; j < s.background_per_class; ++j) {
      auto dir = random_background();
      auto v = dir;
      v[c] += s.background_pull;
      bg_dirs[c].push_back(std::move(dir));
      f.background_concepts.push_back(rows.size());
      names.push_back("background" + std::to_string(c) + "_" + std::to_string(j));
      rows.push_back(std::move(v));
    }
  MatrixF cm(rows.size(), m);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t a = 0; a < m; ++a) cm(i, a) = static_cast<float>(rows[i][a]);
  f.concepts = make_concept_set(std::move(names), cm, "dominant-concept-fixture");

  MatrixF feats(k * s.samples_per_class, m);
  f.labels.resize(feats.rows());
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t i = 0; i < s.samples_per_class; ++i) {
      const std::size_t r = c * s.samples_per_class + i;
      f.labels[r] = c;
      // Background from the own class or, for spurious images, another class.
      std::size_t bg_class = c;
      if (rng.uniform() < s.spurious_fraction) bg_class = (c + 1 + rng.below(k - 1)) % k;
      std::vector<double> v = axis(c);
      for (const auto& d : bg_dirs[bg_class])
        for (std::size_t a = 0; a < m; ++a) v[a] += s.spurious_strength * d[a] / static_cast<double>(bg_dirs[bg_class].size());
      for (std::size_t a = 0; a < m; ++a) {
        v[a] += s.feature_noise * rng.normal() / std::sqrt(static_cast<double>(m));
        feats(r, a) = static_cast<float>(v[a]);
      }
    }
  f.mapped = unit_rows(feats);
  return f;
}

}  // namespace textunlock::fixtures
