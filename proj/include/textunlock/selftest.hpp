#pragma once

// Property checks on built-in synthetic fixtures. The acceptance binary runs
// all of them; `textunlock selftest` runs the same list.
//
// Each check recomputes its expected values independently (direct loops in
// double, hand-written membership rules, raw byte comparisons) instead of
// calling the code path under test a second time.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "textunlock/cbm.hpp"
#include "textunlock/concept_filter.hpp"
#include "textunlock/fixtures.hpp"
#include "textunlock/interventions.hpp"
#include "textunlock/io.hpp"
#include "textunlock/loss.hpp"
#include "textunlock/mapper.hpp"
#include "textunlock/trainer.hpp"
#include "textunlock/zeroshot_head.hpp"

namespace textunlock::selftest {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
  double time_limit = 0.0;
};

namespace detail {

inline std::string fmt(double v, int precision = 3) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

/// Runs `body`, which fills in pass/detail, and fails the check if it
/// exceeds `limit` seconds or throws.
inline CheckResult timed(std::string name, double limit, const std::function<void(CheckResult&)>& body) {
  CheckResult r;
  r.name = std::move(name);
  r.time_limit = limit;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.pass = false;
    r.detail = std::string("threw: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (r.seconds >= limit) {
    r.pass = false;
    r.detail += " (over time limit)";
  }
  return r;
}

inline MatrixD random_unit_rows_d(std::size_t rows, std::size_t cols, Rng& rng) {
  MatrixD m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    double sq = 0.0;
    for (auto& v : m.row(i)) {
      v = rng.normal();
      sq += v * v;
    }
    for (auto& v : m.row(i)) v /= std::sqrt(sq);
  }
  return m;
}

}  // namespace detail

// ---------------------------------------------------------------------------

/// Soft cross-entropy minus KL(o || softmax(s)) is the target entropy.
inline CheckResult check_ce_kl_identity(std::uint64_t seed = 101, std::size_t pairs = 1000) {
  return detail::timed("ce_kl_identity", 1.0, [&](CheckResult& r) {
    Rng rng(seed);
    double worst = 0.0;
    for (std::size_t p = 0; p < pairs; ++p) {
      const std::size_t k = 2 + rng.below(30);
      const double scale = 0.1 + 5.0 * rng.uniform();
      MatrixD s(1, k), o(1, k);
      double total = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        s(0, j) = scale * rng.normal();
        // Every fourth pair has exact zeros in the target.
        const double w = (p % 4 == 0 && rng.uniform() < 0.3) ? 0.0 : std::exp(2.0 * rng.normal());
        o(0, j) = w;
        total += w;
      }
      if (total == 0.0) {
        o(0, 0) = 1.0;
        total = 1.0;
      }
      for (auto& v : o.flat()) v /= total;
      const double ce = soft_cross_entropy(s, o);
      const auto pred = softmax(std::as_const(s).row(0));
      const double kl = kl_divergence(std::as_const(o).row(0), std::span<const double>(pred));
      const double h = entropy(std::as_const(o).row(0));
      worst = std::max(worst, std::abs(ce - (kl + h)));
    }
    r.pass = worst <= 1e-6;
    r.detail = "max |CE - (KL + H)| = " + detail::fmt(worst) + " over " + std::to_string(pairs) +
               " pairs (tol 1e-6)";
  });
}

// ---------------------------------------------------------------------------

/// Relative error floor: parameters whose gradient is structurally zero (the
/// bias feeding a LayerNorm) are compared in absolute terms below this.
inline constexpr double kGradCheckFloor = 1e-6;

struct GradCheckOutcome {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t checked = 0;
};

/// Full objective soft_CE(normalize(mapper(x)) U^T, teacher) against central
/// differences. Train mode with a fixed dropout seed, so the mask is the
/// same for every evaluation.
inline GradCheckOutcome gradient_check(std::uint64_t seed = 202, double h = 1e-4) {
  Rng rng(seed);
  MapperHyper hyper;
  hyper.n = 4;
  hyper.m = 3;
  hyper.dim_out_factor = 2;
  hyper.hidden_layers = 2;
  hyper.dropout_p = 0.5;
  auto params = init_mapper<double>(hyper, derive_seed(seed, SeedStream::init));
  // Move LayerNorm away from the identity so its parameters get generic gradients.
  for (auto& s : params.ln_scale)
    for (auto& v : s.flat()) v = 1.0 + 0.3 * rng.normal();
  for (auto& s : params.ln_shift)
    for (auto& v : s.flat()) v = 0.2 * rng.normal();
  for (auto& b : params.bias)
    for (auto& v : b.flat()) v = 0.1 * rng.normal();

  const std::size_t n_samples = 5, k = 4;
  MatrixD x(n_samples, hyper.n);
  for (auto& v : x.flat()) v = rng.normal();
  const MatrixD u = detail::random_unit_rows_d(k, hyper.m, rng);
  MatrixD teacher_logits(n_samples, k);
  for (auto& v : teacher_logits.flat()) v = 2.0 * rng.normal();
  const MatrixD teacher = softmax_rows(teacher_logits);
  const std::uint64_t dropout_seed = derive_seed(seed, SeedStream::dropout);

  auto objective = [&](const MapperParams<double>& p) {
    const auto out = forward(p, x, Mode::train, dropout_seed).output;
    return soft_cross_entropy(matmul_bt(l2_normalize_rows(out).rows, u), teacher);
  };

  auto fwd = forward(params, x, Mode::train, dropout_seed);
  const auto normed = l2_normalize_rows(fwd.output);
  const auto lg = soft_cross_entropy_with_grad(matmul_bt(normed.rows, u), teacher);
  const auto grads = backward(params, *fwd.trace, l2_normalize_backward(normed, matmul(lg.grad, u)));

  std::vector<const MatrixD*> gs;
  grads.for_each([&](const std::string&, const MatrixD& g) { gs.push_back(&g); });

  GradCheckOutcome out;
  std::size_t t = 0;
  auto probe = params;
  std::vector<MatrixD*> probe_tensors;
  probe.for_each([&](const std::string&, MatrixD& p) { probe_tensors.push_back(&p); });
  params.for_each([&](const std::string& name, const MatrixD& p) {
    MatrixD& q = *probe_tensors[t];
    const MatrixD& g = *gs[t];
    ++t;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double orig = p.flat()[i];
      q.flat()[i] = orig + h;
      const double up = objective(probe);
      q.flat()[i] = orig - h;
      const double down = objective(probe);
      q.flat()[i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = g.flat()[i];
      const double denom = std::max({std::abs(numeric), std::abs(analytic), kGradCheckFloor});
      const double rel = std::abs(numeric - analytic) / denom;
      ++out.checked;
      if (rel > out.max_rel_error) {
        out.max_rel_error = rel;
        out.worst_param = name + "[" + std::to_string(i) + "]";
      }
    }
  });
  return out;
}

inline CheckResult check_gradient() {
  return detail::timed("gradient_finite_difference", 10.0, [&](CheckResult& r) {
    const auto g = gradient_check();
    r.pass = g.max_rel_error <= 1e-4;
    r.detail = "4->8->8->3 mapper, 5 samples, " + std::to_string(g.checked) +
               " parameters, max relative error " + detail::fmt(g.max_rel_error) + " at " + g.worst_param +
               " (tol 1e-4)";
  });
}

// ---------------------------------------------------------------------------

/// With an orthonormal concept basis the CBM collapses back to the plain
/// text classifier f~ U^T.
inline CheckResult check_gram_identity(std::uint64_t seed = 303) {
  return detail::timed("gram_identity", 1.0, [&](CheckResult& r) {
    const std::size_t m = 32, k = 10, n = 1000;
    Rng rng(seed);
    const auto concepts = fixtures::orthonormal_concepts(m, derive_seed(seed, 1));
    const auto u = cast<float>(detail::random_unit_rows_d(k, m, rng));
    const auto head = build_class_head(u, fixtures::class_names(k), "a photo of a {}");
    const auto feats = cast<float>(detail::random_unit_rows_d(n, m, rng));
    const auto s_cbm = cbm_logits(feats, concepts, head);
    // f~ U^T directly, in double.
    MatrixD direct(n, k);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < k; ++c) {
        double acc = 0.0;
        for (std::size_t a = 0; a < m; ++a) acc += static_cast<double>(feats(i, a)) * head.U(c, a);
        direct(i, c) = acc;
      }
    double worst = 0.0;
    std::size_t disagree = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < k; ++c) worst = std::max(worst, std::abs(s_cbm(i, c) - direct(i, c)));
      disagree += argmax(s_cbm.row(i)) != argmax(direct.row(i));
    }
    r.pass = worst <= 1e-5 && disagree == 0;
    r.detail = "max |S_cn - f~U^T| = " + detail::fmt(worst) + " (tol 1e-5), argmax disagreements " +
               std::to_string(disagree) + "/" + std::to_string(n);
  });
}

/// Bottleneck route (f~C^T)(CU^T) against the gram route f~(C^T C)U^T.
inline CheckResult check_path_equality(std::uint64_t seed = 404) {
  return detail::timed("bottleneck_vs_gram_path", 5.0, [&](CheckResult& r) {
    const std::size_t n = 100, z = 500, m = 32, k = 20;
    Rng rng(seed);
    const auto concepts = fixtures::random_concepts(z, m, derive_seed(seed, 1));
    const auto head =
        build_class_head(cast<float>(detail::random_unit_rows_d(k, m, rng)), fixtures::class_names(k), "{}");
    const auto feats = cast<float>(detail::random_unit_rows_d(n, m, rng));
    // Small blocks so the blockwise accumulation is exercised too.
    const auto a = cbm_logits(feats, concepts, head, 64);
    const auto b = cbm_logits_gram_path(feats, concepts, head);
    const double worst = max_abs_diff(a, b);
    r.pass = worst <= 1e-4;
    r.detail = "N=100 Z=500 m=32 K=20, max |bottleneck - gram| = " + detail::fmt(worst) + " (tol 1e-4)";
  });
}

// ---------------------------------------------------------------------------

struct SyntheticRun {
  fixtures::TeacherTask task;
  TrainResult result;
  ClassHead head;
  HeadComparison holdout;
  double train_seconds = 0.0;
};

inline SyntheticRun train_synthetic(std::uint64_t seed = 7) {
  SyntheticRun run;
  run.task = fixtures::make_teacher_task(seed);
  const auto t0 = std::chrono::steady_clock::now();
  run.result = train_mapper(fixtures::teacher_task_config(seed), run.task.train_features, run.task.head_w,
                            run.task.class_embeddings);
  run.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  run.head = build_class_head(run.task.class_embeddings, run.task.class_names, "an image of a {}");
  run.holdout =
      compare_heads(run.task.holdout_features, run.result.params, run.head, run.task.head_w, run.task.holdout_labels);
  return run;
}

inline CheckResult check_synthetic_convergence(std::optional<SyntheticRun>& run) {
  return detail::timed("synthetic_convergence", 60.0, [&](CheckResult& r) {
    run = train_synthetic();
    const auto& h = run->holdout;
    r.pass = h.agreement >= 0.98 && std::abs(*h.delta) <= 1.0;
    r.detail = "holdout 500: agreement " + detail::fmt(h.agreement, 4) + " (>= 0.98), top-1 " +
               detail::fmt(h.transformed->top1, 4) + " vs original " + detail::fmt(h.original->top1, 4) +
               ", delta " + detail::fmt(*h.delta, 3) + " points (|delta| <= 1.0)";
  });
}

inline CheckResult check_ablation_collapse(const std::optional<SyntheticRun>& run) {
  return detail::timed("ablation_collapse", 30.0, [&](CheckResult& r) {
    require(run.has_value(), ErrorKind::invalid_argument, "no trained synthetic run");
    const std::size_t k = run->task.class_names.size();
    const double limit = 2.0 / static_cast<double>(k);
    r.pass = true;
    std::uint64_t stream = 0;
    for (auto mode : {AblationMode::mean_feature, AblationMode::random_feature, AblationMode::shuffled_feature,
                      AblationMode::random_weights}) {
      AblationSpec spec;
      spec.mode = mode;
      spec.seed = derive_seed(derive_seed(7, SeedStream::ablation), stream++);
      const auto a = run_ablation(run->task.holdout_features, run->result.params, run->head, run->task.head_w,
                                  run->task.holdout_labels, spec);
      r.pass = r.pass && a.agreement_after <= limit;
      r.detail += std::string(to_string(mode)) + " " + detail::fmt(a.agreement_after, 3) + ", ";
    }
    r.detail += "agreement with the original head (<= " + detail::fmt(limit, 2) + ")";
  });
}

// ---------------------------------------------------------------------------

inline CheckResult check_filter() {
  return detail::timed("concept_filtering", 1.0, [&](CheckResult& r) {
    const auto fx = fixtures::make_filter_fixture();
    const auto excl = parse_exclusions(fx.exclusion_lines);
    const auto first = filter_concepts(fx.concepts, fx.class_names, excl);

    std::vector<std::string> removed;
    for (const auto& rc : first.report.removed) removed.push_back(rc.name);
    const std::vector<std::string> want_removed = {"tiger", "Shark", "fish", "animal"};
    const std::vector<std::string> want_kept = {"fin", "ocean", "teeth", "stripes"};

    bool rows_exact = first.concepts.names == want_kept;
    for (std::size_t i = 0; rows_exact && i < want_kept.size(); ++i) {
      const auto src = std::find(fx.concepts.names.begin(), fx.concepts.names.end(), want_kept[i]) -
                       fx.concepts.names.begin();
      rows_exact = std::memcmp(first.concepts.C.row(i).data(), fx.concepts.C.row(src).data(),
                               sizeof(float) * fx.concepts.dim()) == 0;
    }
    const auto second = filter_concepts(first.concepts, fx.class_names, excl);
    const bool idempotent = second.report.removed.empty() && second.concepts.names == first.concepts.names &&
                            second.concepts.C == first.concepts.C;
    r.pass = removed == want_removed && rows_exact && idempotent;
    std::string list;
    for (const auto& s : removed) list += (list.empty() ? "" : ",") + s;
    r.detail = "removed {" + list + "}, kept rows bit-exact: " + (rows_exact ? "yes" : "no") +
               ", idempotent: " + (idempotent ? "yes" : "no");
  });
}

// ---------------------------------------------------------------------------

namespace detail {

/// Logits from activations with an intervention applied, by direct loops.
inline MatrixD oracle_intervened_logits(const MatrixF& a, const MatrixF& w, bool remove, double keep_scale,
                                        const std::function<const std::set<std::size_t>&(std::size_t)>& set_for) {
  MatrixD out(a.rows(), w.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto& s = set_for(i);
    for (std::size_t k = 0; k < w.cols(); ++k) {
      double acc = 0.0;
      for (std::size_t z = 0; z < a.cols(); ++z) {
        double v = a(i, z);
        const bool listed = s.count(z) != 0;
        if (remove && listed) v = 0.0;
        if (!remove && !listed) v = static_cast<float>(v * keep_scale);
        acc += v * static_cast<double>(w(z, k));
      }
      out(i, k) = acc;
    }
  }
  return out;
}

}  // namespace detail

inline CheckResult check_interventions(std::uint64_t seed = 505) {
  return detail::timed("intervention_oracle", 10.0, [&](CheckResult& r) {
    Rng rng(seed);
    const std::size_t n = 200, z = 40, m = 16, k = 6;
    const auto concepts = fixtures::random_concepts(z, m, derive_seed(seed, 1));
    const auto head = build_class_head(cast<float>(detail::random_unit_rows_d(k, m, rng)), fixtures::class_names(k), "{}");
    const auto classifier = build_concept_classifier(concepts, head);
    const auto acts = concept_activations(cast<float>(detail::random_unit_rows_d(n, m, rng)), concepts);
    io::LabelVector labels(n);
    for (auto& y : labels) y = rng.below(k);

    std::vector<std::set<std::size_t>> sets(k);
    for (auto& s : sets)
      while (s.size() < 6) s.insert(rng.below(z));
    std::set<std::size_t> global;
    while (global.size() < 10) global.insert(rng.below(z));

    double worst = 0.0;
    for (bool remove : {true, false})
      for (bool per_class : {false, true}) {
        InterventionSpec spec;
        spec.mode = remove ? InterventionMode::remove : InterventionMode::keep;
        spec.keep_scale = 0.1;
        spec.per_class = per_class;
        spec.global.assign(global.begin(), global.end());
        for (const auto& s : sets) spec.per_class_sets.emplace_back(s.begin(), s.end());
        const auto got = logits_from_activations(apply_intervention(acts, spec, &labels), classifier);
        const auto want = detail::oracle_intervened_logits(
            acts, classifier.W_con, remove, spec.keep_scale,
            [&](std::size_t i) -> const std::set<std::size_t>& { return per_class ? sets[labels[i]] : global; });
        worst = std::max(worst, max_abs_diff(cast<double>(got), want));
      }

    InterventionSpec empty_remove;
    InterventionSpec unit_keep;
    unit_keep.mode = InterventionMode::keep;
    unit_keep.keep_scale = 1.0;
    unit_keep.global = {0, 1, 2};
    const bool noop_exact = apply_intervention(acts, empty_remove) == acts && apply_intervention(acts, unit_keep) == acts;

    // Constructed fixture: each class leans on its designated concepts.
    const auto fx = fixtures::make_dominant_concept_fixture();
    const auto fx_cls = build_concept_classifier(fx.concepts, fx.head);
    const auto fx_acts = concept_activations(fx.mapped, fx.concepts);
    InterventionSpec rspec;
    rspec.per_class = true;
    rspec.per_class_sets = fx.class_concepts;
    const auto int_r = run_intervention_on_activations(fx_acts, fx_cls, fx.labels, rspec);
    InterventionSpec kspec;
    kspec.mode = InterventionMode::keep;
    kspec.keep_scale = 0.1;
    for (const auto& s : fx.class_concepts) kspec.global.insert(kspec.global.end(), s.begin(), s.end());
    const auto int_k = run_intervention_on_activations(fx_acts, fx_cls, fx.labels, kspec);

    r.pass = worst <= 1e-6 && noop_exact && int_r.delta <= -20.0 && int_k.delta >= 0.0;
    r.detail = "max |logits - recomputation| = " + detail::fmt(worst) + " (tol 1e-6), no-ops bit-exact: " +
               (noop_exact ? "yes" : "no") + ", Int. R " + detail::fmt(100 * int_r.accuracy_before, 4) + " -> " +
               detail::fmt(100 * int_r.accuracy_after, 4) + " (" + detail::fmt(int_r.delta, 3) +
               ", need <= -20), Int. K " + detail::fmt(100 * int_k.accuracy_before, 4) + " -> " +
               detail::fmt(100 * int_k.accuracy_after, 4) + " (" + detail::fmt(int_k.delta, 3) + ", need >= 0)";
  });
}

// ---------------------------------------------------------------------------

inline CheckResult check_attribution(std::uint64_t seed = 606) {
  return detail::timed("attribution_completeness", 1.0, [&](CheckResult& r) {
    Rng rng(seed);
    double worst = 0.0;
    for (std::size_t trial = 0; trial < 20; ++trial) {
      const std::size_t z = 20 + rng.below(200), m = 8 + rng.below(40), k = 2 + rng.below(20), n = 10;
      const auto concepts = fixtures::random_concepts(z, m, derive_seed(seed, trial + 1));
      const auto head = build_class_head(cast<float>(detail::random_unit_rows_d(k, m, rng)),
                                         fixtures::class_names(k), "{}");
      const auto classifier = build_concept_classifier(concepts, head);
      const auto feats = cast<float>(detail::random_unit_rows_d(n, m, rng));
      const auto logits = cbm_logits(feats, concepts, classifier);
      const auto acts = concept_activations(feats, concepts);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < k; ++c) {
          const auto ex = explain_prediction(acts.row(i), classifier, c, z);
          double sum = 0.0;
          for (const auto& e : ex.entries) sum += e.importance;
          worst = std::max({worst, std::abs(sum - logits(i, c)), std::abs(ex.logit - logits(i, c))});
        }
    }
    r.pass = worst <= 1e-4;
    r.detail = "max |sum of importances - class logit| = " + detail::fmt(worst) + " (tol 1e-4)";
  });
}

// ---------------------------------------------------------------------------

inline CheckResult check_io_roundtrip(std::uint64_t seed = 707) {
  return detail::timed("io_roundtrip", 5.0, [&](CheckResult& r) {
    namespace fs = std::filesystem;
    Rng rng(seed);
    const auto dir = fs::temp_directory_path() / ("textunlock_io_check_" + std::to_string(rng.next_u64()));
    fs::create_directories(dir);
    std::size_t exact = 0;
    const std::size_t count = 100;
    for (std::size_t t = 0; t < count; ++t) {
      const std::size_t rows = rng.below(40), cols = 1 + rng.below(40);
      MatrixF m(rows, cols);
      for (auto& v : m.flat()) {
        switch (rng.below(5)) {
          case 0: v = -0.0f; break;
          case 1: v = std::bit_cast<float>(static_cast<std::uint32_t>(1 + rng.below(0x7fffff))); break;  // subnormal
          case 2: v = static_cast<float>(std::ldexp(rng.normal(), static_cast<int>(rng.below(200)) - 100)); break;
          default: v = static_cast<float>(rng.normal());
        }
      }
      const auto p = dir / ("m" + std::to_string(t) + ".tukt");
      io::write_tensor(p, m);
      const auto back = io::read_tensor(p);
      exact += back.rows() == rows && back.cols() == cols &&
               std::memcmp(back.flat().data(), m.flat().data(), m.size() * sizeof(float)) == 0 &&
               fs::file_size(p) == io::kHeaderBytes + 4 * m.size();
    }

    const auto good = io::encode_tensor(MatrixF{{1.0f, 2.0f}, {3.0f, 4.0f}});
    struct Bad {
      const char* what;
      std::vector<std::uint8_t> bytes;
      ErrorKind expect;
    };
    std::vector<Bad> bad;
    auto edit = [&](const char* what, ErrorKind kind, const std::function<void(std::vector<std::uint8_t>&)>& f) {
      auto b = good;
      f(b);
      bad.push_back({what, std::move(b), kind});
    };
    edit("magic", ErrorKind::bad_magic, [](auto& b) { b[0] = 'X'; });
    edit("version", ErrorKind::bad_version, [](auto& b) { b[4] = 2; });
    edit("dtype", ErrorKind::bad_dtype, [](auto& b) { b[6] = 2; });
    edit("rank", ErrorKind::bad_rank, [](auto& b) { b[7] = 3; });
    edit("short header", ErrorKind::truncated, [](auto& b) { b.resize(12); });
    edit("short payload", ErrorKind::truncated, [](auto& b) { b.pop_back(); });
    edit("trailing bytes", ErrorKind::truncated, [](auto& b) { b.push_back(0); });
    edit("row count", ErrorKind::truncated, [](auto& b) { b[8] = 3; });
    edit("nan", ErrorKind::non_finite, [](auto& b) {
      const auto nan = std::bit_cast<std::uint32_t>(std::numeric_limits<float>::quiet_NaN());
      for (int i = 0; i < 4; ++i) b[io::kHeaderBytes + i] = static_cast<std::uint8_t>(nan >> (8 * i));
    });
    std::size_t rejected = 0;
    std::string misses;
    for (const auto& b : bad) {
      const auto p = dir / "bad.tukt";
      io::detail::write_file(p, b.bytes.data(), b.bytes.size());
      try {
        (void)io::read_tensor(p);
        misses += std::string(" ") + b.what + "(accepted)";
      } catch (const Error& e) {
        if (e.kind() == b.expect) {
          ++rejected;
        } else {
          misses += std::string(" ") + b.what + "(" + std::string(to_string(e.kind())) + ")";
        }
      }
    }
    fs::remove_all(dir);
    r.pass = exact == count && rejected == bad.size();
    r.detail = std::to_string(exact) + "/" + std::to_string(count) + " matrices bit-exact, " +
               std::to_string(rejected) + "/" + std::to_string(bad.size()) + " malformed files rejected" + misses;
  });
}

// ---------------------------------------------------------------------------

inline std::vector<CheckResult> run_all() {
  std::vector<CheckResult> out;
  out.push_back(check_ce_kl_identity());
  out.push_back(check_gradient());
  out.push_back(check_gram_identity());
  out.push_back(check_path_equality());
  std::optional<SyntheticRun> run;
  out.push_back(check_synthetic_convergence(run));
  out.push_back(check_ablation_collapse(run));
  out.push_back(check_filter());
  out.push_back(check_interventions());
  out.push_back(check_attribution());
  out.push_back(check_io_roundtrip());
  return out;
}

}  // namespace textunlock::selftest
