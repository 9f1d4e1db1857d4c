// textunlock: command-line front end.
//
// Every subcommand prints a JSON document on stdout (or a plain-text table
// with --format table) and, on failure, a JSON error object on stderr with
// a nonzero exit code:
//   2 missing manifest role, 3 dimension mismatch, 4 empty concept set after
//   filtering, 5 unknown concept name in an intervention spec, 1 anything else.

#include <cstdio>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "textunlock/fixtures.hpp"
#include "textunlock/selftest.hpp"
#include "textunlock/textunlock.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace textunlock;

namespace {

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::missing_role: return 2;
    case ErrorKind::dim_mismatch: return 3;
    case ErrorKind::empty_concept_set: return 4;
    case ErrorKind::unknown_concept: return 5;
    default: return 1;
  }
}

void print_error(std::string_view kind, const std::string& message) {
  std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << "\n";
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// ---------------------------------------------------------------------------
// Loading

struct Inputs {
  io::Manifest manifest;

  MatrixF features() const { return io::read_tensor(manifest.path(io::role::features)); }
  MatrixF head_weights() const { return io::read_tensor(manifest.path(io::role::head_weights)); }

  std::optional<io::LabelVector> labels() const {
    if (!manifest.has(io::role::labels)) return std::nullopt;
    return io::read_labels(manifest.path(io::role::labels), manifest.dims.K);
  }

  ClassHead head() const {
    return build_class_head(io::read_tensor(manifest.path(io::role::class_embeddings)), manifest.class_names,
                            manifest.prompt_template);
  }

  ClassHead head_for_template(const std::string& tmpl) const {
    if (tmpl == manifest.prompt_template) return head();
    auto it = manifest.template_class_embeddings.find(tmpl);
    require(it != manifest.template_class_embeddings.end(), ErrorKind::missing_role,
            "manifest: missing role 'template_class_embeddings[" + tmpl + "]'");
    return build_class_head(io::read_tensor(it->second), manifest.class_names, tmpl);
  }

  ConceptSet concepts() const {
    const auto names = io::read_lines(manifest.path(io::role::concept_names));
    return make_concept_set(names, io::read_tensor(manifest.path(io::role::concept_embeddings)),
                            manifest.path(io::role::concept_names).filename().string());
  }

  ExclusionMap exclusions() const {
    if (!manifest.has(io::role::exclusions)) return {};
    return read_exclusions(manifest.path(io::role::exclusions));
  }
};

Inputs load_inputs(const std::string& manifest_path) { return {io::load_manifest(manifest_path)}; }

MapperParamsF load_checked_mapper(const std::string& dir, const io::Dims& dims) {
  auto p = load_mapper(dir);
  require(p.hyper.n == dims.n && p.hyper.m == dims.m, ErrorKind::dim_mismatch,
          "checkpoint: mapper is " + std::to_string(p.hyper.n) + " -> " + std::to_string(p.hyper.m) +
              " but the manifest has n = " + std::to_string(dims.n) + ", m = " + std::to_string(dims.m));
  return p;
}

/// The concept set, filtered when asked; the report is null otherwise.
std::pair<ConceptSet, json> prepared_concepts(const Inputs& in, bool filter) {
  auto concepts = in.concepts();
  if (!filter) return {std::move(concepts), json(nullptr)};
  auto res = filter_concepts(concepts, in.manifest.class_names, in.exclusions());
  json removed = json::array();
  for (const auto& r : res.report.removed) removed.push_back({{"name", r.name}, {"reason", to_string(r.reason)}});
  json report = {{"input_count", res.report.input_count},
                 {"kept_count", res.report.kept_count},
                 {"removed_count", res.report.removed_count()},
                 {"removed", removed}};
  return {std::move(res.concepts), std::move(report)};
}

json eval_json(const EvalResult& r) {
  json per_class = json::array();
  for (double v : r.per_class) per_class.push_back(std::isnan(v) ? json(nullptr) : json(v));
  return {{"top1", r.top1}, {"n_samples", r.n_samples}, {"per_class", per_class}};
}

std::string pct(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * *v);
  return buf;
}

std::string num(const std::optional<double>& v, const char* f = "%+.2f") {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, f, *v);
  return buf;
}

// ---------------------------------------------------------------------------

struct Common {
  std::string manifest;
  std::string checkpoint;
  std::string out;
  std::string format = "json";
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void emit(const Common& c, const json& j, const std::function<void()>& table) {
  if (!c.out.empty() && fs::path(c.out).extension() == ".json") io::write_json(c.out, j);
  if (c.format == "table") {
    table();
  } else {
    std::cout << j.dump(2) << "\n";
  }
}

// ---------------------------------------------------------------------------

struct TrainOverrides {
  std::string config;
  std::optional<std::size_t> epochs, batch_size, hidden_layers, dim_out_factor;
  std::optional<double> lr, dropout, holdout_fraction;
  bool no_shuffle = false;
};

int cmd_train(const Common& c, const TrainOverrides& o) {
  require(!c.out.empty(), ErrorKind::invalid_argument, "train: --out <checkpoint dir> is required");
  const auto in = load_inputs(c.manifest);
  TrainConfig cfg = o.config.empty() ? TrainConfig{} : train_config_from_json(io::read_json(o.config));
  if (o.epochs) cfg.epochs = *o.epochs;
  if (o.batch_size) cfg.batch_size = *o.batch_size;
  if (o.hidden_layers) cfg.hidden_layers = *o.hidden_layers;
  if (o.dim_out_factor) cfg.dim_out_factor = *o.dim_out_factor;
  if (o.lr) cfg.base_lr = *o.lr;
  if (o.dropout) cfg.dropout_p = *o.dropout;
  if (o.holdout_fraction) cfg.holdout_fraction = *o.holdout_fraction;
  if (o.no_shuffle) cfg.shuffle = false;
  if (c.seed_set) cfg.seed = c.seed;
  validate_train_config(cfg);

  const auto features = in.features();
  const auto head_w = in.head_weights();
  const auto head = in.head();
  TrainResult result;
  try {
    result = train_mapper(cfg, features, head_w, head.U);
  } catch (const TrainingDiverged& e) {
    save_mapper(fs::path(c.out) / "last_good", e.last_good());
    throw;
  }
  save_checkpoint(c.out, result, cfg);

  const auto report = to_json(result.report);
  json j = {{"checkpoint", c.out}, {"train_config", to_json(cfg)}, {"train_report", report}};
  emit(c, j, [&] {
    std::printf("epochs %zu  steps %zu  train %zu  holdout %zu\n", result.report.epoch_loss.size(),
                result.report.steps, result.report.train_size, result.report.holdout_size);
    if (!result.report.epoch_loss.empty())
      std::printf("loss first %.5f  last %.5f\n", result.report.epoch_loss.front(), result.report.epoch_loss.back());
    std::printf("holdout KL %s  argmax agreement %s\n", num(result.report.holdout_kl, "%.5f").c_str(),
                pct(result.report.holdout_agreement).c_str());
  });
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_eval(const Common& c, const std::vector<std::string>& templates, bool untrained) {
  const auto in = load_inputs(c.manifest);
  MapperParamsF mapper;
  if (untrained) {
    MapperHyper h;
    if (!c.checkpoint.empty()) h = load_checked_mapper(c.checkpoint, in.manifest.dims).hyper;
    h.n = in.manifest.dims.n;
    h.m = in.manifest.dims.m;
    mapper = init_mapper<float>(h, derive_seed(c.seed, SeedStream::init));
  } else {
    require(!c.checkpoint.empty(), ErrorKind::invalid_argument, "eval: --checkpoint is required (or --untrained)");
    mapper = load_checked_mapper(c.checkpoint, in.manifest.dims);
  }
  const auto features = in.features();
  const auto w = in.head_weights();
  const auto labels = in.labels();
  const auto head = in.head();
  const auto cmp = compare_heads(features, mapper, head, w, labels);

  json j = {{"prompt_template", head.prompt_template},
            {"n_samples", cmp.n_samples},
            {"label_free", !labels.has_value()},
            {"agreement", cmp.agreement},
            {"top1", cmp.transformed ? json(cmp.transformed->top1) : json(nullptr)},
            {"orig", cmp.original ? json(cmp.original->top1) : json(nullptr)},
            {"delta", opt_json(cmp.delta)},
            {"warnings", head.warnings}};
  if (cmp.transformed) j["transformed"] = eval_json(*cmp.transformed);
  if (cmp.original) j["original"] = eval_json(*cmp.original);

  std::vector<TemplateScore> scores;
  if (!templates.empty()) {
    std::vector<ClassHead> heads;
    for (const auto& t : templates) heads.push_back(in.head_for_template(t));
    scores = compare_templates(features, mapper, heads, w, labels);
    json arr = json::array();
    for (const auto& s : scores)
      arr.push_back({{"prompt_template", s.prompt_template}, {"top1", opt_json(s.top1)}, {"agreement", s.agreement}});
    j["templates"] = arr;
  }

  emit(c, j, [&] {
    std::optional<double> t1, o1;
    if (cmp.transformed) t1 = cmp.transformed->top1;
    if (cmp.original) o1 = cmp.original->top1;
    std::printf("%-8s %-8s %-8s %-10s\n", "Top-1", "Orig.", "Delta", "Agreement");
    std::printf("%-8s %-8s %-8s %-10s\n", pct(t1).c_str(), pct(o1).c_str(), num(cmp.delta).c_str(),
                pct(cmp.agreement).c_str());
    if (!scores.empty()) {
      std::printf("\n%-40s %-8s %-10s\n", "template", "Top-1", "Agreement");
      for (const auto& s : scores)
        std::printf("%-40s %-8s %-10s\n", s.prompt_template.c_str(), pct(s.top1).c_str(), pct(s.agreement).c_str());
    }
  });
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_cbm(const Common& c, bool filter, bool verify_gram, std::size_t block) {
  const auto in = load_inputs(c.manifest);
  require(!c.checkpoint.empty(), ErrorKind::invalid_argument, "cbm: --checkpoint is required");
  const auto mapper = load_checked_mapper(c.checkpoint, in.manifest.dims);
  const auto [concepts, report] = prepared_concepts(in, filter);
  const auto head = in.head();
  const auto mapped = map_features(mapper, in.features());
  const auto classifier = build_concept_classifier(concepts, head);
  const auto s_cbm = cbm_logits(mapped, concepts, classifier, block);
  const auto s_text = score(mapped, head);
  const auto labels = in.labels();

  json j = {{"num_concepts", concepts.size()},
            {"n_samples", mapped.rows()},
            {"agreement_with_transformed", argmax_agreement(s_cbm, s_text)},
            {"filter_report", report}};
  std::optional<double> cbm_top1, text_top1;
  if (labels) {
    cbm_top1 = top1_accuracy(s_cbm, *labels).top1;
    text_top1 = top1_accuracy(s_text, *labels).top1;
    j["cbm"] = eval_json(top1_accuracy(s_cbm, *labels));
  }
  j["top1"] = opt_json(cbm_top1);
  j["transformed_top1"] = opt_json(text_top1);
  j["delta_vs_transformed"] = cbm_top1 ? json(100.0 * (*cbm_top1 - *text_top1)) : json(nullptr);
  if (verify_gram) {
    const double diff = max_abs_diff(s_cbm, cbm_logits_gram_path(mapped, concepts, head));
    j["gram_path_max_abs_diff"] = diff;
    require(diff <= 1e-4, ErrorKind::invalid_argument,
            "cbm: bottleneck and gram paths differ by " + std::to_string(diff));
  }
  emit(c, j, [&] {
    std::printf("%-10s %-8s %-14s %-8s\n", "concepts", "Top-1", "Transformed", "Delta");
    std::printf("%-10zu %-8s %-14s %-8s\n", concepts.size(), pct(cbm_top1).c_str(), pct(text_top1).c_str(),
                cbm_top1 ? num(100.0 * (*cbm_top1 - *text_top1)).c_str() : "-");
    if (!report.is_null())
      std::printf("filter: removed %zu of %zu\n", report["removed_count"].get<std::size_t>(),
                  report["input_count"].get<std::size_t>());
  });
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_discover(const Common& c, bool filter, std::size_t top_k, std::size_t top_n) {
  const auto in = load_inputs(c.manifest);
  require(!c.checkpoint.empty(), ErrorKind::invalid_argument, "discover: --checkpoint is required");
  const auto mapper = load_checked_mapper(c.checkpoint, in.manifest.dims);
  const auto [concepts, report] = prepared_concepts(in, filter);
  const auto head = in.head();
  const auto mapped = map_features(mapper, in.features());
  const auto acts = concept_activations(mapped, concepts);
  // Group by label when available, otherwise by the CBM prediction.
  const auto labels = in.labels();
  const auto groups = labels ? *labels : argmax_rows(logits_from_activations(acts, build_concept_classifier(concepts, head)));

  json classes = json::array();
  for (std::size_t k = 0; k < head.num_classes(); ++k) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < groups.size(); ++i)
      if (groups[i] == k) rows.push_back(i);
    const auto freq = global_class_concepts(gather_rows(acts, rows), top_k);
    std::vector<float> f(freq.begin(), freq.end());
    json top = json::array();
    for (auto z : top_k_indices(f, top_n))
      if (freq[z] > 0.0) top.push_back({{"concept", concepts.names[z]}, {"frequency", freq[z]}});
    classes.push_back({{"class", head.class_names[k]}, {"n_images", rows.size()}, {"concepts", top}});
  }
  json j = {{"grouped_by", labels ? "label" : "prediction"}, {"top_k_per_image", top_k}, {"classes", classes},
            {"filter_report", report}};
  emit(c, j, [&] {
    for (const auto& cls : classes) {
      std::printf("%s (%zu images):", cls["class"].get<std::string>().c_str(), cls["n_images"].get<std::size_t>());
      for (const auto& e : cls["concepts"])
        std::printf(" %s %.3f,", e["concept"].get<std::string>().c_str(), e["frequency"].get<double>());
      std::printf("\n");
    }
  });
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_explain(const Common& c, bool filter, std::size_t index, std::optional<std::size_t> cls, std::size_t top_n) {
  const auto in = load_inputs(c.manifest);
  require(!c.checkpoint.empty(), ErrorKind::invalid_argument, "explain: --checkpoint is required");
  const auto mapper = load_checked_mapper(c.checkpoint, in.manifest.dims);
  const auto [concepts, report] = prepared_concepts(in, filter);
  const auto head = in.head();
  const auto features = in.features();
  require(index < features.rows(), ErrorKind::invalid_argument,
          "explain: sample index " + std::to_string(index) + " out of range");
  const auto row = slice_rows(features, index, index + 1);
  const auto acts = concept_activations(map_features(mapper, row), concepts);
  const auto classifier = build_concept_classifier(concepts, head);
  const auto logits = logits_from_activations(acts, classifier);
  const std::size_t predicted = argmax(logits.row(0));
  const auto ex = explain_prediction(acts.row(0), classifier, cls.value_or(predicted), top_n);

  json entries = json::array();
  for (const auto& e : ex.entries)
    entries.push_back({{"concept", e.name},
                       {"index", e.concept_index},
                       {"activation", e.activation},
                       {"weight", e.weight},
                       {"importance", e.importance}});
  json j = {{"sample", index},
            {"predicted_class", head.class_names[predicted]},
            {"explained_class", head.class_names[ex.class_index]},
            {"logit", ex.logit},
            {"concepts", entries},
            {"filter_report", report}};
  emit(c, j, [&] {
    std::printf("sample %zu, predicted %s, explaining %s (logit %.4f)\n", index, head.class_names[predicted].c_str(),
                head.class_names[ex.class_index].c_str(), ex.logit);
    std::printf("%-30s %-10s %-10s %-10s\n", "concept", "activation", "weight", "importance");
    for (const auto& e : ex.entries)
      std::printf("%-30s %-10.4f %-10.4f %-10.4f\n", e.name.c_str(), e.activation, e.weight, e.importance);
  });
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_filter(const Common& c, const std::string& exclusions_override) {
  const auto in = load_inputs(c.manifest);
  const auto concepts = in.concepts();
  const auto excl = exclusions_override.empty() ? in.exclusions() : read_exclusions(exclusions_override);
  const auto res = filter_concepts(concepts, in.manifest.class_names, excl);
  json removed = json::array();
  for (const auto& r : res.report.removed) removed.push_back({{"name", r.name}, {"reason", to_string(r.reason)}});
  json j = {{"input_count", res.report.input_count},
            {"kept_count", res.report.kept_count},
            {"removed_count", res.report.removed_count()},
            {"removed", removed},
            {"kept", res.concepts.names}};
  if (!c.out.empty() && fs::path(c.out).extension() != ".json") {
    const fs::path dir = c.out;
    fs::create_directories(dir);
    io::write_tensor(dir / "concept_embeddings.tukt", res.concepts.C);
    io::write_lines(dir / "concept_names.txt", res.concepts.names);
    io::write_json(dir / "filter_report.json", j);
  }
  emit(c, j, [&] {
    std::printf("kept %zu of %zu concepts\n", res.report.kept_count, res.report.input_count);
    for (const auto& r : res.report.removed)
      std::printf("  removed %-30s %s\n", r.name.c_str(), std::string(to_string(r.reason)).c_str());
  });
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_intervene(const Common& c, const std::string& spec_path, bool filter) {
  const auto in = load_inputs(c.manifest);
  require(!c.checkpoint.empty(), ErrorKind::invalid_argument, "intervene: --checkpoint is required");
  require(!spec_path.empty(), ErrorKind::invalid_argument, "intervene: --spec is required");
  const auto mapper = load_checked_mapper(c.checkpoint, in.manifest.dims);
  const auto [concepts, report] = prepared_concepts(in, filter);
  const auto spec = parse_intervention_spec(io::read_json(spec_path), concepts.names, in.manifest.class_names);
  const auto labels = in.labels();
  require(labels.has_value(), ErrorKind::missing_role, "manifest: missing role 'labels'");
  const auto classifier = build_concept_classifier(concepts, in.head());
  const auto r = run_intervention_eval(in.features(), mapper, concepts, classifier, *labels, spec);
  json j = {{"mode", to_string(r.mode)},
            {"scope", spec.per_class ? "per_class" : "global"},
            {"keep_scale", spec.keep_scale},
            {"n_samples", r.n_samples},
            {"before", r.accuracy_before},
            {"after", r.accuracy_after},
            {"delta", r.delta},
            {"filter_report", report}};
  emit(c, j, [&] {
    std::printf("%-8s %-8s %-8s %-8s\n", "mode", "before", "after", "delta");
    std::printf("%-8s %-8s %-8s %-8s\n", std::string(to_string(r.mode)).c_str(), pct(r.accuracy_before).c_str(),
                pct(r.accuracy_after).c_str(), num(r.delta).c_str());
  });
  return 0;
}

int cmd_ablate(const Common& c, const std::string& mode_name) {
  const auto in = load_inputs(c.manifest);
  require(!c.checkpoint.empty(), ErrorKind::invalid_argument, "ablate: --checkpoint is required");
  const auto mapper = load_checked_mapper(c.checkpoint, in.manifest.dims);
  AblationSpec spec;
  spec.mode = parse_ablation_mode(mode_name);
  spec.seed = derive_seed(c.seed, SeedStream::ablation);
  const auto r = run_ablation(in.features(), mapper, in.head(), in.head_weights(), in.labels(), spec);
  const double chance = 1.0 / static_cast<double>(in.manifest.dims.K);
  json j = {{"mode", to_string(r.mode)},
            {"n_samples", r.n_samples},
            {"before", r.agreement_before},
            {"after", r.agreement_after},
            {"delta", 100.0 * (r.agreement_after - r.agreement_before)},
            {"agreement_with_unablated", r.agreement_with_unablated},
            {"top1_before", opt_json(r.top1_before)},
            {"top1_after", opt_json(r.top1_after)},
            {"chance", chance}};
  emit(c, j, [&] {
    std::printf("%-18s %-8s %-8s %-8s\n", "mode", "before", "after", "delta");
    std::printf("%-18s %-8s %-8s %-8s\n", std::string(to_string(r.mode)).c_str(), pct(r.agreement_before).c_str(),
                pct(r.agreement_after).c_str(), num(100.0 * (r.agreement_after - r.agreement_before)).c_str());
  });
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_selftest(const Common& c) {
  const auto results = selftest::run_all();
  json arr = json::array();
  bool all = true;
  for (const auto& r : results) {
    arr.push_back({{"name", r.name}, {"pass", r.pass}, {"detail", r.detail}});
    all = all && r.pass;
  }
  emit(c, {{"passed", all}, {"checks", arr}}, [&] {
    for (const auto& r : results) std::printf("%s %-28s %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
  });
  return all ? 0 : 1;
}

// ---------------------------------------------------------------------------

/// Writes a synthetic dataset directory with manifest.json.
///   teacher: the synthetic distillation task (train rows then holdout rows),
///            a random concept set and a suggested train_config.json.
///   filter:  the tiger-shark concept-filter example.
int cmd_make_fixture(const Common& c, const std::string& kind) {
  require(!c.out.empty(), ErrorKind::invalid_argument, "make-fixture: --out <dir> is required");
  const fs::path dir = c.out;
  fs::create_directories(dir);
  const std::uint64_t seed = c.seed_set ? c.seed : 7;
  io::Manifest m;
  m.prompt_template = "an image of a {}";
  m.split = "synthetic";
  if (kind == "teacher") {
    const auto t = fixtures::make_teacher_task(seed);
    MatrixF feats(t.train_features.rows() + t.holdout_features.rows(), t.train_features.cols());
    std::copy(t.train_features.flat().begin(), t.train_features.flat().end(), feats.flat().begin());
    std::copy(t.holdout_features.flat().begin(), t.holdout_features.flat().end(),
              feats.flat().begin() + static_cast<std::ptrdiff_t>(t.train_features.size()));
    auto labels = t.train_labels;
    labels.insert(labels.end(), t.holdout_labels.begin(), t.holdout_labels.end());
    const auto concepts = fixtures::random_concepts(64, t.class_embeddings.cols(), derive_seed(seed, 1));

    io::write_tensor(dir / "features.tukt", feats);
    io::write_labels(dir / "labels.tukt", labels);
    io::write_tensor(dir / "head_weights.tukt", t.head_w);
    io::write_tensor(dir / "class_embeddings.tukt", t.class_embeddings);
    io::write_tensor(dir / "concept_embeddings.tukt", concepts.C);
    io::write_lines(dir / "concept_names.txt", concepts.names);
    // A second prompt template whose embeddings are a noisy copy.
    Rng rng(derive_seed(seed, 2));
    auto alt = t.class_embeddings;
    for (auto& v : alt.flat()) v += static_cast<float>(0.3 * rng.normal());
    io::write_tensor(dir / "class_embeddings_alt.tukt", fixtures::unit_rows(alt));
    m.template_class_embeddings["a photo of a {}"] = dir / "class_embeddings_alt.tukt";

    m.class_names = t.class_names;
    m.dims = {t.train_features.cols(), t.class_embeddings.cols(), t.class_names.size(), concepts.size()};
    m.paths = {{io::role::features, dir / "features.tukt"},
               {io::role::labels, dir / "labels.tukt"},
               {io::role::head_weights, dir / "head_weights.tukt"},
               {io::role::class_embeddings, dir / "class_embeddings.tukt"},
               {io::role::concept_embeddings, dir / "concept_embeddings.tukt"},
               {io::role::concept_names, dir / "concept_names.txt"}};
    // The holdout is the trailing fifth of the rows.
    auto cfg = fixtures::teacher_task_config(seed);
    cfg.holdout_fraction = static_cast<double>(t.holdout_features.rows()) / static_cast<double>(feats.rows());
    io::write_json(dir / "train_config.json", to_json(cfg));
  } else if (kind == "filter") {
    const auto f = fixtures::make_filter_fixture();
    io::write_tensor(dir / "concept_embeddings.tukt", f.concepts.C);
    io::write_lines(dir / "concept_names.txt", f.concepts.names);
    io::write_lines(dir / "exclusions.tsv", f.exclusion_lines);
    Rng rng(derive_seed(seed, 3));
    io::write_tensor(dir / "class_embeddings.tukt", fixtures::unit_rows(fixtures::gaussian(1, f.concepts.dim(), rng)));
    m.class_names = f.class_names;
    m.dims = {f.concepts.dim(), f.concepts.dim(), f.class_names.size(), f.concepts.size()};
    m.paths = {{io::role::class_embeddings, dir / "class_embeddings.tukt"},
               {io::role::concept_embeddings, dir / "concept_embeddings.tukt"},
               {io::role::concept_names, dir / "concept_names.txt"},
               {io::role::exclusions, dir / "exclusions.tsv"}};
  } else {
    throw Error(ErrorKind::invalid_argument, "make-fixture: unknown kind '" + kind + "' (teacher, filter)");
  }
  io::write_json(dir / "manifest.json", io::manifest_to_json(m, dir));
  json j = {{"manifest", (dir / "manifest.json").string()}, {"kind", kind}, {"seed", seed}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_prompts(const Common& c, const std::vector<std::string>& templates) {
  const auto in = load_inputs(c.manifest);
  auto list = templates;
  if (list.empty()) list.push_back(in.manifest.prompt_template);
  json j = json::object();
  for (const auto& t : list) j[t] = render_prompts(in.manifest.class_names, t);
  emit(c, j, [&] {
    for (const auto& t : list)
      for (const auto& p : j[t]) std::printf("%s\n", p.get<std::string>().c_str());
  });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TextUnlock: text-space classifiers and concept bottlenecks from frozen vision features"};
  app.require_subcommand(1);
  Common c;

  auto add_common = [&](CLI::App* sub, bool manifest = true, bool checkpoint = true) {
    if (manifest) sub->add_option("--manifest", c.manifest, "Manifest JSON")->required()->check(CLI::ExistingFile);
    if (checkpoint) sub->add_option("--checkpoint", c.checkpoint, "Checkpoint directory");
    sub->add_option("--format", c.format, "json or table")->check(CLI::IsMember({"json", "table"}));
    sub->add_option("--out", c.out, "Output path");
    sub->add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t s) { c.seed = s; c.seed_set = true; }, "Root seed");
  };

  TrainOverrides tov;
  auto* train = app.add_subcommand("train", "Train the mapper on a manifest");
  add_common(train, true, false);
  train->add_option("--config", tov.config, "TrainConfig JSON")->check(CLI::ExistingFile);
  train->add_option("--epochs", tov.epochs);
  train->add_option("--batch-size", tov.batch_size);
  train->add_option("--lr", tov.lr);
  train->add_option("--dropout", tov.dropout);
  train->add_option("--hidden-layers", tov.hidden_layers);
  train->add_option("--dim-out-factor", tov.dim_out_factor);
  train->add_option("--holdout-fraction", tov.holdout_fraction);
  train->add_flag("--no-shuffle", tov.no_shuffle);

  std::vector<std::string> templates;
  bool untrained = false;
  auto* eval = app.add_subcommand("eval", "Compare the text classifier with the original head");
  add_common(eval);
  eval->add_option("--template", templates, "Also score this prompt template (repeatable)");
  eval->add_flag("--untrained", untrained, "Use a freshly initialized mapper");

  bool filter = false, verify_gram = false;
  std::size_t block = kDefaultConceptBlock, top_k = 5, top_n = 10, index = 0;
  std::optional<std::size_t> cls;
  auto* cbm = app.add_subcommand("cbm", "Evaluate the concept bottleneck classifier");
  add_common(cbm);
  cbm->add_flag("--filter", filter, "Filter concepts against class names and exclusions");
  cbm->add_flag("--verify-gram-path", verify_gram, "Check the bottleneck against the gram route");
  cbm->add_option("--block-size", block, "Concepts per accumulation block");

  auto* discover = app.add_subcommand("discover", "Most frequent top concepts per class");
  add_common(discover);
  discover->add_flag("--filter", filter);
  discover->add_option("--top-k", top_k, "Top concepts per image");
  discover->add_option("--top-n", top_n, "Concepts reported per class");

  auto* explain = app.add_subcommand("explain", "Concept attribution for one sample");
  add_common(explain);
  explain->add_flag("--filter", filter);
  explain->add_option("--index", index, "Sample row")->required();
  explain->add_option("--class", cls, "Class index to explain (default: predicted)");
  explain->add_option("--top-n", top_n, "Concepts to list");

  std::string exclusions;
  auto* filt = app.add_subcommand("filter-concepts", "Filter the concept set of a manifest");
  add_common(filt, true, false);
  filt->add_option("--exclusions", exclusions, "Exclusion TSV (overrides the manifest)")->check(CLI::ExistingFile);

  std::string spec;
  auto* intervene = app.add_subcommand("intervene", "Concept intervention on the CBM");
  add_common(intervene);
  intervene->add_option("--spec", spec, "Intervention spec JSON")->check(CLI::ExistingFile);
  intervene->add_flag("--filter", filter);

  std::string mode = "mean_feature";
  auto* ablate = app.add_subcommand("ablate", "Feature or weight ablation of the mapper");
  add_common(ablate);
  ablate->add_option("--mode", mode, "mean_feature, random_feature, shuffled_feature or random_weights");

  auto* self = app.add_subcommand("selftest", "Run the property suite on built-in fixtures");
  add_common(self, false, false);

  std::string kind = "teacher";
  auto* mk = app.add_subcommand("make-fixture", "Write a synthetic dataset with a manifest");
  add_common(mk, false, false);
  mk->add_option("--kind", kind, "teacher or filter");

  auto* prompts = app.add_subcommand("prompts", "Render class prompts for embedding");
  add_common(prompts, true, false);
  prompts->add_option("--template", templates, "Template (repeatable; default: the manifest's)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*train) return cmd_train(c, tov);
    if (*eval) return cmd_eval(c, templates, untrained);
    if (*cbm) return cmd_cbm(c, filter, verify_gram, block);
    if (*discover) return cmd_discover(c, filter, top_k, top_n);
    if (*explain) return cmd_explain(c, filter, index, cls, top_n);
    if (*filt) return cmd_filter(c, exclusions);
    if (*intervene) return cmd_intervene(c, spec, filter);
    if (*ablate) return cmd_ablate(c, mode);
    if (*self) return cmd_selftest(c);
    if (*mk) return cmd_make_fixture(c, kind);
    if (*prompts) return cmd_prompts(c, templates);
  } catch (const Error& e) {
    print_error(to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
  return 1;
}
