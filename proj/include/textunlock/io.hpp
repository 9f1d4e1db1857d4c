#pragma once

// TUKT tensor files, label vectors, concept-name lists and experiment
// manifests.
//
// TUKT layout (all integers little-endian):
//   offset 0   magic "TUKT"
//   offset 4   u16 format version (1)
//   offset 6   u8  dtype code (1 = f32)
//   offset 7   u8  rank (2)
//   offset 8   u64 rows
//   offset 16  u64 cols
//   offset 24  rows*cols f32 values, row-major

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "textunlock/error.hpp"
#include "textunlock/matrix.hpp"

namespace textunlock::io {

namespace fs = std::filesystem;

inline constexpr char kMagic[4] = {'T', 'U', 'K', 'T'};
inline constexpr std::uint16_t kFormatVersion = 1;
inline constexpr std::uint8_t kDtypeF32 = 1;
inline constexpr std::uint8_t kRank2 = 2;
inline constexpr std::size_t kHeaderBytes = 24;

namespace detail {

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename U>
U get_le(const std::uint8_t* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
  return v;
}

inline std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::io, "cannot open '" + path.string() + "' for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  require(!in.bad(), ErrorKind::io, "read failed on '" + path.string() + "'");
  return bytes;
}

inline void write_file(const fs::path& path, const void* data, std::size_t len) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::io, "cannot open '" + path.string() + "' for writing");
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
  out.flush();
  require(static_cast<bool>(out), ErrorKind::io, "write failed on '" + path.string() + "'");
}

}  // namespace detail

struct TensorHeader {
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
};

inline std::vector<std::uint8_t> encode_tensor(const MatrixF& m) {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + 4 * m.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  detail::put_le<std::uint16_t>(out, kFormatVersion);
  out.push_back(kDtypeF32);
  out.push_back(kRank2);
  detail::put_le<std::uint64_t>(out, m.rows());
  detail::put_le<std::uint64_t>(out, m.cols());
  for (float v : m.flat()) detail::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

/// Parses and validates the 24-byte header; `total_bytes` is the full buffer
/// length so truncation is caught here too.
inline TensorHeader decode_header(const std::uint8_t* p, std::size_t total_bytes,
                                  const std::string& where = "tensor") {
  require(total_bytes >= 4 && std::memcmp(p, kMagic, 4) == 0, ErrorKind::bad_magic,
          where + ": bad magic (expected \"TUKT\")");
  require(total_bytes >= kHeaderBytes, ErrorKind::truncated, where + ": truncated header");
  const auto version = detail::get_le<std::uint16_t>(p + 4);
  require(version == kFormatVersion, ErrorKind::bad_version,
          where + ": unsupported format version " + std::to_string(version));
  require(p[6] == kDtypeF32, ErrorKind::bad_dtype,
          where + ": unsupported dtype code " + std::to_string(p[6]));
  require(p[7] == kRank2, ErrorKind::bad_rank, where + ": unsupported rank " + std::to_string(p[7]));
  TensorHeader h{detail::get_le<std::uint64_t>(p + 8), detail::get_le<std::uint64_t>(p + 16)};
  require(h.cols == 0 || h.rows <= (UINT64_MAX / 4) / h.cols, ErrorKind::truncated,
          where + ": shape overflows");
  return h;
}

inline MatrixF decode_tensor(std::span<const std::uint8_t> bytes, const std::string& where = "tensor") {
  const auto h = decode_header(bytes.data(), bytes.size(), where);
  const std::uint64_t expect = kHeaderBytes + 4 * h.rows * h.cols;
  require(bytes.size() >= expect, ErrorKind::truncated,
          where + ": truncated payload (header claims " + shape_str(h.rows, h.cols) + ")");
  require(bytes.size() == expect, ErrorKind::truncated, where + ": trailing bytes after payload");
  std::vector<float> data(h.rows * h.cols);
  const std::uint8_t* p = bytes.data() + kHeaderBytes;
  for (std::size_t i = 0; i < data.size(); ++i, p += 4) {
    data[i] = std::bit_cast<float>(detail::get_le<std::uint32_t>(p));
    require(std::isfinite(data[i]), ErrorKind::non_finite,
            where + ": non-finite value at flat index " + std::to_string(i));
  }
  return MatrixF(h.rows, h.cols, std::move(data));
}

inline void write_tensor(const fs::path& path, const MatrixF& m) {
  const auto bytes = encode_tensor(m);
  detail::write_file(path, bytes.data(), bytes.size());
}

inline MatrixF read_tensor(const fs::path& path) {
  const auto bytes = detail::read_file(path);
  return decode_tensor(bytes, path.string());
}

inline TensorHeader read_tensor_header(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::io, "cannot open '" + path.string() + "' for reading");
  std::uint8_t buf[kHeaderBytes] = {};
  in.read(reinterpret_cast<char*>(buf), kHeaderBytes);
  return decode_header(buf, static_cast<std::size_t>(in.gcount()), path.string());
}

// ---------------------------------------------------------------------------
// Labels: an N x 1 TUKT tensor of integral class indices.

using LabelVector = std::vector<std::size_t>;

inline LabelVector labels_from_matrix(const MatrixF& m, std::size_t num_classes) {
  require(m.cols() == 1, ErrorKind::dim_mismatch, "labels: expected an N x 1 tensor");
  LabelVector out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const float v = m(i, 0);
    require(v >= 0.0f && v == std::floor(v), ErrorKind::invalid_argument,
            "labels: entry " + std::to_string(i) + " is not a class index");
    out[i] = static_cast<std::size_t>(v);
    require(out[i] < num_classes, ErrorKind::invalid_argument,
            "labels: entry " + std::to_string(i) + " >= K");
  }
  return out;
}

inline MatrixF labels_to_matrix(const LabelVector& labels) {
  MatrixF m(labels.size(), 1);
  for (std::size_t i = 0; i < labels.size(); ++i) m(i, 0) = static_cast<float>(labels[i]);
  return m;
}

inline LabelVector read_labels(const fs::path& path, std::size_t num_classes) {
  return labels_from_matrix(read_tensor(path), num_classes);
}

inline void write_labels(const fs::path& path, const LabelVector& labels) {
  write_tensor(path, labels_to_matrix(labels));
}

// ---------------------------------------------------------------------------
// Line files (concept names): UTF-8, one entry per line, LF-terminated.

inline std::vector<std::string> read_lines(const fs::path& path) {
  const auto bytes = detail::read_file(path);
  std::vector<std::string> out;
  std::string cur;
  for (std::uint8_t b : bytes) {
    if (b == '\n') {
      if (!cur.empty() && cur.back() == '\r') cur.pop_back();
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(b));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  std::string buf;
  for (const auto& l : lines) {
    buf += l;
    buf += '\n';
  }
  detail::write_file(path, buf.data(), buf.size());
}

inline nlohmann::json read_json(const fs::path& path) {
  const auto bytes = detail::read_file(path);
  try {
    return nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::bad_manifest, path.string() + ": " + e.what());
  }
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  const std::string s = j.dump(2) + "\n";
  detail::write_file(path, s.data(), s.size());
}

// ---------------------------------------------------------------------------
// Manifest

namespace role {
inline constexpr const char* features = "features";
inline constexpr const char* labels = "labels";
inline constexpr const char* head_weights = "head_weights";
inline constexpr const char* class_embeddings = "class_embeddings";
inline constexpr const char* concept_embeddings = "concept_embeddings";
inline constexpr const char* concept_names = "concept_names";
inline constexpr const char* exclusions = "exclusions";
}  // namespace role

inline const std::vector<std::string>& known_roles() {
  static const std::vector<std::string> roles = {
      role::features,           role::labels,        role::head_weights, role::class_embeddings,
      role::concept_embeddings, role::concept_names, role::exclusions};
  return roles;
}

struct Dims {
  std::size_t n = 0;  // visual feature dim
  std::size_t m = 0;  // text embedding dim
  std::size_t K = 0;  // classes
  std::size_t Z = 0;  // concepts (0 when no concept set is attached)
};

struct Manifest {
  std::vector<std::string> class_names;
  std::string prompt_template;
  std::map<std::string, fs::path> paths;  // resolved against the manifest directory
  /// Extra class-embedding files, one per alternative prompt template.
  std::map<std::string, fs::path> template_class_embeddings;
  Dims dims;
  std::string split;
  std::size_t num_samples = 0;  // rows of the features tensor, if present

  bool has(const std::string& r) const { return paths.count(r) != 0; }

  const fs::path& path(const std::string& r) const {
    auto it = paths.find(r);
    require(it != paths.end(), ErrorKind::missing_role, "manifest: missing role '" + r + "'");
    return it->second;
  }
};

inline std::size_t count_placeholders(const std::string& s) {
  std::size_t count = 0;
  for (auto pos = s.find("{}"); pos != std::string::npos; pos = s.find("{}", pos + 2)) ++count;
  return count;
}

inline void validate_template(const std::string& tmpl) {
  require(count_placeholders(tmpl) == 1, ErrorKind::bad_template,
          "prompt template must contain exactly one \"{}\" placeholder: \"" + tmpl + "\"");
}

namespace detail {

inline void check_header(const fs::path& p, const std::string& r, std::uint64_t rows,
                         std::uint64_t cols, bool check_rows = true) {
  const auto h = read_tensor_header(p);
  const bool ok = h.cols == cols && (!check_rows || h.rows == rows);
  require(ok, ErrorKind::dim_mismatch,
          "manifest: role '" + r + "' has shape " + shape_str(h.rows, h.cols) + ", expected " +
              (check_rows ? shape_str(rows, cols) : "?x" + std::to_string(cols)));
}

}  // namespace detail

inline Manifest parse_manifest(const nlohmann::json& j, const fs::path& base_dir) {
  Manifest m;
  try {
    require(j.is_object(), ErrorKind::bad_manifest, "manifest: top level must be an object");
    require(j.contains("class_names"), ErrorKind::bad_manifest, "manifest: missing 'class_names'");
    require(j.contains("prompt_template"), ErrorKind::bad_manifest, "manifest: missing 'prompt_template'");
    require(j.contains("dims"), ErrorKind::bad_manifest, "manifest: missing 'dims'");
    m.class_names = j.at("class_names").get<std::vector<std::string>>();
    m.prompt_template = j.at("prompt_template").get<std::string>();
    const auto& d = j.at("dims");
    m.dims.n = d.at("n").get<std::size_t>();
    m.dims.m = d.at("m").get<std::size_t>();
    m.dims.K = d.at("K").get<std::size_t>();
    m.dims.Z = d.value("Z", std::size_t{0});
    m.split = j.value("split", std::string{});
    if (j.contains("paths")) {
      for (const auto& [r, p] : j.at("paths").items()) {
        require(std::find(known_roles().begin(), known_roles().end(), r) != known_roles().end(),
                ErrorKind::bad_manifest, "manifest: unknown role '" + r + "'");
        m.paths[r] = base_dir / p.get<std::string>();
      }
    }
    if (j.contains("template_class_embeddings")) {
      for (const auto& [t, p] : j.at("template_class_embeddings").items())
        m.template_class_embeddings[t] = base_dir / p.get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::bad_manifest, std::string("manifest: ") + e.what());
  }

  validate_template(m.prompt_template);
  for (const auto& [t, p] : m.template_class_embeddings) validate_template(t);
  require(m.dims.n > 0 && m.dims.m > 0 && m.dims.K > 0, ErrorKind::bad_manifest,
          "manifest: dims n, m, K must be positive");
  require(m.class_names.size() == m.dims.K, ErrorKind::dim_mismatch,
          "manifest: dims.K = " + std::to_string(m.dims.K) + " but class_names has " +
              std::to_string(m.class_names.size()) + " entries");
  return m;
}

/// Cross-checks every referenced tensor header (and the concept-name line
/// count) against the declared dims.
inline void validate_manifest_files(Manifest& m) {
  const auto& d = m.dims;
  if (m.has(role::features)) {
    const auto h = read_tensor_header(m.path(role::features));
    require(h.cols == d.n, ErrorKind::dim_mismatch,
            "manifest: features have " + std::to_string(h.cols) + " columns, dims.n = " +
                std::to_string(d.n));
    m.num_samples = h.rows;
  }
  if (m.has(role::labels)) {
    const auto h = read_tensor_header(m.path(role::labels));
    require(h.cols == 1, ErrorKind::dim_mismatch, "manifest: labels must be N x 1");
    require(!m.has(role::features) || h.rows == m.num_samples, ErrorKind::dim_mismatch,
            "manifest: labels length differs from feature rows");
  }
  if (m.has(role::head_weights)) detail::check_header(m.path(role::head_weights), role::head_weights, d.n, d.K);
  if (m.has(role::class_embeddings))
    detail::check_header(m.path(role::class_embeddings), role::class_embeddings, d.K, d.m);
  for (const auto& [t, p] : m.template_class_embeddings)
    detail::check_header(p, "template_class_embeddings[" + t + "]", d.K, d.m);
  if (m.has(role::concept_embeddings))
    detail::check_header(m.path(role::concept_embeddings), role::concept_embeddings, d.Z, d.m);
  if (m.has(role::concept_names)) {
    const auto names = read_lines(m.path(role::concept_names));
    require(names.size() == d.Z, ErrorKind::dim_mismatch,
            "manifest: concept_names has " + std::to_string(names.size()) + " lines, dims.Z = " +
                std::to_string(d.Z));
  }
  if (m.has(role::exclusions))
    require(fs::exists(m.path(role::exclusions)), ErrorKind::io,
            "manifest: exclusions file '" + m.path(role::exclusions).string() + "' not found");
}

inline Manifest load_manifest(const fs::path& path) {
  const auto j = read_json(path);
  auto m = parse_manifest(j, path.parent_path());
  validate_manifest_files(m);
  return m;
}

/// Inverse of parse_manifest; paths are written relative to `base_dir`.
inline nlohmann::json manifest_to_json(const Manifest& m, const fs::path& base_dir) {
  nlohmann::json j;
  j["class_names"] = m.class_names;
  j["prompt_template"] = m.prompt_template;
  j["split"] = m.split;
  j["dims"] = {{"n", m.dims.n}, {"m", m.dims.m}, {"K", m.dims.K}, {"Z", m.dims.Z}};
  j["paths"] = nlohmann::json::object();
  for (const auto& [r, p] : m.paths) j["paths"][r] = fs::relative(p, base_dir).generic_string();
  if (!m.template_class_embeddings.empty()) {
    j["template_class_embeddings"] = nlohmann::json::object();
    for (const auto& [t, p] : m.template_class_embeddings)
      j["template_class_embeddings"][t] = fs::relative(p, base_dir).generic_string();
  }
  return j;
}

}  // namespace textunlock::io
