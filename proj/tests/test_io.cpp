#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "textunlock/io.hpp"

using namespace textunlock;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("textunlock_test_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                        "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no exception";
  return ErrorKind::io;
}

void write_json_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

}  // namespace

TEST(Io, OneByOneTensorIs28Bytes) {
  const auto bytes = io::encode_tensor(MatrixF{{1.0f}});
  ASSERT_EQ(bytes.size(), 28u);
  const std::vector<std::uint8_t> header = {'T', 'U', 'K', 'T', 1, 0, 1, 2, 1, 0, 0, 0, 0, 0, 0, 0,
                                            1, 0, 0, 0, 0, 0, 0, 0};
  EXPECT_TRUE(std::equal(header.begin(), header.end(), bytes.begin()));
  // 1.0f little-endian
  EXPECT_EQ(bytes[24], 0x00);
  EXPECT_EQ(bytes[25], 0x00);
  EXPECT_EQ(bytes[26], 0x80);
  EXPECT_EQ(bytes[27], 0x3F);
}

TEST(Io, RoundTripThroughFile) {
  TempDir d;
  MatrixF m{{1.5f, -0.0f, 3.25e-40f}, {1e30f, -7.0f, 0.1f}};
  io::write_tensor(d.path / "m.tukt", m);
  const auto back = io::read_tensor(d.path / "m.tukt");
  EXPECT_EQ(std::memcmp(back.flat().data(), m.flat().data(), m.size() * 4), 0);
  const auto h = io::read_tensor_header(d.path / "m.tukt");
  EXPECT_EQ(h.rows, 2u);
  EXPECT_EQ(h.cols, 3u);
}

TEST(Io, EmptyTensorRoundTrips) {
  const auto bytes = io::encode_tensor(MatrixF(0, 5));
  EXPECT_EQ(bytes.size(), io::kHeaderBytes);
  const auto m = io::decode_tensor(bytes);
  EXPECT_EQ(m.rows(), 0u);
  EXPECT_EQ(m.cols(), 5u);
}

TEST(Io, MalformedInputsAreRejectedWithTheirKind) {
  const auto good = io::encode_tensor(MatrixF{{1, 2}, {3, 4}});
  auto with = [&](auto f) {
    auto b = good;
    f(b);
    return kind_of([&] { (void)io::decode_tensor(b); });
  };
  EXPECT_EQ(with([](auto& b) { b[3] = 'X'; }), ErrorKind::bad_magic);
  EXPECT_EQ(with([](auto& b) { b[4] = 9; }), ErrorKind::bad_version);
  EXPECT_EQ(with([](auto& b) { b[6] = 0; }), ErrorKind::bad_dtype);
  EXPECT_EQ(with([](auto& b) { b[7] = 1; }), ErrorKind::bad_rank);
  EXPECT_EQ(with([](auto& b) { b.resize(20); }), ErrorKind::truncated);
  EXPECT_EQ(with([](auto& b) { b.resize(b.size() - 2); }), ErrorKind::truncated);
  EXPECT_EQ(with([](auto& b) { b.push_back(1); }), ErrorKind::truncated);
  EXPECT_EQ(with([](auto& b) { b[27] = 0x7F, b[26] = 0x80; }), ErrorKind::non_finite);  // +inf
  EXPECT_EQ(with([](auto& b) { b[27] = 0x7F, b[26] = 0xC0; }), ErrorKind::non_finite);  // NaN
  EXPECT_EQ(kind_of([] { (void)io::read_tensor("/nonexistent/x.tukt"); }), ErrorKind::io);
}

TEST(Io, LabelsRoundTripAndValidate) {
  TempDir d;
  io::LabelVector y = {0, 4, 2, 2};
  io::write_labels(d.path / "y.tukt", y);
  EXPECT_EQ(io::read_labels(d.path / "y.tukt", 5), y);
  EXPECT_EQ(kind_of([&] { (void)io::read_labels(d.path / "y.tukt", 4); }), ErrorKind::invalid_argument);
  EXPECT_EQ(kind_of([] { (void)io::labels_from_matrix(MatrixF{{0.5f}}, 3); }), ErrorKind::invalid_argument);
  EXPECT_EQ(kind_of([] { (void)io::labels_from_matrix(MatrixF{{0, 1}}, 3); }), ErrorKind::dim_mismatch);
}

TEST(Io, LinesStripCarriageReturns) {
  TempDir d;
  std::ofstream(d.path / "names.txt", std::ios::binary) << "tiger\r\nshark fin\nocean";
  EXPECT_EQ(io::read_lines(d.path / "names.txt"), (std::vector<std::string>{"tiger", "shark fin", "ocean"}));
  io::write_lines(d.path / "out.txt", {"a", "b c"});
  EXPECT_EQ(io::read_lines(d.path / "out.txt"), (std::vector<std::string>{"a", "b c"}));
}

TEST(Io, TemplatePlaceholder) {
  EXPECT_NO_THROW(io::validate_template("an image of a {}"));
  EXPECT_EQ(kind_of([] { io::validate_template("an image"); }), ErrorKind::bad_template);
  EXPECT_EQ(kind_of([] { io::validate_template("{} and {}"); }), ErrorKind::bad_template);
}

namespace {

/// A small consistent dataset: n=3, m=2, K=2, Z=3, N=4.
fs::path write_dataset(const fs::path& dir) {
  io::write_tensor(dir / "f.tukt", MatrixF(4, 3, 1.0f));
  io::write_labels(dir / "y.tukt", {0, 1, 1, 0});
  io::write_tensor(dir / "w.tukt", MatrixF(3, 2, 0.5f));
  io::write_tensor(dir / "u.tukt", MatrixF{{1, 0}, {0, 1}});
  io::write_tensor(dir / "c.tukt", MatrixF(3, 2, 1.0f));
  io::write_lines(dir / "names.txt", {"x", "y", "z"});
  write_json_text(dir / "manifest.json", R"({
    "class_names": ["cat", "dog"],
    "prompt_template": "an image of a {}",
    "dims": {"n": 3, "m": 2, "K": 2, "Z": 3},
    "split": "val",
    "paths": {"features": "f.tukt", "labels": "y.tukt", "head_weights": "w.tukt",
              "class_embeddings": "u.tukt", "concept_embeddings": "c.tukt", "concept_names": "names.txt"}
  })");
  return dir / "manifest.json";
}

}  // namespace

TEST(Io, ManifestLoadsAndResolvesPaths) {
  TempDir d;
  const auto m = io::load_manifest(write_dataset(d.path));
  EXPECT_EQ(m.class_names, (std::vector<std::string>{"cat", "dog"}));
  EXPECT_EQ(m.num_samples, 4u);
  EXPECT_EQ(m.path(io::role::features), d.path / "f.tukt");
  EXPECT_FALSE(m.has(io::role::exclusions));
  EXPECT_EQ(kind_of([&] { (void)m.path(io::role::exclusions); }), ErrorKind::missing_role);
  try {
    (void)m.path(io::role::exclusions);
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("manifest: missing role"), std::string::npos);
  }
  // Serializing and re-parsing gives the same manifest.
  const auto again = io::parse_manifest(io::manifest_to_json(m, d.path), d.path);
  EXPECT_EQ(again.paths, m.paths);
  EXPECT_EQ(again.class_names, m.class_names);
}

TEST(Io, ManifestShapeMismatchesAreDetected) {
  TempDir d;
  const auto path = write_dataset(d.path);
  io::write_tensor(d.path / "w.tukt", MatrixF(3, 3, 0.5f));
  EXPECT_EQ(kind_of([&] { (void)io::load_manifest(path); }), ErrorKind::dim_mismatch);
  write_dataset(d.path);
  io::write_lines(d.path / "names.txt", {"x", "y"});
  EXPECT_EQ(kind_of([&] { (void)io::load_manifest(path); }), ErrorKind::dim_mismatch);
  write_dataset(d.path);
  io::write_labels(d.path / "y.tukt", {0, 1});
  EXPECT_EQ(kind_of([&] { (void)io::load_manifest(path); }), ErrorKind::dim_mismatch);
}

TEST(Io, ManifestStructuralErrors) {
  TempDir d;
  const auto p = d.path / "m.json";
  write_json_text(p, R"({"class_names": ["a"], "prompt_template": "{}", "dims": {"n": 1, "m": 1, "K": 2}})");
  EXPECT_EQ(kind_of([&] { (void)io::load_manifest(p); }), ErrorKind::dim_mismatch);
  write_json_text(p, R"({"class_names": ["a"], "prompt_template": "none", "dims": {"n": 1, "m": 1, "K": 1}})");
  EXPECT_EQ(kind_of([&] { (void)io::load_manifest(p); }), ErrorKind::bad_template);
  write_json_text(p, R"({"class_names": ["a"], "prompt_template": "{}", "dims": {"n": 1, "m": 1, "K": 1},
                        "paths": {"pictures": "x"}})");
  EXPECT_EQ(kind_of([&] { (void)io::load_manifest(p); }), ErrorKind::bad_manifest);
  write_json_text(p, "{not json");
  EXPECT_EQ(kind_of([&] { (void)io::load_manifest(p); }), ErrorKind::bad_manifest);
}
