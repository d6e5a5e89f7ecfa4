#include "doctest.h"

#include <fstream>
#include <random>

#include "bpm/activation_store.hpp"
#include "fixtures.hpp"

using namespace bpm;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvariantViolation;
}

ActivationContainer small(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n;
  std::vector<std::string> ids;
  std::vector<float> data;
  for (std::size_t i = 0; i < rows; ++i) ids.push_back("s" + std::to_string(i));
  for (std::size_t i = 0; i < rows * cols; ++i) data.push_back(n(rng));
  return ActivationContainer("net", "penultimate", ContainerKind::Activations, ids, cols, data);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << s;
}

}  // namespace

TEST_CASE("container layout") {
  const auto dir = fixtures::scratch_dir("store_layout");
  const auto c = small(3, 2, 1);
  write_container(c, dir);
  CHECK(fs::file_size(dir / "data.f32") == 24);
  const auto meta = slurp(dir / "meta");
  for (const char* key : {"format_version", "model_id", "layer_tag", "kind", "n_stimuli", "n_units", "stimulus_ids",
                          "blob_sha256"})
    CHECK(meta.find(key) != std::string::npos);

  // little-endian float32, row-major
  const auto blob = slurp(dir / "data.f32");
  std::uint32_t bits = 0;
  for (int k = 3; k >= 0; --k) bits = (bits << 8) | static_cast<unsigned char>(blob[static_cast<std::size_t>(k)]);
  CHECK(std::bit_cast<float>(bits) == c.row(0)[0]);

  const auto back = read_container(dir);
  CHECK(back == c);
}

TEST_CASE("container invariants") {
  const std::vector<std::string> ids{"a", "b"};
  CHECK(code_of([&] {
          ActivationContainer("m", "l", ContainerKind::ClassProbabilities, ids, 2, {0.5f, 0.5f, 0.4f, 0.4f});
        }) == ErrorCode::InvariantViolation);
  CHECK(code_of([&] {
          ActivationContainer("m", "l", ContainerKind::ClassProbabilities, ids, 2, {1.5f, -0.5f, 0.5f, 0.5f});
        }) == ErrorCode::InvariantViolation);
  CHECK(code_of([&] { ActivationContainer("m", "l", ContainerKind::Activations, ids, 2, {1, 2, 3}); }) ==
        ErrorCode::InvariantViolation);
  CHECK(code_of([&] {
          ActivationContainer("m", "l", ContainerKind::Activations, ids, 1, {1, std::numeric_limits<float>::infinity()});
        }) == ErrorCode::InvariantViolation);
  CHECK_NOTHROW(ActivationContainer("m", "l", ContainerKind::ClassProbabilities, ids, 2, {0.25f, 0.75f, 1.0f, 0.0f},
                                    {{0, "cat"}, {1, "dog"}}));
}

TEST_CASE("label map round trip") {
  const auto dir = fixtures::scratch_dir("store_labels");
  const ActivationContainer c("m", "head", ContainerKind::ClassProbabilities, {"x", "y"}, 3,
                              {0.2f, 0.3f, 0.5f, 1.0f, 0.0f, 0.0f}, {{0, "cat"}, {1, "hot dog"}, {2, "ship"}});
  write_container(c, dir);
  CHECK(read_container(dir) == c);
}

TEST_CASE("corruption is detected") {
  const auto dir = fixtures::scratch_dir("store_corrupt");
  write_container(small(4, 5, 2), dir);
  const auto blob = slurp(dir / "data.f32");
  const auto meta = slurp(dir / "meta");

  spit(dir / "data.f32", blob.substr(0, blob.size() - 4));
  CHECK(code_of([&] { read_container(dir); }) == ErrorCode::ShapeMismatch);

  auto flipped = blob;
  flipped[7] = static_cast<char>(flipped[7] ^ 0x01);
  spit(dir / "data.f32", flipped);
  CHECK(code_of([&] { read_container(dir); }) == ErrorCode::ChecksumMismatch);

  spit(dir / "data.f32", blob);
  auto v2 = meta;
  v2.replace(v2.find("format_version = 1"), 18, "format_version = 2");
  spit(dir / "meta", v2);
  CHECK(code_of([&] { read_container(dir); }) == ErrorCode::UnknownVersion);

  spit(dir / "meta", meta);
  CHECK_NOTHROW(read_container(dir));
  CHECK(code_of([&] { read_container(dir / "nowhere"); }) == ErrorCode::IoError);
}

TEST_CASE("sha256 known answer") {
  const std::string abc = "abc";
  CHECK(sha256_hex({reinterpret_cast<const unsigned char*>(abc.data()), abc.size()}) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("alignment") {
  const auto set = fixtures::small_set(PropertyId::MirrorConfusion, 3, 2);
  auto ids = fixtures::ids_of(set);
  std::reverse(ids.begin(), ids.end());
  std::vector<float> data(ids.size(), 1.0f);
  const ActivationContainer c("m", "l", ContainerKind::Activations, ids, 1, data);
  const auto a = align(c, set);
  for (std::size_t i = 0; i < set.manifest.size(); ++i) CHECK(c.stimulus_ids()[a.row_of_record[i]] == set.manifest[i].stimulus_id);

  auto missing = ids;
  missing.pop_back();
  const ActivationContainer short_c("m", "l", ContainerKind::Activations, missing, 1,
                                    std::vector<float>(missing.size(), 1.0f));
  try {
    align(short_c, set);
    FAIL("expected MissingStimulus");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingStimulus);
    CHECK(e.detail().find(ids.back()) != std::string::npos);
  }

  auto dup = ids;
  dup.push_back(ids.front());
  const ActivationContainer dup_c("m", "l", ContainerKind::Activations, dup, 1, std::vector<float>(dup.size(), 1.0f));
  CHECK(code_of([&] { align(dup_c, set); }) == ErrorCode::DuplicateStimulus);
}
