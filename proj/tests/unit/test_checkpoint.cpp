#include <gtest/gtest.h>

#include <filesystem>
#include <cstring>
#include <fstream>

#include "argmine/checkpoint.hpp"
#include "argmine/error.hpp"

using namespace argmine;
using namespace argmine::nn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("argmine_ckpt_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ParameterStore make_store(std::uint64_t seed) {
  Rng rng(seed);
  ParameterStore s;
  s.add_uniform("a.weight", {3, 2}, 3, rng);
  s.add_normal("b", {5}, 1.0, rng);
  s.add_constant("c", {1}, -0.0);
  return s;
}

std::string bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitExact) {
  const fs::path dir = scratch("roundtrip");
  ParameterStore a = make_store(1);
  a.get("b").mutable_values()[2] = 1.0 / 3.0;
  save_parameters(a, dir / "p.bin");
  ParameterStore b = make_store(2);
  load_parameters(b, dir / "p.bin");
  for (std::size_t k = 0; k < a.size(); ++k) {
    const auto va = a.entries()[k].second.values(), vb = b.entries()[k].second.values();
    ASSERT_EQ(va.size(), vb.size());
    EXPECT_EQ(std::memcmp(va.data(), vb.data(), va.size() * sizeof(double)), 0);
  }
}

TEST(Checkpoint, LayoutIsLittleEndianWithMagic) {
  const fs::path dir = scratch("layout");
  ParameterStore s;
  s.add_constant("w", {2}, 1.0);
  save_parameters(s, dir / "p.bin");
  const std::string b = bytes(dir / "p.bin");
  // magic, count, name length, name, rank, extent, two doubles
  ASSERT_EQ(b.size(), 8u + 8 + 8 + 1 + 8 + 8 + 16);
  EXPECT_EQ(b.substr(0, 8), "AMPARAM1");
  EXPECT_EQ(static_cast<unsigned char>(b[8]), 1u);
  EXPECT_EQ(b[24], 'w');
  // 1.0 = 0x3FF0000000000000, least significant byte first
  EXPECT_EQ(static_cast<unsigned char>(b[41 + 7]), 0x3Fu);
  EXPECT_EQ(static_cast<unsigned char>(b[41 + 6]), 0xF0u);
}

TEST(Checkpoint, SavingTwiceGivesIdenticalBytes) {
  const fs::path dir = scratch("twice");
  save_parameters(make_store(3), dir / "a.bin");
  save_parameters(make_store(3), dir / "b.bin");
  EXPECT_EQ(bytes(dir / "a.bin"), bytes(dir / "b.bin"));
}

TEST(Checkpoint, MismatchesAreRejected) {
  const fs::path dir = scratch("mismatch");
  save_parameters(make_store(4), dir / "p.bin");

  Rng rng(0);
  ParameterStore renamed;
  renamed.add_uniform("a.weight", {3, 2}, 3, rng);
  renamed.add_normal("B", {5}, 1.0, rng);
  renamed.add_constant("c", {1}, 0.0);
  EXPECT_THROW(load_parameters(renamed, dir / "p.bin"), CheckpointError);

  ParameterStore reshaped;
  reshaped.add_uniform("a.weight", {2, 3}, 3, rng);
  reshaped.add_normal("b", {5}, 1.0, rng);
  reshaped.add_constant("c", {1}, 0.0);
  EXPECT_THROW(load_parameters(reshaped, dir / "p.bin"), CheckpointError);

  ParameterStore shorter;
  shorter.add_uniform("a.weight", {3, 2}, 3, rng);
  EXPECT_THROW(load_parameters(shorter, dir / "p.bin"), CheckpointError);
}

TEST(Checkpoint, CorruptFilesAreRejected) {
  const fs::path dir = scratch("corrupt");
  save_parameters(make_store(5), dir / "p.bin");
  std::string b = bytes(dir / "p.bin");
  {
    std::ofstream out(dir / "trunc.bin", std::ios::binary);
    out << b.substr(0, b.size() - 3);
  }
  ParameterStore s = make_store(6);
  EXPECT_THROW(load_parameters(s, dir / "trunc.bin"), CheckpointError);
  b[0] = 'X';
  {
    std::ofstream out(dir / "magic.bin", std::ios::binary);
    out << b;
  }
  EXPECT_THROW(load_parameters(s, dir / "magic.bin"), CheckpointError);
  EXPECT_THROW(load_parameters(s, dir / "missing.bin"), CheckpointError);
}

TEST(Fnv1a, KnownVectors) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a("foobar"), 0x85944171f73967e8ULL);
}

TEST(JsonFiles, RoundTrip) {
  const fs::path dir = scratch("json");
  const nlohmann::json j = {{"x", 1.25}, {"y", {1, 2}}};
  write_json(dir / "a.json", j);
  EXPECT_EQ(read_json(dir / "a.json"), j);
  EXPECT_ANY_THROW(read_json(dir / "nope.json"));
}
