#include "argmine/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "argmine/error.hpp"

namespace argmine {

namespace {

constexpr char kMagic[8] = {'A', 'M', 'P', 'A', 'R', 'A', 'M', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw CheckpointError("truncated parameter file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void put_f64(std::ostream& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }
double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

}  // namespace

void save_parameters(const nn::ParameterStore& store, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write " + file.string());
  out.write(kMagic, sizeof kMagic);
  put_u64(out, store.size());
  for (const auto& [name, t] : store.entries()) {
    put_u64(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u64(out, t.ndim());
    for (std::size_t d : t.shape()) put_u64(out, d);
    for (double v : t.values()) put_f64(out, v);
  }
  if (!out) throw CheckpointError("write failed for " + file.string());
}

void load_parameters(nn::ParameterStore& store, const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw CheckpointError("cannot read " + file.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw CheckpointError(file.string() + " is not a parameter file");
  }
  const std::uint64_t count = get_u64(in);
  if (count != store.size()) {
    throw CheckpointError("parameter count " + std::to_string(count) + " != expected " +
                          std::to_string(store.size()));
  }
  for (const auto& [name, t] : store.entries()) {
    const std::uint64_t len = get_u64(in);
    if (len > 4096) throw CheckpointError("corrupt parameter name length");
    std::string stored(len, '\0');
    if (!in.read(stored.data(), static_cast<std::streamsize>(len))) throw CheckpointError("truncated parameter file");
    if (stored != name) throw CheckpointError("parameter " + stored + " found where " + name + " was expected");
    nn::Shape shape(get_u64(in));
    for (auto& d : shape) d = get_u64(in);
    if (shape != t.shape()) {
      throw CheckpointError("parameter " + name + " has shape " + nn::to_string(shape) + ", expected " +
                            nn::to_string(t.shape()));
    }
    nn::Tensor target = t;
    for (double& v : target.mutable_values()) v = get_f64(in);
  }
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void write_json(const std::filesystem::path& file, const nlohmann::json& j) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw CheckpointError("cannot write " + file.string());
  out << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw CheckpointError("cannot read " + file.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(file.string() + ": " + e.what());
  }
}

}  // namespace argmine
