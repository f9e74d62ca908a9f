#include "tlr/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace tlr {

namespace {

static_assert(std::endian::native == std::endian::little,
              "tensor files are little-endian; a byte-swapping reader is not implemented");

constexpr char kMagic[4] = {'T', 'L', 'R', 'T'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw std::runtime_error("tensor file: truncated header");
  return v;
}

}  // namespace

void save_dense_tensor(const DenseTensor& tensor, std::ostream& out) {
  out.write(kMagic, sizeof(kMagic));
  write_u32(out, kVersion);
  const auto& dims = tensor.shape().dims();
  write_u32(out, static_cast<std::uint32_t>(dims.size()));
  for (int d : dims) write_u32(out, static_cast<std::uint32_t>(d));
  out.write(reinterpret_cast<const char*>(tensor.data().data()),
            static_cast<std::streamsize>(tensor.data().size() * sizeof(double)));
  if (!out) throw std::runtime_error("tensor file: write failed");
}

void save_dense_tensor(const DenseTensor& tensor, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  save_dense_tensor(tensor, out);
}

DenseTensor load_dense_tensor(std::istream& in) {
  char magic[4] = {};
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("tensor file: bad magic, not a TLRT tensor");
  }
  const std::uint32_t version = read_u32(in);
  if (version != kVersion) {
    throw std::runtime_error("tensor file: unsupported version " + std::to_string(version));
  }
  const std::uint32_t num_modes = read_u32(in);
  if (num_modes == 0 || num_modes > 32) throw std::runtime_error("tensor file: bad mode count");
  std::vector<int> dims(num_modes);
  for (auto& d : dims) d = static_cast<int>(read_u32(in));
  TensorShape shape(dims);
  std::vector<double> data(static_cast<std::size_t>(shape.num_entries()));
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!in) throw std::runtime_error("tensor file: truncated data section");
  return DenseTensor(std::move(shape), std::move(data));
}

DenseTensor load_dense_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  return load_dense_tensor(in);
}

DenseTensor dense_tensor_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (!j.contains("dims") || !j.contains("data")) {
    throw std::runtime_error("tensor JSON: need \"dims\" and \"data\" fields");
  }
  TensorShape shape(j.at("dims").get<std::vector<int>>());
  std::vector<double> data = j.at("data").get<std::vector<double>>();
  return DenseTensor(std::move(shape), std::move(data));
}

std::string dense_tensor_to_json(const DenseTensor& tensor) {
  nlohmann::json j;
  j["dims"] = tensor.shape().dims();
  j["data"] = tensor.data();
  return j.dump();
}

DenseTensor load_dense_tensor_any(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  char magic[4] = {};
  in.read(magic, sizeof(magic));
  in.seekg(0);
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) == 0) return load_dense_tensor(in);
  std::ostringstream text;
  text << in.rdbuf();
  return dense_tensor_from_json(text.str());
}

}  // namespace tlr
