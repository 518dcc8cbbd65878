#include "dcngan/archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "dcngan/errors.hpp"

namespace dcngan {

namespace {

constexpr char kMagic[8] = {'D', 'C', 'N', 'G', 'T', 'N', 'S', '\0'};

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>((value >> (8 * i)) & 0xff));
}

template <typename U>
U get_le(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  if (pos + sizeof(U) > in.size()) throw CheckpointError("archive truncated");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(in[pos + i]) << (8 * i);
  pos += sizeof(U);
  return v;
}

}  // namespace

bool TensorArchive::contains(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return true;
  }
  return false;
}

const Tensor<float>& TensorArchive::get(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw CheckpointError("archive has no tensor named '" + name + "'");
}

const Tensor<float>& TensorArchive::get(const std::string& name, const Shape& expected) const {
  const auto& t = get(name);
  if (t.shape() != expected) {
    throw CheckpointError("tensor '" + name + "' has shape " + shape_str(t.shape()) + ", expected " +
                          shape_str(expected));
  }
  return t;
}

std::vector<std::uint8_t> serialize_archive(const TensorArchive& archive) {
  nlohmann::json header;
  header["meta"] = archive.meta;
  header["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : archive.tensors) {
    header["tensors"].push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += 4 * static_cast<std::uint64_t>(t.size());
  }
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(kMagic, kMagic + 8);
  put_le<std::uint32_t>(out, TensorArchive::kVersion);
  put_le<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  out.reserve(out.size() + offset);
  for (const auto& [name, t] : archive.tensors) {
    for (float v : t.values()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

TensorArchive deserialize_archive(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 20 || std::memcmp(bytes.data(), kMagic, 8) != 0) throw CheckpointError("not a tensor archive");
  std::size_t pos = 8;
  const auto version = get_le<std::uint32_t>(bytes, pos);
  if (version != TensorArchive::kVersion) {
    throw CheckpointError("unsupported archive version " + std::to_string(version));
  }
  const auto header_len = get_le<std::uint64_t>(bytes, pos);
  if (pos + header_len > bytes.size()) throw CheckpointError("archive header truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                   bytes.begin() + static_cast<std::ptrdiff_t>(pos + header_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("archive header is not valid JSON: ") + e.what());
  }
  pos += header_len;
  const std::size_t payload = pos;

  TensorArchive archive;
  archive.meta = header.value("meta", nlohmann::json::object());
  for (const auto& entry : header.at("tensors")) {
    Shape shape = entry.at("shape").get<Shape>();
    std::size_t at = payload + entry.at("offset").get<std::size_t>();
    std::vector<float> data(numel(shape));
    for (auto& v : data) v = std::bit_cast<float>(get_le<std::uint32_t>(bytes, at));
    archive.add(entry.at("name").get<std::string>(), Tensor<float>(std::move(shape), std::move(data)));
  }
  return archive;
}

void write_archive(const std::filesystem::path& path, const TensorArchive& archive) {
  const auto bytes = serialize_archive(archive);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

TensorArchive read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_archive(bytes);
}

}  // namespace dcngan
