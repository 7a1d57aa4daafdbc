#include "drmn/dtf.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "drmn/errors.hpp"

namespace drmn {

namespace {

constexpr char kMagic[4] = {'D', 'R', 'T', 'F'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(std::string_view b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + i])) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::string_view b, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[at + i])) << (8 * i);
  return v;
}

}  // namespace

std::string encode_dtf(const Tensor& t) {
  nlohmann::json header = {{"dtype", "f64"}, {"order", "row-major"}, {"shape", t.shape()}};
  const std::string text = header.dump();
  std::string out(kMagic, 4);
  put_u32(out, kDtfVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  out.reserve(out.size() + 8 * t.size());
  for (double v : t.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

Tensor decode_dtf(std::string_view bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw IoError("DTF: bad magic");
  }
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kDtfVersion) throw IoError("DTF: unsupported version " + std::to_string(version));
  const std::uint32_t header_len = get_u32(bytes, 8);
  if (bytes.size() < 12 + static_cast<std::size_t>(header_len)) throw IoError("DTF: truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(12, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("DTF: malformed header: ") + e.what());
  }
  if (header.value("dtype", "") != "f64") throw IoError("DTF: dtype must be f64");
  if (header.value("order", "") != "row-major") throw IoError("DTF: order must be row-major");
  if (!header.contains("shape") || !header["shape"].is_array()) throw IoError("DTF: missing shape");
  Shape shape;
  for (const auto& e : header["shape"]) {
    if (!e.is_number_unsigned()) throw IoError("DTF: shape entries must be unsigned integers");
    shape.push_back(e.get<std::size_t>());
  }
  const std::size_t n = shape_size(shape);
  const std::size_t payload = 12 + header_len;
  if (bytes.size() != payload + 8 * n) {
    throw IoError("DTF: payload holds " + std::to_string(bytes.size() - payload) +
                  " bytes, shape " + shape_string(shape) + " needs " + std::to_string(8 * n));
  }
  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) data[i] = std::bit_cast<double>(get_u64(bytes, payload + 8 * i));
  return Tensor(std::move(shape), std::move(data));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

void write_dtf(const std::filesystem::path& path, const Tensor& t) { write_file(path, encode_dtf(t)); }

Tensor read_dtf(const std::filesystem::path& path) {
  try {
    return decode_dtf(read_file(path));
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

const Tensor& Bundle::at(std::string_view name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw IoError("bundle has no tensor named '" + std::string(name) + "'");
}

void write_bundle(const std::filesystem::path& dir, const Bundle& bundle) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& [name, t] : bundle.tensors) {
    const std::string file = name + ".dtf";
    write_dtf(dir / file, t);
    entries.push_back({{"name", name}, {"file", file}, {"shape", t.shape()}});
  }
  nlohmann::json manifest = {{"tensors", entries}, {"metadata", bundle.metadata}};
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

Bundle read_bundle(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError((dir / "manifest.json").string() + ": " + e.what());
  }
  Bundle b;
  b.metadata = manifest.value("metadata", nlohmann::json::object());
  for (const auto& e : manifest.at("tensors")) {
    Tensor t = read_dtf(dir / e.at("file").get<std::string>());
    if (t.shape() != e.at("shape").get<Shape>()) {
      throw IoError(dir.string() + ": shape of " + e.at("name").get<std::string>() +
                    " disagrees with manifest");
    }
    b.tensors.emplace_back(e.at("name").get<std::string>(), std::move(t));
  }
  return b;
}

}  // namespace drmn
