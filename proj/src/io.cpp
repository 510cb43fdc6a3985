#include "ecanet/io.hpp"

#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "ecanet/errors.hpp"

namespace ecanet::io {

using nlohmann::json;

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint64_t take(int width) {
    if (pos_ + width > bytes_.size()) throw SchemaError("tensor file truncated at byte " + std::to_string(pos_));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += width;
    return v;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(take(4)); }
  std::uint64_t u64() { return take(8); }
  double f64() { return std::bit_cast<double>(take(8)); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

void write_pgm(const std::filesystem::path& path, std::size_t height, std::size_t width,
               std::span<const std::uint8_t> pixels) {
  const std::string header = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.insert(bytes.end(), pixels.begin(), pixels.end());
  write_bytes(path, bytes);
}

}  // namespace

std::vector<std::uint8_t> encode_tensors(std::span<const Tensor> tensors) {
  std::vector<std::uint8_t> out(std::begin(kTensorMagic), std::end(kTensorMagic));
  put_u32(out, kTensorVersion);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (auto e : t.shape()) put_u64(out, e);
  }
  for (const auto& t : tensors)
    for (double v : t.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

std::vector<Tensor> decode_tensors(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kTensorMagic, 4) != 0) {
    throw SchemaError("not a tensor file (bad magic)");
  }
  Reader r(bytes.subspan(4));
  const std::uint32_t version = r.u32();
  if (version != kTensorVersion) throw SchemaError("unsupported tensor file version " + std::to_string(version));
  const std::uint32_t count = r.u32();
  std::vector<Shape> shapes;
  std::size_t total = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t rank = r.u32();
    if (rank < 1 || rank > 4) throw SchemaError("tensor " + std::to_string(i) + " has rank " + std::to_string(rank));
    Shape s;
    for (std::uint32_t k = 0; k < rank; ++k) {
      const std::uint64_t e = r.u64();
      if (e == 0 || e > (std::uint64_t{1} << 32)) throw SchemaError("tensor " + std::to_string(i) + " has bad extent");
      s.push_back(static_cast<std::size_t>(e));
    }
    total += element_count(s);
    shapes.push_back(std::move(s));
  }
  if (r.remaining() != total * 8) {
    throw SchemaError("tensor payload is " + std::to_string(r.remaining()) + " bytes, header implies " +
                      std::to_string(total * 8));
  }
  std::vector<Tensor> out;
  for (auto& s : shapes) {
    std::vector<double> data(element_count(s));
    for (auto& v : data) v = r.f64();
    out.emplace_back(std::move(s), std::move(data));
  }
  return out;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void write_tensors(const std::filesystem::path& path, std::span<const Tensor> tensors) {
  write_bytes(path, encode_tensors(tensors));
}

std::vector<Tensor> read_tensors(const std::filesystem::path& path) {
  try {
    return decode_tensors(read_bytes(path));
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

void write_weights(const std::filesystem::path& path, const EcaWeights& w) {
  std::vector<Tensor> flat{w.hsa.wq, w.hsa.wk, w.hsa.wv};
  for (const auto& p : w.psa) {
    flat.push_back(p.wq);
    flat.push_back(p.wk);
    flat.push_back(p.wv);
  }
  write_tensors(path, flat);
}

EcaWeights read_weights(const std::filesystem::path& path) {
  auto flat = read_tensors(path);
  if (flat.size() < 3 || flat.size() % 3 != 0) {
    throw SchemaError(path.string() + ": weight file holds " + std::to_string(flat.size()) +
                      " tensors, expected a multiple of 3");
  }
  EcaWeights w{{flat[0], flat[1], flat[2]}, {}};
  for (std::size_t i = 3; i < flat.size(); i += 3) w.psa.push_back({flat[i], flat[i + 1], flat[i + 2]});
  return w;
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

void write_label_raster(const std::filesystem::path& path, const LabelMap& labels) {
  if (labels.classes.size() > 256) {
    throw ContractError("label raster palette holds " + std::to_string(labels.classes.size()) + " classes, max 256");
  }
  std::vector<std::uint8_t> pixels;
  pixels.reserve(labels.indices.size());
  for (auto v : labels.indices) {
    if (v >= labels.classes.size()) throw ContractError("label index " + std::to_string(v) + " outside palette");
    pixels.push_back(static_cast<std::uint8_t>(v));
  }
  write_pgm(path, labels.height, labels.width, pixels);
  const json sidecar = {{"format", "ecanet-label-raster"},
                        {"version", 1},
                        {"height", labels.height},
                        {"width", labels.width},
                        {"classes", labels.classes}};
  write_text(sidecar_path(path), sidecar.dump(2) + "\n");
}

void write_mask_raster(const std::filesystem::path& path, std::size_t height, std::size_t width,
                       std::span<const std::uint8_t> mask) {
  if (mask.size() != height * width) throw DimensionError("mask raster size does not match extents");
  write_pgm(path, height, width, mask);
}

LabelMap read_label_raster(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
    return t;
  };
  auto number = [&](const char* what) {
    const std::string t = token();
    try {
      return static_cast<std::size_t>(std::stoul(t));
    } catch (const std::exception&) {
      throw SchemaError(path.string() + ": bad PGM " + what + " '" + t + "'");
    }
  };
  if (token() != "P5") throw SchemaError(path.string() + ": not a binary PGM (P5) raster");
  const std::size_t width = number("width");
  const std::size_t height = number("height");
  if (number("maxval") != 255) throw SchemaError(path.string() + ": indexed raster must have maxval 255");
  ++pos;  // single whitespace byte before the payload
  if (bytes.size() - std::min(pos, bytes.size()) != width * height) {
    throw SchemaError(path.string() + ": payload size does not match " + std::to_string(width) + "x" +
                      std::to_string(height));
  }

  const json sidecar = read_json(sidecar_path(path));
  LabelMap labels;
  try {
    labels = LabelMap(sidecar.at("height").get<std::size_t>(), sidecar.at("width").get<std::size_t>(),
                      sidecar.at("classes").get<std::vector<std::string>>());
  } catch (const json::exception& e) {
    throw SchemaError(sidecar_path(path).string() + ": " + e.what());
  }
  if (labels.height != height || labels.width != width) {
    throw SchemaError(path.string() + ": sidecar extents disagree with raster");
  }
  for (std::size_t i = 0; i < width * height; ++i) {
    labels.indices[i] = bytes[pos + i];
    if (labels.indices[i] >= labels.classes.size()) {
      throw SchemaError(path.string() + ": pixel value " + std::to_string(labels.indices[i]) + " outside palette");
    }
  }
  return labels;
}

void write_logit_volume(const std::filesystem::path& path, const LogitVolume& volume, const SemanticSpace& space) {
  if (space.size() != volume.classes()) throw ContractError("logit volume class count does not match its space");
  write_tensors(path, std::span(&volume.scores, 1));
  const json sidecar = {{"space_id", space.id()}, {"classes", space.classes()}};
  write_text(sidecar_path(path), sidecar.dump(2) + "\n");
}

LogitInput read_logit_volume(const std::filesystem::path& path) {
  auto tensors = read_tensors(path);
  if (tensors.size() != 1 || tensors[0].rank() != 3) {
    throw SchemaError(path.string() + ": logit volume must hold exactly one (C,H,W) tensor");
  }
  const json sidecar = read_json(sidecar_path(path));
  int id = 0;
  std::vector<std::string> classes;
  try {
    id = sidecar.at("space_id").get<int>();
    classes = sidecar.at("classes").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw SchemaError(sidecar_path(path).string() + ": " + e.what());
  }
  if (classes.size() != tensors[0].extent(0)) {
    throw SchemaError(path.string() + ": sidecar lists " + std::to_string(classes.size()) +
                      " classes but the volume has " + std::to_string(tensors[0].extent(0)));
  }
  try {
    return {LogitVolume{id, std::move(tensors[0])}, SemanticSpace(id, std::move(classes))};
  } catch (const ContractError& e) {
    throw SchemaError(sidecar_path(path).string() + ": " + e.what());
  }
}

}  // namespace ecanet::io
