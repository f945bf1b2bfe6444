#include "dage/idx.hpp"

#include "dage/checkpoint.hpp"
#include "dage/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace dage::data {

namespace {

constexpr std::uint8_t kTypeU8 = 0x08;
constexpr std::uint8_t kTypeF64 = 0x0E;

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const unsigned char* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
         std::uint32_t{p[3]};
}

void put_be32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

IdxArray read_idx(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  const std::string where = path.string();
  if (bytes.size() < 4) {
    throw ParseError(where + ": truncated IDX header at offset " + std::to_string(bytes.size()));
  }
  if (bytes[0] != 0 || bytes[1] != 0) {
    throw ParseError(where + ": bad IDX magic (leading bytes must be zero)");
  }
  IdxArray out;
  out.type = bytes[2];
  if (out.type != kTypeU8 && out.type != kTypeF64) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "0x%02X", out.type);
    throw ParseError(where + ": unsupported IDX element type " + buf);
  }
  const int rank = bytes[3];
  if (rank < 1) throw ParseError(where + ": bad IDX magic (rank 0)");
  const std::size_t header = 4 + 4 * static_cast<std::size_t>(rank);
  if (bytes.size() < header) {
    throw ParseError(where + ": truncated IDX header at offset " + std::to_string(bytes.size()));
  }
  std::size_t count = 1;
  for (int i = 0; i < rank; ++i) {
    out.dims.push_back(be32(bytes.data() + 4 + 4 * i));
    count *= out.dims.back();
  }
  const std::size_t width = out.type == kTypeU8 ? 1 : 8;
  const std::size_t need = header + count * width;
  if (bytes.size() < need) {
    const std::size_t complete = (bytes.size() - header) / width;
    throw ParseError(where + ": truncated IDX data at offset " +
                     std::to_string(header + complete * width) + " (expected " +
                     std::to_string(need) + " bytes, file has " + std::to_string(bytes.size()) +
                     ")");
  }
  out.values.resize(count);
  const unsigned char* data = bytes.data() + header;
  for (std::size_t i = 0; i < count; ++i) {
    if (out.type == kTypeU8) {
      out.values[i] = data[i];
    } else {
      std::uint64_t raw = 0;
      for (int b = 0; b < 8; ++b) raw = (raw << 8) | data[8 * i + static_cast<std::size_t>(b)];
      out.values[i] = std::bit_cast<double>(raw);
    }
  }
  return out;
}

void write_idx(const std::filesystem::path& path, const IdxArray& array) {
  if (array.type != kTypeU8 && array.type != kTypeF64) {
    throw ConfigError("write_idx: unsupported element type");
  }
  std::size_t count = 1;
  for (auto d : array.dims) count *= d;
  if (count != array.values.size()) throw DimensionError("write_idx: dims do not match value count");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  const unsigned char magic[4] = {0, 0, array.type, static_cast<unsigned char>(array.dims.size())};
  os.write(reinterpret_cast<const char*>(magic), 4);
  for (auto d : array.dims) put_be32(os, d);
  for (double v : array.values) {
    if (array.type == kTypeU8) {
      if (v < 0.0 || v > 255.0) throw ConfigError("write_idx: value outside u8 range");
      const auto b = static_cast<unsigned char>(std::lround(v));
      os.put(static_cast<char>(b));
    } else {
      auto raw = std::bit_cast<std::uint64_t>(v);
      unsigned char b[8];
      for (int i = 7; i >= 0; --i, raw >>= 8) b[i] = static_cast<unsigned char>(raw & 0xFF);
      os.write(reinterpret_cast<const char*>(b), 8);
    }
  }
  if (!os) throw Error("write to " + path.string() + " failed");
}

std::vector<double> resize_bilinear(std::span<const double> image, int side, int out) {
  if (static_cast<int>(image.size()) != side * side) {
    throw DimensionError("resize_bilinear: image is not side x side");
  }
  std::vector<double> res(static_cast<std::size_t>(out) * out);
  const double scale = static_cast<double>(side) / out;
  auto at = [&](int y, int x) { return image[static_cast<std::size_t>(y * side + x)]; };
  for (int oy = 0; oy < out; ++oy) {
    const double sy = std::clamp((oy + 0.5) * scale - 0.5, 0.0, side - 1.0);
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = std::min(y0 + 1, side - 1);
    const double fy = sy - y0;
    for (int ox = 0; ox < out; ++ox) {
      const double sx = std::clamp((ox + 0.5) * scale - 0.5, 0.0, side - 1.0);
      const int x0 = static_cast<int>(std::floor(sx));
      const int x1 = std::min(x0 + 1, side - 1);
      const double fx = sx - x0;
      const double top = (1 - fx) * at(y0, x0) + fx * at(y0, x1);
      const double bottom = (1 - fx) * at(y1, x0) + fx * at(y1, x1);
      res[static_cast<std::size_t>(oy * out + ox)] = (1 - fy) * top + fy * bottom;
    }
  }
  return res;
}

std::vector<double> pad_center(std::span<const double> image, int side, int out) {
  if (out < side) throw ConfigError("pad_center: output smaller than input");
  std::vector<double> res(static_cast<std::size_t>(out) * out, 0.0);
  const int off = (out - side) / 2;
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      res[static_cast<std::size_t>((y + off) * out + x + off)] =
          image[static_cast<std::size_t>(y * side + x)];
    }
  }
  return res;
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 const IdxOptions& options) {
  const IdxArray img = read_idx(images);
  const IdxArray lab = read_idx(labels);
  if (lab.type != kTypeU8 || lab.dims.size() != 1) {
    throw ParseError(labels.string() + ": bad IDX magic for a label file (want 0x00000801)");
  }
  const bool u8_images = img.type == kTypeU8 && img.dims.size() == 3;
  const bool f64_features = img.type == kTypeF64 && img.dims.size() == 2;
  if (!u8_images && !f64_features) {
    throw ParseError(images.string() +
                     ": bad IDX magic for an image file (want 0x00000803 or 0x00000E02)");
  }
  const std::size_t n = img.dims[0];
  if (n != lab.dims[0]) {
    throw DimensionError("IDX files disagree: " + std::to_string(n) + " images, " +
                         std::to_string(lab.dims[0]) + " labels");
  }

  Dataset ds;
  ds.name = options.name.empty() ? images.stem().string() : options.name;
  ds.domain = options.domain;
  ds.labels.reserve(n);
  int max_label = -1;
  for (double v : lab.values) {
    ds.labels.push_back(static_cast<int>(v));
    max_label = std::max(max_label, static_cast<int>(v));
  }
  ds.num_classes = options.num_classes > 0 ? options.num_classes : max_label + 1;

  if (f64_features) {
    const int dim = static_cast<int>(img.dims[1]);
    ds.shape = {dim, 1, 1};
    ds.features = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        img.values.data(), static_cast<Eigen::Index>(n), dim)
                      .transpose();
    ds.validate();
    return ds;
  }

  const int h = static_cast<int>(img.dims[1]);
  const int w = static_cast<int>(img.dims[2]);
  int side = h;
  const bool reshape = options.target_side > 0 && (h != options.target_side || w != options.target_side);
  if (reshape) {
    if (h != w) throw DimensionError("load_idx: only square images can be resized");
    if (options.resize == Resize::None) {
      throw DimensionError("load_idx: image side " + std::to_string(h) + " differs from " +
                           std::to_string(options.target_side) + " and resizing is disabled");
    }
    side = options.target_side;
  }
  ds.shape = reshape ? nn::Shape{1, side, side} : nn::Shape{1, h, w};
  ds.features.resize(ds.shape.size(), static_cast<Eigen::Index>(n));
  const std::size_t pixels = static_cast<std::size_t>(h) * w;
  std::vector<double> image(pixels);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < pixels; ++p) image[p] = img.values[i * pixels + p] / 255.0;
    const std::vector<double> out =
        !reshape ? image
                 : options.resize == Resize::Bilinear ? resize_bilinear(image, h, side)
                                                      : pad_center(image, h, side);
    ds.features.col(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Vector>(out.data(), static_cast<Eigen::Index>(out.size()));
  }
  ds.validate();
  return ds;
}

void save_idx(const Dataset& ds, const std::filesystem::path& images,
              const std::filesystem::path& labels) {
  ds.validate();
  IdxArray lab;
  lab.type = kTypeU8;
  lab.dims = {static_cast<std::uint32_t>(ds.size())};
  for (int y : ds.labels) {
    if (y > 255) throw ConfigError("save_idx: label does not fit in a byte");
    lab.values.push_back(y);
  }

  IdxArray img;
  const bool unit_range =
      ds.features.size() > 0 && ds.features.minCoeff() >= 0.0 && ds.features.maxCoeff() <= 1.0;
  if (ds.shape.channels == 1 && ds.shape.height == ds.shape.width && ds.shape.height > 1 &&
      unit_range) {
    img.type = kTypeU8;
    img.dims = {static_cast<std::uint32_t>(ds.size()), static_cast<std::uint32_t>(ds.shape.height),
                static_cast<std::uint32_t>(ds.shape.width)};
    img.values.reserve(static_cast<std::size_t>(ds.features.size()));
    for (Eigen::Index i = 0; i < ds.features.cols(); ++i) {
      for (Eigen::Index p = 0; p < ds.features.rows(); ++p) {
        img.values.push_back(std::round(ds.features(p, i) * 255.0));
      }
    }
  } else {
    img.type = kTypeF64;
    img.dims = {static_cast<std::uint32_t>(ds.size()), static_cast<std::uint32_t>(ds.shape.size())};
    img.values.reserve(static_cast<std::size_t>(ds.features.size()));
    for (Eigen::Index i = 0; i < ds.features.cols(); ++i) {
      for (Eigen::Index p = 0; p < ds.features.rows(); ++p) img.values.push_back(ds.features(p, i));
    }
  }
  write_idx(images, img);
  write_idx(labels, lab);
}

std::string Manifest::get(const std::string& key) const {
  const auto it = entries.find(key);
  if (it == entries.end()) throw ConfigError("manifest: missing key '" + key + "'");
  return it->second;
}

std::filesystem::path Manifest::path(const std::string& key) const {
  std::filesystem::path p = get(key);
  return p.is_absolute() ? p : base_dir / p;
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("manifest: cannot open " + path.string());
  Manifest m;
  m.base_dir = path.parent_path();
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    }
    m.entries[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return m;
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  for (const auto& [k, v] : manifest.entries) os << k << '=' << v << '\n';
}

std::string file_checksum(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  const auto h = nn::fnv1a64(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Dataset load_manifest(const std::filesystem::path& manifest_path, IdxOptions options) {
  const Manifest m = read_manifest(manifest_path);
  const auto images = m.path("images");
  if (const auto it = m.entries.find("checksum"); it != m.entries.end()) {
    const std::string actual = file_checksum(images);
    if (actual != it->second) {
      throw ConfigError("manifest " + manifest_path.string() + ": checksum mismatch for " +
                        images.string() + " (expected " + it->second + ", got " + actual + ")");
    }
  }
  if (options.name.empty() && m.entries.contains("name")) options.name = m.get("name");
  if (m.entries.contains("classes")) options.num_classes = std::stoi(m.get("classes"));
  return load_idx(images, m.path("labels"), options);
}

}  // namespace dage::data
