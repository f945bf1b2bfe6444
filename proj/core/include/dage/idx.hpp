#pragma once

// IDX reader/writer (the MNIST container format) and a key=value dataset
// manifest.
//
// IDX header: two zero bytes, a type byte, a rank byte, then rank big-endian
// u32 dimensions. Types handled: 0x08 (u8) and 0x0E (f64, big-endian).
// Labels are rank-1 u8 (magic 0x00000801); images are rank-3 u8 (0x00000803)
// or, for exported synthetic data, rank-2 f64 features (0x00000E02).

#include "dage/dataset.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace dage::data {

enum class Resize { None, Bilinear, Pad };

struct IdxOptions {
  /// Images whose side differs from target_side are resized or padded to it.
  /// 0 keeps the stored size.
  int target_side = 0;
  Resize resize = Resize::Bilinear;
  std::string name;
  int num_classes = 10;
  DomainTag domain = DomainTag::Source;
};

struct IdxArray {
  std::uint8_t type = 0x08;
  std::vector<std::uint32_t> dims;
  std::vector<double> values;  // raw values, row-major
};

IdxArray read_idx(const std::filesystem::path& path);
void write_idx(const std::filesystem::path& path, const IdxArray& array);

/// Images are scaled to [0, 1] (u8 / 255); f64 features are kept as is.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 const IdxOptions& options = {});

/// Writes features as rank-3 u8 images when every value lies in [0, 1] and
/// the shape is square single-channel, otherwise as rank-2 f64.
void save_idx(const Dataset& ds, const std::filesystem::path& images,
              const std::filesystem::path& labels);

/// Bilinear resampling of a side x side image (row-major) to out x out,
/// sampling at pixel centres.
std::vector<double> resize_bilinear(std::span<const double> image, int side, int out);
std::vector<double> pad_center(std::span<const double> image, int side, int out);

/// Plain-text manifest: one key=value per line, '#' comments. Recognised
/// keys: name, images, labels, checksum (FNV-1a 64 of the images file, hex),
/// classes. Relative paths resolve against the manifest's directory.
struct Manifest {
  std::map<std::string, std::string> entries;
  std::filesystem::path base_dir;

  std::string get(const std::string& key) const;
  std::filesystem::path path(const std::string& key) const;
};

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);
std::string file_checksum(const std::filesystem::path& path);

/// Loads the dataset a manifest points to, verifying the checksum if present.
Dataset load_manifest(const std::filesystem::path& manifest_path, IdxOptions options = {});

}  // namespace dage::data
