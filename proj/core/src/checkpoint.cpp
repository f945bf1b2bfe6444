#include "dage/checkpoint.hpp"

#include "dage/error.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace dage::nn {

namespace {

constexpr std::array<char, 8> kMagic = {'D', 'A', 'G', 'E', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  os.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::istream& is) : is_(is) {}

  template <typename T>
  T get(const char* what) {
    std::array<unsigned char, sizeof(T)> bytes;
    read(bytes.data(), sizeof(T), what);
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
  }

  void read(void* dst, std::size_t n, const char* what) {
    is_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) {
      throw ParseError("checkpoint: truncated while reading " + std::string(what) + " at offset " +
                       std::to_string(offset_));
    }
    offset_ += n;
  }

 private:
  std::istream& is_;
  std::size_t offset_ = 0;
};

void put_matrix(std::ostream& os, const Matrix& m) {
  put<std::uint32_t>(os, 2);
  put<std::uint64_t>(os, static_cast<std::uint64_t>(m.rows()));
  put<std::uint64_t>(os, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) put<double>(os, m(i, j));
  }
}

void put_vector(std::ostream& os, const Vector& v) {
  put<std::uint32_t>(os, 1);
  put<std::uint64_t>(os, static_cast<std::uint64_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) put<double>(os, v(i));
}

Matrix get_tensor(Reader& r, std::uint32_t expected_rank) {
  const auto rank = r.get<std::uint32_t>("tensor rank");
  if (rank == 0) return {};
  if (rank != expected_rank) {
    throw ParseError("checkpoint: expected rank " + std::to_string(expected_rank) + ", found " +
                     std::to_string(rank));
  }
  std::uint64_t rows = r.get<std::uint64_t>("tensor shape");
  std::uint64_t cols = rank == 2 ? r.get<std::uint64_t>("tensor shape") : 1;
  if (rows > (1u << 28) || cols > (1u << 28)) throw ParseError("checkpoint: implausible tensor shape");
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = r.get<double>("tensor values");
  }
  return m;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t spec_hash(const NetworkSpec& spec) { return fnv1a64(spec.to_string()); }

void save_checkpoint(const std::filesystem::path& path, const NetworkState& state) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("checkpoint: cannot open " + path.string() + " for writing");
  const std::string spec = state.spec.to_string();
  os.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(os, kCheckpointVersion);
  put<std::uint64_t>(os, fnv1a64(spec));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(spec.size()));
  os.write(spec.data(), static_cast<std::streamsize>(spec.size()));
  put<std::int64_t>(os, state.step);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(2 * state.params.size()));
  for (const auto& p : state.params) {
    if (p.empty()) {
      put<std::uint32_t>(os, 0);
      put<std::uint32_t>(os, 0);
      continue;
    }
    put_matrix(os, p.weight);
    put_vector(os, p.bias);
  }
  if (!os) throw Error("checkpoint: write to " + path.string() + " failed");
}

NetworkState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("checkpoint: cannot open " + path.string());
  Reader r(is);
  std::array<char, 8> magic{};
  r.read(magic.data(), magic.size(), "magic");
  if (magic != kMagic) throw ParseError("checkpoint: bad magic in " + path.string());
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw ParseError("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto hash = r.get<std::uint64_t>("spec hash");
  const auto len = r.get<std::uint32_t>("spec length");
  if (len > (1u << 20)) throw ParseError("checkpoint: implausible spec length");
  std::string spec_text(len, '\0');
  r.read(spec_text.data(), len, "spec");
  if (fnv1a64(spec_text) != hash) throw ParseError("checkpoint: spec hash mismatch");

  NetworkState state = init(NetworkSpec::parse(spec_text), 0);
  state.step = r.get<std::int64_t>("step");
  const auto count = r.get<std::uint32_t>("tensor count");
  if (count != 2 * state.params.size()) {
    throw ParseError("checkpoint: " + std::to_string(count) + " tensors for " +
                     std::to_string(state.params.size()) + " layers");
  }
  for (auto& p : state.params) {
    Matrix w = get_tensor(r, 2);
    Matrix b = get_tensor(r, 1);
    if (w.rows() != p.weight.rows() || w.cols() != p.weight.cols() || b.rows() != p.bias.size()) {
      throw ParseError("checkpoint: tensor shape does not match the stored network spec");
    }
    p.weight = std::move(w);
    if (b.size() != 0) p.bias = b.col(0);
  }
  return state;
}

}  // namespace dage::nn
