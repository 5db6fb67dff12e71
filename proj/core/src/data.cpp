#include "ric/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <string>

#include "ric/error.hpp"
#include "ric/sampler.hpp"

namespace ric::data {

namespace fs = std::filesystem;

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;
constexpr std::size_t kMargin = 2;

std::vector<std::uint8_t> read_maybe_gz(const fs::path& path) {
  if (!fs::exists(path)) {
    throw IoError(IoError::Kind::kMissingFile, "missing file: " + path.string());
  }
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (f == nullptr) throw IoError(IoError::Kind::kMissingFile, "cannot open " + path.string());
  std::vector<std::uint8_t> out;
  std::array<std::uint8_t, 1 << 16> buf{};
  int got = 0;
  while ((got = gzread(f, buf.data(), static_cast<unsigned>(buf.size()))) > 0) {
    out.insert(out.end(), buf.begin(), buf.begin() + got);
  }
  const bool failed = got < 0;
  gzclose(f);
  if (failed) throw IoError(IoError::Kind::kTruncated, "corrupt compressed stream in " + path.string());
  return out;
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset,
                        const fs::path& path) {
  if (bytes.size() < offset + 4) {
    throw IoError(IoError::Kind::kTruncated, "truncated IDX header in " + path.string());
  }
  return (std::uint32_t(bytes[offset]) << 24) | (std::uint32_t(bytes[offset + 1]) << 16) |
         (std::uint32_t(bytes[offset + 2]) << 8) | std::uint32_t(bytes[offset + 3]);
}

void append_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(std::uint8_t(v >> 24));
  out.push_back(std::uint8_t(v >> 16));
  out.push_back(std::uint8_t(v >> 8));
  out.push_back(std::uint8_t(v));
}

fs::path resolve(const fs::path& dir, const std::string& name) {
  for (const auto& candidate : {dir / name, dir / (name + ".gz")}) {
    if (fs::exists(candidate)) return candidate;
  }
  throw IoError(IoError::Kind::kMissingFile,
                "missing MNIST file " + (dir / name).string() + " (or .gz)");
}

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream os(path, std::ios::binary);
  os.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!os) throw IoError(IoError::Kind::kWriteFailed, "failed writing " + path.string());
}

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U v) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(U));
}

}  // namespace

Dataset Dataset::select(const std::vector<std::size_t>& indices) const {
  const std::size_t per = images.size() / std::max<std::size_t>(size(), 1);
  Shape shape = images.shape();
  shape[0] = indices.size();
  Dataset out;
  std::vector<double> px(indices.size() * per);
  out.labels.resize(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::size_t j = indices[i];
    if (j >= size()) throw ShapeError("dataset index " + std::to_string(j) + " out of range");
    std::copy_n(images.data().begin() + std::ptrdiff_t(j * per), per, px.begin() + std::ptrdiff_t(i * per));
    out.labels[i] = labels[j];
  }
  out.images = Tensor(std::move(shape), std::move(px));
  return out;
}

Dataset Dataset::slice(std::size_t first, std::size_t count) const {
  Dataset out;
  out.images = images.slice0(first, count);
  out.labels.assign(labels.begin() + std::ptrdiff_t(first),
                    labels.begin() + std::ptrdiff_t(first + count));
  return out;
}

Dataset load_idx(const fs::path& images_path, const fs::path& labels_path) {
  const auto img = read_maybe_gz(images_path);
  const auto lab = read_maybe_gz(labels_path);
  if (read_be32(img, 0, images_path) != kImageMagic) {
    throw IoError(IoError::Kind::kBadMagic, "bad IDX image magic in " + images_path.string());
  }
  if (read_be32(lab, 0, labels_path) != kLabelMagic) {
    throw IoError(IoError::Kind::kBadMagic, "bad IDX label magic in " + labels_path.string());
  }
  const std::size_t n = read_be32(img, 4, images_path);
  const std::size_t rows = read_be32(img, 8, images_path);
  const std::size_t cols = read_be32(img, 12, images_path);
  const std::size_t n_labels = read_be32(lab, 4, labels_path);
  if (img.size() < 16 + n * rows * cols) {
    throw IoError(IoError::Kind::kTruncated, "truncated IDX image payload in " + images_path.string());
  }
  if (lab.size() < 8 + n_labels) {
    throw IoError(IoError::Kind::kTruncated, "truncated IDX label payload in " + labels_path.string());
  }
  if (n != n_labels) {
    throw IoError(IoError::Kind::kMalformed, "image count " + std::to_string(n) +
                                                 " does not match label count " +
                                                 std::to_string(n_labels));
  }
  if (rows != cols || rows + 2 * kMargin != kImageSize) {
    throw IoError(IoError::Kind::kMalformed, "expected 28x28 images, got " + std::to_string(rows) +
                                                 "x" + std::to_string(cols));
  }
  Dataset ds;
  ds.images = Tensor({n, 1, kImageSize, kImageSize});
  ds.labels.assign(lab.begin() + 8, lab.begin() + 8 + std::ptrdiff_t(n));
  for (auto l : ds.labels) {
    if (l > 9) throw IoError(IoError::Kind::kMalformed, "label out of range in " + labels_path.string());
  }
  double* dst = ds.images.data().data();
  const std::uint8_t* src = img.data() + 16;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        dst[(i * kImageSize + r + kMargin) * kImageSize + c + kMargin] =
            src[(i * rows + r) * cols + c] / 255.0;
      }
    }
  }
  return ds;
}

Mnist load_mnist(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw IoError(IoError::Kind::kMissingFile, "MNIST directory not found: " + dir.string());
  }
  Mnist m;
  m.train = load_idx(resolve(dir, "train-images-idx3-ubyte"), resolve(dir, "train-labels-idx1-ubyte"));
  m.test = load_idx(resolve(dir, "t10k-images-idx3-ubyte"), resolve(dir, "t10k-labels-idx1-ubyte"));
  return m;
}

void save_idx(const Dataset& dataset, const fs::path& images_path, const fs::path& labels_path) {
  const std::size_t n = dataset.size();
  const std::size_t h = dataset.height();
  const std::size_t inner = h - 2 * kMargin;
  std::vector<std::uint8_t> img;
  img.reserve(16 + n * inner * inner);
  append_be32(img, kImageMagic);
  append_be32(img, std::uint32_t(n));
  append_be32(img, std::uint32_t(inner));
  append_be32(img, std::uint32_t(inner));
  const double* src = dataset.images.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t r = 0; r < inner; ++r) {
      for (std::size_t c = 0; c < inner; ++c) {
        const double v = src[(i * h + r + kMargin) * h + c + kMargin];
        img.push_back(std::uint8_t(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
      }
    }
  }
  std::vector<std::uint8_t> lab;
  append_be32(lab, kLabelMagic);
  append_be32(lab, std::uint32_t(n));
  lab.insert(lab.end(), dataset.labels.begin(), dataset.labels.end());
  write_bytes(images_path, img);
  write_bytes(labels_path, lab);
}

Tensor rotate_image(const Tensor& image, double theta_deg) {
  return sampler::rotate_planes(image, theta_deg);
}

Dataset rotate_dataset(const Dataset& dataset, double theta_deg) {
  return {rotate_image(dataset.images, theta_deg), dataset.labels};
}

std::size_t RotatedTestSet::total_images() const {
  std::size_t n = 0;
  for (const auto& s : sets) n += s.size();
  return n;
}

std::vector<double> default_angles() {
  std::vector<double> a;
  for (int d = 0; d < 360; d += 10) a.push_back(d);
  return a;
}

RotatedTestSet build_rotated_test(const Dataset& test, const std::vector<double>& angles) {
  if (angles.empty()) throw ConfigError("build_rotated_test: no angles given");
  RotatedTestSet out;
  out.angles = angles;
  for (double a : angles) out.sets.push_back(rotate_dataset(test, a));
  return out;
}

TrainValSplit split_validation(const Dataset& train, std::size_t validation_size,
                               std::uint64_t seed) {
  if (validation_size >= train.size()) {
    throw ConfigError("validation size " + std::to_string(validation_size) +
                      " leaves no training images out of " + std::to_string(train.size()));
  }
  std::vector<std::size_t> perm(train.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  const std::size_t cut = train.size() - validation_size;
  TrainValSplit s;
  s.train = train.select({perm.begin(), perm.begin() + std::ptrdiff_t(cut)});
  if (validation_size > 0) s.validation = train.select({perm.begin() + std::ptrdiff_t(cut), perm.end()});
  return s;
}

void save_cache(const Dataset& dataset, const fs::path& path) {
  std::vector<std::uint8_t> out;
  const char magic[8] = {'R', 'I', 'C', 'D', 'A', 'T', 'A', '1'};
  out.insert(out.end(), magic, magic + 8);
  put_le(out, std::uint32_t(dataset.size()));
  put_le(out, std::uint32_t(dataset.height()));
  for (double v : dataset.images.data()) put_le(out, v);
  out.insert(out.end(), dataset.labels.begin(), dataset.labels.end());
  write_bytes(path, out);
}

Dataset load_cache(const fs::path& path) {
  if (!fs::exists(path)) throw IoError(IoError::Kind::kMissingFile, "missing cache " + path.string());
  std::ifstream is(path, std::ios::binary);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16) throw IoError(IoError::Kind::kTruncated, "truncated cache header in " + path.string());
  if (std::memcmp(bytes.data(), "RICDATA1", 8) != 0) {
    throw IoError(IoError::Kind::kBadMagic, "bad cache magic in " + path.string());
  }
  std::uint32_t n = 0, h = 0;
  std::memcpy(&n, bytes.data() + 8, 4);
  std::memcpy(&h, bytes.data() + 12, 4);
  const std::size_t px = std::size_t(n) * h * h;
  if (bytes.size() != 16 + px * 8 + n) {
    throw IoError(IoError::Kind::kTruncated, "cache payload size mismatch in " + path.string());
  }
  std::vector<double> values(px);
  std::memcpy(values.data(), bytes.data() + 16, px * 8);
  Dataset ds;
  ds.images = Tensor({n, 1, h, h}, std::move(values));
  ds.labels.assign(bytes.begin() + 16 + std::ptrdiff_t(px * 8), bytes.end());
  return ds;
}

}  // namespace ric::data
