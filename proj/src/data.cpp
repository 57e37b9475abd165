#include "fssc/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "fssc/errors.hpp"
#include "fssc/rng.hpp"

namespace fssc {

namespace {
constexpr Index kCifarSide = 32;
constexpr Index kCifarRecord = 1 + 3 * kCifarSide * kCifarSide;
}  // namespace

std::string to_string(DatasetSource source) {
  switch (source) {
    case DatasetSource::Cifar10Train: return "cifar10-train";
    case DatasetSource::Cifar10Test: return "cifar10-test";
    case DatasetSource::Synthetic: return "synthetic";
  }
  return "unknown";
}

template <typename S>
Tensor<S> ImageDataset::batch(const std::vector<Index>& indices) const {
  const Index n = values_per_image();
  Tensor<S> out({static_cast<Index>(indices.size()), 3, height, width});
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const Index i = indices[b];
    if (i < 0 || i >= size()) throw DimensionError("dataset index " + std::to_string(i) + " out of range");
    out.value().segment(static_cast<Index>(b) * n, n) = pixels.row(i).transpose().cast<S>();
  }
  return out;
}

template <typename S>
Tensor<S> ImageDataset::image(Index i) const {
  Tensor<S> one = batch<S>({i});
  return Tensor<S>({3, height, width}, std::move(one.value()));
}

ImageDataset ImageDataset::subset(const std::vector<Index>& indices) const {
  ImageDataset out;
  out.height = height;
  out.width = width;
  out.source = source;
  out.pixels.resize(static_cast<Index>(indices.size()), values_per_image());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    out.pixels.row(static_cast<Index>(r)) = pixels.row(indices[r]);
    if (!labels.empty()) out.labels.push_back(labels[static_cast<std::size_t>(indices[r])]);
  }
  return out;
}

ImageDataset ImageDataset::slice(Index begin, Index end) const {
  if (begin < 0 || end > size() || begin > end) throw DimensionError("dataset slice out of range");
  std::vector<Index> idx(static_cast<std::size_t>(end - begin));
  for (Index i = begin; i < end; ++i) idx[static_cast<std::size_t>(i - begin)] = i;
  return subset(idx);
}

ImageDataset load_cifar10_file(const std::string& path, DatasetSource source,
                               Index expected_records) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FileError("cannot open CIFAR-10 batch '" + path + "'");
  const auto bytes = static_cast<Index>(std::filesystem::file_size(path));
  if (bytes % kCifarRecord != 0 ||
      (expected_records >= 0 && bytes != expected_records * kCifarRecord)) {
    const std::string expected = expected_records >= 0
                                     ? std::to_string(expected_records * kCifarRecord)
                                     : "a multiple of " + std::to_string(kCifarRecord);
    throw FormatError("'" + path + "': expected " + expected + " bytes, found " +
                      std::to_string(bytes));
  }
  const Index count = bytes / kCifarRecord;
  ImageDataset out;
  out.source = source;
  out.pixels.resize(count, kCifarRecord - 1);
  out.labels.resize(static_cast<std::size_t>(count));
  std::vector<unsigned char> record(static_cast<std::size_t>(kCifarRecord));
  for (Index r = 0; r < count; ++r) {
    is.read(reinterpret_cast<char*>(record.data()), kCifarRecord);
    if (!is) throw FormatError("'" + path + "': short read at record " + std::to_string(r));
    out.labels[static_cast<std::size_t>(r)] = record[0];
    for (Index j = 0; j < kCifarRecord - 1; ++j) {
      out.pixels(r, j) = static_cast<float>(record[static_cast<std::size_t>(j + 1)]) / 255.0f;
    }
  }
  return out;
}

ImageDataset load_cifar10(const std::string& dir, CifarSplit split) {
  namespace fs = std::filesystem;
  if (split == CifarSplit::Test) {
    return load_cifar10_file((fs::path(dir) / "test_batch.bin").string(),
                             DatasetSource::Cifar10Test, 10000);
  }
  ImageDataset out;
  out.source = DatasetSource::Cifar10Train;
  out.pixels.resize(50000, kCifarRecord - 1);
  for (int b = 1; b <= 5; ++b) {
    const auto part = load_cifar10_file(
        (fs::path(dir) / ("data_batch_" + std::to_string(b) + ".bin")).string(),
        DatasetSource::Cifar10Train, 10000);
    out.pixels.middleRows((b - 1) * 10000, 10000) = part.pixels;
    out.labels.insert(out.labels.end(), part.labels.begin(), part.labels.end());
  }
  return out;
}

void write_cifar10_file(const std::string& path, const ImageDataset& dataset) {
  if (dataset.height != kCifarSide || dataset.width != kCifarSide) {
    throw DimensionError("CIFAR-10 records hold 32x32 images");
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FileError("cannot open '" + path + "' for writing");
  std::vector<unsigned char> record(static_cast<std::size_t>(kCifarRecord));
  for (Index r = 0; r < dataset.size(); ++r) {
    record[0] = dataset.labels.empty() ? 0 : dataset.labels[static_cast<std::size_t>(r)];
    for (Index j = 0; j < kCifarRecord - 1; ++j) {
      const float v = std::clamp(dataset.pixels(r, j), 0.0f, 1.0f);
      record[static_cast<std::size_t>(j + 1)] = static_cast<unsigned char>(std::lround(v * 255.0f));
    }
    os.write(reinterpret_cast<const char*>(record.data()), kCifarRecord);
  }
  if (!os) throw FileError("write to '" + path + "' failed");
}

std::pair<ImageDataset, ImageDataset> split_validation(const ImageDataset& test, Index count) {
  if (count < 0 || count > test.size()) {
    throw ConfigError("validation count " + std::to_string(count) + " exceeds " +
                      std::to_string(test.size()) + " test images");
  }
  return {test.slice(0, count), test.slice(count, test.size())};
}

std::string to_string(SynthKind kind) {
  switch (kind) {
    case SynthKind::Constant: return "constant";
    case SynthKind::Gradient: return "gradient";
    case SynthKind::Checker: return "checker";
    case SynthKind::GaussianBlobs: return "gaussian-blobs";
  }
  return "unknown";
}

SynthKind synth_kind_from_string(const std::string& s) {
  if (s == "constant") return SynthKind::Constant;
  if (s == "gradient") return SynthKind::Gradient;
  if (s == "checker") return SynthKind::Checker;
  if (s == "gaussian-blobs") return SynthKind::GaussianBlobs;
  throw ConfigError("unknown synthetic kind '" + s +
                    "' (expected constant, gradient, checker or gaussian-blobs)");
}

ImageDataset synth_images(Index count, SynthKind kind, std::uint64_t seed, Index height,
                          Index width) {
  if (count < 1) throw ConfigError("synth_images: count must be at least 1");
  if (height < 1 || width < 1) throw ConfigError("synth_images: extents must be positive");
  ImageDataset out;
  out.height = height;
  out.width = width;
  out.pixels.resize(count, 3 * height * width);
  const Index plane = height * width;
  for (Index n = 0; n < count; ++n) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(n)}));
    auto px = out.pixels.row(n);
    switch (kind) {
      case SynthKind::Constant:
        px.setConstant(static_cast<float>(rng.uniform()));
        break;
      case SynthKind::Gradient: {
        double from[3], to[3];
        for (int c = 0; c < 3; ++c) {
          from[c] = rng.uniform();
          to[c] = rng.uniform();
        }
        const double angle = rng.uniform(0.0, 6.283185307179586);
        const double dx = std::cos(angle), dy = std::sin(angle);
        const double span = std::abs(dx) * (width - 1) + std::abs(dy) * (height - 1);
        const double origin = std::min(0.0, dx * (width - 1)) + std::min(0.0, dy * (height - 1));
        for (Index y = 0; y < height; ++y) {
          for (Index x = 0; x < width; ++x) {
            const double t = span > 0 ? (dx * x + dy * y - origin) / span : 0.0;
            for (int c = 0; c < 3; ++c) {
              px(c * plane + y * width + x) = static_cast<float>(from[c] + t * (to[c] - from[c]));
            }
          }
        }
        break;
      }
      case SynthKind::Checker: {
        const float a = static_cast<float>(rng.uniform(0.0, 0.45));
        const float b = static_cast<float>(rng.uniform(0.55, 1.0));
        const Index cell = 1 + static_cast<Index>(rng.uniform_int(8));
        for (Index y = 0; y < height; ++y) {
          for (Index x = 0; x < width; ++x) {
            const float v = ((y / cell + x / cell) % 2 == 0) ? a : b;
            for (int c = 0; c < 3; ++c) px(c * plane + y * width + x) = v;
          }
        }
        break;
      }
      case SynthKind::GaussianBlobs: {
        // Smooth background ramp plus a few coloured blobs.
        double base[3], slope_x[3], slope_y[3];
        for (int c = 0; c < 3; ++c) {
          base[c] = rng.uniform(0.2, 0.8);
          slope_x[c] = rng.uniform(-0.3, 0.3);
          slope_y[c] = rng.uniform(-0.3, 0.3);
        }
        const int blobs = 2 + static_cast<int>(rng.uniform_int(4));
        struct Blob {
          double cy, cx, inv2s2, amp[3];
        };
        std::vector<Blob> list(static_cast<std::size_t>(blobs));
        for (auto& bl : list) {
          bl.cy = rng.uniform(0.0, double(height));
          bl.cx = rng.uniform(0.0, double(width));
          const double s = rng.uniform(0.06, 0.25) * double(std::min(height, width));
          bl.inv2s2 = 1.0 / (2.0 * s * s);
          for (double& a : bl.amp) a = rng.uniform(-0.6, 0.6);
        }
        for (Index y = 0; y < height; ++y) {
          for (Index x = 0; x < width; ++x) {
            const double u = double(x) / double(width) - 0.5, v = double(y) / double(height) - 0.5;
            double rgb[3];
            for (int c = 0; c < 3; ++c) rgb[c] = base[c] + slope_x[c] * u + slope_y[c] * v;
            for (const auto& bl : list) {
              const double d2 = (y - bl.cy) * (y - bl.cy) + (x - bl.cx) * (x - bl.cx);
              const double g = std::exp(-d2 * bl.inv2s2);
              for (int c = 0; c < 3; ++c) rgb[c] += bl.amp[c] * g;
            }
            for (int c = 0; c < 3; ++c) {
              px(c * plane + y * width + x) = static_cast<float>(std::clamp(rgb[c], 0.0, 1.0));
            }
          }
        }
        break;
      }
    }
  }
  return out;
}

template Tensor<float> ImageDataset::batch<float>(const std::vector<Index>&) const;
template Tensor<double> ImageDataset::batch<double>(const std::vector<Index>&) const;
template Tensor<float> ImageDataset::image<float>(Index) const;
template Tensor<double> ImageDataset::image<double>(Index) const;

}  // namespace fssc
