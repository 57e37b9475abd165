#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fssc/tensor.hpp"

namespace fssc {

enum class DatasetSource { Cifar10Train, Cifar10Test, Synthetic };
std::string to_string(DatasetSource source);

/// Images stored one per row, channel-major (3 x H x W), values in [0, 1].
struct ImageDataset {
  Index height = 32;
  Index width = 32;
  RowMatrix<float> pixels;
  /// CIFAR class bytes, kept only so that records can be written back
  /// unchanged. Empty for synthetic sets.
  std::vector<std::uint8_t> labels;
  DatasetSource source = DatasetSource::Synthetic;

  Index size() const { return pixels.rows(); }
  Index values_per_image() const { return 3 * height * width; }

  /// Rows `indices` as a [B, 3, H, W] tensor.
  template <typename S>
  Tensor<S> batch(const std::vector<Index>& indices) const;

  /// Image i as [3, H, W].
  template <typename S>
  Tensor<S> image(Index i) const;

  ImageDataset subset(const std::vector<Index>& indices) const;
  ImageDataset slice(Index begin, Index end) const;
};

enum class CifarSplit { Train, Test };

/// Reads data_batch_1..5.bin (train, 50000 records) or test_batch.bin
/// (test, 10000 records) from `dir`.
ImageDataset load_cifar10(const std::string& dir, CifarSplit split);

/// Reads one binary batch of 3073-byte records. A negative
/// `expected_records` accepts any whole number of records. Throws FileError
/// if the file is missing and FormatError on a size mismatch.
ImageDataset load_cifar10_file(const std::string& path, DatasetSource source,
                               Index expected_records = -1);

/// Writes records in the same layout; pixels are rounded to bytes and
/// missing labels are written as 0.
void write_cifar10_file(const std::string& path, const ImageDataset& dataset);

/// First `count` images become validation, the rest test.
std::pair<ImageDataset, ImageDataset> split_validation(const ImageDataset& test,
                                                       Index count = 5000);

enum class SynthKind { Constant, Gradient, Checker, GaussianBlobs };
std::string to_string(SynthKind kind);
SynthKind synth_kind_from_string(const std::string& s);

/// Procedural H x W images, deterministic in `seed`.
ImageDataset synth_images(Index count, SynthKind kind, std::uint64_t seed, Index height = 32,
                          Index width = 32);

}  // namespace fssc
