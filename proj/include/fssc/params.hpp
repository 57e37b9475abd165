#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "fssc/tensor.hpp"

namespace fssc {

/// Ordered, named collection of trainable tensors. Insertion order is the
/// canonical order used by aggregation and serialization.
template <typename Scalar>
class ModelParams {
 public:
  using Entry = std::pair<std::string, Tensor<Scalar>>;

  /// Registers a parameter; names must be unique.
  Tensor<Scalar>& add(std::string name, Tensor<Scalar> tensor);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  Index total_elements() const;

  const std::string& name(std::size_t i) const { return entries_[i].first; }
  Tensor<Scalar>& operator[](std::size_t i) { return entries_[i].second; }
  const Tensor<Scalar>& operator[](std::size_t i) const { return entries_[i].second; }

  /// Throws std::out_of_range for unknown names.
  Tensor<Scalar>& at(const std::string& name);
  const Tensor<Scalar>& at(const std::string& name) const;
  bool contains(const std::string& name) const;

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  /// Deep copy; the copy's tensors require grad iff the originals do.
  ModelParams clone() const;

  /// Copies values from `other` (same schema) into the existing tensors.
  void assign(const ModelParams& other);

  void clear_grads();

  /// Empty string when schemas match, else a description of the first difference.
  std::string schema_mismatch(const ModelParams& other) const;

  template <typename Other>
  ModelParams<Other> cast() const {
    ModelParams<Other> out;
    for (const auto& [n, t] : entries_) {
      Tensor<Other> c = t.template cast<Other>();
      c.set_requires_grad(t.requires_grad());
      out.add(n, c);
    }
    return out;
  }

 private:
  std::vector<Entry> entries_;
};

/// Flat parameter blob: "FSSCPAR1", u32 count, then per entry u32 name
/// length, name bytes, u32 rank, u64 extents, u8 element width (4 or 8) and
/// raw little-endian IEEE values. Reading converts to the requested scalar.
template <typename Scalar>
void write_params(std::ostream& os, const ModelParams<Scalar>& params);

template <typename Scalar>
ModelParams<Scalar> read_params(std::istream& is);

}  // namespace fssc
