#include "fssc/params.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "fssc/serialize.hpp"

namespace fssc {

template <typename Scalar>
Tensor<Scalar>& ModelParams<Scalar>::add(std::string name, Tensor<Scalar> tensor) {
  if (contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  entries_.emplace_back(std::move(name), std::move(tensor));
  return entries_.back().second;
}

template <typename Scalar>
Index ModelParams<Scalar>::total_elements() const {
  Index n = 0;
  for (const auto& e : entries_) n += e.second.numel();
  return n;
}

template <typename Scalar>
Tensor<Scalar>& ModelParams<Scalar>::at(const std::string& name) {
  for (auto& e : entries_) {
    if (e.first == name) return e.second;
  }
  throw std::out_of_range("no parameter named '" + name + "'");
}

template <typename Scalar>
const Tensor<Scalar>& ModelParams<Scalar>::at(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.first == name) return e.second;
  }
  throw std::out_of_range("no parameter named '" + name + "'");
}

template <typename Scalar>
bool ModelParams<Scalar>::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const Entry& e) { return e.first == name; });
}

template <typename Scalar>
ModelParams<Scalar> ModelParams<Scalar>::clone() const {
  ModelParams out;
  for (const auto& [n, t] : entries_) {
    Tensor<Scalar> c = t.clone();
    c.set_requires_grad(t.requires_grad());
    out.add(n, c);
  }
  return out;
}

template <typename Scalar>
void ModelParams<Scalar>::assign(const ModelParams& other) {
  if (auto why = schema_mismatch(other); !why.empty()) throw DimensionError("assign: " + why);
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    entries_[i].second.value() = other.entries_[i].second.value();
  }
}

template <typename Scalar>
void ModelParams<Scalar>::clear_grads() {
  for (auto& e : entries_) e.second.clear_grad();
}

template <typename Scalar>
std::string ModelParams<Scalar>::schema_mismatch(const ModelParams& other) const {
  const std::size_t n = std::min(entries_.size(), other.entries_.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = entries_[i];
    const auto& b = other.entries_[i];
    if (a.first != b.first) {
      return "entry " + std::to_string(i) + " is '" + a.first + "' vs '" + b.first + "'";
    }
    if (a.second.shape() != b.second.shape()) {
      return "entry '" + a.first + "' has shape " + shape_str(a.second.shape()) + " vs " +
             shape_str(b.second.shape());
    }
  }
  if (entries_.size() != other.entries_.size()) {
    return "entry count " + std::to_string(entries_.size()) + " vs " +
           std::to_string(other.entries_.size());
  }
  return {};
}

namespace {
constexpr char kParamsMagic[8] = {'F', 'S', 'S', 'C', 'P', 'A', 'R', '1'};
}

template <typename Scalar>
void write_params(std::ostream& os, const ModelParams<Scalar>& params) {
  os.write(kParamsMagic, sizeof(kParamsMagic));
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (Index e : t.shape()) io::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(e));
    io::write_le<std::uint8_t>(os, sizeof(Scalar));
    for (Index i = 0; i < t.numel(); ++i) io::write_le<Scalar>(os, t[i]);
  }
  if (!os) throw FileError("failed writing parameter blob");
}

template <typename Scalar>
ModelParams<Scalar> read_params(std::istream& is) {
  char magic[sizeof(kParamsMagic)];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kParamsMagic, sizeof(magic)) != 0) {
    throw FormatError("parameter blob: bad magic");
  }
  ModelParams<Scalar> out;
  const auto count = io::read_le<std::uint32_t>(is);
  for (std::uint32_t e = 0; e < count; ++e) {
    const auto name_len = io::read_le<std::uint32_t>(is);
    if (name_len > 4096) throw FormatError("parameter blob: name too long");
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const auto rank = io::read_le<std::uint32_t>(is);
    if (rank == 0 || rank > 16) throw FormatError("parameter blob: bad rank for '" + name + "'");
    Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) {
      const auto extent = io::read_le<std::uint64_t>(is);
      if (extent == 0 || extent > (1ULL << 32)) {
        throw FormatError("parameter blob: bad extent for '" + name + "'");
      }
      shape.push_back(static_cast<Index>(extent));
    }
    const auto width = io::read_le<std::uint8_t>(is);
    Vec<Scalar> values(shape_numel(shape));
    for (Index i = 0; i < values.size(); ++i) {
      if (width == 4) {
        values[i] = static_cast<Scalar>(io::read_le<float>(is));
      } else if (width == 8) {
        values[i] = static_cast<Scalar>(io::read_le<double>(is));
      } else {
        throw FormatError("parameter blob: unsupported element width " + std::to_string(width));
      }
    }
    out.add(std::move(name), Tensor<Scalar>(std::move(shape), std::move(values), true));
  }
  return out;
}

template class ModelParams<float>;
template class ModelParams<double>;
template void write_params(std::ostream&, const ModelParams<float>&);
template void write_params(std::ostream&, const ModelParams<double>&);
template ModelParams<float> read_params<float>(std::istream&);
template ModelParams<double> read_params<double>(std::istream&);

}  // namespace fssc
