#include "fssc/baseline/ldpc.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "fssc/errors.hpp"
#include "fssc/rng.hpp"

namespace fssc::baseline {

namespace {

using Row = std::vector<std::uint64_t>;

inline bool test(const Row& r, Index i) { return (r[static_cast<std::size_t>(i / 64)] >> (i % 64)) & 1u; }
inline void flip(Row& r, Index i) { r[static_cast<std::size_t>(i / 64)] ^= std::uint64_t{1} << (i % 64); }

// One attempt of the greedy construction; empty result when it gets stuck.
std::vector<std::vector<Index>> try_regular(Index n, Index cw, Index rw, Rng& rng) {
  const Index m = n * cw / rw;
  std::vector<std::vector<Index>> rows(static_cast<std::size_t>(m));
  std::vector<std::vector<std::uint8_t>> linked(static_cast<std::size_t>(m),
                                                std::vector<std::uint8_t>(static_cast<std::size_t>(m), 0));
  std::vector<Index> columns(static_cast<std::size_t>(n));
  for (Index j = 0; j < n; ++j) columns[static_cast<std::size_t>(j)] = j;
  rng.shuffle(columns.begin(), columns.end());
  for (Index j : columns) {
    std::vector<Index> chosen;
    for (Index e = 0; e < cw; ++e) {
      // Least-filled rows first; among them prefer rows that close no 4-cycle.
      std::vector<Index> best;
      Index best_fill = rw;
      bool best_clean = false;
      for (Index r = 0; r < m; ++r) {
        const auto fill = static_cast<Index>(rows[static_cast<std::size_t>(r)].size());
        if (fill >= rw || std::find(chosen.begin(), chosen.end(), r) != chosen.end()) continue;
        bool clean = true;
        for (Index c : chosen) clean = clean && !linked[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
        if (clean != best_clean ? clean : fill < best_fill) {
          best.clear();
          best_fill = fill;
          best_clean = clean;
        }
        if (clean == best_clean && fill == best_fill) best.push_back(r);
      }
      if (best.empty()) return {};
      chosen.push_back(best[static_cast<std::size_t>(rng.uniform_int(best.size()))]);
    }
    for (Index a : chosen) {
      rows[static_cast<std::size_t>(a)].push_back(j);
      for (Index b : chosen) {
        if (a != b) linked[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = 1;
      }
    }
  }
  for (auto& r : rows) std::sort(r.begin(), r.end());
  return rows;
}

}  // namespace

LdpcCode LdpcCode::regular(Index n, Index col_weight, Index row_weight, std::uint64_t seed) {
  if (n <= 0 || col_weight <= 0 || row_weight <= col_weight || (n * col_weight) % row_weight != 0) {
    throw ConfigError("ldpc: invalid regular code parameters n=" + std::to_string(n) + " (" +
                      std::to_string(col_weight) + "," + std::to_string(row_weight) + ")");
  }
  for (std::uint64_t attempt = 0; attempt < 1000; ++attempt) {
    Rng rng(seed + attempt);
    auto rows = try_regular(n, col_weight, row_weight, rng);
    if (rows.empty()) continue;
    LdpcCode code;
    code.n_ = n;
    code.seed_ = seed + attempt;
    code.checks_ = std::move(rows);
    if (code.build_encoder()) return code;
  }
  throw ConfigError("ldpc: no full-rank parity-check matrix found from seed " + std::to_string(seed));
}

LdpcCode LdpcCode::from_checks(Index n, std::vector<std::vector<Index>> checks) {
  LdpcCode code;
  code.n_ = n;
  for (auto& row : checks) {
    std::sort(row.begin(), row.end());
    if (row.empty() || row.front() < 0 || row.back() >= n ||
        std::adjacent_find(row.begin(), row.end()) != row.end()) {
      throw ConfigError("ldpc: invalid check row");
    }
  }
  code.checks_ = std::move(checks);
  if (static_cast<Index>(code.checks_.size()) >= n || !code.build_encoder()) {
    throw ConfigError("ldpc: parity-check matrix is not full rank");
  }
  return code;
}

bool LdpcCode::build_encoder() {
  const Index m = this->m(), words = (n_ + 63) / 64;
  std::vector<Row> h(static_cast<std::size_t>(m), Row(static_cast<std::size_t>(words), 0));
  for (Index r = 0; r < m; ++r) {
    for (Index c : checks_[static_cast<std::size_t>(r)]) flip(h[static_cast<std::size_t>(r)], c);
  }
  // Reduced row echelon form over GF(2).
  pivots_.clear();
  Index row = 0;
  std::vector<std::uint8_t> is_pivot(static_cast<std::size_t>(n_), 0);
  for (Index col = 0; col < n_ && row < m; ++col) {
    Index sel = -1;
    for (Index r = row; r < m; ++r) {
      if (test(h[static_cast<std::size_t>(r)], col)) {
        sel = r;
        break;
      }
    }
    if (sel < 0) continue;
    std::swap(h[static_cast<std::size_t>(row)], h[static_cast<std::size_t>(sel)]);
    for (Index r = 0; r < m; ++r) {
      if (r != row && test(h[static_cast<std::size_t>(r)], col)) {
        for (Index w = 0; w < words; ++w) {
          h[static_cast<std::size_t>(r)][static_cast<std::size_t>(w)] ^=
              h[static_cast<std::size_t>(row)][static_cast<std::size_t>(w)];
        }
      }
    }
    pivots_.push_back(col);
    is_pivot[static_cast<std::size_t>(col)] = 1;
    ++row;
  }
  if (row < m) return false;

  info_.clear();
  for (Index c = 0; c < n_; ++c) {
    if (!is_pivot[static_cast<std::size_t>(c)]) info_.push_back(c);
  }
  const Index kwords = (k() + 63) / 64;
  parity_.assign(static_cast<std::size_t>(m), Row(static_cast<std::size_t>(kwords), 0));
  for (Index r = 0; r < m; ++r) {
    for (Index i = 0; i < k(); ++i) {
      if (test(h[static_cast<std::size_t>(r)], info_[static_cast<std::size_t>(i)])) {
        flip(parity_[static_cast<std::size_t>(r)], i);
      }
    }
  }
  // Every generator row must satisfy all checks.
  for (const Bits& g : generator()) {
    if (!is_codeword(g)) throw Error("ldpc: generator violates G * H^T = 0");
  }
  return true;
}

Index LdpcCode::four_cycles() const {
  Index count = 0;
  for (std::size_t a = 0; a < checks_.size(); ++a) {
    for (std::size_t b = a + 1; b < checks_.size(); ++b) {
      std::vector<Index> common;
      std::set_intersection(checks_[a].begin(), checks_[a].end(), checks_[b].begin(),
                            checks_[b].end(), std::back_inserter(common));
      const auto s = static_cast<Index>(common.size());
      count += s * (s - 1) / 2;
    }
  }
  return count;
}

Bits LdpcCode::encode(const Bits& message) const {
  if (static_cast<Index>(message.size()) != k()) {
    throw DimensionError("ldpc encode: expected " + std::to_string(k()) + " bits, got " +
                         std::to_string(message.size()));
  }
  Row packed(static_cast<std::size_t>((k() + 63) / 64), 0);
  Bits word(static_cast<std::size_t>(n_), 0);
  for (Index i = 0; i < k(); ++i) {
    const std::uint8_t b = message[static_cast<std::size_t>(i)] & 1u;
    word[static_cast<std::size_t>(info_[static_cast<std::size_t>(i)])] = b;
    if (b) flip(packed, i);
  }
  for (std::size_t r = 0; r < parity_.size(); ++r) {
    int parity = 0;
    for (std::size_t w = 0; w < packed.size(); ++w) parity ^= std::popcount(parity_[r][w] & packed[w]) & 1;
    word[static_cast<std::size_t>(pivots_[r])] = static_cast<std::uint8_t>(parity);
  }
  return word;
}

bool LdpcCode::is_codeword(const Bits& word) const {
  if (static_cast<Index>(word.size()) != n_) return false;
  for (const auto& row : checks_) {
    int s = 0;
    for (Index c : row) s ^= word[static_cast<std::size_t>(c)] & 1;
    if (s) return false;
  }
  return true;
}

std::vector<Bits> LdpcCode::generator() const {
  std::vector<Bits> g;
  Bits unit(static_cast<std::size_t>(k()), 0);
  for (Index i = 0; i < k(); ++i) {
    unit[static_cast<std::size_t>(i)] = 1;
    g.push_back(encode(unit));
    unit[static_cast<std::size_t>(i)] = 0;
  }
  return g;
}

LdpcDecodeResult LdpcCode::decode(const std::vector<double>& llr, int max_iters) const {
  if (static_cast<Index>(llr.size()) != n_) {
    throw DimensionError("ldpc decode: expected " + std::to_string(n_) + " LLRs, got " +
                         std::to_string(llr.size()));
  }
  constexpr double kClip = 1.0 - 1e-15;
  // Edge e connects checks_[r][i]; messages live on edges in check order.
  std::vector<std::size_t> offset(checks_.size() + 1, 0);
  for (std::size_t r = 0; r < checks_.size(); ++r) offset[r + 1] = offset[r] + checks_[r].size();
  const std::size_t edges = offset.back();
  std::vector<double> v2c(edges), c2v(edges, 0.0), tanh_half(edges);
  for (std::size_t r = 0; r < checks_.size(); ++r) {
    for (std::size_t i = 0; i < checks_[r].size(); ++i) {
      v2c[offset[r] + i] = llr[static_cast<std::size_t>(checks_[r][i])];
    }
  }
  LdpcDecodeResult res;
  res.codeword.assign(static_cast<std::size_t>(n_), 0);
  std::vector<double> total(llr);
  auto decide = [&] {
    for (Index c = 0; c < n_; ++c) res.codeword[static_cast<std::size_t>(c)] = total[static_cast<std::size_t>(c)] < 0.0;
    return is_codeword(res.codeword);
  };
  res.success = decide();
  while (!res.success && res.iterations < max_iters) {
    ++res.iterations;
    for (std::size_t r = 0; r < checks_.size(); ++r) {
      const std::size_t deg = checks_[r].size();
      for (std::size_t i = 0; i < deg; ++i) tanh_half[offset[r] + i] = std::tanh(0.5 * v2c[offset[r] + i]);
      for (std::size_t i = 0; i < deg; ++i) {
        double prod = 1.0;
        for (std::size_t j = 0; j < deg; ++j) {
          if (j != i) prod *= tanh_half[offset[r] + j];
        }
        prod = std::clamp(prod, -kClip, kClip);
        c2v[offset[r] + i] = 2.0 * std::atanh(prod);
      }
    }
    total = llr;
    for (std::size_t r = 0; r < checks_.size(); ++r) {
      for (std::size_t i = 0; i < checks_[r].size(); ++i) {
        total[static_cast<std::size_t>(checks_[r][i])] += c2v[offset[r] + i];
      }
    }
    for (std::size_t r = 0; r < checks_.size(); ++r) {
      for (std::size_t i = 0; i < checks_[r].size(); ++i) {
        v2c[offset[r] + i] = total[static_cast<std::size_t>(checks_[r][i])] - c2v[offset[r] + i];
      }
    }
    res.success = decide();
  }
  res.message.resize(static_cast<std::size_t>(k()));
  for (Index i = 0; i < k(); ++i) {
    res.message[static_cast<std::size_t>(i)] = res.codeword[static_cast<std::size_t>(info_[static_cast<std::size_t>(i)])];
  }
  return res;
}

}  // namespace fssc::baseline
