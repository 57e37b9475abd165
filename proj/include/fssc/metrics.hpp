#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>

#include "fssc/errors.hpp"
#include "fssc/tensor.hpp"

namespace fssc {

/// Reported PSNR when the reconstruction is exact.
inline constexpr double kPsnrCap = 99.0;
/// Peak value for comparing against tools that work on 8-bit pixels.
inline constexpr double kEightBitPeak = 255.0;

/// (1/L) * sum (x_i - y_i)^2 over all L entries.
template <typename A, typename B>
double mse(const Eigen::DenseBase<A>& x, const Eigen::DenseBase<B>& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols()) {
    throw DimensionError("mse: " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                         " vs " + std::to_string(y.rows()) + "x" + std::to_string(y.cols()));
  }
  if (x.size() == 0) throw DimensionError("mse: empty input");
  return (x.derived().template cast<double>() - y.derived().template cast<double>())
             .array()
             .square()
             .sum() /
         double(x.size());
}

template <typename S>
double mse(const Tensor<S>& x, const Tensor<S>& y) {
  if (x.shape() != y.shape()) {
    throw DimensionError("mse: shapes " + shape_str(x.shape()) + " and " + shape_str(y.shape()));
  }
  return mse(x.value(), y.value());
}

/// 10*log10(max_val^2 / mse), or kPsnrCap when mse is 0.
inline double psnr_from_mse(double mse_value, double max_val = 1.0) {
  if (mse_value <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(max_val * max_val / mse_value));
}

template <typename A, typename B>
double psnr(const Eigen::DenseBase<A>& x, const Eigen::DenseBase<B>& y, double max_val = 1.0) {
  return psnr_from_mse(mse(x, y), max_val);
}

template <typename S>
double psnr(const Tensor<S>& x, const Tensor<S>& y, double max_val = 1.0) {
  return psnr_from_mse(mse(x, y), max_val);
}

/// One experiment output row. `scope` is a client id or "global".
struct MetricRecord {
  int round = 0;
  std::string scope = "global";
  double snr_db = 0.0;
  double mse = 0.0;
  double psnr_db = 0.0;

  static MetricRecord from_mse(int round, std::string scope, double snr_db, double mse_value) {
    return {round, std::move(scope), snr_db, mse_value, psnr_from_mse(mse_value)};
  }
};

}  // namespace fssc
