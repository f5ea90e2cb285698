#pragma once

#include <Eigen/Dense>

#include <string>

#include "tsastat/errors.hpp"

namespace tsastat {

/// Dense real tensor. Everything in this project is at most rank 2:
/// an n-channel, T-step signal is an n x T array, a flattened activation
/// is an m x 1 array, a scalar is 1 x 1. Row-major so that flatten and
/// the on-disk layouts are plain memory order.
using Tensor = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline std::string shape_string(const Tensor& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

inline bool same_shape(const Tensor& a, const Tensor& b) {
  return a.rows() == b.rows() && a.cols() == b.cols();
}

inline Tensor scalar_tensor(double v) {
  Tensor t(1, 1);
  t(0, 0) = v;
  return t;
}

/// Row-major reshape without copying semantics surprises.
inline Tensor reshape(const Tensor& t, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != t.size())
    throw ConfigError("reshape: size mismatch " + shape_string(t) + " -> " +
                      std::to_string(rows) + "x" + std::to_string(cols));
  Tensor out(rows, cols);
  Eigen::Map<Eigen::ArrayXd>(out.data(), out.size()) =
      Eigen::Map<const Eigen::ArrayXd>(t.data(), t.size());
  return out;
}

inline double max_abs(const Tensor& t) { return t.abs().maxCoeff(); }

}  // namespace tsastat
