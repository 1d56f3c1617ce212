#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "jamlab/error.hpp"

namespace jamlab {

// Dense row-major tensor of up to 4 dimensions, flat Eigen storage.
template <class S>
struct Tensor {
  using Buffer = Eigen::Matrix<S, Eigen::Dynamic, 1>;
  using MatMap = Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using ConstMatMap =
      Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

  std::vector<int> shape;
  Buffer data;

  Tensor() = default;
  explicit Tensor(std::vector<int> shp) : shape(std::move(shp)) {
    data = Buffer::Zero(count(shape));
  }

  static long count(const std::vector<int>& shp) {
    long n = 1;
    for (int d : shp) {
      if (d < 0) throw ShapeError("negative dimension");
      n *= d;
    }
    return n;
  }

  static Tensor zeros(std::vector<int> shp) { return Tensor(std::move(shp)); }

  static Tensor full(std::vector<int> shp, S v) {
    Tensor t(std::move(shp));
    t.data.setConstant(v);
    return t;
  }

  static Tensor from(std::vector<int> shp, std::initializer_list<S> vals) {
    Tensor t(std::move(shp));
    if (static_cast<long>(vals.size()) != t.size())
      throw ShapeError("initializer size mismatch");
    long i = 0;
    for (S v : vals) t.data[i++] = v;
    return t;
  }

  long size() const { return data.size(); }
  int ndim() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[i]; }

  S& operator[](long i) { return data[i]; }
  S operator[](long i) const { return data[i]; }

  // 2-D row-major view; tensor must have exactly 2 dims (or be reshaped by caller)
  MatMap mat() {
    if (ndim() != 2) throw ShapeError("mat(): tensor is not 2-D");
    return MatMap(data.data(), shape[0], shape[1]);
  }
  ConstMatMap mat() const {
    if (ndim() != 2) throw ShapeError("mat(): tensor is not 2-D");
    return ConstMatMap(data.data(), shape[0], shape[1]);
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  template <class T>
  Tensor<T> cast() const {
    Tensor<T> out;
    out.shape = shape;
    out.data = data.template cast<T>();
    return out;
  }

  bool all_finite() const {
    for (long i = 0; i < size(); ++i)
      if (!std::isfinite(static_cast<double>(data[i]))) return false;
    return true;
  }
};

inline std::string shape_str(const std::vector<int>& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

}  // namespace jamlab
