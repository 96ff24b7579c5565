#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "roadtoll/errors.hpp"

namespace roadtoll {

// Dense row-major matrix over an arbitrary scalar (double for the simulation
// pipeline, exact rationals in tests). Sized for desk-scale problems; no view
// machinery, no expression templates.
template <class T>
class Mat {
 public:
  Mat() = default;
  Mat(int rows, int cols, T init = T{})
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, init) {}

  Mat(std::initializer_list<std::initializer_list<T>> rows) {
    rows_ = static_cast<int>(rows.size());
    cols_ = rows_ > 0 ? static_cast<int>(rows.begin()->size()) : 0;
    data_.reserve(static_cast<std::size_t>(rows_) * cols_);
    for (const auto& row : rows) {
      if (static_cast<int>(row.size()) != cols_)
        throw DimensionMismatch("ragged initializer for Mat");
      data_.insert(data_.end(), row.begin(), row.end());
    }
  }

  static Mat identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = T(1);
    return m;
  }

  static Mat ones(int rows, int cols) { return Mat(rows, cols, T(1)); }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  const T& operator()(int r, int c) const {
    return data_[static_cast<std::size_t>(r) * cols_ + c];
  }

  // Row-major storage doubles as the group-major flattened vector for
  // population states: index (r,k) -> r*K + k.
  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool operator==(const Mat& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

template <class T>
Mat<T> transpose(const Mat<T>& m) {
  Mat<T> t(m.cols(), m.rows());
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) t(c, r) = m(r, c);
  return t;
}

template <class T>
Mat<T> matmul(const Mat<T>& a, const Mat<T>& b) {
  if (a.cols() != b.rows()) throw DimensionMismatch("matmul: inner dimensions differ");
  Mat<T> c(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int k = 0; k < a.cols(); ++k) {
      const T& aik = a(i, k);
      for (int j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

template <class T>
std::vector<T> matvec(const Mat<T>& a, const std::vector<T>& x) {
  if (a.cols() != static_cast<int>(x.size()))
    throw DimensionMismatch("matvec: dimension mismatch");
  std::vector<T> y(a.rows(), T{});
  for (int i = 0; i < a.rows(); ++i) {
    T acc{};
    for (int j = 0; j < a.cols(); ++j) acc += a(i, j) * x[j];
    y[i] = acc;
  }
  return y;
}

template <class T>
Mat<T> operator+(const Mat<T>& a, const Mat<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionMismatch("matrix sum: shape mismatch");
  Mat<T> c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] += b.data()[i];
  return c;
}

template <class T>
Mat<T> scale(const Mat<T>& a, const T& s) {
  Mat<T> c = a;
  for (auto& v : c.data()) v *= s;
  return c;
}

// (M + M')/2
template <class T>
Mat<T> symmetric_part(const Mat<T>& m) {
  if (m.rows() != m.cols()) throw DimensionMismatch("symmetric_part: matrix not square");
  Mat<T> s(m.rows(), m.cols());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) s(i, j) = (m(i, j) + m(j, i)) / T(2);
  return s;
}

template <class T>
Mat<T> kron(const Mat<T>& a, const Mat<T>& b) {
  Mat<T> c(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) {
      const T& aij = a(i, j);
      for (int p = 0; p < b.rows(); ++p)
        for (int q = 0; q < b.cols(); ++q)
          c(i * b.rows() + p, j * b.cols() + q) = aij * b(p, q);
    }
  return c;
}

template <class T, class U>
Mat<T> cast_mat(const Mat<U>& m) {
  Mat<T> out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.size(); ++i) out.data()[i] = T(m.data()[i]);
  return out;
}

}  // namespace roadtoll
