// chainforge/matrix.h

// Copyright 2024-2026  Chainforge Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef CHAINFORGE_MATRIX_H_
#define CHAINFORGE_MATRIX_H_

#include <cassert>
#include <vector>

#include "chainforge/common.h"

namespace chainforge {

// Dense row-major matrix.  Deliberately small: storage plus element access.
// Heavier linear algebra lives in the .cc files (backed by Eigen maps over
// this storage).
template <typename Real>
class Matrix {
 public:
  Matrix() : rows_(0), cols_(0) {}
  Matrix(int32 rows, int32 cols) { Resize(rows, cols); }

  void Resize(int32 rows, int32 cols) {
    assert(rows >= 0 && cols >= 0);
    rows_ = rows;
    cols_ = cols;
    data_.assign(size_t(rows) * size_t(cols), Real(0));
  }

  int32 NumRows() const { return rows_; }
  int32 NumCols() const { return cols_; }
  bool Empty() const { return rows_ == 0 || cols_ == 0; }
  bool SameDim(const Matrix &other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  Real &operator()(int32 r, int32 c) {
    assert(r >= 0 && r < rows_ && c >= 0 && c < cols_);
    return data_[size_t(r) * cols_ + c];
  }
  Real operator()(int32 r, int32 c) const {
    assert(r >= 0 && r < rows_ && c >= 0 && c < cols_);
    return data_[size_t(r) * cols_ + c];
  }

  Real *RowData(int32 r) { return data_.data() + size_t(r) * cols_; }
  const Real *RowData(int32 r) const { return data_.data() + size_t(r) * cols_; }
  Real *Data() { return data_.data(); }
  const Real *Data() const { return data_.data(); }
  size_t NumElements() const { return data_.size(); }

  void SetZero() { data_.assign(data_.size(), Real(0)); }

  bool operator==(const Matrix &other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
  }

 private:
  int32 rows_, cols_;
  std::vector<Real> data_;
};

using Mat = Matrix<float>;    // parameters and activations
using MatD = Matrix<double>;  // loss-side log-likelihoods and gradients

}  // namespace chainforge

#endif  // CHAINFORGE_MATRIX_H_
