#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace mlkrim {

using cdouble = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;

// Frame-stacked data: n_k rows (vectorized frames), n_fr columns.
using DataMatrix = Matrix;

struct DataDims {
  std::size_t n_f = 1;   // frequency-encoding lines (rows of a frame)
  std::size_t n_p = 1;   // phase-encoding lines (columns of a frame)
  std::size_t n_fr = 1;  // frames

  DataDims() = default;
  DataDims(std::size_t f, std::size_t p, std::size_t fr);

  std::size_t n_k() const noexcept { return n_f * n_p; }
  std::size_t size() const noexcept { return n_f * n_p * n_fr; }
  friend bool operator==(const DataDims&, const DataDims&) = default;
};

// Dense n_f x n_p x n_fr complex array. Storage is column-major inside a
// frame and frames are contiguous, so frame t is exactly vec(frame t).
class ComplexTensor3 {
 public:
  ComplexTensor3() = default;
  explicit ComplexTensor3(const DataDims& dims, cdouble fill = {0.0, 0.0});

  const DataDims& dims() const noexcept { return dims_; }

  cdouble& operator()(std::size_t r, std::size_t i, std::size_t t) {
    return data_[index(r, i, t)];
  }
  const cdouble& operator()(std::size_t r, std::size_t i, std::size_t t) const {
    return data_[index(r, i, t)];
  }

  std::span<cdouble> frame(std::size_t t);
  std::span<const cdouble> frame(std::size_t t) const;

  std::span<cdouble> data() noexcept { return data_; }
  std::span<const cdouble> data() const noexcept { return data_; }

  Matrix frame_matrix(std::size_t t) const;
  void set_frame(std::size_t t, const Matrix& frame);

  double norm() const;
  bool all_finite() const;

  friend bool operator==(const ComplexTensor3& a, const ComplexTensor3& b) {
    return a.dims_ == b.dims_ && a.data_ == b.data_;
  }

 private:
  std::size_t index(std::size_t r, std::size_t i, std::size_t t) const noexcept {
    return (t * dims_.n_p + i) * dims_.n_f + r;
  }

  DataDims dims_{};
  std::vector<cdouble> data_;
};

// Column stacking: entry (r, i) lands at index i * n_f + r.
Vector vectorize_frame(const Matrix& frame);
Matrix devectorize_frame(const Vector& v, std::size_t n_f, std::size_t n_p);

DataMatrix tensor_to_matrix(const ComplexTensor3& t);
ComplexTensor3 matrix_to_tensor(const DataMatrix& m, const DataDims& dims);

enum class Direction { Forward, Inverse };

// Unitary 2D DFT applied to every frame. k-space is centred: the DC bin of
// each axis sits at index floor(n / 2).
ComplexTensor3 dft2_frames(const ComplexTensor3& x, Direction dir);

// Unitary 1D DFT along each row (the time series of one pixel). DC is bin 0.
DataMatrix temporal_dft(const DataMatrix& x, Direction dir);

// First column of the central phase-encoding band of width upsilon.
std::size_t navigator_band_start(std::size_t n_p, std::size_t upsilon);

// nu x n_fr matrix (nu = upsilon * n_f) of the central k-space band per frame.
Matrix extract_navigator(const ComplexTensor3& y, std::size_t upsilon);

}  // namespace mlkrim
