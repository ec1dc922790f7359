#include "mlkrim/tensor.hpp"

#include <cmath>
#include <string>

#include "mlkrim/error.hpp"

namespace mlkrim {

DataDims::DataDims(std::size_t f, std::size_t p, std::size_t fr) : n_f(f), n_p(p), n_fr(fr) {
  if (f == 0 || p == 0 || fr == 0) {
    throw ParameterError("dimensions must be positive, got " + std::to_string(f) + "x" +
                         std::to_string(p) + "x" + std::to_string(fr));
  }
}

ComplexTensor3::ComplexTensor3(const DataDims& dims, cdouble fill)
    : dims_(dims), data_(dims.size(), fill) {}

std::span<cdouble> ComplexTensor3::frame(std::size_t t) {
  return std::span<cdouble>(data_).subspan(t * dims_.n_k(), dims_.n_k());
}

std::span<const cdouble> ComplexTensor3::frame(std::size_t t) const {
  return std::span<const cdouble>(data_).subspan(t * dims_.n_k(), dims_.n_k());
}

Matrix ComplexTensor3::frame_matrix(std::size_t t) const {
  auto f = frame(t);
  return Eigen::Map<const Matrix>(f.data(), static_cast<Eigen::Index>(dims_.n_f),
                                  static_cast<Eigen::Index>(dims_.n_p));
}

void ComplexTensor3::set_frame(std::size_t t, const Matrix& m) {
  if (static_cast<std::size_t>(m.rows()) != dims_.n_f ||
      static_cast<std::size_t>(m.cols()) != dims_.n_p) {
    throw ShapeError("frame shape does not match tensor dims");
  }
  auto f = frame(t);
  Eigen::Map<Matrix>(f.data(), m.rows(), m.cols()) = m;
}

double ComplexTensor3::norm() const {
  double s = 0.0;
  for (const auto& v : data_) s += std::norm(v);
  return std::sqrt(s);
}

bool ComplexTensor3::all_finite() const {
  for (const auto& v : data_) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  }
  return true;
}

Vector vectorize_frame(const Matrix& frame) {
  return Eigen::Map<const Vector>(frame.data(), frame.size());
}

Matrix devectorize_frame(const Vector& v, std::size_t n_f, std::size_t n_p) {
  if (static_cast<std::size_t>(v.size()) != n_f * n_p) {
    throw ShapeError("vector of length " + std::to_string(v.size()) + " cannot form a " +
                     std::to_string(n_f) + "x" + std::to_string(n_p) + " frame");
  }
  return Eigen::Map<const Matrix>(v.data(), static_cast<Eigen::Index>(n_f),
                                  static_cast<Eigen::Index>(n_p));
}

DataMatrix tensor_to_matrix(const ComplexTensor3& t) {
  const auto& d = t.dims();
  return Eigen::Map<const Matrix>(t.data().data(), static_cast<Eigen::Index>(d.n_k()),
                                  static_cast<Eigen::Index>(d.n_fr));
}

ComplexTensor3 matrix_to_tensor(const DataMatrix& m, const DataDims& dims) {
  if (static_cast<std::size_t>(m.rows()) != dims.n_k() ||
      static_cast<std::size_t>(m.cols()) != dims.n_fr) {
    throw ShapeError("matrix " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                     " does not match n_k x n_fr = " + std::to_string(dims.n_k()) + "x" +
                     std::to_string(dims.n_fr));
  }
  ComplexTensor3 t(dims);
  Eigen::Map<Matrix>(t.data().data(), m.rows(), m.cols()) = m;
  return t;
}

std::size_t navigator_band_start(std::size_t n_p, std::size_t upsilon) {
  if (upsilon < 1 || upsilon > n_p) {
    throw ParameterError("navigator width upsilon=" + std::to_string(upsilon) +
                         " outside [1, n_p=" + std::to_string(n_p) + "]");
  }
  return (n_p - upsilon) / 2;
}

Matrix extract_navigator(const ComplexTensor3& y, std::size_t upsilon) {
  const auto& d = y.dims();
  const std::size_t first = navigator_band_start(d.n_p, upsilon);
  const auto nu = static_cast<Eigen::Index>(upsilon * d.n_f);
  Matrix nav(nu, static_cast<Eigen::Index>(d.n_fr));
  for (std::size_t t = 0; t < d.n_fr; ++t) {
    // The band columns are contiguous in column-major storage.
    auto f = y.frame(t);
    nav.col(static_cast<Eigen::Index>(t)) =
        Eigen::Map<const Vector>(f.data() + first * d.n_f, nu);
  }
  return nav;
}

}  // namespace mlkrim
