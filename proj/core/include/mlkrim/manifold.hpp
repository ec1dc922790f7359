#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mlkrim/tensor.hpp"

namespace mlkrim {

struct LandmarkSet {
  Matrix points;                     // nu x n_l, columns copied from the navigators
  std::vector<std::size_t> indices;  // source frame of each column, in selection order

  std::size_t size() const noexcept { return indices.size(); }
};

// Greedy farthest-point (min-max) selection. Seeds with the column farthest
// from the column mean, then repeatedly adds the column whose distance to the
// selected set is largest. Ties go to the lowest index.
LandmarkSet select_landmarks(const Matrix& navigators, std::size_t n_l);

struct GaussianKernel {
  double sigma2 = 1.0;  // exp(-||x - y||^2 / sigma2)
};

struct PolynomialKernel {
  int degree = 1;  // (scale * x^H y + offset)^degree
  double offset = 1.0;
  double scale = 1.0;
};

class KernelSpec {
 public:
  static KernelSpec gaussian(double sigma2);
  static KernelSpec polynomial(int degree, double offset, double scale);

  bool is_gaussian() const noexcept { return kind_ == Kind::Gaussian; }
  const GaussianKernel& as_gaussian() const { return gaussian_; }
  const PolynomialKernel& as_polynomial() const { return polynomial_; }

  cdouble operator()(const Vector& x, const Vector& y) const;
  std::string describe() const;

 private:
  enum class Kind { Gaussian, Polynomial };
  Kind kind_ = Kind::Gaussian;
  GaussianKernel gaussian_{};
  PolynomialKernel polynomial_{};
};

cdouble kernel_value(const KernelSpec& spec, const Vector& x, const Vector& y);

struct KernelDictionary {
  std::vector<KernelSpec> specs;
  std::vector<Matrix> grams;  // n_l x n_l each, Hermitian

  std::size_t size() const noexcept { return specs.size(); }
  std::size_t n_l() const noexcept { return grams.empty() ? 0 : static_cast<std::size_t>(grams[0].rows()); }
};

// Gram matrices over the landmark columns. Every Gram is symmetrized to exact
// Hermitian form; Gaussian Grams must have min eigenvalue >= -1e-8.
KernelDictionary build_dictionary(const LandmarkSet& landmarks, const std::vector<KernelSpec>& specs);

// Median of the pairwise Euclidean distances between landmark columns; 1 when
// there is a single landmark or all landmarks coincide.
double median_landmark_distance(const LandmarkSet& landmarks);

// m = 1: Gaussian at sigma0^2. m = 3: Gaussians at {1/2, 1, 2} sigma0^2.
// m = 7: Gaussians at {1/4, 1/2, 1, 2, 4} sigma0^2 plus polynomials of degree
// 1 and 2 with offset 1 and scale 1 / sigma0^2.
std::vector<KernelSpec> default_specs(const LandmarkSet& landmarks, std::size_t m);

}  // namespace mlkrim
