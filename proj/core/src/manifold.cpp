#include "mlkrim/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "mlkrim/error.hpp"
#include "mlkrim/parallel.hpp"

namespace mlkrim {

LandmarkSet select_landmarks(const Matrix& navigators, std::size_t n_l) {
  const auto n = static_cast<std::size_t>(navigators.cols());
  if (n_l < 1 || n_l > n) {
    throw ParameterError("cannot select " + std::to_string(n_l) + " landmarks from " +
                         std::to_string(n) + " frames");
  }
  const Vector mean = navigators.rowwise().mean();
  std::vector<double> dist(n);
  for (std::size_t j = 0; j < n; ++j) {
    dist[j] = (navigators.col(static_cast<Eigen::Index>(j)) - mean).norm();
  }

  std::vector<bool> taken(n, false);
  LandmarkSet out;
  out.indices.reserve(n_l);
  // dist[] holds the distance to the mean for the seed, then the running
  // minimum distance to the selected set.
  for (std::size_t step = 0; step < n_l; ++step) {
    std::size_t best = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (taken[j]) continue;
      if (best == n || dist[j] > dist[best]) best = j;
    }
    taken[best] = true;
    out.indices.push_back(best);
    const auto chosen = navigators.col(static_cast<Eigen::Index>(best));
    for (std::size_t j = 0; j < n; ++j) {
      if (taken[j]) continue;
      const double d = (navigators.col(static_cast<Eigen::Index>(j)) - chosen).norm();
      dist[j] = step == 0 ? d : std::min(dist[j], d);
    }
  }

  out.points.resize(navigators.rows(), static_cast<Eigen::Index>(n_l));
  for (std::size_t k = 0; k < n_l; ++k) {
    out.points.col(static_cast<Eigen::Index>(k)) =
        navigators.col(static_cast<Eigen::Index>(out.indices[k]));
  }
  return out;
}

KernelSpec KernelSpec::gaussian(double sigma2) {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
    throw ParameterError("gaussian kernel needs sigma^2 > 0");
  }
  KernelSpec k;
  k.kind_ = Kind::Gaussian;
  k.gaussian_.sigma2 = sigma2;
  return k;
}

KernelSpec KernelSpec::polynomial(int degree, double offset, double scale) {
  if (degree < 1 || !(offset >= 0.0) || !(scale > 0.0)) {
    throw ParameterError("polynomial kernel needs degree >= 1, offset >= 0, scale > 0");
  }
  KernelSpec k;
  k.kind_ = Kind::Polynomial;
  k.polynomial_ = {degree, offset, scale};
  return k;
}

cdouble KernelSpec::operator()(const Vector& x, const Vector& y) const {
  if (x.size() != y.size()) {
    throw ShapeError("kernel arguments have lengths " + std::to_string(x.size()) + " and " +
                     std::to_string(y.size()));
  }
  if (kind_ == Kind::Gaussian) {
    return std::exp(-(x - y).squaredNorm() / gaussian_.sigma2);
  }
  const cdouble inner = x.dot(y);  // x^H y
  return std::pow(polynomial_.scale * inner + polynomial_.offset, polynomial_.degree);
}

std::string KernelSpec::describe() const {
  std::ostringstream os;
  os.precision(6);
  if (kind_ == Kind::Gaussian) {
    os << "gaussian(sigma2=" << gaussian_.sigma2 << ")";
  } else {
    os << "polynomial(degree=" << polynomial_.degree << ",offset=" << polynomial_.offset
       << ",scale=" << polynomial_.scale << ")";
  }
  return os.str();
}

cdouble kernel_value(const KernelSpec& spec, const Vector& x, const Vector& y) {
  return spec(x, y);
}

KernelDictionary build_dictionary(const LandmarkSet& landmarks,
                                  const std::vector<KernelSpec>& specs) {
  if (specs.empty()) throw ParameterError("kernel dictionary needs at least one kernel");
  const auto n_l = landmarks.points.cols();
  KernelDictionary dict;
  dict.specs = specs;
  dict.grams.assign(specs.size(), Matrix(n_l, n_l));
  parallel_for(specs.size(), [&](std::size_t m) {
    Matrix& gram = dict.grams[m];
    for (Eigen::Index a = 0; a < n_l; ++a) {
      for (Eigen::Index b = 0; b < n_l; ++b) {
        gram(a, b) = specs[m](landmarks.points.col(a), landmarks.points.col(b));
      }
    }
    gram = (0.5 * (gram + gram.adjoint())).eval();
  });
  for (std::size_t m = 0; m < specs.size(); ++m) {
    if (!dict.grams[m].allFinite()) {
      throw NumericalError("kernel " + specs[m].describe() + " produced non-finite Gram entries");
    }
    if (!specs[m].is_gaussian()) continue;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(dict.grams[m], Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    if (lo < -1e-8) {
      throw NumericalError("gaussian Gram " + specs[m].describe() +
                           " is not positive semidefinite (min eigenvalue " + std::to_string(lo) +
                           ")");
    }
  }
  return dict;
}

double median_landmark_distance(const LandmarkSet& landmarks) {
  const auto n = landmarks.points.cols();
  std::vector<double> d;
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = a + 1; b < n; ++b)
      d.push_back((landmarks.points.col(a) - landmarks.points.col(b)).norm());
  if (d.empty()) return 1.0;
  std::sort(d.begin(), d.end());
  const std::size_t h = d.size() / 2;
  const double med = d.size() % 2 ? d[h] : 0.5 * (d[h - 1] + d[h]);
  return med > 0.0 ? med : 1.0;
}

std::vector<KernelSpec> default_specs(const LandmarkSet& landmarks, std::size_t m) {
  const double s0 = median_landmark_distance(landmarks);
  const double s2 = s0 * s0;
  std::vector<KernelSpec> out;
  switch (m) {
    case 1:
      out.push_back(KernelSpec::gaussian(s2));
      break;
    case 3:
      for (double f : {0.5, 1.0, 2.0}) out.push_back(KernelSpec::gaussian(f * s2));
      break;
    case 7:
      for (double f : {0.25, 0.5, 1.0, 2.0, 4.0}) out.push_back(KernelSpec::gaussian(f * s2));
      out.push_back(KernelSpec::polynomial(1, 1.0, 1.0 / s2));
      out.push_back(KernelSpec::polynomial(2, 1.0, 1.0 / s2));
      break;
    default:
      throw ParameterError("no default kernel set for M=" + std::to_string(m) +
                           " (supported: 1, 3, 7)");
  }
  return out;
}

}  // namespace mlkrim
