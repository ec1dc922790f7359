#include "mlkrim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>

#include "mlkrim/error.hpp"
#include "mlkrim/parallel.hpp"

namespace mlkrim {

namespace {

void require_same(const DataDims& a, const DataDims& b) {
  if (!(a == b)) throw ShapeError("metric operands have different shapes");
}

RealMatrix magnitude(const ComplexTensor3& x, std::size_t t) {
  return x.frame_matrix(t).cwiseAbs();
}

double max_magnitude(const ComplexTensor3& x) {
  double m = 0.0;
  for (const auto& v : x.data()) m = std::max(m, std::abs(v));
  return m;
}

// Correlation restricted to positions where the window fits entirely.
RealMatrix filter_valid(const RealMatrix& img, const RealMatrix& w) {
  const Eigen::Index rows = img.rows() - w.rows() + 1, cols = img.cols() - w.cols() + 1;
  RealMatrix out(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r)
      out(r, c) = (img.block(r, c, w.rows(), w.cols()).array() * w.array()).sum();
  return out;
}

Eigen::Index mirror(Eigen::Index i, Eigen::Index n) {
  // Symmetric padding repeats the edge sample: -1 -> 0, n -> n - 1.
  while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
  return i;
}

}  // namespace

double nrmse(const DataMatrix& x_true, const DataMatrix& x_est) {
  if (x_true.rows() != x_est.rows() || x_true.cols() != x_est.cols()) {
    throw ShapeError("nrmse operands have different shapes");
  }
  const double ref = x_true.norm();
  if (!(ref > 0.0)) throw ParameterError("nrmse reference has zero norm");
  return (x_true - x_est).norm() / ref;
}

RealMatrix gaussian_window(int size, double sigma) {
  RealMatrix w(size, size);
  const double c = (size - 1) / 2.0;
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j)
      w(i, j) = std::exp(-((i - c) * (i - c) + (j - c) * (j - c)) / (2.0 * sigma * sigma));
  return w / w.sum();
}

RealMatrix log_kernel(int size, double sigma) {
  const double c = (size - 1) / 2.0, s2 = sigma * sigma;
  RealMatrix g(size, size), h(size, size);
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      const double r2 = (i - c) * (i - c) + (j - c) * (j - c);
      g(i, j) = std::exp(-r2 / (2.0 * s2));
    }
  }
  g /= g.sum();
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      const double r2 = (i - c) * (i - c) + (j - c) * (j - c);
      h(i, j) = g(i, j) * (r2 - 2.0 * s2) / (s2 * s2);
    }
  }
  // Zero-sum so that constant images map to zero.
  h.array() -= h.sum() / static_cast<double>(h.size());
  return h;
}

RealMatrix filter_symmetric(const RealMatrix& image, const RealMatrix& kernel) {
  const Eigen::Index hr = kernel.rows() / 2, hc = kernel.cols() / 2;
  RealMatrix out(image.rows(), image.cols());
  for (Eigen::Index c = 0; c < image.cols(); ++c) {
    for (Eigen::Index r = 0; r < image.rows(); ++r) {
      double acc = 0.0;
      for (Eigen::Index kc = 0; kc < kernel.cols(); ++kc) {
        const Eigen::Index sc = mirror(c + kc - hc, image.cols());
        for (Eigen::Index kr = 0; kr < kernel.rows(); ++kr) {
          acc += kernel(kr, kc) * image(mirror(r + kr - hr, image.rows()), sc);
        }
      }
      out(r, c) = acc;
    }
  }
  return out;
}

double ssim(const ComplexTensor3& x_true, const ComplexTensor3& x_est) {
  require_same(x_true.dims(), x_est.dims());
  const auto& d = x_true.dims();
  constexpr int kWin = 11;
  if (d.n_f < kWin || d.n_p < kWin) throw ShapeError("SSIM needs frames of at least 11x11");
  const double range = std::max(max_magnitude(x_true), max_magnitude(x_est));
  if (range == 0.0) return 1.0;
  const double c1 = (0.01 * range) * (0.01 * range), c2 = (0.03 * range) * (0.03 * range);
  const RealMatrix w = gaussian_window(kWin, 1.5);

  std::vector<double> per_frame(d.n_fr);
  parallel_for(d.n_fr, [&](std::size_t t) {
    const RealMatrix a = magnitude(x_true, t), b = magnitude(x_est, t);
    const RealMatrix mu_a = filter_valid(a, w), mu_b = filter_valid(b, w);
    const RealMatrix aa = filter_valid(a.cwiseProduct(a), w) - mu_a.cwiseProduct(mu_a);
    const RealMatrix bb = filter_valid(b.cwiseProduct(b), w) - mu_b.cwiseProduct(mu_b);
    const RealMatrix ab = filter_valid(a.cwiseProduct(b), w) - mu_a.cwiseProduct(mu_b);
    const auto num = (2.0 * mu_a.cwiseProduct(mu_b).array() + c1) * (2.0 * ab.array() + c2);
    const auto den = (mu_a.array().square() + mu_b.array().square() + c1) *
                     (aa.array() + bb.array() + c2);
    per_frame[t] = (num / den).mean();
  });
  double sum = 0.0;
  for (double v : per_frame) sum += v;
  return sum / static_cast<double>(d.n_fr);
}

double hfen(const ComplexTensor3& x_true, const ComplexTensor3& x_est) {
  require_same(x_true.dims(), x_est.dims());
  const auto& d = x_true.dims();
  const RealMatrix h = log_kernel(15, 1.5);
  std::vector<double> diff(d.n_fr), ref(d.n_fr), mag(d.n_fr);
  parallel_for(d.n_fr, [&](std::size_t t) {
    const RealMatrix a = magnitude(x_true, t);
    const RealMatrix la = filter_symmetric(a, h);
    const RealMatrix lb = filter_symmetric(magnitude(x_est, t), h);
    diff[t] = (lb - la).squaredNorm();
    ref[t] = la.squaredNorm();
    mag[t] = a.squaredNorm();
  });
  double sd = 0.0, sr = 0.0, sm = 0.0;
  for (std::size_t t = 0; t < d.n_fr; ++t) {
    sd += diff[t];
    sr += ref[t];
    sm += mag[t];
  }
  // The filtered reference of a constant image is zero up to round-off.
  if (!(std::sqrt(sr) > 1e-12 * std::max(std::sqrt(sm), 1e-300))) {
    throw ParameterError("HFEN reference has no high-frequency content");
  }
  return std::sqrt(sd / sr);
}

double sharpness_m1(const ComplexTensor3& x) {
  const auto& d = x.dims();
  double sum = 0.0;
  for (std::size_t t = 0; t < d.n_fr; ++t) {
    const RealMatrix a = magnitude(x, t);
    sum += (a.array() - a.mean()).square().sum();
  }
  return sum / static_cast<double>(d.n_fr);
}

double sharpness_m2(const ComplexTensor3& x) {
  const auto& d = x.dims();
  double sum = 0.0;
  for (std::size_t t = 0; t < d.n_fr; ++t) {
    const RealMatrix a = magnitude(x, t);
    const auto rows = a.rows(), cols = a.cols();
    if (cols > 1) sum += (a.rightCols(cols - 1) - a.leftCols(cols - 1)).squaredNorm();
    if (rows > 1) sum += (a.bottomRows(rows - 1) - a.topRows(rows - 1)).squaredNorm();
  }
  return sum / static_cast<double>(d.n_fr);
}

MetricReport evaluate(const ComplexTensor3& x_true, const ComplexTensor3& x_est) {
  require_same(x_true.dims(), x_est.dims());
  MetricReport r;
  r.nrmse = nrmse(tensor_to_matrix(x_true), tensor_to_matrix(x_est));
  r.ssim = ssim(x_true, x_est);
  r.hfen = hfen(x_true, x_est);
  r.m1 = sharpness_m1(x_est);
  r.m2 = sharpness_m2(x_est);
  return r;
}

MetricReport mean_report(const std::vector<MetricReport>& reports) {
  if (reports.empty()) throw ParameterError("cannot average zero metric reports");
  MetricReport m;
  for (const auto& r : reports) {
    m.nrmse += r.nrmse;
    m.ssim += r.ssim;
    m.hfen += r.hfen;
    m.m1 += r.m1;
    m.m2 += r.m2;
  }
  const double n = static_cast<double>(reports.size());
  m.nrmse /= n;
  m.ssim /= n;
  m.hfen /= n;
  m.m1 /= n;
  m.m2 /= n;
  return m;
}

void write_metrics_header(std::ostream& os) { os << "label,nrmse,ssim,hfen,m1,m2\n"; }

void write_metrics_row(std::ostream& os, const std::string& label, const MetricReport& r) {
  os << std::setprecision(17) << label << ',' << r.nrmse << ',' << r.ssim << ',' << r.hfen << ','
     << r.m1 << ',' << r.m2 << '\n';
}

}  // namespace mlkrim
