#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "mlkrim/tensor.hpp"

namespace mlkrim {

struct MetricReport {
  double nrmse = 0.0;
  double ssim = 0.0;
  double hfen = 0.0;
  double m1 = 0.0;
  double m2 = 0.0;
};

// ||x_true - x_est||_F / ||x_true||_F on complex entries.
double nrmse(const DataMatrix& x_true, const DataMatrix& x_est);

// Mean SSIM over frames of the magnitude images (11x11 Gaussian window,
// sigma 1.5, valid region). D is the largest magnitude over both series.
double ssim(const ComplexTensor3& x_true, const ComplexTensor3& x_est);

// Relative error of the Laplacian-of-Gaussian filtered magnitudes (15x15,
// sigma 1.5, symmetric padding).
double hfen(const ComplexTensor3& x_true, const ComplexTensor3& x_est);

// Frame-averaged sum of squared deviations from the frame mean.
double sharpness_m1(const ComplexTensor3& x);
// Frame-averaged sum of squared forward differences along both axes.
double sharpness_m2(const ComplexTensor3& x);

MetricReport evaluate(const ComplexTensor3& x_true, const ComplexTensor3& x_est);

// Element-wise mean of several reports.
MetricReport mean_report(const std::vector<MetricReport>& reports);

void write_metrics_header(std::ostream& os);
void write_metrics_row(std::ostream& os, const std::string& label, const MetricReport& r);

// Kernels exposed for tests.
RealMatrix gaussian_window(int size, double sigma);
RealMatrix log_kernel(int size, double sigma);
// Same-size correlation with symmetric (edge-including mirror) padding.
RealMatrix filter_symmetric(const RealMatrix& image, const RealMatrix& kernel);

}  // namespace mlkrim
