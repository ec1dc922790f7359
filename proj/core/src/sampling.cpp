#include "mlkrim/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "mlkrim/error.hpp"
#include "mlkrim/parallel.hpp"

namespace mlkrim {

SamplingMask::SamplingMask(const DataDims& dims, std::uint8_t fill)
    : dims_(dims), bits_(dims.size(), fill) {}

std::size_t SamplingMask::acquired() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::size_t SamplingMask::acquired_in_frame(std::size_t t) const {
  const auto first = bits_.begin() + static_cast<std::ptrdiff_t>(t * dims_.n_k());
  return static_cast<std::size_t>(
      std::count(first, first + static_cast<std::ptrdiff_t>(dims_.n_k()), std::uint8_t{1}));
}

bool SamplingMask::navigator_complete(std::size_t upsilon) const {
  const std::size_t first = navigator_band_start(dims_.n_p, upsilon);
  for (std::size_t t = 0; t < dims_.n_fr; ++t)
    for (std::size_t i = first; i < first + upsilon; ++i)
      for (std::size_t r = 0; r < dims_.n_f; ++r)
        if (!(*this)(r, i, t)) return false;
  return true;
}

RealMatrix SamplingMask::as_matrix() const {
  RealMatrix m(static_cast<Eigen::Index>(dims_.n_k()), static_cast<Eigen::Index>(dims_.n_fr));
  for (std::size_t k = 0; k < bits_.size(); ++k) m.data()[k] = bits_[k];
  return m;
}

namespace {

void mark_navigator(SamplingMask& mask, std::size_t t, std::size_t upsilon) {
  const auto& d = mask.dims();
  const std::size_t first = navigator_band_start(d.n_p, upsilon);
  for (std::size_t i = first; i < first + upsilon; ++i)
    for (std::size_t r = 0; r < d.n_f; ++r) mask(r, i, t) = 1;
}

}  // namespace

SamplingMask cartesian_mask(const DataDims& dims, double acceleration, std::size_t upsilon,
                            std::uint64_t seed) {
  if (!(acceleration >= 1.0)) throw ParameterError("acceleration must be >= 1");
  const std::size_t band_start = navigator_band_start(dims.n_p, upsilon);
  const auto lines =
      static_cast<std::size_t>(std::llround(static_cast<double>(dims.n_p) / acceleration));
  if (lines < upsilon) {
    throw ParameterError("infeasible acceleration " + std::to_string(acceleration) + ": " +
                         std::to_string(lines) + " lines per frame cannot hold the " +
                         std::to_string(upsilon) + " navigator lines");
  }
  const double center = static_cast<double>(dims.n_p / 2);

  SamplingMask mask(dims);
  parallel_for(dims.n_fr, [&](std::size_t t) {
    mark_navigator(mask, t, upsilon);
    std::vector<std::size_t> pool;
    std::vector<double> weight;
    for (std::size_t j = 0; j < dims.n_p; ++j) {
      if (j >= band_start && j < band_start + upsilon) continue;
      pool.push_back(j);
      weight.push_back(1.0 / (1.0 + std::abs(static_cast<double>(j) - center)));
    }
    std::mt19937_64 rng(seed + t);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t drawn = upsilon; drawn < lines; ++drawn) {
      double total = 0.0;
      for (double w : weight) total += w;
      const double target = unit(rng) * total;
      std::size_t pick = 0;
      double acc = weight[0];
      while (acc <= target && pick + 1 < pool.size()) acc += weight[++pick];
      for (std::size_t r = 0; r < dims.n_f; ++r) mask(r, pool[pick], t) = 1;
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
      weight.erase(weight.begin() + static_cast<std::ptrdiff_t>(pick));
    }
  });
  return mask;
}

SamplingMask radial_mask(const DataDims& dims, std::size_t spokes_per_frame, std::size_t upsilon,
                         std::uint64_t seed) {
  if (spokes_per_frame < 1) throw ParameterError("need at least one spoke per frame");
  navigator_band_start(dims.n_p, upsilon);
  const auto nf = static_cast<long>(dims.n_f), np = static_cast<long>(dims.n_p);
  const long cf = nf / 2, cp = np / 2;

  SamplingMask mask(dims);
  parallel_for(dims.n_fr, [&](std::size_t t) {
    mark_navigator(mask, t, upsilon);
    for (std::size_t s = 0; s < spokes_per_frame; ++s) {
      const std::uint64_t g = seed + s * dims.n_fr + t;
      // 111.246 deg is exact in millidegrees, so reduce in integers.
      const std::uint64_t milli = ((g % 180000) * 111246) % 180000;
      const double deg = static_cast<double>(milli) / 1000.0;
      const double theta = deg * std::numbers::pi / 180.0;
      // Angle 0 runs along the phase-encoding (column) axis.
      const double dir_p = std::cos(theta), dir_f = std::sin(theta);
      if (std::abs(dir_p) >= std::abs(dir_f)) {
        const double slope = dir_f / dir_p;
        for (long i = 0; i < np; ++i) {
          const long r = cf + static_cast<long>(std::floor(static_cast<double>(i - cp) * slope + 0.5));
          if (r >= 0 && r < nf) mask(static_cast<std::size_t>(r), static_cast<std::size_t>(i), t) = 1;
        }
      } else {
        const double slope = dir_p / dir_f;
        for (long r = 0; r < nf; ++r) {
          const long i = cp + static_cast<long>(std::floor(static_cast<double>(r - cf) * slope + 0.5));
          if (i >= 0 && i < np) mask(static_cast<std::size_t>(r), static_cast<std::size_t>(i), t) = 1;
        }
      }
    }
  });
  return mask;
}

std::size_t radial_spokes_for_rate(const DataDims& dims, double rate, std::size_t upsilon,
                                   std::uint64_t seed) {
  std::size_t best = 1;
  for (std::size_t s = 1; s <= 4 * std::max(dims.n_f, dims.n_p); ++s) {
    if (acceleration_rate(radial_mask(dims, s, upsilon, seed)) >= rate) {
      best = s;
    } else {
      break;
    }
  }
  return best;
}

ComplexTensor3 apply_sampling(const SamplingMask& mask, const ComplexTensor3& y) {
  if (!(mask.dims() == y.dims())) throw ShapeError("mask and tensor shapes differ");
  ComplexTensor3 out = y;
  auto bits = mask.bits();
  auto data = out.data();
  for (std::size_t k = 0; k < data.size(); ++k) {
    if (!bits[k]) data[k] = 0.0;
  }
  return out;
}

double acceleration_rate(const SamplingMask& mask) {
  const std::size_t n = mask.acquired();
  if (n == 0) throw ParameterError("mask acquires no entries");
  return static_cast<double>(mask.dims().size()) / static_cast<double>(n);
}

ComplexTensor3 zero_filled(const SamplingMask& mask, const ComplexTensor3& y) {
  return dft2_frames(apply_sampling(mask, y), Direction::Inverse);
}

}  // namespace mlkrim
