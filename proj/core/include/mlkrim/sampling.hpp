#pragma once

#include <cstdint>
#include <vector>

#include "mlkrim/tensor.hpp"

namespace mlkrim {

// Binary k-space mask with the same layout as ComplexTensor3 (1 = acquired).
class SamplingMask {
 public:
  SamplingMask() = default;
  explicit SamplingMask(const DataDims& dims, std::uint8_t fill = 0);

  const DataDims& dims() const noexcept { return dims_; }

  std::uint8_t& operator()(std::size_t r, std::size_t i, std::size_t t) {
    return bits_[(t * dims_.n_p + i) * dims_.n_f + r];
  }
  std::uint8_t operator()(std::size_t r, std::size_t i, std::size_t t) const {
    return bits_[(t * dims_.n_p + i) * dims_.n_f + r];
  }

  std::span<std::uint8_t> bits() noexcept { return bits_; }
  std::span<const std::uint8_t> bits() const noexcept { return bits_; }

  std::size_t acquired() const;
  std::size_t acquired_in_frame(std::size_t t) const;
  // True when every column of the central band of width upsilon is acquired in every frame.
  bool navigator_complete(std::size_t upsilon) const;

  // n_k x n_fr 0/1 real matrix (frame-stacked layout).
  RealMatrix as_matrix() const;

  friend bool operator==(const SamplingMask&, const SamplingMask&) = default;

 private:
  DataDims dims_{};
  std::vector<std::uint8_t> bits_;
};

// Variable-density 1D Cartesian: full frequency-encoding columns, the central
// navigator band always on, remaining round(n_p / acceleration) - upsilon
// columns drawn per frame with probability proportional to 1 / (1 + |j - c|).
SamplingMask cartesian_mask(const DataDims& dims, double acceleration, std::size_t upsilon,
                            std::uint64_t seed);

inline constexpr double kGoldenAngleDeg = 111.246;

// Rasterized radial spokes through the k-space centre on golden-angle
// increments continued across frames; the navigator band is forced on.
// Spoke s of frame t is global spoke g = s * n_fr + t with angle
// (seed + g) * 111.246 deg, so adding spokes only adds lines to each frame.
SamplingMask radial_mask(const DataDims& dims, std::size_t spokes_per_frame, std::size_t upsilon,
                         std::uint64_t seed);

// Largest spoke count whose radial mask still has acceleration_rate >= rate;
// 1 when a single spoke already falls below it.
std::size_t radial_spokes_for_rate(const DataDims& dims, double rate, std::size_t upsilon,
                                   std::uint64_t seed);

ComplexTensor3 apply_sampling(const SamplingMask& mask, const ComplexTensor3& y);

double acceleration_rate(const SamplingMask& mask);

// Inverse DFT of the masked k-space with missing entries set to zero.
ComplexTensor3 zero_filled(const SamplingMask& mask, const ComplexTensor3& y);

}  // namespace mlkrim
