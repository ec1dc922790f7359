#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mlkrim/sampling.hpp"
#include "mlkrim/tensor.hpp"

namespace mlkrim {

// On-disk tensor format:
//   bytes 0..7   magic "CKTENS01"
//   bytes 8..11  dtype code, u32 LE (0 = complex64 pairs, 1 = uint8)
//   bytes 12..23 n_f, n_p, n_fr as u32 LE
//   payload      frames in order, row-major within a frame; complex entries
//                are (re, im) float32 LE, mask entries one byte each.
namespace tensor_file {
inline constexpr char kMagic[8] = {'C', 'K', 'T', 'E', 'N', 'S', '0', '1'};
inline constexpr std::size_t kHeaderBytes = 24;
enum class DType : std::uint32_t { Complex64 = 0, UInt8 = 1 };
}  // namespace tensor_file

void save_tensor(const std::filesystem::path& path, const ComplexTensor3& t);
ComplexTensor3 load_tensor(const std::filesystem::path& path);

void save_mask(const std::filesystem::path& path, const SamplingMask& mask);
SamplingMask load_mask(const std::filesystem::path& path);

// Byte-level codecs, exposed for tests.
std::vector<std::uint8_t> encode_tensor(const ComplexTensor3& t);
ComplexTensor3 decode_tensor(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_mask(const SamplingMask& mask);
SamplingMask decode_mask(std::span<const std::uint8_t> bytes);

struct Ellipse {
  double center_f = 0.0;  // row coordinate (pixels)
  double center_p = 0.0;  // column coordinate (pixels)
  double radius_f = 1.0;
  double radius_p = 1.0;
  double intensity = 1.0;
};

struct Ring {
  double center_f = 0.0;
  double center_p = 0.0;
  double mean_radius = 1.0;
  double amplitude = 0.0;
  double period = 2.0;  // frames
  double thickness = 1.0;
  double intensity = 1.0;
};

struct PhantomSpec {
  DataDims dims{};
  std::vector<Ellipse> background;
  Ring ring{};
  double noise_std = 0.0;
  std::uint64_t seed = 0;
};

// Torso-like static background plus a beating annulus, scaled to dims.
PhantomSpec default_phantom(const DataDims& dims);

struct Phantom {
  ComplexTensor3 image;
  ComplexTensor3 kspace;
};

Phantom generate_phantom(const PhantomSpec& spec);

}  // namespace mlkrim
