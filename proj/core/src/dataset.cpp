#include "mlkrim/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>

#include "mlkrim/error.hpp"
#include "mlkrim/parallel.hpp"

namespace mlkrim {

namespace {

using tensor_file::DType;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(in[at + b]) << (8 * b);
  return v;
}

void put_f32(std::vector<std::uint8_t>& out, double v) {
  put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

std::uint32_t checked_u32(std::size_t v) {
  if (v > 0xFFFFFFFFu) throw ParameterError("dimension does not fit the 32-bit header field");
  return static_cast<std::uint32_t>(v);
}

std::vector<std::uint8_t> header(const DataDims& d, DType dtype) {
  std::vector<std::uint8_t> out(tensor_file::kMagic, tensor_file::kMagic + 8);
  put_u32(out, static_cast<std::uint32_t>(dtype));
  put_u32(out, checked_u32(d.n_f));
  put_u32(out, checked_u32(d.n_p));
  put_u32(out, checked_u32(d.n_fr));
  return out;
}

DataDims parse_header(std::span<const std::uint8_t> in, DType expected) {
  if (in.size() < 8) throw FormatError("file shorter than magic tag", in.size());
  if (!std::equal(in.begin(), in.begin() + 8, tensor_file::kMagic)) {
    throw FormatError("bad magic, expected CKTENS01", 0);
  }
  if (in.size() < tensor_file::kHeaderBytes) {
    throw FormatError("truncated header", in.size());
  }
  const std::uint32_t code = get_u32(in, 8);
  if (code > 1) throw FormatError("unknown dtype code " + std::to_string(code), 8);
  if (static_cast<DType>(code) != expected) {
    throw FormatError(std::string("dtype mismatch: file holds ") +
                          (code == 0 ? "complex64" : "uint8") + " data",
                      8);
  }
  const std::uint32_t f = get_u32(in, 12), p = get_u32(in, 16), fr = get_u32(in, 20);
  if (f == 0 || p == 0 || fr == 0) throw FormatError("zero dimension in header", 12);
  const DataDims d(f, p, fr);
  const std::size_t per = expected == DType::Complex64 ? 8 : 1;
  const std::size_t want = tensor_file::kHeaderBytes + d.size() * per;
  if (in.size() < want) {
    throw FormatError("truncated payload: expected " + std::to_string(want) + " bytes, got " +
                          std::to_string(in.size()),
                      in.size());
  }
  if (in.size() > want) throw FormatError("trailing bytes after payload", want);
  return d;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed on " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed on " + path.string());
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const ComplexTensor3& t) {
  const auto& d = t.dims();
  auto out = header(d, DType::Complex64);
  out.reserve(out.size() + 8 * d.size());
  for (std::size_t fr = 0; fr < d.n_fr; ++fr) {
    for (std::size_t r = 0; r < d.n_f; ++r) {
      for (std::size_t i = 0; i < d.n_p; ++i) {
        put_f32(out, t(r, i, fr).real());
        put_f32(out, t(r, i, fr).imag());
      }
    }
  }
  return out;
}

ComplexTensor3 decode_tensor(std::span<const std::uint8_t> bytes) {
  const DataDims d = parse_header(bytes, DType::Complex64);
  ComplexTensor3 t(d);
  std::size_t at = tensor_file::kHeaderBytes;
  for (std::size_t fr = 0; fr < d.n_fr; ++fr) {
    for (std::size_t r = 0; r < d.n_f; ++r) {
      for (std::size_t i = 0; i < d.n_p; ++i) {
        const float re = std::bit_cast<float>(get_u32(bytes, at));
        const float im = std::bit_cast<float>(get_u32(bytes, at + 4));
        if (!std::isfinite(re) || !std::isfinite(im)) {
          throw FormatError("non-finite sample", at);
        }
        t(r, i, fr) = {re, im};
        at += 8;
      }
    }
  }
  return t;
}

std::vector<std::uint8_t> encode_mask(const SamplingMask& mask) {
  const auto& d = mask.dims();
  auto out = header(d, DType::UInt8);
  for (std::size_t fr = 0; fr < d.n_fr; ++fr)
    for (std::size_t r = 0; r < d.n_f; ++r)
      for (std::size_t i = 0; i < d.n_p; ++i) out.push_back(mask(r, i, fr));
  return out;
}

SamplingMask decode_mask(std::span<const std::uint8_t> bytes) {
  const DataDims d = parse_header(bytes, DType::UInt8);
  SamplingMask mask(d);
  std::size_t at = tensor_file::kHeaderBytes;
  for (std::size_t fr = 0; fr < d.n_fr; ++fr) {
    for (std::size_t r = 0; r < d.n_f; ++r) {
      for (std::size_t i = 0; i < d.n_p; ++i, ++at) {
        if (bytes[at] > 1) throw FormatError("mask byte is neither 0 nor 1", at);
        mask(r, i, fr) = bytes[at];
      }
    }
  }
  return mask;
}

void save_tensor(const std::filesystem::path& path, const ComplexTensor3& t) {
  write_file(path, encode_tensor(t));
}

ComplexTensor3 load_tensor(const std::filesystem::path& path) {
  return decode_tensor(read_file(path));
}

void save_mask(const std::filesystem::path& path, const SamplingMask& mask) {
  write_file(path, encode_mask(mask));
}

SamplingMask load_mask(const std::filesystem::path& path) { return decode_mask(read_file(path)); }

PhantomSpec default_phantom(const DataDims& dims) {
  const double nf = static_cast<double>(dims.n_f), np = static_cast<double>(dims.n_p);
  const double cf = nf / 2.0, cp = np / 2.0;
  const double s = std::min(nf, np);
  PhantomSpec spec;
  spec.dims = dims;
  spec.background = {
      {cf, cp, 0.42 * nf, 0.45 * np, 0.25},                        // body
      {cf - 0.05 * s, cp - 0.22 * s, 0.14 * s, 0.09 * s, 0.20},    // left lung-ish
      {cf + 0.02 * s, cp + 0.24 * s, 0.12 * s, 0.08 * s, 0.35},    // liver-ish
      {cf + 0.30 * s, cp - 0.05 * s, 0.05 * s, 0.05 * s, 0.60},    // spine
  };
  spec.ring.center_f = cf - 0.02 * s;
  spec.ring.center_p = cp + 0.02 * s;
  spec.ring.mean_radius = 0.14 * s;
  spec.ring.amplitude = 0.04 * s;
  spec.ring.period = std::max(2.0, static_cast<double>(dims.n_fr) / 4.0);
  spec.ring.thickness = std::max(1.5, 0.05 * s);
  spec.ring.intensity = 0.8;
  spec.noise_std = 0.0;
  spec.seed = 0;
  return spec;
}

Phantom generate_phantom(const PhantomSpec& spec) {
  const auto& d = spec.dims;
  const Ring& ring = spec.ring;
  if (d.n_f == 0 || d.n_p == 0 || d.n_fr == 0) throw ParameterError("phantom dims must be positive");
  if (!(ring.period >= 2.0)) throw ParameterError("ring period must be >= 2 frames");
  if (!(ring.mean_radius > 0.0) || !(ring.amplitude >= 0.0) ||
      !(ring.amplitude < ring.mean_radius)) {
    throw ParameterError("ring amplitude must lie in [0, mean radius)");
  }
  if (!(ring.thickness > 0.0)) throw ParameterError("ring thickness must be positive");
  if (!(spec.noise_std >= 0.0)) throw ParameterError("noise_std must be nonnegative");
  for (const auto& e : spec.background) {
    if (!(e.radius_f > 0.0) || !(e.radius_p > 0.0)) {
      throw ParameterError("background ellipse radii must be positive");
    }
  }

  // Anti-aliased indicator: 1 inside, 0 outside, linear over one pixel.
  auto ramp = [](double signed_dist) { return std::clamp(0.5 - signed_dist, 0.0, 1.0); };

  Matrix background = Matrix::Zero(static_cast<Eigen::Index>(d.n_f),
                                   static_cast<Eigen::Index>(d.n_p));
  for (std::size_t i = 0; i < d.n_p; ++i) {
    for (std::size_t r = 0; r < d.n_f; ++r) {
      double v = 0.0;
      for (const auto& e : spec.background) {
        const double u = (static_cast<double>(r) - e.center_f) / e.radius_f;
        const double w = (static_cast<double>(i) - e.center_p) / e.radius_p;
        // Approximate signed distance in pixels along the smaller radius.
        const double dist = (std::sqrt(u * u + w * w) - 1.0) * std::min(e.radius_f, e.radius_p);
        v += e.intensity * ramp(dist);
      }
      background(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = v;
    }
  }

  Phantom out{ComplexTensor3(d), ComplexTensor3(d)};
  parallel_for(d.n_fr, [&](std::size_t t) {
    // fmod keeps frames t and t + period bit-identical for integer periods.
    const double phase = 2.0 * std::numbers::pi * std::fmod(static_cast<double>(t), ring.period) /
                         ring.period;
    const double radius = ring.mean_radius + ring.amplitude * std::sin(phase);
    for (std::size_t i = 0; i < d.n_p; ++i) {
      for (std::size_t r = 0; r < d.n_f; ++r) {
        const double dr = static_cast<double>(r) - ring.center_f;
        const double di = static_cast<double>(i) - ring.center_p;
        const double rho = std::sqrt(dr * dr + di * di);
        const double dist = std::abs(rho - radius) - ring.thickness / 2.0;
        out.image(r, i, t) = background(static_cast<Eigen::Index>(r),
                                        static_cast<Eigen::Index>(i)) +
                             ring.intensity * ramp(dist);
      }
    }
  });
  out.kspace = dft2_frames(out.image, Direction::Forward);

  if (spec.noise_std > 0.0) {
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, spec.noise_std / std::sqrt(2.0));
    for (auto& v : out.kspace.data()) {
      const double re = normal(rng);
      const double im = normal(rng);
      v += cdouble(re, im);
    }
  }
  return out;
}

}  // namespace mlkrim
