#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <tuple>
#include <vector>

#include "mlkrim/parallel.hpp"
#include "mlkrim/tensor.hpp"

namespace mlkrim {

namespace {

// FFTW's planner is not thread-safe; execution of an existing plan on new
// arrays is. Plans live for the lifetime of the process.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  // 2D transform of a column-major n_f x n_p frame (row-major n_p x n_f).
  fftw_plan frame_plan(int n_f, int n_p, int sign) {
    return get({0, n_f, n_p, sign}, [&](fftw_complex* buf) {
      return fftw_plan_dft_2d(n_p, n_f, buf, buf, sign, kFlags);
    }, static_cast<std::size_t>(n_f) * n_p);
  }

  // Transform of every row of a column-major rows x len matrix.
  fftw_plan row_plan(int rows, int len, int sign) {
    return get({1, rows, len, sign}, [&](fftw_complex* buf) {
      int n[] = {len};
      return fftw_plan_many_dft(1, n, rows, buf, nullptr, rows, 1, buf, nullptr, rows, 1, sign,
                                kFlags);
    }, static_cast<std::size_t>(rows) * len);
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

 private:
  static constexpr unsigned kFlags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  using Key = std::tuple<int, int, int, int>;

  PlanCache() = default;
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  template <typename Make>
  fftw_plan get(const Key& key, Make make, std::size_t size) {
    std::lock_guard lock(mutex_);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    std::vector<cdouble> scratch(size);
    fftw_plan plan = make(reinterpret_cast<fftw_complex*>(scratch.data()));
    plans_.emplace(key, plan);
    return plan;
  }

  std::mutex mutex_;
  std::map<Key, fftw_plan> plans_;
};

// out(r, i) = in((r + sr) mod n_f, (i + si) mod n_p)
void circshift(const cdouble* in, cdouble* out, std::size_t n_f, std::size_t n_p,
               std::size_t sr, std::size_t si) {
  for (std::size_t i = 0; i < n_p; ++i) {
    const std::size_t src_i = (i + si) % n_p;
    for (std::size_t r = 0; r < n_f; ++r) {
      out[i * n_f + r] = in[src_i * n_f + (r + sr) % n_f];
    }
  }
}

}  // namespace

ComplexTensor3 dft2_frames(const ComplexTensor3& x, Direction dir) {
  const auto& d = x.dims();
  ComplexTensor3 out(d);
  const int sign = dir == Direction::Forward ? FFTW_FORWARD : FFTW_BACKWARD;
  fftw_plan plan = PlanCache::instance().frame_plan(static_cast<int>(d.n_f),
                                                    static_cast<int>(d.n_p), sign);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d.n_k()));
  // fftshift moves index 0 to floor(n/2): out[k] = in[k - floor(n/2)].
  const std::size_t cf = d.n_f / 2, cp = d.n_p / 2;
  parallel_for(d.n_fr, [&](std::size_t t) {
    auto src = x.frame(t);
    auto dst = out.frame(t);
    std::vector<cdouble> buf(d.n_k());
    if (dir == Direction::Forward) {
      std::copy(src.begin(), src.end(), buf.begin());
      fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(buf.data()),
                       reinterpret_cast<fftw_complex*>(buf.data()));
      circshift(buf.data(), dst.data(), d.n_f, d.n_p, d.n_f - cf, d.n_p - cp);
    } else {
      circshift(src.data(), buf.data(), d.n_f, d.n_p, cf, cp);
      fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(buf.data()),
                       reinterpret_cast<fftw_complex*>(buf.data()));
      std::copy(buf.begin(), buf.end(), dst.begin());
    }
    for (auto& v : dst) v *= scale;
  });
  return out;
}

DataMatrix temporal_dft(const DataMatrix& x, Direction dir) {
  DataMatrix out = x;
  if (out.size() == 0) return out;
  const int sign = dir == Direction::Forward ? FFTW_FORWARD : FFTW_BACKWARD;
  fftw_plan plan = PlanCache::instance().row_plan(static_cast<int>(x.rows()),
                                                  static_cast<int>(x.cols()), sign);
  auto* buf = reinterpret_cast<fftw_complex*>(out.data());
  fftw_execute_dft(plan, buf, buf);
  out *= 1.0 / std::sqrt(static_cast<double>(x.cols()));
  return out;
}

}  // namespace mlkrim
