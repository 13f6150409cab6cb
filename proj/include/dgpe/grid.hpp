#pragma once

// Periodic 3D grid, complex fields and the FFTW-backed spectral transforms.
//
// Layout: every field stores n1*n2*n3 samples with x1 varying fastest,
// linear index = i1 + n1*(i2 + n2*i3). Physical coordinates are measured
// from the box center, x_a(j) = -L_a/2 + j*dx_a, so the point j = n_a/2 is
// the origin. Spectral arrays share the layout and use FFT ordering along
// each axis (k = 0..n/2-1, -n/2..-1).
//
// Transform normalization: forward is unscaled, inverse carries 1/N, so
// fft_inverse(fft_forward(f)) == f and sum|f|^2 = (1/N) sum|F|^2.

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dgpe/error.hpp"

namespace dgpe {

using cplx = std::complex<double>;
using Extents = std::array<int, 3>;
using Lengths = std::array<double, 3>;

inline constexpr double pi = std::numbers::pi;

/// Allocator handing out FFTW-aligned storage so planned transforms can be
/// executed on any field buffer with the new-array interface.
template <class T>
struct FftwAllocator {
  using value_type = T;

  FftwAllocator() = default;
  template <class U>
  FftwAllocator(const FftwAllocator<U>&) noexcept {}

  T* allocate(std::size_t count) {
    void* p = fftw_malloc(count * sizeof(T));
    if (p == nullptr && count != 0) throw std::bad_alloc();
    return static_cast<T*>(p);
  }
  void deallocate(T* p, std::size_t) noexcept { fftw_free(p); }

  template <class U>
  bool operator==(const FftwAllocator<U>&) const noexcept {
    return true;
  }
};

using ComplexBuffer = std::vector<cplx, FftwAllocator<cplx>>;

class Grid {
 public:
  Grid(Extents n, Lengths L) : n_(n), L_(L) {
    for (int a = 0; a < 3; ++a) {
      require(n[a] >= 8, "grid: points per axis must be >= 8");
      require(n[a] % 2 == 0, "grid: points per axis must be even");
      require(std::isfinite(L[a]) && L[a] > 0.0, "grid: box extents must be positive");
      dx_[a] = L[a] / n[a];
      xi_[a].resize(n[a]);
      x_[a].resize(n[a]);
      const double dk = 2.0 * pi / L[a];
      for (int j = 0; j < n[a]; ++j) {
        const int k = j < n[a] / 2 ? j : j - n[a];
        xi_[a][j] = dk * k;
        x_[a][j] = -0.5 * L[a] + j * dx_[a];
      }
    }
  }

  const Extents& n() const { return n_; }
  const Lengths& L() const { return L_; }
  const Lengths& dx() const { return dx_; }

  /// Angular frequencies of axis `a` in FFT order.
  std::span<const double> xi(int a) const { return xi_[a]; }
  /// Sample coordinates of axis `a`, measured from the box center.
  std::span<const double> x(int a) const { return x_[a]; }

  std::size_t size() const {
    return static_cast<std::size_t>(n_[0]) * n_[1] * n_[2];
  }
  double cell_volume() const { return dx_[0] * dx_[1] * dx_[2]; }
  double volume() const { return L_[0] * L_[1] * L_[2]; }
  double min_half_width() const {
    return 0.5 * std::min({L_[0], L_[1], L_[2]});
  }
  double min_spacing() const { return std::min({dx_[0], dx_[1], dx_[2]}); }

  std::size_t index(int i1, int i2, int i3) const {
    return static_cast<std::size_t>(i1) +
           static_cast<std::size_t>(n_[0]) *
               (static_cast<std::size_t>(i2) + static_cast<std::size_t>(n_[1]) * i3);
  }

  /// Same sample counts, extents multiplied by `factor`.
  std::shared_ptr<const Grid> scaled(double factor) const {
    return std::make_shared<const Grid>(
        n_, Lengths{L_[0] * factor, L_[1] * factor, L_[2] * factor});
  }

  bool same_shape(const Grid& o) const { return n_ == o.n_ && L_ == o.L_; }

 private:
  Extents n_;
  Lengths L_;
  Lengths dx_{};
  std::array<std::vector<double>, 3> xi_;
  std::array<std::vector<double>, 3> x_;
};

using GridPtr = std::shared_ptr<const Grid>;

inline GridPtr make_grid(Extents n, Lengths L) {
  return std::make_shared<const Grid>(n, L);
}

enum class Space { physical, spectral };

class ComplexField {
 public:
  ComplexField() = default;
  explicit ComplexField(GridPtr grid, Space space = Space::physical)
      : grid_(std::move(grid)), space_(space), values_(grid_->size(), cplx{}) {}

  const Grid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  Space space() const { return space_; }
  void set_space(Space s) { space_ = s; }

  std::size_t size() const { return values_.size(); }
  cplx* data() { return values_.data(); }
  const cplx* data() const { return values_.data(); }
  std::span<cplx> values() { return values_; }
  std::span<const cplx> values() const { return values_; }
  cplx& operator[](std::size_t i) { return values_[i]; }
  const cplx& operator[](std::size_t i) const { return values_[i]; }

  /// Reinterpret the samples on another grid with identical sample counts.
  void rebind(GridPtr grid) {
    require(grid && grid->n() == grid_->n(), "rebind: sample counts differ");
    grid_ = std::move(grid);
  }

  ComplexField& operator*=(cplx s) {
    for (auto& v : values_) v *= s;
    return *this;
  }

 private:
  GridPtr grid_;
  Space space_ = Space::physical;
  ComplexBuffer values_;
};

inline bool all_finite(const ComplexField& f) {
  for (const cplx& v : f.values())
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  return true;
}

inline void require_space(const ComplexField& f, Space s, const char* op) {
  if (f.space() != s)
    fail(ErrorKind::invalid_argument,
         std::string(op) + ": field is in the wrong space (expected " +
             (s == Space::physical ? "physical" : "spectral") + ")");
}

namespace detail {

/// Process-wide cache of in-place FFTW plans keyed on (shape, direction).
/// Planning is serialized; executing a cached plan is thread-safe.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(const Extents& n, int sign) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto key = std::make_pair(n, sign);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    const std::size_t total = static_cast<std::size_t>(n[0]) * n[1] * n[2];
    ComplexBuffer scratch(total);
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    // FFTW is row-major; x1 is our fastest axis so it goes last.
    fftw_plan p = fftw_plan_dft_3d(n[2], n[1], n[0], buf, buf, sign, FFTW_ESTIMATE);
    if (p == nullptr) fail(ErrorKind::numerical_abort, "fftw: planning failed");
    plans_.emplace(key, p);
    return p;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

 private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  std::mutex mutex_;
  std::map<std::pair<Extents, int>, fftw_plan> plans_;
};

}  // namespace detail

/// In-place forward transform (unscaled).
inline void fft_forward_inplace(ComplexField& f) {
  require_space(f, Space::physical, "fft_forward");
  fftw_plan p = detail::PlanCache::instance().get(f.grid().n(), FFTW_FORWARD);
  auto* buf = reinterpret_cast<fftw_complex*>(f.data());
  fftw_execute_dft(p, buf, buf);
  f.set_space(Space::spectral);
}

/// In-place inverse transform, scaled by 1/N.
inline void fft_inverse_inplace(ComplexField& f) {
  require_space(f, Space::spectral, "fft_inverse");
  fftw_plan p = detail::PlanCache::instance().get(f.grid().n(), FFTW_BACKWARD);
  auto* buf = reinterpret_cast<fftw_complex*>(f.data());
  fftw_execute_dft(p, buf, buf);
  const double s = 1.0 / static_cast<double>(f.size());
  for (auto& v : f.values()) v *= s;
  f.set_space(Space::physical);
}

inline ComplexField fft_forward(ComplexField f) {
  fft_forward_inplace(f);
  return f;
}

inline ComplexField fft_inverse(ComplexField f) {
  fft_inverse_inplace(f);
  return f;
}

/// Calls fn(index, xi1, xi2, xi3) for every spectral mode.
template <class Fn>
void for_each_mode(const Grid& g, Fn&& fn) {
  const auto xi1 = g.xi(0), xi2 = g.xi(1), xi3 = g.xi(2);
  std::size_t idx = 0;
  for (int k = 0; k < g.n()[2]; ++k)
    for (int j = 0; j < g.n()[1]; ++j)
      for (int i = 0; i < g.n()[0]; ++i, ++idx) fn(idx, xi1[i], xi2[j], xi3[k]);
}

/// Calls fn(index, x1, x2, x3) for every physical sample.
template <class Fn>
void for_each_point(const Grid& g, Fn&& fn) {
  const auto x1 = g.x(0), x2 = g.x(1), x3 = g.x(2);
  std::size_t idx = 0;
  for (int k = 0; k < g.n()[2]; ++k)
    for (int j = 0; j < g.n()[1]; ++j)
      for (int i = 0; i < g.n()[0]; ++i, ++idx) fn(idx, x1[i], x2[j], x3[k]);
}

/// Fourier multiplier of the dipolar kernel,
/// (4pi/3)(2 xi3^2 - xi1^2 - xi2^2)/|xi|^2, with the zero mode set to 0.
inline double dipolar_symbol(double xi1, double xi2, double xi3) {
  const double r2 = xi1 * xi1 + xi2 * xi2 + xi3 * xi3;
  if (r2 == 0.0) return 0.0;
  return (4.0 * pi / 3.0) * (2.0 * xi3 * xi3 - xi1 * xi1 - xi2 * xi2) / r2;
}

inline std::vector<double> dipolar_multiplier(const Grid& g) {
  std::vector<double> m(g.size());
  for_each_mode(g, [&](std::size_t i, double a, double b, double c) {
    m[i] = dipolar_symbol(a, b, c);
  });
  return m;
}

/// -|xi|^2 per mode.
inline std::vector<double> laplacian_multiplier(const Grid& g) {
  std::vector<double> m(g.size());
  for_each_mode(g, [&](std::size_t i, double a, double b, double c) {
    m[i] = -(a * a + b * b + c * c);
  });
  return m;
}

/// xi_a for first derivatives along axis `a`; the unpaired Nyquist mode is
/// zeroed so derivatives of real fields stay real.
inline std::vector<double> derivative_wavenumbers(const Grid& g, int a) {
  std::vector<double> k(g.xi(a).begin(), g.xi(a).end());
  k[g.n()[a] / 2] = 0.0;
  return k;
}

/// Multiplies a spectral field by a real per-mode array.
inline void apply_multiplier(ComplexField& F, std::span<const double> m) {
  require_space(F, Space::spectral, "apply_multiplier");
  require(m.size() == F.size(), "apply_multiplier: size mismatch");
  for (std::size_t i = 0; i < F.size(); ++i) F[i] *= m[i];
}

/// Spectral derivative along axis `a` of a physical field.
inline ComplexField partial(const ComplexField& f, int a) {
  require_space(f, Space::physical, "partial");
  ComplexField F = fft_forward(f);
  const Grid& g = f.grid();
  const auto k = derivative_wavenumbers(g, a);
  std::size_t idx = 0;
  for (int i3 = 0; i3 < g.n()[2]; ++i3)
    for (int i2 = 0; i2 < g.n()[1]; ++i2)
      for (int i1 = 0; i1 < g.n()[0]; ++i1, ++idx) {
        const int j = a == 0 ? i1 : (a == 1 ? i2 : i3);
        F[idx] *= cplx(0.0, k[j]);
      }
  fft_inverse_inplace(F);
  return F;
}

}  // namespace dgpe
