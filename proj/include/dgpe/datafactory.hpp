#pragma once

// Initial-data families: Gaussians, spectrally resampled ground states and the
// chirped data u0 = e^{i mu |x|^2} lambda^{5/2} phi(lambda x).

#include <array>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dgpe/classifier.hpp"

namespace dgpe {

enum class DataFamily { gaussian, plane_modulated, scaled_ground_state, quadratic_phase };

inline const char* to_string(DataFamily f) {
  switch (f) {
    case DataFamily::gaussian: return "gaussian";
    case DataFamily::plane_modulated: return "plane_modulated";
    case DataFamily::scaled_ground_state: return "scaled_ground_state";
    case DataFamily::quadratic_phase: return "quadratic_phase";
  }
  return "gaussian";
}

inline DataFamily data_family_from_string(const std::string& s) {
  if (s == "gaussian") return DataFamily::gaussian;
  if (s == "plane_modulated") return DataFamily::plane_modulated;
  if (s == "scaled_ground_state") return DataFamily::scaled_ground_state;
  if (s == "quadratic_phase") return DataFamily::quadratic_phase;
  fail(ErrorKind::invalid_argument, "unknown data family '" + s + "'");
}

/// Parameters of one initial datum. Gaussian families use amplitude, widths,
/// center and (plane_modulated) wavevector; the ground-state families use
/// lambda and (quadratic_phase) the chirp mu. With `search` set, a
/// quadratic_phase datum is built by construct_above_threshold instead.
struct DataSpec {
  DataFamily family = DataFamily::gaussian;
  double amplitude = 1.0;
  std::array<double, 3> widths{1.0, 1.0, 1.0};
  std::array<double, 3> center{0.0, 0.0, 0.0};
  std::array<double, 3> wavevector{0.0, 0.0, 0.0};
  double lambda = 1.0;
  double mu = 0.0;
  bool search = false;

  bool operator==(const DataSpec&) const = default;

  void validate() const {
    for (double w : widths) require(w > 0.0 && std::isfinite(w), "data: widths must be positive");
    require(std::isfinite(amplitude), "data: amplitude must be finite");
    require(lambda > 0.0 && std::isfinite(lambda), "data: lambda must be positive");
    require(std::isfinite(mu), "data: mu must be finite");
  }
};

/// Boundary mass fraction above which a factory output is rejected.
inline constexpr double factory_boundary_ratio = 1e-4;
/// Top-octave spectral fraction above which a resampled profile is unresolved.
inline constexpr double factory_tail_threshold = 1e-4;

namespace detail {

inline void require_decayed(const ComplexField& f, const char* op) {
  const double M = mass(f);
  if (M > 0.0 && boundary_mass(f) > factory_boundary_ratio * M)
    fail(ErrorKind::domain, std::string(op) + ": profile does not decay inside the box");
}

}  // namespace detail

inline ComplexField gaussian(const GridPtr& grid, double amp, std::array<double, 3> widths,
                             std::array<double, 3> center = {0.0, 0.0, 0.0},
                             std::array<double, 3> wavevector = {0.0, 0.0, 0.0}) {
  for (double w : widths) require(w > 0.0 && std::isfinite(w), "gaussian: widths must be positive");
  ComplexField f(grid);
  const bool modulated = wavevector != std::array<double, 3>{0.0, 0.0, 0.0};
  for_each_point(*grid, [&](std::size_t i, double a, double b, double c) {
    const double da = a - center[0], db = b - center[1], dc = c - center[2];
    const double e = da * da / (2 * widths[0] * widths[0]) + db * db / (2 * widths[1] * widths[1]) +
                     dc * dc / (2 * widths[2] * widths[2]);
    f[i] = amp * std::exp(-e);
    if (modulated) f[i] *= std::polar(1.0, wavevector[0] * a + wavevector[1] * b + wavevector[2] * c);
  });
  if (amp == 0.0) return f;
  // the periodic seam sits on the first plane of each axis
  const Grid& g = *grid;
  double edge = 0.0;
  for (int k = 0; k < g.n()[2]; ++k)
    for (int j = 0; j < g.n()[1]; ++j)
      for (int i = 0; i < g.n()[0]; ++i)
        if (i == 0 || j == 0 || k == 0) edge = std::max(edge, std::abs(f[g.index(i, j, k)]));
  if (edge > 1e-12 * std::abs(amp)) {
    std::ostringstream os;
    os << "gaussian: value " << edge << " on the box boundary exceeds 1e-12 of the amplitude";
    fail(ErrorKind::domain, os.str());
  }
  return f;
}

namespace detail {

/// Rows of a 1-D trigonometric interpolation operator: column k of row t is
/// exp(i xi_k (y_t - x_0)) / n, with the Nyquist mode taken as a cosine so
/// real data stay real. Points outside the source box give a zero row.
inline std::vector<cplx> interpolation_matrix(const Grid& src, int axis, std::span<const double> y) {
  const int n = src.n()[axis];
  const double L = src.L()[axis];
  const double x0 = src.x(axis)[0];
  std::vector<cplx> m(y.size() * n, cplx{});
  for (std::size_t t = 0; t < y.size(); ++t) {
    if (y[t] < -0.5 * L || y[t] > 0.5 * L) continue;
    for (int k = 0; k < n; ++k) {
      const double arg = src.xi(axis)[k] * (y[t] - x0);
      m[t * n + k] = k == n / 2 ? cplx(std::cos(arg), 0.0) / double(n) : std::polar(1.0 / n, arg);
    }
  }
  return m;
}

}  // namespace detail

/// Band-limited evaluation of a physical field at the tensor-product points
/// (y1_i, y2_j, y3_k) of `target` scaled by `factor`, i.e. f(factor x).
inline ComplexField resample(const ComplexField& f, const GridPtr& target, double factor) {
  require_space(f, Space::physical, "resample");
  const Grid& src = f.grid();
  const Grid& tg = *target;
  std::array<std::vector<cplx>, 3> mat;
  for (int a = 0; a < 3; ++a) {
    std::vector<double> y(tg.n()[a]);
    for (int j = 0; j < tg.n()[a]; ++j) y[j] = factor * tg.x(a)[j];
    mat[a] = detail::interpolation_matrix(src, a, y);
  }
  const ComplexField F = fft_forward(f);
  const int s0 = src.n()[0], s1 = src.n()[1], s2 = src.n()[2];
  const int t0 = tg.n()[0], t1 = tg.n()[1], t2 = tg.n()[2];
  // contract axis 1, then 2, then 3
  std::vector<cplx> A(static_cast<std::size_t>(t0) * s1 * s2, cplx{});
  for (int k = 0; k < s2; ++k)
    for (int j = 0; j < s1; ++j) {
      const cplx* in = &F[src.index(0, j, k)];
      cplx* out = &A[static_cast<std::size_t>(t0) * (j + static_cast<std::size_t>(s1) * k)];
      for (int t = 0; t < t0; ++t) {
        const cplx* row = &mat[0][static_cast<std::size_t>(t) * s0];
        cplx s{};
        for (int q = 0; q < s0; ++q) s += row[q] * in[q];
        out[t] = s;
      }
    }
  std::vector<cplx> B(static_cast<std::size_t>(t0) * t1 * s2, cplx{});
  for (int k = 0; k < s2; ++k)
    for (int t = 0; t < t1; ++t) {
      const cplx* row = &mat[1][static_cast<std::size_t>(t) * s1];
      cplx* out = &B[static_cast<std::size_t>(t0) * (t + static_cast<std::size_t>(t1) * k)];
      for (int q = 0; q < s1; ++q) {
        if (row[q] == cplx{}) continue;
        const cplx* in = &A[static_cast<std::size_t>(t0) * (q + static_cast<std::size_t>(s1) * k)];
        for (int i = 0; i < t0; ++i) out[i] += row[q] * in[i];
      }
    }
  ComplexField out(target);
  for (int t = 0; t < t2; ++t) {
    const cplx* row = &mat[2][static_cast<std::size_t>(t) * s2];
    cplx* dst = &out[tg.index(0, 0, t)];
    const std::size_t plane = static_cast<std::size_t>(t0) * t1;
    for (int q = 0; q < s2; ++q) {
      if (row[q] == cplx{}) continue;
      const cplx* in = &B[plane * q];
      for (std::size_t i = 0; i < plane; ++i) dst[i] += row[q] * in[i];
    }
  }
  return out;
}

/// v0(x) = lambda^{5/2} phi(lambda x) on `target`.
inline ComplexField scaled_ground_state(const GroundStateRecord& rec, double lambda, const GridPtr& target) {
  require(lambda > 0.0 && std::isfinite(lambda), "scaled_ground_state: lambda must be positive");
  require(rec.phi.size() > 0, "scaled_ground_state: empty ground-state record");
  // length scale of the scaled profile against the target spacing
  const double ell = std::sqrt(rec.M / rec.H) / lambda;
  if (ell < target->min_spacing()) {
    std::ostringstream os;
    os << "scaled_ground_state: scaled length " << ell << " is below the grid spacing ("
       << target->min_spacing() << ")";
    fail(ErrorKind::domain, os.str());
  }
  ComplexField v = resample(rec.phi, target, lambda);
  v *= cplx(std::pow(lambda, 2.5), 0.0);
  detail::require_decayed(v, "scaled_ground_state");
  if (spectral_tail_fraction(fft_forward(v)) > factory_tail_threshold)
    fail(ErrorKind::domain, "scaled_ground_state: resampled profile is not resolved on the target grid");
  return v;
}

/// Largest |mu| for which the chirp e^{i mu |x|^2} advances by at most pi/4
/// per half cell at the box edge on every axis.
inline double max_resolved_chirp(const Grid& g) {
  double worst = 0.0;
  for (int a = 0; a < 3; ++a) worst = std::max(worst, 0.5 * g.L()[a] * g.dx()[a]);
  return 0.25 * pi / worst;
}

inline ComplexField quadratic_phase(const ComplexField& v0, double mu) {
  require_space(v0, Space::physical, "quadratic_phase");
  require(std::isfinite(mu), "quadratic_phase: mu must be finite");
  const Grid& g = v0.grid();
  if (std::abs(mu) > max_resolved_chirp(g)) {
    std::ostringstream os;
    os << "quadratic_phase: chirp mu = " << mu << " wraps by more than pi/4 per cell (limit "
       << max_resolved_chirp(g) << ")";
    fail(ErrorKind::domain, os.str());
  }
  detail::require_decayed(v0, "quadratic_phase");
  ComplexField u = v0;
  if (mu == 0.0) return u;
  for_each_point(g, [&](std::size_t i, double a, double b, double c) {
    u[i] *= std::polar(1.0, mu * (a * a + b * b + c * c));
  });
  return u;
}

// ---------------------------------------------------------------------------
// data above the threshold

struct SearchBounds {
  double lambda_min = 1e-2;
  double lambda_max = 1.0;
  double mu_max = 1e3;
  double margin = 1e-3;
  /// Ratio of the descending lambda ladder that brackets the admissible set.
  double ladder = 0.95;
  int max_iters = 200;
};

struct AboveThresholdData {
  ComplexField u0;
  double lambda = 0.0;
  double mu = 0.0;
  TheoremReport report;
};

namespace detail {

struct ChirpFamily {
  double M, H, N, V;  // of v0 = lambda^{5/2} phi(lambda x)
};

/// Functionals of e^{i mu |x|^2} v0 for real v0: M, N and V do not depend on
/// mu, H grows by 4 mu^2 |x v0|^2 and V'(0) = 4 mu |x v0|^2.
inline FunctionalBundle chirped_bundle(const ChirpFamily& v, double mu) {
  return FunctionalBundle::from(v.M, v.H + 4.0 * mu * mu * v.V, v.N, v.V, 4.0 * mu * v.V);
}

}  // namespace detail

/// Finds lambda < 1 with E(v0)M(v0) <= (1 - m) E(phi)M(phi) and
/// -N(v0)M(v0) <= (1 - m)(-N(phi)M(phi)), then the smallest mu on a
/// geometric grid with E(u0)M(u0) >= (1 + m) E(phi)M(phi), where
/// m = bounds.margin. The search uses the measured functionals of the
/// resampled v0 on `target`.
inline AboveThresholdData construct_above_threshold(const GroundStateRecord& rec, const GridPtr& target,
                                                    const SearchBounds& bounds = {}) {
  require(bounds.lambda_min > 0.0 && bounds.lambda_min < bounds.lambda_max,
          "construct_above_threshold: invalid lambda bounds");
  require(bounds.margin > 0.0 && bounds.mu_max > 0.0 && bounds.ladder > 0.0 && bounds.ladder < 1.0,
          "construct_above_threshold: invalid bounds");
  const Thresholds th = rec.thresholds();
  const double m = bounds.margin;

  const auto family_at = [&](double lambda) {
    const ComplexField v = scaled_ground_state(rec, lambda, target);
    return std::make_pair(v, detail::ChirpFamily{mass(v), kinetic(v), potential_N(v, rec.cp), variance_V(v)});
  };
  const auto lambda_ok = [&](const detail::ChirpFamily& f) {
    const double EM = 0.5 * (f.H + f.N) * f.M;
    return EM <= (1.0 - m) * th.EM && -f.N * f.M <= (1.0 - m) * th.negNM;
  };

  // step down geometrically from lambda_max to the first admissible lambda,
  // then bisect (geometrically) between it and the last rejected one
  double hi = bounds.lambda_max;
  double lo = hi;
  auto lo_family = family_at(lo);
  if (!lambda_ok(lo_family.second)) {
    for (;;) {
      hi = lo;
      lo = std::max(bounds.ladder * lo, bounds.lambda_min);
      lo_family = family_at(lo);
      if (lambda_ok(lo_family.second)) break;
      if (lo <= bounds.lambda_min)
        fail(ErrorKind::non_convergence, "construct_above_threshold: no admissible lambda above lambda_min");
    }
    for (int it = 0; it < bounds.max_iters && hi / lo > 1.0 + 1e-4; ++it) {
      const double mid = std::sqrt(lo * hi);
      auto fam = family_at(mid);
      if (lambda_ok(fam.second)) {
        lo = mid;
        lo_family = std::move(fam);
      } else {
        hi = mid;
      }
    }
  }
  const detail::ChirpFamily fam = lo_family.second;
  require(fam.V > 0.0, "construct_above_threshold: zero variance");

  // smallest mu on a geometric ladder that lifts E M above the threshold
  const auto mu_ok = [&](double mu) {
    const FunctionalBundle b = detail::chirped_bundle(fam, mu);
    return b.E * b.M >= (1.0 + m) * th.EM;
  };
  double mu_hi = std::sqrt(std::max(0.0, th.EM / fam.M - 0.5 * (fam.H + fam.N)) / (2.0 * fam.V));
  mu_hi = std::max(mu_hi, 1e-6);
  int guard = 0;
  while (!mu_ok(mu_hi)) {
    mu_hi *= 1.5;
    if (mu_hi > bounds.mu_max || ++guard > bounds.max_iters)
      fail(ErrorKind::non_convergence, "construct_above_threshold: mu search exceeded its bound");
  }
  double mu_lo = mu_hi / 1.5;
  for (int it = 0; it < bounds.max_iters && mu_hi / mu_lo > 1.0 + 1e-6; ++it) {
    const double mid = std::sqrt(mu_lo * mu_hi);
    (mu_ok(mid) ? mu_hi : mu_lo) = mid;
  }

  AboveThresholdData out;
  out.lambda = lo;
  out.mu = mu_hi;
  out.u0 = quadratic_phase(lo_family.first, mu_hi);
  out.report = above_threshold_scattering_check(evaluate(out.u0, rec.cp), th, rec.cp);
  return out;
}

// ---------------------------------------------------------------------------
// closed-form families

/// Evaluates an analytic DataSpec; ground-state families need `rec`.
inline ComplexField make_data(const DataSpec& spec, const GridPtr& grid,
                              const GroundStateRecord* rec = nullptr) {
  spec.validate();
  switch (spec.family) {
    case DataFamily::gaussian:
      return gaussian(grid, spec.amplitude, spec.widths, spec.center);
    case DataFamily::plane_modulated:
      return gaussian(grid, spec.amplitude, spec.widths, spec.center, spec.wavevector);
    case DataFamily::scaled_ground_state:
    case DataFamily::quadratic_phase: {
      if (rec == nullptr)
        fail(ErrorKind::missing_input, std::string("data family ") + to_string(spec.family) +
                                           " needs a ground-state record");
      if (spec.family == DataFamily::quadratic_phase && spec.search)
        return construct_above_threshold(*rec, grid).u0;
      ComplexField v = scaled_ground_state(*rec, spec.lambda, grid);
      if (spec.family == DataFamily::quadratic_phase) v = quadratic_phase(v, spec.mu);
      return v;
    }
  }
  fail(ErrorKind::invalid_argument, "make_data: unknown family");
}

/// u_s(x) = s u(s x) for an analytic family, evaluated from its closed form.
inline ComplexField scaling_orbit(const DataSpec& spec, double s, const GridPtr& grid) {
  require(s > 0.0 && std::isfinite(s), "scaling_orbit: scale must be positive");
  if (spec.family != DataFamily::gaussian && spec.family != DataFamily::plane_modulated)
    fail(ErrorKind::invalid_argument,
         std::string("scaling_orbit: family ") + to_string(spec.family) + " has no closed form");
  DataSpec t = spec;
  t.amplitude *= s;
  for (int a = 0; a < 3; ++a) {
    t.widths[a] /= s;
    t.center[a] /= s;
    t.wavevector[a] *= s;
  }
  return make_data(t, grid);
}

}  // namespace dgpe
