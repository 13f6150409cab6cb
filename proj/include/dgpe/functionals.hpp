#pragma once

// Conserved quantities, virial quantities and inequality residuals of the
// dipolar cubic NLS  i u_t + (1/2) Lap u = l1 |u|^2 u + l2 (K * |u|^2) u.
//
// Integrals use the rectangle rule (weight dx1 dx2 dx3). Spectral sums carry
// the Parseval factor dV/N for the forward-unscaled transform, which is the
// discrete form of (2 pi)^-3 \int d xi.

#include <cmath>
#include <functional>
#include <iostream>
#include <mutex>
#include <string>

#include "dgpe/grid.hpp"

namespace dgpe {

struct CouplingParams {
  double lambda1 = 0.0;
  double lambda2 = 0.0;

  bool operator==(const CouplingParams&) const = default;
};

inline void validate(const CouplingParams& cp) {
  require(std::isfinite(cp.lambda1) && std::isfinite(cp.lambda2),
          "couplings must be finite");
}

/// Functionals sampled on one field. E, G and Vpp are derived from H and N
/// at construction and never measured independently.
struct FunctionalBundle {
  double M = 0.0;
  double H = 0.0;
  double N = 0.0;
  double E = 0.0;
  double G = 0.0;
  double V = 0.0;
  double Vp = 0.0;
  double Vpp = 0.0;

  static FunctionalBundle from(double M, double H, double N, double V, double Vp) {
    FunctionalBundle b;
    b.M = M;
    b.H = H;
    b.N = N;
    b.E = 0.5 * (H + N);
    b.G = H + 1.5 * N;
    b.V = V;
    b.Vp = Vp;
    b.Vpp = 2.0 * b.G;
    return b;
  }
};

// ---------------------------------------------------------------------------
// warnings

using WarningHandler = std::function<void(const std::string&)>;

namespace detail {
inline WarningHandler& warning_handler() {
  static WarningHandler handler = [](const std::string& msg) {
    std::clog << "dgpe warning: " << msg << '\n';
  };
  return handler;
}
inline std::mutex& warning_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

/// Replaces the sink for non-fatal diagnostics; returns the previous one.
inline WarningHandler set_warning_handler(WarningHandler h) {
  std::lock_guard<std::mutex> lock(detail::warning_mutex());
  auto old = std::move(detail::warning_handler());
  detail::warning_handler() = std::move(h);
  return old;
}

inline void warn(const std::string& msg) {
  std::lock_guard<std::mutex> lock(detail::warning_mutex());
  if (detail::warning_handler()) detail::warning_handler()(msg);
}

// ---------------------------------------------------------------------------
// basic integrals

inline double mass(const ComplexField& f) {
  require_space(f, Space::physical, "mass");
  double s = 0.0;
  for (const cplx& v : f.values()) s += std::norm(v);
  return s * f.grid().cell_volume();
}

/// sum |xi|^2 |F|^2 with Parseval weights, F the forward transform of f.
inline double kinetic_from_spectrum(const ComplexField& F) {
  require_space(F, Space::spectral, "kinetic_from_spectrum");
  double s = 0.0;
  for_each_mode(F.grid(), [&](std::size_t i, double a, double b, double c) {
    s += (a * a + b * b + c * c) * std::norm(F[i]);
  });
  return s * F.grid().cell_volume() / static_cast<double>(F.size());
}

inline double kinetic(const ComplexField& f) {
  require_space(f, Space::physical, "kinetic");
  return kinetic_from_spectrum(fft_forward(f));
}

/// |f|^2 as a (real-valued) complex field.
inline ComplexField density(const ComplexField& f) {
  require_space(f, Space::physical, "density");
  ComplexField rho(f.grid_ptr());
  for (std::size_t i = 0; i < f.size(); ++i) rho[i] = std::norm(f[i]);
  return rho;
}

/// K * f2 evaluated as the inverse transform of m(xi) f2^(xi). The result is
/// real for real input; the roundoff imaginary part is discarded.
inline ComplexField dipolar_convolution(const ComplexField& f2) {
  require_space(f2, Space::physical, "dipolar_convolution");
  ComplexField F = fft_forward(f2);
  for_each_mode(F.grid(), [&](std::size_t i, double a, double b, double c) {
    F[i] *= dipolar_symbol(a, b, c);
  });
  fft_inverse_inplace(F);
  for (auto& v : F.values()) v = cplx(v.real(), 0.0);
  return F;
}

enum class PotentialMethod { direct, plancherel };

/// (2 pi)^-3 \int (l1 + l2 K^) |rho^|^2 evaluated from the spectrum of rho.
inline double potential_from_density_spectrum(const ComplexField& R, const CouplingParams& cp) {
  require_space(R, Space::spectral, "potential_from_density_spectrum");
  double s = 0.0;
  for_each_mode(R.grid(), [&](std::size_t i, double a, double b, double c) {
    s += (cp.lambda1 + cp.lambda2 * dipolar_symbol(a, b, c)) * std::norm(R[i]);
  });
  return s * R.grid().cell_volume() / static_cast<double>(R.size());
}

inline double potential_N(const ComplexField& f, const CouplingParams& cp,
                          PotentialMethod method = PotentialMethod::plancherel) {
  require_space(f, Space::physical, "potential_N");
  ComplexField rho = density(f);
  if (method == PotentialMethod::plancherel) {
    fft_forward_inplace(rho);
    return potential_from_density_spectrum(rho, cp);
  }
  double s = 0.0;
  if (cp.lambda2 != 0.0) {
    const ComplexField conv = dipolar_convolution(rho);
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double r = rho[i].real();
      s += (cp.lambda1 * r + cp.lambda2 * conv[i].real()) * r;
    }
  } else {
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double r = rho[i].real();
      s += cp.lambda1 * r * r;
    }
  }
  return s * f.grid().cell_volume();
}

inline double energy(const ComplexField& f, const CouplingParams& cp) {
  return 0.5 * (kinetic(f) + potential_N(f, cp));
}

inline double pohozaev_G(const ComplexField& f, const CouplingParams& cp) {
  return kinetic(f) + 1.5 * potential_N(f, cp);
}

/// H^{3/2} M^{1/2} / (-N); defined only where N < 0.
inline double weinstein_from(double M, double H, double N) {
  if (!(N < 0.0))
    fail(ErrorKind::domain, "weinstein: N(f) >= 0, field is outside the set {N < 0}");
  return std::pow(H, 1.5) * std::sqrt(M) / (-N);
}

inline double weinstein(const ComplexField& f, const CouplingParams& cp) {
  return weinstein_from(mass(f), kinetic(f), potential_N(f, cp));
}

// ---------------------------------------------------------------------------
// virial quantities

/// Mass in the outer shell of the box (any |x_a| > shell * L_a / 2).
inline double boundary_mass(const ComplexField& f, double shell = 0.8) {
  require_space(f, Space::physical, "boundary_mass");
  const Grid& g = f.grid();
  const Lengths& L = g.L();
  double s = 0.0;
  for_each_point(g, [&](std::size_t i, double x1, double x2, double x3) {
    if (std::abs(x1) > 0.5 * shell * L[0] || std::abs(x2) > 0.5 * shell * L[1] ||
        std::abs(x3) > 0.5 * shell * L[2])
      s += std::norm(f[i]);
  });
  return s * g.cell_volume();
}

inline constexpr double boundary_warning_ratio = 1e-8;

inline void check_boundary_decay(const ComplexField& f, const char* op) {
  const double M = mass(f);
  if (M > 0.0 && boundary_mass(f) > boundary_warning_ratio * M)
    warn(std::string(op) + ": boundary mass exceeds 1e-8 M; virial quantities carry box-truncation error");
}

/// x . grad f, with gradients taken spectrally from F = fft(f).
inline ComplexField x_dot_grad(const ComplexField& f, const ComplexField& F) {
  require_space(F, Space::spectral, "x_dot_grad");
  const Grid& g = f.grid();
  ComplexField out(f.grid_ptr());
  ComplexField work(f.grid_ptr(), Space::spectral);
  for (int a = 0; a < 3; ++a) {
    const auto k = derivative_wavenumbers(g, a);
    const auto xa = g.x(a);
    std::size_t idx = 0;
    for (int i3 = 0; i3 < g.n()[2]; ++i3)
      for (int i2 = 0; i2 < g.n()[1]; ++i2)
        for (int i1 = 0; i1 < g.n()[0]; ++i1, ++idx) {
          const int j = a == 0 ? i1 : (a == 1 ? i2 : i3);
          work[idx] = F[idx] * cplx(0.0, k[j]);
        }
    work.set_space(Space::spectral);
    fft_inverse_inplace(work);
    idx = 0;
    for (int i3 = 0; i3 < g.n()[2]; ++i3)
      for (int i2 = 0; i2 < g.n()[1]; ++i2)
        for (int i1 = 0; i1 < g.n()[0]; ++i1, ++idx) {
          const int j = a == 0 ? i1 : (a == 1 ? i2 : i3);
          out[idx] += xa[j] * work[idx];
        }
  }
  return out;
}

inline double variance_V(const ComplexField& f) {
  require_space(f, Space::physical, "variance_V");
  check_boundary_decay(f, "variance_V");
  double s = 0.0;
  for_each_point(f.grid(), [&](std::size_t i, double x1, double x2, double x3) {
    s += (x1 * x1 + x2 * x2 + x3 * x3) * std::norm(f[i]);
  });
  return s * f.grid().cell_volume();
}

/// 2 Im \int conj(f) x . grad f.
inline double variance_Vprime(const ComplexField& f) {
  require_space(f, Space::physical, "variance_Vprime");
  check_boundary_decay(f, "variance_Vprime");
  const ComplexField D = x_dot_grad(f, fft_forward(f));
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += (std::conj(f[i]) * D[i]).imag();
  return 2.0 * s * f.grid().cell_volume();
}

/// All bundle entries in one pass (5 transforms).
inline FunctionalBundle evaluate(const ComplexField& f, const CouplingParams& cp) {
  require_space(f, Space::physical, "evaluate");
  const Grid& g = f.grid();
  const double dv = g.cell_volume();
  const ComplexField F = fft_forward(f);
  const double H = kinetic_from_spectrum(F);
  ComplexField R = density(f);
  double M = 0.0, V = 0.0;
  for_each_point(g, [&](std::size_t i, double x1, double x2, double x3) {
    const double r = R[i].real();
    M += r;
    V += (x1 * x1 + x2 * x2 + x3 * x3) * r;
  });
  fft_forward_inplace(R);
  const double N = potential_from_density_spectrum(R, cp);
  const ComplexField D = x_dot_grad(f, F);
  double vp = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) vp += (std::conj(f[i]) * D[i]).imag();
  return FunctionalBundle::from(M * dv, H, N, V * dv, 2.0 * vp * dv);
}

// ---------------------------------------------------------------------------
// localized virial

/// Radial cutoff: chi(r) = r^2 for r <= 1, quintic blend on [1, 2] matching
/// value, slope, curvature and third derivative at r = 1 with zero slope and
/// curvature at r = 2, constant (5/2) for r >= 2. chi'' <= 2 everywhere.
struct Cutoff {
  static constexpr double plateau = 2.5;

  static double value(double r) {
    if (r <= 1.0) return r * r;
    if (r >= 2.0) return plateau;
    const double s = r - 1.0;
    return 1.0 + 2.0 * s + s * s - 3.5 * s * s * s * s + 2.0 * s * s * s * s * s;
  }
  static double slope(double r) {
    if (r <= 1.0) return 2.0 * r;
    if (r >= 2.0) return 0.0;
    const double s = r - 1.0;
    return 2.0 + 2.0 * s - 14.0 * s * s * s + 10.0 * s * s * s * s;
  }
  static double curvature(double r) {
    if (r <= 1.0) return 2.0;
    if (r >= 2.0) return 0.0;
    const double s = r - 1.0;
    return 2.0 - 42.0 * s * s + 40.0 * s * s * s;
  }
};

struct LocalizedVirial {
  double R = 0.0;
  double z = 0.0;
  double zprime = 0.0;
  double twoG = 0.0;      // 2 G(f)
  double envelope = 0.0;  // A_R envelope at the configured constant
};

/// Constant in front of the A_R envelope. Not a sharp constant; chosen so the
/// one-sided check z'' <= 2G + envelope has slack on resolved fields.
inline constexpr double default_envelope_constant = 10.0;

/// z = \int phi_R |f|^2 and z' = Im \int conj(f) grad(phi_R) . grad(f) with
/// phi_R(x) = R^2 chi(|x|/R), plus 2G and the A_R envelope
///   C [ 1/R + (|f|_{H1}^2 |f|_{L4(|x|>R)}^2 + |f|_{H1}^2)/R
///       + |f|_{L4(|x|>R)}^2 + |f|_{L4(|x|>R)}^4 ].
inline LocalizedVirial localized_virial(const ComplexField& f, const CouplingParams& cp, double R,
                                        double envelope_constant = default_envelope_constant) {
  require_space(f, Space::physical, "localized_virial");
  const Grid& g = f.grid();
  require(R > 1.0, "localized_virial: R must exceed 1");
  require(R <= g.min_half_width(), "localized_virial: R exceeds the box half-width");
  LocalizedVirial lv;
  lv.R = R;
  const double dv = g.cell_volume();
  const ComplexField F = fft_forward(f);
  const double H = kinetic_from_spectrum(F);
  const double N = potential_N(f, cp);
  const ComplexField D = x_dot_grad(f, F);
  double z = 0.0, zp = 0.0, M = 0.0, l4_out = 0.0;
  for_each_point(g, [&](std::size_t i, double x1, double x2, double x3) {
    const double r = std::sqrt(x1 * x1 + x2 * x2 + x3 * x3);
    const double rho = std::norm(f[i]);
    M += rho;
    z += R * R * Cutoff::value(r / R) * rho;
    // grad phi_R = R chi'(r/R) x / r; chi'(s)/s -> 2 as s -> 0.
    const double s = r / R;
    const double weight = s <= 1.0 ? 2.0 : R * Cutoff::slope(s) / r;
    zp += weight * (std::conj(f[i]) * D[i]).imag();
    if (r > R) l4_out += rho * rho;
  });
  lv.z = z * dv;
  lv.zprime = zp * dv;
  lv.twoG = 2.0 * (H + 1.5 * N);
  const double h1 = M * dv + H;
  const double l4sq = std::sqrt(l4_out * dv);
  lv.envelope = envelope_constant *
                (1.0 / R + h1 * l4sq / R + h1 / R + l4sq + l4sq * l4sq);
  return lv;
}

/// Measured z'' minus 2G; the localized virial bound asserts
/// gap <= envelope.
inline double localized_virial_gap(double zpp_measured, const LocalizedVirial& lv) {
  return zpp_measured - lv.twoG;
}

// ---------------------------------------------------------------------------
// inequality residuals and scattering diagnostics

/// RHS - LHS of
///   (Im \int conj(f) x.grad f)^2 <= |x f|^2 (H - (-N)^{2/3} / (Copt^{2/3} M^{1/3})).
inline double gao_wang_residual(const ComplexField& f, const CouplingParams& cp, double Copt) {
  const FunctionalBundle b = evaluate(f, cp);
  if (!(b.N < 0.0)) fail(ErrorKind::domain, "gao_wang_residual: requires N(f) < 0");
  require(Copt > 0.0, "gao_wang_residual: Copt must be positive");
  const double lhs = 0.25 * b.Vp * b.Vp;
  const double rhs =
      b.V * (b.H - std::pow(-b.N, 2.0 / 3.0) / (std::pow(Copt, 2.0 / 3.0) * std::cbrt(b.M)));
  return rhs - lhs;
}

inline double l4_norm(const ComplexField& f) {
  require_space(f, Space::physical, "l4_norm");
  double s = 0.0;
  for (const cplx& v : f.values()) {
    const double r = std::norm(v);
    s += r * r;
  }
  return std::pow(s * f.grid().cell_volume(), 0.25);
}

/// Left-endpoint increment of the L^8_t L^4_x norm: prev + |f|_{L4}^8 dt.
inline double scattering_accumulator(double prev, double l4, double dt) {
  const double q = l4 * l4;
  return prev + q * q * q * q * dt;
}

inline double scattering_accumulator(double prev, const ComplexField& f, double dt) {
  return scattering_accumulator(prev, l4_norm(f), dt);
}

/// Fraction of sum |F|^2 carried by modes with |xi_a| > xi_max,a / 2 on any axis.
inline double spectral_tail_fraction(const ComplexField& F) {
  require_space(F, Space::spectral, "spectral_tail_fraction");
  const Grid& g = F.grid();
  std::array<double, 3> cut{};
  for (int a = 0; a < 3; ++a) cut[a] = 0.5 * pi / g.dx()[a];
  double tail = 0.0, total = 0.0;
  for_each_mode(g, [&](std::size_t i, double a, double b, double c) {
    const double w = std::norm(F[i]);
    total += w;
    if (std::abs(a) > cut[0] || std::abs(b) > cut[1] || std::abs(c) > cut[2]) tail += w;
  });
  return total > 0.0 ? tail / total : 0.0;
}

}  // namespace dgpe
