#pragma once

// Ground states of  -(1/2) Lap phi + phi + l1 |phi|^2 phi + l2 (K*|phi|^2) phi = 0
// obtained by minimizing the Weinstein functional W = H^{3/2} M^{1/2} / (-N)
// over {N < 0}, followed by the exact rescaling of the minimizer onto a
// bound state. The sharp Gagliardo-Nirenberg constant is Copt = 1 / min W.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>

#include "dgpe/functionals.hpp"

namespace dgpe {

enum class DescentMethod { gradient, conjugate_gradient };

struct MinimizerOptions {
  DescentMethod method = DescentMethod::conjugate_gradient;
  int max_iters = 20000;
  double initial_step = 0.5;
  double backtrack = 0.5;
  double growth = 1.5;
  double max_step = 4.0;
  double armijo = 1e-4;
  double grad_tolerance = 1e-8;
  double w_change_tolerance = 1e-10;
  int w_window = 10;
  /// sigma_3 / sigma_perp of the initial Gaussian; <= 0 picks one from the
  /// sign of lambda2 (cigar along x3 for lambda2 > 0, pancake for < 0).
  double anisotropy = 0.0;
  /// sigma_perp of the initial Gaussian. The minimizer holds H/M at its
  /// initial value, so this also fixes the width of the result relative to
  /// the grid. <= 0 picks 1/18 of the smallest box length.
  double width = 0.0;
  std::uint64_t seed = 0;
  /// H/M held fixed during the descent; <= 0 keeps the value of the start.
  /// minimize_weinstein sets it from an isotropic Gaussian of the nominal
  /// width so that seeds differ only in shape, not in resolution.
  double kinetic_ratio = 0.0;
  /// Relative size of the seeded perturbation of the initial guess.
  double seed_jitter = 0.15;
  /// Tolerance on |elliptic residual| / |phi|_{L2} for emitted records.
  double residual_tolerance = 5e-3;
  /// Relative tolerance for the Pohozaev and threshold-chain checks.
  double identity_tolerance = 1e-3;
  /// Called after every iteration with (iteration, log W, gradient norm, step).
  std::function<void(int, double, double, double)> progress;

  void validate() const {
    require(max_iters > 0, "minimizer: max_iters must be positive");
    require(initial_step > 0 && backtrack > 0 && backtrack < 1 && growth >= 1,
            "minimizer: invalid step-size controls");
    require(grad_tolerance > 0 && w_change_tolerance > 0 && w_window > 0,
            "minimizer: tolerances must be positive");
    require(residual_tolerance > 0 && identity_tolerance > 0,
            "minimizer: tolerances must be positive");
  }
};

struct MinimizerResult {
  ComplexField field;  // M = H = 1 gauge
  double W = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
};

struct Thresholds {
  double EM = 0.0;
  double HM = 0.0;
  double negNM = 0.0;
  double Copt = 0.0;
};

struct GroundStateRecord {
  ComplexField phi;
  CouplingParams cp;
  double Copt = 0.0;
  double EM = 0.0;
  double HM = 0.0;
  double negNM = 0.0;
  double M = 0.0;
  double H = 0.0;
  double N = 0.0;
  double residual = 0.0;
  int iterations = 0;
  std::uint64_t seed = 0;

  Thresholds thresholds() const { return {EM, HM, negNM, Copt}; }
};

inline Thresholds thresholds(const GroundStateRecord& rec) { return rec.thresholds(); }

namespace detail {

/// log W and the spectra needed to form its gradient at one point.
struct WeinsteinPoint {
  ComplexField g;  // physical
  ComplexField F;  // fft(g)
  ComplexField R;  // fft(|g|^2)
  double M = 0.0, H = 0.0, N = 0.0, logW = 0.0;
};

inline WeinsteinPoint weinstein_point(ComplexField g, const CouplingParams& cp) {
  WeinsteinPoint p;
  p.M = mass(g);
  p.F = fft_forward(g);
  p.H = kinetic_from_spectrum(p.F);
  p.R = density(g);
  fft_forward_inplace(p.R);
  p.N = potential_from_density_spectrum(p.R, cp);
  p.g = std::move(g);
  p.logW = p.N < 0.0 ? 1.5 * std::log(p.H) + 0.5 * std::log(p.M) - std::log(-p.N)
                     : std::numeric_limits<double>::infinity();
  return p;
}

/// Spectrum of grad log W = (3/H)(-Lap g) + g/M - (4/N) NL(g),
/// NL(g) = l1 |g|^2 g + l2 (K*|g|^2) g.
inline ComplexField weinstein_gradient_spectrum(const WeinsteinPoint& p, const CouplingParams& cp) {
  const Grid& grid = p.g.grid();
  ComplexField nl(p.g.grid_ptr());
  if (cp.lambda2 != 0.0) {
    ComplexField conv = p.R;
    for_each_mode(grid, [&](std::size_t i, double a, double b, double c) {
      conv[i] *= dipolar_symbol(a, b, c);
    });
    fft_inverse_inplace(conv);
    for (std::size_t i = 0; i < nl.size(); ++i)
      nl[i] = (cp.lambda1 * std::norm(p.g[i]) + cp.lambda2 * conv[i].real()) * p.g[i];
  } else {
    for (std::size_t i = 0; i < nl.size(); ++i)
      nl[i] = cp.lambda1 * std::norm(p.g[i]) * p.g[i];
  }
  fft_forward_inplace(nl);
  const double cH = 3.0 / p.H, cM = 1.0 / p.M, cN = -4.0 / p.N;
  for_each_mode(grid, [&](std::size_t i, double a, double b, double c) {
    nl[i] = (cH * (a * a + b * b + c * c) + cM) * p.F[i] + cN * nl[i];
  });
  return nl;
}

/// Solves a small symmetric positive semidefinite system; directions with a
/// vanishing pivot are dropped.
inline std::array<double, 4> solve4(std::array<std::array<double, 4>, 4> A,
                                    std::array<double, 4> b) {
  std::array<double, 4> x{};
  std::array<bool, 4> live{true, true, true, true};
  double scale = 0.0;
  for (int k = 0; k < 4; ++k) scale = std::max(scale, A[k][k]);
  for (int k = 0; k < 4; ++k) {
    if (!(A[k][k] > 1e-12 * scale)) {
      live[k] = false;
      continue;
    }
    for (int r = k + 1; r < 4; ++r) {
      const double f = A[r][k] / A[k][k];
      for (int c = k; c < 4; ++c) A[r][c] -= f * A[k][c];
      b[r] -= f * b[k];
    }
  }
  for (int k = 3; k >= 0; --k) {
    if (!live[k]) continue;
    double s = b[k];
    for (int c = k + 1; c < 4; ++c) s -= A[k][c] * x[c];
    x[k] = s / A[k][k];
  }
  return x;
}

inline std::array<double, 3> center_of_mass(const ComplexField& g) {
  std::array<double, 3> c{};
  double m = 0.0;
  for_each_point(g.grid(), [&](std::size_t i, double x1, double x2, double x3) {
    const double r = std::norm(g[i]);
    m += r;
    c[0] += r * x1;
    c[1] += r * x2;
    c[2] += r * x3;
  });
  for (double& v : c) v /= m;
  return c;
}

/// Moves g along the spectral direction V to the nearest point with
/// H/M = ratio. H and M are quadratic along the line, so the step solves
/// H(s) - ratio M(s) = 0 exactly.
inline void retract_ratio(ComplexField& g, const ComplexField& V, double ratio) {
  const Grid& grid = g.grid();
  const ComplexField F = fft_forward(g);
  double q0 = 0.0, q1 = 0.0, q2 = 0.0;
  for_each_mode(grid, [&](std::size_t i, double a, double b, double c) {
    const double w = a * a + b * b + c * c - ratio;
    q0 += w * std::norm(F[i]);
    q1 += 2.0 * w * (std::conj(F[i]) * V[i]).real();
    q2 += w * std::norm(V[i]);
  });
  double s = 0.0;
  if (std::abs(q2) * std::abs(q0) < 1e-12 * q1 * q1) {
    s = -q0 / q1;
  } else {
    const double disc = q1 * q1 - 4.0 * q2 * q0;
    if (disc < 0.0) return;
    const double r = std::sqrt(disc);
    // root of smaller magnitude, in the cancellation-free form
    s = (q1 >= 0.0) ? (-2.0 * q0) / (q1 + r) : (-2.0 * q0) / (q1 - r);
  }
  if (!std::isfinite(s) || s == 0.0) return;
  ComplexField v = fft_inverse(V);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * v[i];
}

inline double auto_width(const Grid& grid) {
  const auto& L = grid.L();
  return std::min({L[0], L[1], L[2]}) / 18.0;
}

inline void normalize_mass(ComplexField& g) {
  const double M = mass(g);
  require(M > 0.0, "normalize_mass: zero field");
  g *= 1.0 / std::sqrt(M);
}

/// Moves the center of mass to the grid point nearest the origin.
inline void recenter(ComplexField& g) {
  // Whole-cell circular shift: exact on the lattice, unlike a sub-cell
  // spectral translation, which changes the discrete nonlinear terms.
  const Grid& grid = g.grid();
  const std::array<double, 3> c = center_of_mass(g);
  std::array<long, 3> shift{};
  for (int a = 0; a < 3; ++a) shift[a] = std::lround(c[a] / grid.dx()[a]);
  if (shift == std::array<long, 3>{}) return;
  const auto& n = grid.n();
  ComplexField out(g.grid_ptr());
  for (int k = 0; k < n[2]; ++k) {
    const int ks = static_cast<int>(((k + shift[2]) % n[2] + n[2]) % n[2]);
    for (int j = 0; j < n[1]; ++j) {
      const int js = static_cast<int>(((j + shift[1]) % n[1] + n[1]) % n[1]);
      for (int i = 0; i < n[0]; ++i) {
        const int is = static_cast<int>(((i + shift[0]) % n[0] + n[0]) % n[0]);
        out[grid.index(i, j, k)] = g[grid.index(is, js, ks)];
      }
    }
  }
  g = std::move(out);
}

}  // namespace detail

inline double default_anisotropy(const CouplingParams& cp) {
  if (cp.lambda2 > 0.0) return 2.0;
  if (cp.lambda2 < 0.0) return 0.5;
  return 1.0;
}

/// Seeded anisotropic Gaussian initial guess (mass normalized to one).
inline ComplexField initial_guess(const GridPtr& grid, const CouplingParams& cp,
                                  const MinimizerOptions& opts) {
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double aniso = opts.anisotropy > 0.0 ? opts.anisotropy : default_anisotropy(cp);
  const double width = opts.width > 0.0 ? opts.width : detail::auto_width(*grid);
  std::array<double, 3> w{width, width, width * aniso};
  std::array<double, 3> shift{};
  std::array<double, 3> wave{};
  double ripple = 0.0;
  if (opts.seed != 0) {
    for (int a = 0; a < 3; ++a) {
      w[a] *= 1.0 + opts.seed_jitter * unit(rng);
      shift[a] = opts.seed_jitter * w[a] * unit(rng);
      wave[a] = unit(rng) / w[a];
    }
    ripple = 0.5 * opts.seed_jitter * unit(rng);
  }
  ComplexField g(grid);
  for_each_point(*grid, [&](std::size_t i, double x1, double x2, double x3) {
    const double y1 = x1 - shift[0], y2 = x2 - shift[1], y3 = x3 - shift[2];
    const double e = y1 * y1 / (2 * w[0] * w[0]) + y2 * y2 / (2 * w[1] * w[1]) +
                     y3 * y3 / (2 * w[2] * w[2]);
    const double mod = 1.0 + ripple * std::cos(wave[0] * y1 + wave[1] * y2 + wave[2] * y3);
    g[i] = mod * std::exp(-e);
  });
  detail::normalize_mass(g);
  return g;
}

/// Preconditioned nonlinear CG on log W from a given start. The mass is
/// renormalized to one after every step; at exit the field is recentered and
/// dilated (by rescaling the box) to M = H = 1.
inline MinimizerResult minimize_weinstein_from(ComplexField start, const CouplingParams& cp,
                                               const MinimizerOptions& opts) {
  validate(cp);
  opts.validate();
  require_space(start, Space::physical, "minimize_weinstein");
  detail::normalize_mass(start);
  const Grid& grid = start.grid();
  std::vector<double> precond(grid.size());
  for_each_mode(grid, [&](std::size_t i, double a, double b, double c) {
    precond[i] = 1.0 / (1.0 + a * a + b * b + c * c);
  });
  const double parseval = grid.cell_volume() / static_cast<double>(grid.size());

  double ratio = opts.kinetic_ratio;
  if (ratio > 0.0) {
    ComplexField F = fft_forward(start);
    const double M = mass(start), H = kinetic_from_spectrum(F);
    for_each_mode(grid, [&](std::size_t i, double a, double b, double c) {
      F[i] *= (2.0 * (a * a + b * b + c * c) / H - 2.0 / M) * precond[i];
    });
    detail::retract_ratio(start, F, ratio);
    detail::normalize_mass(start);
  }
  detail::WeinsteinPoint cur = detail::weinstein_point(std::move(start), cp);
  if (!(ratio > 0.0)) ratio = cur.H / cur.M;
  if (!(cur.N < 0.0))
    fail(ErrorKind::domain,
         "minimize_weinstein: initial guess has N >= 0 and cannot enter the set {N < 0}");

  std::deque<double> history{cur.logW};
  double step = opts.initial_step;
  MinimizerResult out;
  ComplexField direction;  // spectral search direction
  ComplexField prev_pgrad;  // preconditioned gradient of the previous iterate
  double prev_slope = 0.0;
  for (int it = 0;; ++it) {
    ComplexField G = detail::weinstein_gradient_spectrum(cur, cp);

    // The continuum W is invariant under dilations and translations; the
    // lattice W is not, and drifts along both (narrowing toward the grid
    // scale, sliding between grid points). H/M and the center of mass are
    // therefore held at their initial values: directions are projected onto
    // the tangent of these constraints in the preconditioned metric, and
    // every trial point is pulled back onto {H/M = const} along P n_0.
    std::array<ComplexField, 4> normal;
    normal[0] = ComplexField(cur.F.grid_ptr(), Space::spectral);
    for_each_mode(grid, [&](std::size_t i, double a, double b, double c) {
      normal[0][i] = (2.0 * (a * a + b * b + c * c) / cur.H - 2.0 / cur.M) * cur.F[i];
    });
    const std::array<double, 3> com = detail::center_of_mass(cur.g);
    for (int a = 0; a < 3; ++a) {
      ComplexField& n = normal[a + 1];
      n = ComplexField(cur.g.grid_ptr());
      for_each_point(grid, [&](std::size_t i, double x1, double x2, double x3) {
        const double xa = (a == 0 ? x1 : a == 1 ? x2 : x3) - com[a];
        n[i] = (2.0 / cur.M) * xa * cur.g[i];
      });
      fft_forward_inplace(n);
    }
    std::array<ComplexField, 4> pn;
    for (int k = 0; k < 4; ++k) {
      pn[k] = normal[k];
      for (std::size_t i = 0; i < pn[k].size(); ++i) pn[k][i] *= precond[i];
    }
    const auto inner = [](const ComplexField& u, const ComplexField& v) {
      double s = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) s += (std::conj(u[i]) * v[i]).real();
      return s;
    };
    std::array<std::array<double, 4>, 4> gram{};
    for (int k = 0; k < 4; ++k)
      for (int l = 0; l < 4; ++l) gram[k][l] = inner(normal[k], pn[l]);
    const auto project = [&](ComplexField& d) {
      std::array<double, 4> rhs{};
      for (int k = 0; k < 4; ++k) rhs[k] = inner(normal[k], d);
      const std::array<double, 4> c = detail::solve4(gram, rhs);
      for (int k = 0; k < 4; ++k)
        for (std::size_t i = 0; i < d.size(); ++i) d[i] -= c[k] * pn[k][i];
    };

    ComplexField PG = G;
    for (std::size_t i = 0; i < G.size(); ++i) PG[i] *= precond[i];
    project(PG);
    double slope = 0.0;
    for (std::size_t i = 0; i < G.size(); ++i) slope += (std::conj(G[i]) * PG[i]).real();
    slope = std::max(0.0, slope * parseval);
    const double grad_norm = std::sqrt(slope);
    out.grad_norm = grad_norm;
    out.iterations = it;
    if (opts.progress) opts.progress(it, cur.logW, grad_norm, step);

    bool w_settled = false;
    if (static_cast<int>(history.size()) > opts.w_window) {
      // log W difference over the window approximates the relative W change
      w_settled = std::abs(history.back() - history.front()) < opts.w_change_tolerance;
    }
    if (grad_norm < opts.grad_tolerance && (w_settled || it == 0))
      break;
    if (it >= opts.max_iters) {
      std::ostringstream os;
      os << "minimize_weinstein: no convergence after " << it
         << " iterations (preconditioned gradient norm " << grad_norm << ")";
      fail(ErrorKind::non_convergence, os.str());
    }

    // Polak-Ribiere+ in the preconditioned metric; plain preconditioned
    // gradient when restarted or when CG is disabled.
    double beta = 0.0;
    if (opts.method == DescentMethod::conjugate_gradient && it > 0 && prev_slope > 0.0) {
      double num = 0.0;
      for (std::size_t i = 0; i < G.size(); ++i)
        num += (std::conj(G[i]) * (PG[i] - prev_pgrad[i])).real();
      beta = std::max(0.0, num * parseval / prev_slope);
    }
    if (beta > 0.0) {
      for (std::size_t i = 0; i < G.size(); ++i) direction[i] = PG[i] + beta * direction[i];
      project(direction);
    } else {
      direction = PG;
    }
    double dir_slope = 0.0;
    for (std::size_t i = 0; i < G.size(); ++i)
      dir_slope += (std::conj(G[i]) * direction[i]).real();
    dir_slope *= parseval;
    if (!(dir_slope > 0.0)) {
      direction = PG;
      dir_slope = slope;
    }
    prev_pgrad = std::move(PG);
    prev_slope = slope;

    ComplexField D = direction;
    fft_inverse_inplace(D);
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      ComplexField trial = cur.g;
      for (std::size_t i = 0; i < trial.size(); ++i) trial[i] -= step * D[i];
      detail::retract_ratio(trial, pn[0], ratio);
      detail::normalize_mass(trial);
      detail::WeinsteinPoint next = detail::weinstein_point(std::move(trial), cp);
      bool ok = next.logW <= cur.logW - opts.armijo * step * dir_slope;
      if (!ok && step * dir_slope < 1e-10 &&
          next.logW <= cur.logW + 1e-11) {
        // function values no longer resolve the decrease: approximate Wolfe
        // test on the slope at the trial point
        const ComplexField Gt = detail::weinstein_gradient_spectrum(next, cp);
        double st = 0.0;
        for (std::size_t i = 0; i < Gt.size(); ++i) st += (std::conj(Gt[i]) * direction[i]).real();
        st *= parseval;
        ok = st <= 0.9 * dir_slope && st >= -0.8 * dir_slope;
      }
      if (ok) {
        cur = std::move(next);
        accepted = true;
        step = std::min(step * opts.growth, opts.max_step);
        break;
      }
      step *= opts.backtrack;
    }
    if (!accepted) {
      // no descent is available at working precision
      if (grad_norm > 1e3 * opts.grad_tolerance) {
        std::ostringstream os;
        os << "minimize_weinstein: line search failed at iteration " << it
           << " (preconditioned gradient norm " << grad_norm << ")";
        fail(ErrorKind::non_convergence, os.str());
      }
      break;
    }
    history.push_back(cur.logW);
    while (static_cast<int>(history.size()) > opts.w_window + 1) history.pop_front();
  }

  ComplexField g = std::move(cur.g);
  for (auto& v : g.values()) v = cplx(v.real(), 0.0);
  detail::recenter(g);
  for (auto& v : g.values()) v = cplx(v.real(), 0.0);
  // Dilation g -> a g(b x) realized by rescaling the box: M = H = 1 afterwards.
  const double M = mass(g), H = kinetic(g);
  const double beta = std::sqrt(M / H);
  g.rebind(g.grid().scaled(1.0 / beta));
  g *= std::sqrt(beta * beta * beta / M);
  out.W = weinstein(g, cp);
  out.field = std::move(g);
  return out;
}

inline MinimizerResult minimize_weinstein(const GridPtr& grid, const CouplingParams& cp,
                                          const MinimizerOptions& opts) {
  MinimizerOptions o = opts;
  if (!(o.kinetic_ratio > 0.0)) {
    // H/M of an isotropic Gaussian of the nominal width
    const double w = o.width > 0.0 ? o.width : detail::auto_width(*grid);
    o.kinetic_ratio = 1.5 / (w * w);
  }
  return minimize_weinstein_from(initial_guess(grid, cp, o), cp, o);
}

/// L2 norm of -(1/2) Lap phi + phi + l1 |phi|^2 phi + l2 (K*|phi|^2) phi.
inline double elliptic_residual(const ComplexField& phi, const CouplingParams& cp) {
  require_space(phi, Space::physical, "elliptic_residual");
  const Grid& grid = phi.grid();
  ComplexField lap = fft_forward(phi);
  for_each_mode(grid, [&](std::size_t i, double a, double b, double c) {
    lap[i] *= 0.5 * (a * a + b * b + c * c);
  });
  fft_inverse_inplace(lap);
  ComplexField conv(phi.grid_ptr());
  if (cp.lambda2 != 0.0) conv = dipolar_convolution(density(phi));
  double s = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i) {
    const double rho = std::norm(phi[i]);
    const cplx r = lap[i] + phi[i] + (cp.lambda1 * rho + cp.lambda2 * conv[i].real()) * phi[i];
    s += std::norm(r);
  }
  return std::sqrt(s * grid.cell_volume());
}

/// Checks the Pohozaev identities and the threshold chain on a record; returns
/// an empty string when all hold, otherwise a description of the first failure.
inline std::string check_record(const GroundStateRecord& rec, double tol, double residual_tol) {
  std::ostringstream os;
  const double norm = std::sqrt(rec.M);
  if (!(rec.residual <= residual_tol * norm)) {
    os << "elliptic residual " << rec.residual / norm << " (relative) exceeds " << residual_tol;
    return os.str();
  }
  if (std::abs(rec.H - 6.0 * rec.M) > tol * rec.H) {
    os << "Pohozaev H = 6M violated: H = " << rec.H << ", 6M = " << 6.0 * rec.M;
    return os.str();
  }
  if (std::abs(rec.H + 1.5 * rec.N) > tol * rec.H) {
    os << "Pohozaev H = -(3/2)N violated: H = " << rec.H << ", -(3/2)N = " << -1.5 * rec.N;
    return os.str();
  }
  const double chain = (2.0 / 27.0) / (rec.Copt * rec.Copt);
  for (double v : {rec.HM / 6.0, rec.negNM / 4.0, chain}) {
    if (std::abs(rec.EM - v) > tol * rec.EM) {
      os << "threshold chain EM = HM/6 = -NM/4 = (2/27)Copt^-2 violated: EM = " << rec.EM
         << ", HM/6 = " << rec.HM / 6.0 << ", -NM/4 = " << rec.negNM / 4.0
         << ", (2/27)Copt^-2 = " << chain;
      return os.str();
    }
  }
  return {};
}

/// Maps a Weinstein minimizer g onto the bound state phi through
/// g(x) = nu phi(mu x), nu = sqrt(b Copt / 4), mu = sqrt(b / (2a)),
/// a = 3 |grad g| |g|, b = |grad g|^3 / |g|. The substitution is exact on the
/// grid: phi lives on the box scaled by mu with samples g / nu.
inline GroundStateRecord rescale_to_bound_state(const ComplexField& g, const CouplingParams& cp,
                                                double Copt, const MinimizerOptions& opts = {}) {
  require_space(g, Space::physical, "rescale_to_bound_state");
  require(Copt > 0.0, "rescale_to_bound_state: Copt must be positive");
  const double Mg = mass(g), Hg = kinetic(g);
  const double a = 3.0 * std::sqrt(Hg * Mg);
  const double b = std::pow(Hg, 1.5) / std::sqrt(Mg);
  const double nu = std::sqrt(b * Copt / 4.0);
  const double mu = std::sqrt(b / (2.0 * a));

  GroundStateRecord rec;
  rec.cp = cp;
  rec.Copt = Copt;
  rec.phi = g;
  rec.phi.rebind(g.grid().scaled(mu));
  double peak = 0.0;
  for (const cplx& v : rec.phi.values())
    if (std::abs(v.real()) > std::abs(peak)) peak = v.real();
  const double sign = peak < 0.0 ? -1.0 : 1.0;
  for (auto& v : rec.phi.values()) v = cplx(sign * v.real() / nu, 0.0);

  rec.M = mass(rec.phi);
  rec.H = kinetic(rec.phi);
  rec.N = potential_N(rec.phi, cp);
  rec.EM = 0.5 * (rec.H + rec.N) * rec.M;
  rec.HM = rec.H * rec.M;
  rec.negNM = -rec.N * rec.M;
  rec.residual = elliptic_residual(rec.phi, cp);
  const std::string problem = check_record(rec, opts.identity_tolerance, opts.residual_tolerance);
  if (!problem.empty()) fail(ErrorKind::non_convergence, "rescale_to_bound_state: " + problem);
  return rec;
}

/// Minimize, rescale and validate in one call.
inline GroundStateRecord compute_ground_state(const GridPtr& grid, const CouplingParams& cp,
                                              const MinimizerOptions& opts = {}) {
  const MinimizerResult res = minimize_weinstein(grid, cp, opts);
  GroundStateRecord rec = rescale_to_bound_state(res.field, cp, 1.0 / res.W, opts);
  rec.iterations = res.iterations;
  rec.seed = opts.seed;
  return rec;
}

}  // namespace dgpe
