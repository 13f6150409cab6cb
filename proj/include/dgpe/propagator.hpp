#pragma once

// Strang splitting for  i u_t + (1/2) Lap u = l1 |u|^2 u + l2 (K*|u|^2) u
// with trajectory diagnostics and a finite-resolution blow-up monitor.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dgpe/functionals.hpp"

namespace dgpe {

enum class Verdict { running, completed, blowup_detected, underresolved };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::running:
      return "running";
    case Verdict::completed:
      return "completed";
    case Verdict::blowup_detected:
      return "blowup_detected";
    case Verdict::underresolved:
      return "underresolved";
  }
  return "running";
}

inline Verdict verdict_from_string(const std::string& s) {
  if (s == "running") return Verdict::running;
  if (s == "completed") return Verdict::completed;
  if (s == "blowup_detected") return Verdict::blowup_detected;
  if (s == "underresolved") return Verdict::underresolved;
  fail(ErrorKind::invalid_argument, "unknown verdict '" + s + "'");
}

struct PropagatorConfig {
  double dt = 1e-3;
  double t_end = 1.0;
  int diag_stride = 10;
  double blowup_kinetic_factor = 100.0;
  /// Smallest healthy focusing length (M/H)^{1/2}, in units of the finest dx.
  double resolution_floor = 4.0;
  /// Top-octave spectral energy fraction above which a run is underresolved.
  double tail_threshold = 1e-4;
  bool adaptive = false;
  /// Nonlinear phase budget per step for adaptive stepping.
  double safety = 0.1;
  /// Adaptive steps below min_dt_ratio * dt end the run as underresolved.
  double min_dt_ratio = 1e-6;
  /// Radius of the localized virial; <= 0 picks half the smallest half-width.
  double virial_R = 0.0;
  double envelope_constant = default_envelope_constant;
  /// Times at which field checkpoints are kept (taken at the first
  /// diagnostics row at or after each time).
  std::vector<double> snapshot_times;

  bool operator==(const PropagatorConfig&) const = default;

  void validate() const {
    require(dt > 0.0 && std::isfinite(dt), "propagator: dt must be positive");
    require(t_end >= 0.0 && std::isfinite(t_end), "propagator: t_end must be non-negative");
    require(diag_stride >= 1, "propagator: diag_stride must be at least 1");
    require(blowup_kinetic_factor > 1.0, "propagator: blowup_kinetic_factor must exceed 1");
    require(resolution_floor > 0.0, "propagator: resolution_floor must be positive");
    require(tail_threshold > 0.0, "propagator: tail_threshold must be positive");
    require(safety > 0.0 && min_dt_ratio > 0.0, "propagator: adaptive controls must be positive");
  }
};

struct DiagnosticsRow {
  double t = 0.0;
  double dt = 0.0;  // step in use when the row was taken
  FunctionalBundle b;
  double L4 = 0.0;
  double L8L4_acc = 0.0;
  double zR = 0.0;
  double zRprime = 0.0;
  double boundary_mass = 0.0;
  double tail = 0.0;
  Verdict verdict = Verdict::running;
};

struct Snapshot {
  double t = 0.0;
  ComplexField u;
};

struct Trajectory {
  std::vector<DiagnosticsRow> rows;
  std::vector<Snapshot> snapshots;
  Verdict verdict = Verdict::running;
  std::string note;
  long steps = 0;
  ComplexField final_field;
};

/// Largest |l1 + l2 m| over the range [-4pi/3, 8pi/3] of the dipolar symbol.
inline double coupling_scale(const CouplingParams& cp) {
  return std::max(std::abs(cp.lambda1 - 4.0 * pi / 3.0 * cp.lambda2),
                  std::abs(cp.lambda1 + 8.0 * pi / 3.0 * cp.lambda2));
}

inline double max_density(const ComplexField& u) {
  double m = 0.0;
  for (const cplx& v : u.values()) m = std::max(m, std::norm(v));
  return m;
}

inline double adaptive_dt(const ComplexField& u, const CouplingParams& cp,
                          const PropagatorConfig& cfg) {
  const double rate = coupling_scale(cp) * max_density(u);
  if (!(rate > 0.0)) return cfg.dt;
  return std::min(cfg.dt, cfg.safety / rate);
}

namespace detail {

/// Split-step machinery on one grid. The state is kept in spectral space
/// with a pending kinetic phase, so consecutive half kinetic substeps merge.
class SplitStepper {
 public:
  SplitStepper(const GridPtr& grid, const CouplingParams& cp) : grid_(grid), cp_(cp) {
    k2_ = laplacian_multiplier(*grid);
    for (double& v : k2_) v = -v;
    if (cp.lambda2 != 0.0) dip_ = dipolar_multiplier(*grid);
  }

  /// Multiplies a spectral field by exp(-i tau |xi|^2 / 2).
  void kinetic(ComplexField& F, double tau) {
    if (tau == 0.0) return;
    if (tau != cached_tau_) {
      phase_.resize(k2_.size());
      for (std::size_t i = 0; i < k2_.size(); ++i) phase_[i] = std::polar(1.0, -0.5 * tau * k2_[i]);
      cached_tau_ = tau;
    }
    for (std::size_t i = 0; i < F.size(); ++i) F[i] *= phase_[i];
  }

  /// u <- u exp(-i dt (l1 |u|^2 + l2 K*|u|^2)) on a physical field.
  void nonlinear(ComplexField& u, double dt) {
    if (cp_.lambda1 == 0.0 && cp_.lambda2 == 0.0) return;
    if (cp_.lambda2 != 0.0) {
      ComplexField rho = density(u);
      fft_forward_inplace(rho);
      for (std::size_t i = 0; i < rho.size(); ++i) rho[i] *= dip_[i];
      fft_inverse_inplace(rho);
      for (std::size_t i = 0; i < u.size(); ++i) {
        const double v = cp_.lambda1 * std::norm(u[i]) + cp_.lambda2 * rho[i].real();
        u[i] *= std::polar(1.0, -dt * v);
      }
    } else {
      for (std::size_t i = 0; i < u.size(); ++i)
        u[i] *= std::polar(1.0, -dt * cp_.lambda1 * std::norm(u[i]));
    }
  }

 private:
  GridPtr grid_;
  CouplingParams cp_;
  std::vector<double> k2_;
  std::vector<double> dip_;
  std::vector<cplx> phase_;
  double cached_tau_ = std::numeric_limits<double>::quiet_NaN();
};

}  // namespace detail

/// One Strang step: half kinetic, exact nonlinear phase, half kinetic.
inline ComplexField strang_step(ComplexField u, const CouplingParams& cp, double dt) {
  require_space(u, Space::physical, "strang_step");
  validate(cp);
  require(std::isfinite(dt), "strang_step: dt must be finite");
  detail::SplitStepper stepper(u.grid_ptr(), cp);
  fft_forward_inplace(u);
  stepper.kinetic(u, 0.5 * dt);
  fft_inverse_inplace(u);
  stepper.nonlinear(u, dt);
  fft_forward_inplace(u);
  stepper.kinetic(u, 0.5 * dt);
  fft_inverse_inplace(u);
  if (!all_finite(u)) fail(ErrorKind::numerical_abort, "strang_step: non-finite values");
  return u;
}

/// Verdict update from a fresh diagnostics row. The blow-up test comes first:
/// a collapsing profile also drives energy into the top octave.
inline Verdict blowup_monitor(const DiagnosticsRow& row, double H0, const Grid& grid,
                              const PropagatorConfig& cfg) {
  const double dx = *std::min_element(grid.dx().begin(), grid.dx().end());
  if (row.b.H > cfg.blowup_kinetic_factor * H0 && row.b.H > 0.0) {
    const double ell = std::sqrt(row.b.M / row.b.H);
    if (ell < cfg.resolution_floor * dx) return Verdict::blowup_detected;
  }
  if (row.tail > cfg.tail_threshold) return Verdict::underresolved;
  return Verdict::running;
}

inline double default_virial_radius(const Grid& grid) { return 0.5 * grid.min_half_width(); }

/// Diagnostics of a physical field u whose spectrum is F.
inline DiagnosticsRow measure(const ComplexField& u, const ComplexField& F, const CouplingParams& cp,
                              double R, double envelope_constant) {
  DiagnosticsRow row;
  row.b = evaluate(u, cp);
  row.L4 = l4_norm(u);
  row.boundary_mass = boundary_mass(u);
  row.tail = spectral_tail_fraction(F);
  if (R > 1.0) {
    const LocalizedVirial lv = localized_virial(u, cp, R, envelope_constant);
    row.zR = lv.z;
    row.zRprime = lv.zprime;
  }
  return row;
}

inline Trajectory evolve(const ComplexField& u0, const CouplingParams& cp,
                         const PropagatorConfig& cfg) {
  require_space(u0, Space::physical, "evolve");
  validate(cp);
  cfg.validate();
  require(all_finite(u0), "evolve: initial field has non-finite values");
  const Grid& grid = u0.grid();
  const double R = cfg.virial_R > 0.0 ? cfg.virial_R : default_virial_radius(grid);
  require(R <= grid.min_half_width(), "evolve: virial radius exceeds the box half-width");

  detail::SplitStepper stepper(u0.grid_ptr(), cp);
  Trajectory traj;
  std::size_t next_snapshot = 0;
  std::vector<double> snap_times = cfg.snapshot_times;
  std::sort(snap_times.begin(), snap_times.end());

  ComplexField state = fft_forward(u0);  // spectral; lags by `pending` kinetic time
  double pending = 0.0;
  double t = 0.0;
  double H0 = 0.0;
  double acc = 0.0;
  double dt = cfg.dt;
  const double t_tol = 1e-12 * std::max(1.0, cfg.t_end);

  const auto take_row = [&](double time, double dt_used) {
    ComplexField F = state;
    stepper.kinetic(F, pending);
    ComplexField u = fft_inverse(F);
    DiagnosticsRow row = measure(u, F, cp, R, cfg.envelope_constant);
    row.t = time;
    row.dt = dt_used;
    if (!traj.rows.empty()) {
      const DiagnosticsRow& prev = traj.rows.back();
      acc = scattering_accumulator(acc, prev.L4, time - prev.t);
    } else {
      H0 = row.b.H;
    }
    row.L8L4_acc = acc;
    row.verdict = blowup_monitor(row, H0, grid, cfg);
    while (next_snapshot < snap_times.size() && snap_times[next_snapshot] <= time + t_tol) {
      traj.snapshots.push_back({time, u});
      ++next_snapshot;
    }
    traj.rows.push_back(row);
    return u;
  };

  ComplexField current = take_row(0.0, dt);
  ComplexField u(u0.grid_ptr());
  int since_row = 0;
  while (traj.rows.back().verdict == Verdict::running && t < cfg.t_end - t_tol) {
    if (cfg.adaptive) {
      dt = adaptive_dt(current, cp, cfg);
      if (dt < cfg.min_dt_ratio * cfg.dt) {
        traj.rows.back().verdict = Verdict::underresolved;
        traj.note = "adaptive time step fell below the configured floor";
        break;
      }
    }
    const double h = std::min(dt, cfg.t_end - t);
    stepper.kinetic(state, pending + 0.5 * h);
    u = fft_inverse(state);
    stepper.nonlinear(u, h);
    state = fft_forward(u);
    pending = 0.5 * h;
    t = (cfg.t_end - (t + h) <= t_tol) ? cfg.t_end : t + h;
    ++traj.steps;
    ++since_row;
    if (!all_finite(u)) {
      DiagnosticsRow row = traj.rows.back();
      row.t = t;
      const bool growing = row.b.H > 0.0 && row.b.H > 0.5 * cfg.blowup_kinetic_factor * H0;
      row.verdict = growing ? Verdict::blowup_detected : Verdict::underresolved;
      traj.rows.push_back(row);
      traj.note = "non-finite values in the field; last finite diagnostics repeated";
      break;
    }
    if (cfg.adaptive) current = u;  // density at mid-step is sufficient for the next dt
    if (since_row >= cfg.diag_stride || t >= cfg.t_end) {
      current = take_row(t, h);
      since_row = 0;
    }
  }

  Verdict final = traj.rows.back().verdict;
  if (final == Verdict::running) final = Verdict::completed;
  traj.rows.back().verdict = final;
  traj.verdict = final;
  ComplexField F = state;
  stepper.kinetic(F, pending);
  traj.final_field = fft_inverse(F);
  return traj;
}

// ---------------------------------------------------------------------------
// surrogate labels

struct PowerFit {
  double alpha = 0.0;  // |u|_{L4} ~ c t^{-alpha}
  double c = 0.0;
  int samples = 0;
};

/// Least-squares fit of log L4 against log t over rows with t in [t0, t1].
inline PowerFit fit_l4_decay(const Trajectory& traj, double t0, double t1) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (const DiagnosticsRow& r : traj.rows) {
    if (r.t < t0 || r.t > t1 || r.t <= 0.0 || !(r.L4 > 0.0)) continue;
    const double x = std::log(r.t), y = std::log(r.L4);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  PowerFit fit;
  fit.samples = n;
  if (n < 2) return fit;
  const double den = n * sxx - sx * sx;
  if (den == 0.0) return fit;
  const double slope = (n * sxy - sx * sy) / den;
  fit.alpha = -slope;
  fit.c = std::exp((sy - slope * sx) / n);
  return fit;
}

/// Scattering-consistent: a completed run whose L4 norm decays like t^{-3/4}
/// (within `band`) over the final decade and whose L8L4 increments shrink.
inline bool scattering_consistent(const Trajectory& traj, double band = 0.15) {
  if (traj.verdict != Verdict::completed || traj.rows.size() < 4) return false;
  const double t1 = traj.rows.back().t;
  const PowerFit fit = fit_l4_decay(traj, 0.1 * t1, t1);
  if (fit.samples < 3 || std::abs(fit.alpha - 0.75) > band) return false;
  const std::size_t n = traj.rows.size();
  const double late = traj.rows[n - 1].L8L4_acc - traj.rows[n / 2].L8L4_acc;
  const double early = traj.rows[n / 2].L8L4_acc - traj.rows[0].L8L4_acc;
  return late < early;
}

/// Grow-up-consistent: H increases monotonically across all rows while the
/// focusing length stays above the resolution floor.
inline bool grow_up_consistent(const Trajectory& traj, const Grid& grid,
                               const PropagatorConfig& cfg) {
  if (traj.rows.size() < 2 || traj.verdict == Verdict::underresolved) return false;
  const double dx = *std::min_element(grid.dx().begin(), grid.dx().end());
  for (std::size_t i = 1; i < traj.rows.size(); ++i) {
    const DiagnosticsRow& r = traj.rows[i];
    if (!(r.b.H > traj.rows[i - 1].b.H)) return false;
    if (std::sqrt(r.b.M / r.b.H) < cfg.resolution_floor * dx) return false;
  }
  return true;
}

}  // namespace dgpe
