#pragma once

// Regime conditions and theorem hypotheses evaluated on couplings, data and
// trajectories. Strict inequalities carry a relative tolerance band; values
// inside the band are reported as boundary/ambiguous instead of being forced
// into a branch.

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "dgpe/groundstate.hpp"
#include "dgpe/propagator.hpp"

namespace dgpe {

enum class Regime { stable, unstable };

inline const char* to_string(Regime r) { return r == Regime::stable ? "stable" : "unstable"; }

struct RegimeVerdict {
  Regime regime = Regime::stable;
  bool in_cond_GW = false;
  std::string notes;
};

/// Unstable cone: l1 < (4pi/3) l2 for l2 > 0, l1 < -(8pi/3) l2 for l2 < 0,
/// l1 < 0 on the line l2 = 0. The Gao-Wang cone swaps the two bounds, which
/// is exactly the set where l1 + l2 m(xi) < 0 for every direction.
inline RegimeVerdict classify_regime(const CouplingParams& cp) {
  validate(cp);
  const double l1 = cp.lambda1, l2 = cp.lambda2;
  RegimeVerdict v;
  bool unstable = false;
  if (l2 > 0.0) {
    unstable = l1 < 4.0 * pi / 3.0 * l2;
    v.in_cond_GW = l1 < -8.0 * pi / 3.0 * l2;
  } else if (l2 < 0.0) {
    unstable = l1 < -8.0 * pi / 3.0 * l2;
    v.in_cond_GW = l1 < 4.0 * pi / 3.0 * l2;
  } else {
    unstable = l1 < 0.0;
    v.in_cond_GW = l1 < 0.0;
    v.notes = "lambda2 = 0: cubic NLS, focusing iff lambda1 < 0";
  }
  v.regime = unstable ? Regime::unstable : Regime::stable;
  if (v.notes.empty()) {
    if (!unstable)
      v.notes = "stable regime: l1 + l2 m(xi) >= 0 for every direction, so N >= 0";
    else if (v.in_cond_GW)
      v.notes = "l1 + l2 m(xi) < 0 for every direction, so N < 0 for every nonzero field";
    else
      v.notes = "l1 + l2 m(xi) changes sign with direction";
  }
  return v;
}

// ---------------------------------------------------------------------------
// condition bookkeeping

inline constexpr double default_strict_band = 1e-6;
inline constexpr double default_threshold_band = 1e-4;

enum class Relation { less, less_equal, greater, greater_equal };

struct ConditionCheck {
  std::string name;
  std::string relation;
  double lhs = 0.0;
  double rhs = 0.0;
  /// Signed distance to the boundary divided by `scale`; positive means the
  /// condition holds with room to spare.
  double margin = 0.0;
  bool holds = false;
  bool ambiguous = false;
};

/// `scale` normalizes the margin; it defaults to |rhs|, or max(|lhs|, |rhs|)
/// when the boundary value is zero.
inline ConditionCheck check_condition(std::string name, double lhs, Relation rel, double rhs,
                                      double band, double scale = 0.0) {
  ConditionCheck c;
  c.name = std::move(name);
  c.lhs = lhs;
  c.rhs = rhs;
  if (!(scale > 0.0)) scale = rhs != 0.0 ? std::abs(rhs) : std::abs(lhs);
  const double diff = (rel == Relation::less || rel == Relation::less_equal) ? rhs - lhs : lhs - rhs;
  c.margin = scale > 0.0 ? diff / scale : 0.0;
  c.ambiguous = std::abs(c.margin) <= band;
  const bool strict = rel == Relation::less || rel == Relation::greater;
  c.holds = strict ? c.margin > band : c.margin >= -band;
  switch (rel) {
    case Relation::less: c.relation = "<"; break;
    case Relation::less_equal: c.relation = "<="; break;
    case Relation::greater: c.relation = ">"; break;
    case Relation::greater_equal: c.relation = ">="; break;
  }
  return c;
}

enum class Prediction { none, scatter, blowup, bloworgrow, threshold_trichotomy };

inline const char* to_string(Prediction p) {
  switch (p) {
    case Prediction::none: return "none";
    case Prediction::scatter: return "scatter";
    case Prediction::blowup: return "blowup";
    case Prediction::bloworgrow: return "bloworgrow";
    case Prediction::threshold_trichotomy: return "threshold-trichotomy";
  }
  return "none";
}

struct TheoremReport {
  std::string theorem;
  std::vector<ConditionCheck> conditions;
  Prediction prediction = Prediction::none;
  std::string branch;
  std::string notes;

  bool all_hold() const {
    return std::all_of(conditions.begin(), conditions.end(),
                       [](const ConditionCheck& c) { return c.holds; });
  }
  bool any_ambiguous() const {
    return std::any_of(conditions.begin(), conditions.end(),
                       [](const ConditionCheck& c) { return c.ambiguous; });
  }
  const ConditionCheck* find(const std::string& name) const {
    for (const auto& c : conditions)
      if (c.name == name) return &c;
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// below the threshold

enum class Membership { A_plus, A_minus, neither };

inline const char* to_string(Membership m) {
  switch (m) {
    case Membership::A_plus: return "A_plus";
    case Membership::A_minus: return "A_minus";
    case Membership::neither: return "neither";
  }
  return "neither";
}

struct MembershipResult {
  Membership set = Membership::neither;
  bool ambiguous = false;
  double EM_ratio = 0.0;  // E M / E(phi) M(phi)
  double HM_ratio = 0.0;  // H M / H(phi) M(phi)
  /// The G-sign form of the same split: +1 for G > 0, -1 for G < 0, 0 otherwise.
  int G_sign = 0;
  /// G-sign form agrees with the product form (only meaningful off `neither`).
  bool G_consistent = true;
};

inline MembershipResult below_threshold_membership(const FunctionalBundle& b, const Thresholds& th,
                                                   double band = default_strict_band) {
  require(th.EM > 0.0 && th.HM > 0.0, "membership: thresholds must be positive");
  MembershipResult r;
  r.EM_ratio = b.E * b.M / th.EM;
  r.HM_ratio = b.H * b.M / th.HM;
  r.G_sign = b.G > 0.0 ? 1 : (b.G < 0.0 ? -1 : 0);
  const double em_gap = 1.0 - r.EM_ratio;
  const double hm_gap = 1.0 - r.HM_ratio;
  r.ambiguous = std::abs(em_gap) <= band || std::abs(hm_gap) <= band;
  if (em_gap > band) {
    if (hm_gap > band) r.set = Membership::A_plus;
    else if (hm_gap < -band) r.set = Membership::A_minus;
  }
  if (r.set == Membership::A_plus) r.G_consistent = r.G_sign > 0;
  if (r.set == Membership::A_minus) r.G_consistent = r.G_sign < 0;
  return r;
}

/// Scattering below the threshold (E M and H M both below the ground state)
/// or, for A_minus, blow-up (finite variance) or grow-up.
inline TheoremReport below_threshold_report(const FunctionalBundle& b, const Thresholds& th,
                                            const CouplingParams& cp,
                                            double band = default_strict_band) {
  TheoremReport rep;
  rep.theorem = "below-threshold";
  const MembershipResult m = below_threshold_membership(b, th, band);
  rep.conditions.push_back(check_condition("EM < E(phi)M(phi)", b.E * b.M, Relation::less, th.EM, band));
  const bool unstable = classify_regime(cp).regime == Regime::unstable;
  if (m.set == Membership::A_plus) {
    rep.conditions.push_back(check_condition("HM < H(phi)M(phi)", b.H * b.M, Relation::less, th.HM, band));
    rep.branch = "A_plus";
    if (unstable) rep.prediction = Prediction::scatter;
  } else {
    rep.conditions.push_back(check_condition("HM > H(phi)M(phi)", b.H * b.M, Relation::greater, th.HM, band));
    if (m.set == Membership::A_minus) {
      rep.branch = "A_minus";
      if (unstable) rep.prediction = std::isfinite(b.V) ? Prediction::blowup : Prediction::bloworgrow;
    } else {
      rep.branch = m.ambiguous ? "boundary/ambiguous" : "neither";
    }
  }
  if (!unstable) rep.notes = "couplings are not in the unstable regime";
  if (!m.G_consistent) rep.notes += (rep.notes.empty() ? "" : "; ") + std::string("sign of G disagrees with the product form");
  return rep;
}

// ---------------------------------------------------------------------------
// above the threshold

namespace detail {

inline double vprime_scale(const FunctionalBundle& b) {
  // |V'| <= 2 |x u| |grad u| = 2 sqrt(2 V H)
  return 2.0 * std::sqrt(std::max(0.0, 2.0 * b.V * b.H));
}

/// (E M / E(phi) M(phi)) (1 - V'^2 / (8 E V)), written without dividing by E.
inline double gao_wang_product(const FunctionalBundle& b, const Thresholds& th) {
  if (!(b.V > 0.0)) fail(ErrorKind::domain, "variance V(0) vanishes; the field is zero");
  return (b.E * b.M - b.M * b.Vp * b.Vp / (8.0 * b.V)) / th.EM;
}

}  // namespace detail

inline TheoremReport above_threshold_scattering_check(const FunctionalBundle& b, const Thresholds& th,
                                                      const CouplingParams& cp,
                                                      double band = default_strict_band) {
  TheoremReport rep;
  rep.theorem = "scattering above the threshold";
  const double EM = b.E * b.M;
  rep.conditions.push_back(check_condition("EM >= E(phi)M(phi)", EM, Relation::greater_equal, th.EM, band));
  rep.conditions.push_back(check_condition("(EM/E(phi)M(phi))(1 - V'^2/(8EV)) <= 1",
                                           detail::gao_wang_product(b, th), Relation::less_equal, 1.0, band));
  rep.conditions.push_back(check_condition("-NM < -N(phi)M(phi)", -b.N * b.M, Relation::less, th.negNM, band));
  rep.conditions.push_back(check_condition("V'(0) >= 0", b.Vp, Relation::greater_equal, 0.0, band,
                                           detail::vprime_scale(b)));
  const bool gw = classify_regime(cp).in_cond_GW;
  if (rep.all_hold() && gw) {
    rep.prediction = Prediction::scatter;
    rep.branch = "sup -N(u(t))M(u(t)) < -N(phi)M(phi); global and scattering forward in time";
  }
  if (!gw) rep.notes = "couplings are outside the cone where N < 0 for every field";
  return rep;
}

inline TheoremReport gao_wang_blowup_check(const FunctionalBundle& b, const Thresholds& th,
                                           const CouplingParams& cp,
                                           double band = default_strict_band) {
  TheoremReport rep;
  rep.theorem = "Gao-Wang blow-up";
  rep.conditions.push_back(check_condition("(EM/E(phi)M(phi))(1 - V'^2/(8EV)) <= 1",
                                           detail::gao_wang_product(b, th), Relation::less_equal, 1.0, band));
  rep.conditions.push_back(check_condition("-NM > -N(phi)M(phi)", -b.N * b.M, Relation::greater, th.negNM, band));
  rep.conditions.push_back(check_condition("V'(0) <= 0", b.Vp, Relation::less_equal, 0.0, band,
                                           detail::vprime_scale(b)));
  const bool gw = classify_regime(cp).in_cond_GW;
  if (rep.all_hold() && gw) {
    rep.prediction = Prediction::blowup;
    rep.branch = "finite-time blow-up forward in time";
  }
  if (!gw) rep.notes = "couplings are outside the cone where N < 0 for every field";
  return rep;
}

struct Lambda0 {
  double value = 0.0;
  /// false when E M lies below the threshold, which makes the value negative.
  bool admissible = true;
};

/// lambda0 = 4E (1 - E(phi)M(phi) / (E M)), the minimum point of h.
inline Lambda0 compute_lambda0(double E, double M, const Thresholds& th) {
  if (!(E > 0.0)) fail(ErrorKind::domain, "compute_lambda0: requires E > 0");
  require(M > 0.0 && th.EM > 0.0, "compute_lambda0: mass and threshold must be positive");
  Lambda0 out;
  const double EM = E * M;
  out.value = EM == th.EM ? 0.0 : 4.0 * E * (1.0 - th.EM / EM);
  out.admissible = out.value >= 0.0;
  return out;
}

/// h(l) = 6E - l - (4E - l)^{2/3} / (Copt^{2/3} M^{1/3}), defined for l <= 4E.
inline double h_function(double lambda, double E, double M, double Copt) {
  if (lambda > 4.0 * E) fail(ErrorKind::domain, "h_function: requires lambda <= 4E");
  require(M > 0.0 && Copt > 0.0, "h_function: mass and Copt must be positive");
  return 6.0 * E - lambda - std::cbrt((4.0 * E - lambda) * (4.0 * E - lambda)) /
                                (std::cbrt(Copt * Copt) * std::cbrt(M));
}

/// Copt implied by a mass-energy threshold through E(phi)M(phi) = (2/27) Copt^-2.
inline double copt_from_threshold(double EM_threshold) {
  require(EM_threshold > 0.0, "copt_from_threshold: threshold must be positive");
  return std::sqrt(2.0 / (27.0 * EM_threshold));
}

/// nu with G(f) >= nu H(f) whenever -N(f)M(f) <= A < -N(phi)M(phi).
inline double coercivity_nu(double A, const Thresholds& th) {
  require(th.negNM > 0.0, "coercivity_nu: threshold must be positive");
  if (!(A > 0.0) || !(A < th.negNM))
    fail(ErrorKind::domain, "coercivity_nu: requires 0 < A < -N(phi)M(phi)");
  const double eta = 1.0 - A / th.negNM;
  return 1.0 - std::cbrt(1.0 - eta);
}

/// Uniform bound G(u(t)) <= -delta for data with E M below and H M above the
/// threshold: G M = 3 E M - H M / 2 and H(u(t)) M stays above H(phi)M(phi),
/// so delta = 3 (E(phi)M(phi) - E M) / M.
inline double blowup_delta(const FunctionalBundle& b, const Thresholds& th) {
  require(b.M > 0.0, "blowup_delta: mass must be positive");
  return 3.0 * (th.EM - b.E * b.M) / b.M;
}

// ---------------------------------------------------------------------------
// at the threshold

inline TheoremReport at_threshold_classify(const FunctionalBundle& b, const Thresholds& th,
                                           const CouplingParams& cp,
                                           double tol = default_threshold_band) {
  const double EM = b.E * b.M;
  if (std::abs(EM - th.EM) > tol * th.EM) {
    std::ostringstream os;
    os << "at_threshold_classify: E M = " << EM << " is not within " << tol
       << " (relative) of E(phi)M(phi) = " << th.EM;
    fail(ErrorKind::domain, os.str());
  }
  TheoremReport rep;
  rep.theorem = "dynamics at the threshold";
  rep.prediction = Prediction::threshold_trichotomy;
  ConditionCheck energy;
  energy.name = "EM = E(phi)M(phi)";
  energy.relation = "=";
  energy.lhs = EM;
  energy.rhs = th.EM;
  energy.margin = (EM - th.EM) / th.EM;
  energy.holds = true;
  energy.ambiguous = false;
  rep.conditions.push_back(energy);

  const double HM = b.H * b.M;
  const double d = (HM - th.HM) / th.HM;
  ConditionCheck kin;
  kin.lhs = HM;
  kin.rhs = th.HM;
  kin.margin = d;
  kin.holds = true;
  const bool gw = classify_regime(cp).in_cond_GW;
  if (d < -tol) {
    kin.name = "HM < H(phi)M(phi)";
    kin.relation = "<";
    rep.branch = gw ? "global; H(u(t))M < H(phi)M(phi); scatters or concentrates along t_n -> infinity"
                    : "global; H(u(t))M < H(phi)M(phi)";
  } else if (d > tol) {
    kin.name = "HM > H(phi)M(phi)";
    kin.relation = ">";
    rep.branch = std::isfinite(b.V)
                     ? "H(u(t))M > H(phi)M(phi); blows up in finite time or concentrates along t_n -> infinity"
                     : "H(u(t))M > H(phi)M(phi); blows up, grows up, or concentrates along t_n -> infinity";
  } else {
    kin.name = "HM = H(phi)M(phi)";
    kin.relation = "=";
    rep.branch = "standing wave e^{i mu^2 t} e^{i theta} mu phi(mu x)";
  }
  rep.conditions.push_back(kin);
  if (classify_regime(cp).regime != Regime::unstable) {
    rep.prediction = Prediction::none;
    rep.notes = "couplings are not in the unstable regime";
  }
  return rep;
}

// ---------------------------------------------------------------------------
// trajectories

struct TrajectoryVerdict {
  /// sup over samples of -N(u(t))M(u(t)) stays below -N(phi)M(phi).
  bool scattering_criterion = false;
  double sup_negNM = 0.0;
  /// G(u(t)) <= -delta at every sample.
  bool blowup_criterion = false;
  double sup_G = 0.0;
  double delta = 0.0;
  Verdict surrogate = Verdict::running;
  /// scattering-consistent, grow-up-consistent, blowup_detected, underresolved or unlabeled.
  std::string surrogate_label;
  bool consistent = true;
  int samples = 0;
  double sample_spacing = 0.0;  // mean time between diagnostics rows
  std::string notes;
};

inline TrajectoryVerdict trajectory_verdict(const Trajectory& traj, const Thresholds& th, double delta,
                                            const Grid& grid, const PropagatorConfig& cfg) {
  if (traj.rows.empty()) fail(ErrorKind::invalid_argument, "trajectory_verdict: empty trajectory");
  TrajectoryVerdict v;
  v.delta = delta;
  v.samples = static_cast<int>(traj.rows.size());
  v.sup_negNM = -std::numeric_limits<double>::infinity();
  v.sup_G = -std::numeric_limits<double>::infinity();
  for (const DiagnosticsRow& r : traj.rows) {
    v.sup_negNM = std::max(v.sup_negNM, -r.b.N * r.b.M);
    v.sup_G = std::max(v.sup_G, r.b.G);
  }
  if (traj.rows.size() > 1)
    v.sample_spacing = (traj.rows.back().t - traj.rows.front().t) / (traj.rows.size() - 1);
  v.scattering_criterion = v.sup_negNM < th.negNM;
  v.blowup_criterion = delta > 0.0 && v.sup_G <= -delta;
  v.surrogate = traj.verdict;
  const bool scat = scattering_consistent(traj);
  const bool grow = grow_up_consistent(traj, grid, cfg);
  if (traj.verdict == Verdict::blowup_detected) v.surrogate_label = "blowup_detected";
  else if (traj.verdict == Verdict::underresolved) v.surrogate_label = "underresolved";
  else if (scat) v.surrogate_label = "scattering-consistent";
  else if (grow) v.surrogate_label = "grow-up-consistent";
  else v.surrogate_label = "unlabeled";

  std::vector<std::string> issues;
  if (v.scattering_criterion && traj.verdict == Verdict::blowup_detected)
    issues.push_back("scattering criterion held at every sample but the run was flagged as blow-up");
  if (v.blowup_criterion && scat)
    issues.push_back("G <= -delta at every sample but the run looks scattering-consistent");
  v.consistent = issues.empty();
  std::ostringstream os;
  os << "sup taken over " << v.samples << " diagnostics rows";
  for (const auto& s : issues) os << "; " << s;
  v.notes = os.str();
  return v;
}

}  // namespace dgpe
