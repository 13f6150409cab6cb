#include <gtest/gtest.h>

#include "dgpe/propagator.hpp"
#include "oracles.hpp"

using namespace dgpe;

namespace {

ComplexField gaussian_field(const GridPtr& g, double A, double s, double chirp = 0.0) {
  ComplexField f(g);
  for_each_point(*g, [&](std::size_t i, double x, double y, double z) {
    const double r2 = x * x + y * y + z * z;
    f[i] = A * std::exp(-r2 / (2 * s * s)) * std::polar(1.0, chirp * r2 + 0.1 * x);
  });
  return f;
}

}  // namespace

TEST(Propagator, FreeGaussianMatchesExactSolution) {
  // u_t = (i/2) Lap u spreads exp(-|x|^2/(2 s^2)) with complex variance s^2 + i t.
  const GridPtr g = make_grid({64, 64, 64}, {32, 32, 32});
  const double s = 1.5, t = 1.0;
  ComplexField u0(g);
  for_each_point(*g, [&](std::size_t i, double x, double y, double z) {
    u0[i] = std::exp(-(x * x + y * y + z * z) / (2 * s * s));
  });
  PropagatorConfig cfg;
  cfg.dt = 0.1;
  cfg.t_end = t;
  const Trajectory tr = evolve(u0, {0.0, 0.0}, cfg);
  ASSERT_EQ(tr.verdict, Verdict::completed);
  const cplx var(s * s, t);
  double err = 0.0, norm = 0.0;
  for_each_point(*g, [&](std::size_t i, double x, double y, double z) {
    const cplx exact = std::pow(s * s / var, 1.5) * std::exp(-(x * x + y * y + z * z) / (2.0 * var));
    err += std::norm(tr.final_field[i] - exact);
    norm += std::norm(exact);
  });
  EXPECT_LT(std::sqrt(err / norm), 1e-10);
}

TEST(Propagator, MassIsConservedAndEnergyIsSecondOrder) {
  const GridPtr g = make_grid({32, 32, 32}, {24, 24, 24});
  const CouplingParams cp{1.0, 0.3};
  const ComplexField u0 = gaussian_field(g, 0.6, 2.0);
  double drift[2];
  for (int k = 0; k < 2; ++k) {
    PropagatorConfig cfg;
    cfg.dt = 0.1 / (1 << k);
    cfg.t_end = 2.0;
    cfg.diag_stride = 1 << k;
    const Trajectory tr = evolve(u0, cp, cfg);
    ASSERT_EQ(tr.verdict, Verdict::completed);
    double dm = 0.0, de = 0.0;
    for (const auto& r : tr.rows) {
      dm = std::max(dm, std::abs(r.b.M - tr.rows[0].b.M) / tr.rows[0].b.M);
      de = std::max(de, std::abs(r.b.E - tr.rows[0].b.E) / std::abs(tr.rows[0].b.E));
    }
    EXPECT_LT(dm, 1e-12);
    drift[k] = de;
  }
  EXPECT_GT(drift[0] / drift[1], 3.2);
  EXPECT_LT(drift[0] / drift[1], 4.8);
}

TEST(Propagator, ZeroDurationGivesOneRow) {
  const GridPtr g = make_grid({24, 24, 24}, {12, 12, 12});
  PropagatorConfig cfg;
  cfg.t_end = 0.0;
  const Trajectory tr = evolve(gaussian_field(g, 1.0, 1.5), {-1, 0}, cfg);
  ASSERT_EQ(tr.rows.size(), 1u);
  EXPECT_EQ(tr.rows[0].t, 0.0);
  EXPECT_EQ(tr.verdict, Verdict::completed);
}

TEST(Propagator, RowsAndSnapshotsFollowStride) {
  const GridPtr g = make_grid({24, 24, 24}, {12, 12, 12});
  PropagatorConfig cfg;
  cfg.dt = 0.01;
  cfg.t_end = 0.2;
  cfg.diag_stride = 5;
  cfg.snapshot_times = {0.1, 0.2};
  const Trajectory tr = evolve(gaussian_field(g, 1.0, 1.5), {-1, 0}, cfg);
  ASSERT_EQ(tr.rows.size(), 5u);
  EXPECT_NEAR(tr.rows.back().t, 0.2, 1e-12);
  ASSERT_EQ(tr.snapshots.size(), 2u);
  EXPECT_NEAR(tr.snapshots[0].t, 0.1, 1e-12);
  EXPECT_EQ(tr.steps, 20);
}

TEST(Propagator, StrangStepMatchesEvolve) {
  const GridPtr g = make_grid({24, 24, 24}, {12, 12, 12});
  const ComplexField u0 = gaussian_field(g, 1.0, 1.5);
  ComplexField u = u0;
  for (int k = 0; k < 4; ++k) u = strang_step(u, {-1, 0.2}, 0.05);
  PropagatorConfig cfg;
  cfg.dt = 0.05;
  cfg.t_end = 0.2;
  const Trajectory tr = evolve(u0, {-1, 0.2}, cfg);
  double err = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) err = std::max(err, std::abs(u[i] - tr.final_field[i]));
  EXPECT_LT(err, 1e-12);
}

TEST(Propagator, VirialIdentityAlongRun) {
  // V'' = 2H + 3N = 4E + N on a stable run, checked by central differences.
  const GridPtr g = make_grid({48, 48, 48}, {32, 32, 32});
  const CouplingParams cp{1.0, 0.0};
  PropagatorConfig cfg;
  cfg.dt = 0.01;
  cfg.t_end = 1.0;
  cfg.diag_stride = 5;
  const Trajectory tr = evolve(gaussian_field(g, 0.5, 2.0), cp, cfg);
  double worst = 0.0, scale = 0.0;
  for (std::size_t i = 1; i + 1 < tr.rows.size(); ++i) {
    const double h = tr.rows[i + 1].t - tr.rows[i].t;
    const double vpp = (tr.rows[i + 1].b.V - 2 * tr.rows[i].b.V + tr.rows[i - 1].b.V) / (h * h);
    worst = std::max(worst, std::abs(vpp - tr.rows[i].b.Vpp));
    scale = std::max(scale, std::abs(tr.rows[i].b.Vpp));
    EXPECT_NEAR(tr.rows[i].b.Vpp, 4 * tr.rows[i].b.E + tr.rows[i].b.N, 1e-10 * scale);
    const double vp = (tr.rows[i + 1].b.V - tr.rows[i - 1].b.V) / (2 * h);
    EXPECT_NEAR(vp, tr.rows[i].b.Vp, 1e-2 * std::abs(tr.rows[i].b.Vp) + 1e-4);
  }
  EXPECT_LT(worst, 1e-2 * scale);
}

TEST(Propagator, BlowupMonitorOrdering) {
  const GridPtr g = make_grid({16, 16, 16}, {16, 16, 16});
  PropagatorConfig cfg;
  DiagnosticsRow r;
  r.b.M = 1.0;
  r.b.H = 1e4;  // l = 0.01 << 4 dx
  r.tail = 1.0;
  EXPECT_EQ(blowup_monitor(r, 1.0, *g, cfg), Verdict::blowup_detected);
  r.b.H = 50.0;
  EXPECT_EQ(blowup_monitor(r, 1.0, *g, cfg), Verdict::underresolved);
  r.tail = 0.0;
  EXPECT_EQ(blowup_monitor(r, 1.0, *g, cfg), Verdict::running);
}

TEST(Propagator, VerdictStrings) {
  for (Verdict v : {Verdict::running, Verdict::completed, Verdict::blowup_detected, Verdict::underresolved})
    EXPECT_EQ(verdict_from_string(to_string(v)), v);
  EXPECT_THROW(verdict_from_string("exploded"), Error);
}

TEST(Propagator, PowerFitRecoversExponent) {
  Trajectory tr;
  for (int k = 1; k <= 40; ++k) {
    DiagnosticsRow r;
    r.t = 0.5 * k;
    r.L4 = 3.0 * std::pow(r.t, -0.75);
    tr.rows.push_back(r);
  }
  const PowerFit fit = fit_l4_decay(tr, 2.0, 20.0);
  EXPECT_NEAR(fit.alpha, 0.75, 1e-12);
  EXPECT_NEAR(fit.c, 3.0, 1e-12);
}

TEST(Propagator, InvalidConfigRejected) {
  const GridPtr g = make_grid({16, 16, 16}, {16, 16, 16});
  PropagatorConfig cfg;
  cfg.dt = -1.0;
  EXPECT_THROW(evolve(gaussian_field(g, 1.0, 1.5), {-1, 0}, cfg), Error);
}
