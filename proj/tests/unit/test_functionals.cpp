#include <gtest/gtest.h>

#include <random>

#include "dgpe/functionals.hpp"
#include "oracles.hpp"

using namespace dgpe;

namespace {

ComplexField iso_gaussian(const GridPtr& g, double A, double s) {
  ComplexField f(g);
  for_each_point(*g, [&](std::size_t i, double x, double y, double z) {
    f[i] = A * std::exp(-(x * x + y * y + z * z) / (2 * s * s));
  });
  return f;
}

}  // namespace

TEST(Functionals, GaussianClosedForms) {
  const GridPtr g = make_grid({64, 64, 64}, {24, 24, 24});
  const oracle::GaussianForms ref{1.3, 1.2};
  const ComplexField f = iso_gaussian(g, ref.A, ref.s);
  const FunctionalBundle b = evaluate(f, {-0.7, 0.0});
  EXPECT_NEAR(b.M / ref.M(), 1.0, 1e-12);
  EXPECT_NEAR(b.H / ref.H(), 1.0, 1e-10);
  EXPECT_NEAR(b.V / ref.V(), 1.0, 1e-10);
  EXPECT_NEAR(b.N / (-0.7 * ref.Q()), 1.0, 1e-12);
  EXPECT_NEAR(l4_norm(f) / ref.L4(), 1.0, 1e-12);
  EXPECT_NEAR(b.Vp, 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(b.E, 0.5 * (b.H + b.N));
  EXPECT_DOUBLE_EQ(b.G, b.H + 1.5 * b.N);
  EXPECT_DOUBLE_EQ(b.Vpp, 2.0 * b.G);
}

TEST(Functionals, RadialFieldHasNoDipolarEnergy) {
  const GridPtr g = make_grid({64, 64, 64}, {24, 24, 24});
  const ComplexField f = iso_gaussian(g, 1.0, 1.5);
  const double M = mass(f);
  EXPECT_LE(std::abs(potential_N(f, {0.0, 1.0})), 1e-8 * M * M);
}

TEST(Functionals, DirectAndPlancherelAgree) {
  const GridPtr g = make_grid({32, 32, 32}, {20, 20, 20});
  std::mt19937_64 rng(11);
  for (int k = 0; k < 5; ++k) {
    const ComplexField f = oracle::random_smooth_field(g, rng);
    for (CouplingParams cp : {CouplingParams{-1, 0}, CouplingParams{0.3, 1.1}, CouplingParams{-0.5, -0.4}}) {
      const double a = potential_N(f, cp, PotentialMethod::direct);
      const double b = potential_N(f, cp, PotentialMethod::plancherel);
      EXPECT_LE(std::abs(a - b) / (std::abs(b) + 1e-300), 1e-10);
    }
  }
}

TEST(Functionals, DipolarEnergyOfElongatedFieldHasExpectedSign) {
  // Cigar along x3 concentrates |xi| in the x1-x2 plane where m = -4pi/3.
  const GridPtr g = make_grid({48, 48, 48}, {24, 24, 24});
  ComplexField f(g);
  for_each_point(*g, [&](std::size_t i, double x, double y, double z) {
    f[i] = std::exp(-(x * x + y * y) / 2.0 - z * z / 18.0);
  });
  EXPECT_LT(potential_N(f, {0.0, 1.0}), 0.0);
}

TEST(Functionals, ScalingLaws) {
  // u_mu(x) = mu u(mu x): M -> M/mu, H -> mu H, N -> mu N (in 3D). Sampling
  // u_mu on the box shrunk by mu reuses the same samples, so the discrete
  // identities hold to roundoff, dipolar term included.
  const GridPtr g = make_grid({48, 48, 48}, {24, 24, 24});
  const CouplingParams cp{-1.0, 0.4};
  ComplexField f(g);
  for_each_point(*g, [&](std::size_t i, double x, double y, double z) {
    f[i] = std::exp(-(x * x) / 2.0 - (y * y) / 3.0 - (z * z) / 5.0);
  });
  for (double mu : {0.8, 1.25, 2.0}) {
    ComplexField h = f;
    h.rebind(g->scaled(1.0 / mu));
    h *= mu;
    const FunctionalBundle a = evaluate(f, cp), b = evaluate(h, cp);
    EXPECT_NEAR(b.M * mu / a.M, 1.0, 1e-12);
    EXPECT_NEAR(b.H / (mu * a.H), 1.0, 1e-12);
    EXPECT_NEAR(b.N / (mu * a.N), 1.0, 1e-12);
    EXPECT_NEAR(weinstein(f, cp) / weinstein(h, cp), 1.0, 1e-12);
  }
}

TEST(Functionals, DipolarBoxErrorIsSmall) {
  // Resampling on a fixed box sees the periodic images of the dipolar kernel.
  const GridPtr g = make_grid({64, 64, 64}, {24, 24, 24});
  const CouplingParams cp{-1.0, 0.4};
  ComplexField f(g), h(g);
  const double mu = 1.25;
  for_each_point(*g, [&](std::size_t i, double x, double y, double z) {
    auto u = [](double a, double b, double c) { return std::exp(-(a * a) / 2.0 - (b * b) / 3.0 - (c * c) / 5.0); };
    f[i] = u(x, y, z);
    h[i] = mu * u(mu * x, mu * y, mu * z);
  });
  EXPECT_NEAR(potential_N(h, cp) / (mu * potential_N(f, cp)), 1.0, 1e-4);
  EXPECT_NEAR(potential_N(h, {-1, 0}) / (mu * potential_N(f, {-1, 0})), 1.0, 1e-8);
}

TEST(Functionals, VariancePrimeOfChirpedGaussian) {
  // u = e^{i mu |x|^2} v with v real: V' = 4 mu |x v|^2.
  const GridPtr g = make_grid({64, 64, 64}, {24, 24, 24});
  const double mu = 0.05;
  ComplexField v = iso_gaussian(g, 1.0, 1.5), u(g);
  for_each_point(*g, [&](std::size_t i, double x, double y, double z) {
    u[i] = v[i] * std::polar(1.0, mu * (x * x + y * y + z * z));
  });
  EXPECT_NEAR(variance_Vprime(u) / (4 * mu * variance_V(v)), 1.0, 1e-8);
  EXPECT_NEAR(kinetic(u) - kinetic(v), 4 * mu * mu * variance_V(v), 1e-8 * kinetic(v));
}

TEST(Functionals, BoundaryMassAndTail) {
  const GridPtr g = make_grid({32, 32, 32}, {12, 12, 12});
  const ComplexField f = iso_gaussian(g, 1.0, 1.2);
  EXPECT_LT(boundary_mass(f), 1e-6 * mass(f));
  EXPECT_LT(spectral_tail_fraction(fft_forward(f)), 1e-10);
  ComplexField noisy = f;
  noisy[g->index(3, 5, 7)] += 1.0;
  EXPECT_GT(spectral_tail_fraction(fft_forward(noisy)), 1e-4);
}

TEST(Functionals, LocalizedVirialMatchesVarianceInsideCore) {
  // For a field supported well inside |x| < R, z = V and z' = V'.
  const GridPtr g = make_grid({64, 64, 64}, {32, 32, 32});
  ComplexField u(g);
  for_each_point(*g, [&](std::size_t i, double x, double y, double z) {
    u[i] = std::exp(-(x * x + y * y + z * z) / 2.0) * std::polar(1.0, 0.1 * (x * x + y * y + z * z));
  });
  const LocalizedVirial lv = localized_virial(u, {-1, 0}, 15.0);
  EXPECT_NEAR(lv.z / variance_V(u), 1.0, 1e-10);
  EXPECT_NEAR(lv.zprime / variance_Vprime(u), 1.0, 1e-8);
}

TEST(Functionals, WarningHandlerIsReplaceable) {
  std::string seen;
  auto old = set_warning_handler([&](const std::string& m) { seen = m; });
  warn("hello");
  set_warning_handler(old);
  EXPECT_EQ(seen, "hello");
}
