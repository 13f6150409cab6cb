#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "dgpe/io.hpp"
#include "oracles.hpp"

using namespace dgpe;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dgpe_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

RunConfig random_config(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(-5.0, 5.0), P(1e-3, 10.0);
  std::uniform_int_distribution<int> I(4, 128), B(0, 1), F(0, 3);
  RunConfig c;
  c.grid.n = {I(rng), I(rng), I(rng)};
  c.grid.L = {P(rng), P(rng), P(rng)};
  c.couplings = {U(rng), U(rng)};
  c.data.family = static_cast<DataFamily>(F(rng));
  c.data.amplitude = U(rng);
  c.data.widths = {P(rng), P(rng), P(rng)};
  c.data.center = {U(rng), U(rng), U(rng)};
  c.data.wavevector = {U(rng), U(rng), U(rng)};
  c.data.lambda = P(rng);
  c.data.mu = U(rng);
  c.data.search = B(rng);
  c.propagator.dt = P(rng) * 1e-3;
  c.propagator.t_end = P(rng);
  c.propagator.diag_stride = I(rng);
  c.propagator.blowup_kinetic_factor = 1.0 + P(rng) * 100;
  c.propagator.tail_threshold = P(rng) * 1e-5;
  c.propagator.adaptive = B(rng);
  c.propagator.safety = P(rng);
  c.propagator.virial_R = P(rng);
  for (int k = 0; k < B(rng) + 1; ++k) c.propagator.snapshot_times.push_back(P(rng));
  c.minimizer.max_iters = I(rng) * 100;
  c.minimizer.grad_tolerance = P(rng) * 1e-9;
  c.minimizer.width = P(rng);
  c.minimizer.anisotropy = U(rng) * 0.1;
  c.classifier.strict_band = P(rng) * 1e-3;
  c.classifier.threshold_band = P(rng) * 1e-6;
  c.classifier.delta = P(rng);
  for (int k = 0; k < I(rng) % 4; ++k) c.sweep.lambda1.push_back(U(rng));
  for (int k = 0; k < I(rng) % 4; ++k) c.sweep.lambda2.push_back(U(rng));
  for (int k = 0; k < I(rng) % 3; ++k) c.sweep.amplitude.push_back(P(rng));
  c.sweep.ground_state = B(rng);
  c.sweep.evolve = B(rng);
  c.out_dir = "out_" + std::to_string(I(rng));
  c.ground_state = B(rng) ? "gs/ground_state.json" : "";
  c.seed = rng();
  return c;
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no dgpe::Error thrown";
  return ErrorKind::numerical_abort;
}

}  // namespace

TEST(Io, RandomConfigsRoundTripExactly) {
  std::mt19937_64 rng(20240611);
  for (int k = 0; k < 100; ++k) {
    const RunConfig c = random_config(rng);
    const RunConfig back = parse_config(serialize(c));
    ASSERT_TRUE(back == c) << serialize(c);
    EXPECT_EQ(serialize(back), serialize(c));
  }
}

TEST(Io, ConfigDefaultsAndShorthand) {
  const RunConfig c = parse_config(R"({"grid": {"n": 32, "L": 16}, "data": {"widths": 2}})");
  EXPECT_EQ(c.grid.n, (Extents{32, 32, 32}));
  EXPECT_EQ(c.grid.L, (Lengths{16, 16, 16}));
  EXPECT_EQ(c.data.widths, (std::array<double, 3>{2, 2, 2}));
  EXPECT_TRUE(c.propagator == PropagatorConfig{});
  EXPECT_EQ(c.couplings, (CouplingParams{-1.0, 0.0}));
}

TEST(Io, SweepAxisRange) {
  const RunConfig c = parse_config(R"({"sweep": {"lambda1": {"from": -2, "to": 0, "count": 5}, "lambda2": 0.5}})");
  ASSERT_EQ(c.sweep.lambda1.size(), 5u);
  EXPECT_DOUBLE_EQ(c.sweep.lambda1[0], -2.0);
  EXPECT_DOUBLE_EQ(c.sweep.lambda1[2], -1.0);
  EXPECT_DOUBLE_EQ(c.sweep.lambda1[4], 0.0);
  EXPECT_EQ(c.sweep.lambda2, std::vector<double>{0.5});
}

TEST(Io, MalformedConfigsAreRejected) {
  EXPECT_EQ(kind_of([] { parse_config("{not json"); }), ErrorKind::invalid_argument);
  EXPECT_EQ(kind_of([] { parse_config(R"({"schema_version": 99})"); }), ErrorKind::invalid_argument);
  EXPECT_EQ(kind_of([] { parse_config(R"({"data": {"family": "sech"}})"); }), ErrorKind::invalid_argument);
  EXPECT_EQ(kind_of([] { load_config("/nonexistent/dgpe/config.json"); }), ErrorKind::missing_input);
}

TEST(Io, SnapshotRoundTripIsBitExact) {
  const GridPtr g = make_grid({12, 10, 8}, {6.0, 5.0, 4.5});
  std::mt19937_64 rng(7);
  const ComplexField f = oracle::random_smooth_field(g, rng, 4);
  const fs::path dir = scratch("snap");
  write_snapshot(dir / "a.dgpe", f, 1.25, {-0.7, 0.3});
  const LoadedSnapshot s = read_snapshot(dir / "a.dgpe");
  EXPECT_EQ(s.header.n, g->n());
  EXPECT_EQ(s.header.L, g->L());
  EXPECT_EQ(s.header.time, 1.25);
  EXPECT_EQ(s.header.cp, (CouplingParams{-0.7, 0.3}));
  ASSERT_EQ(s.field.size(), f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    EXPECT_EQ(std::bit_cast<std::uint64_t>(s.field[i].real()), std::bit_cast<std::uint64_t>(f[i].real()));
    EXPECT_EQ(std::bit_cast<std::uint64_t>(s.field[i].imag()), std::bit_cast<std::uint64_t>(f[i].imag()));
  }
  std::ifstream in(dir / "a.dgpe", std::ios::binary);
  char magic[4];
  in.read(magic, 4);
  EXPECT_EQ(std::string(magic, 4), "DGPE");
  EXPECT_EQ(fs::file_size(dir / "a.dgpe"), snapshot_header_bytes + 16 * f.size());
}

TEST(Io, CorruptSnapshotsAreRejected) {
  const GridPtr g = make_grid({8, 8, 8}, {4, 4, 4});
  std::mt19937_64 rng(3);
  const auto good = encode_snapshot(oracle::random_smooth_field(g, rng), 0.0, {-1, 0});
  auto payload = good;
  payload[snapshot_header_bytes + 100] ^= 0x01;
  EXPECT_EQ(kind_of([&] { decode_snapshot(payload, "p"); }), ErrorKind::invalid_argument);
  auto header = good;
  header[60] ^= 0x10;
  EXPECT_EQ(kind_of([&] { decode_snapshot(header, "h"); }), ErrorKind::invalid_argument);
  auto magic = good;
  magic[0] = 'X';
  EXPECT_EQ(kind_of([&] { decode_snapshot(magic, "m"); }), ErrorKind::invalid_argument);
  auto truncated = good;
  truncated.resize(truncated.size() - 16);
  EXPECT_EQ(kind_of([&] { decode_snapshot(truncated, "t"); }), ErrorKind::invalid_argument);
  EXPECT_EQ(kind_of([] { read_snapshot("/nonexistent/x.dgpe"); }), ErrorKind::missing_input);
}

TEST(Io, DiagnosticsCsvHeaderIsVerbatim) {
  EXPECT_EQ(csv_header(),
            "t,M,H,N,E,G,V,Vprime,Vsecond,L4,L8L4_acc,zR,zRprime,boundary_mass,verdict_flag");
  Trajectory tr;
  DiagnosticsRow r;
  r.t = 0.5;
  r.b = FunctionalBundle::from(1.0, 2.0, -3.0, 4.0, 5.0);
  r.verdict = Verdict::running;
  tr.rows = {r, r};
  const fs::path dir = scratch("csv");
  write_diagnostics_csv(dir / "d.csv", tr);
  std::ifstream in(dir / "d.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, csv_header());
  std::getline(in, line);
  EXPECT_EQ(std::count(line.begin(), line.end(), ','), 14);
  EXPECT_EQ(std::stod(line.substr(0, line.find(','))), 0.5);
  int lines = 1;
  while (std::getline(in, line)) ++lines;
  EXPECT_EQ(lines, 2);
}

TEST(Io, GroundStateRecordRoundTrip) {
  const GridPtr g = make_grid({8, 8, 8}, {4, 4, 4});
  std::mt19937_64 rng(11);
  GroundStateRecord rec;
  rec.phi = oracle::random_smooth_field(g, rng);
  rec.cp = {-1.0, 0.1};
  rec.Copt = 0.04;
  rec.EM = 80.0;
  rec.HM = 240.0;
  rec.negNM = 160.0;
  rec.M = 6.0;
  rec.H = 40.0;
  rec.N = -26.0;
  rec.residual = 1e-5;
  rec.iterations = 123;
  rec.seed = 9;
  const fs::path dir = scratch("gs");
  write_ground_state(dir, rec);
  for (const fs::path& p : {dir, dir / ground_state_summary_name}) {
    const GroundStateRecord back = read_ground_state(p);
    EXPECT_EQ(back.cp, rec.cp);
    EXPECT_EQ(back.EM, rec.EM);
    EXPECT_EQ(back.Copt, rec.Copt);
    EXPECT_EQ(back.N, rec.N);
    EXPECT_NEAR(back.residual, rec.residual, 1e-18);
    EXPECT_EQ(back.iterations, 123);
    EXPECT_EQ(back.seed, 9u);
    for (std::size_t i = 0; i < rec.phi.size(); ++i) EXPECT_EQ(back.phi[i], rec.phi[i]);
  }
  EXPECT_EQ(kind_of([&] { read_ground_state(dir / "missing.json"); }), ErrorKind::missing_input);
  EXPECT_EQ(kind_of([] { read_ground_state(""); }), ErrorKind::missing_input);
}
