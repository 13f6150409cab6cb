#pragma once

// Run configuration (JSON), field snapshots, diagnostics CSV and result
// documents.
//
// Snapshot layout, all integers and floats little-endian:
//   0  "DGPE"                      4 bytes
//   4  format version              u32
//   8  n1 n2 n3                    3 x u64
//  32  L1 L2 L3                    3 x f64
//  56  time                        f64
//  64  lambda1 lambda2             2 x f64
//  80  payload checksum            u64 (FNV-1a over the payload bytes)
//  88  header checksum             u64 (FNV-1a over bytes 0..87)
//  96  payload                     n1 n2 n3 x (re f64, im f64), x1 fastest

#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "dgpe/datafactory.hpp"

namespace dgpe {

using json = nlohmann::json;

inline constexpr int config_schema_version = 1;
inline constexpr std::uint32_t snapshot_version = 1;
inline constexpr std::size_t snapshot_header_bytes = 96;

// ---------------------------------------------------------------------------
// configuration

struct GridSpec {
  Extents n{64, 64, 64};
  Lengths L{32.0, 32.0, 32.0};

  bool operator==(const GridSpec&) const = default;
  GridPtr make() const { return make_grid(n, L); }
};

/// Serializable subset of MinimizerOptions.
struct MinimizerSettings {
  int max_iters = 20000;
  double grad_tolerance = 1e-8;
  double width = 0.0;
  double anisotropy = 0.0;
  double seed_jitter = 0.15;
  double residual_tolerance = 5e-3;
  double identity_tolerance = 1e-3;

  bool operator==(const MinimizerSettings&) const = default;

  MinimizerOptions options(std::uint64_t seed) const {
    MinimizerOptions o;
    o.max_iters = max_iters;
    o.grad_tolerance = grad_tolerance;
    o.width = width;
    o.anisotropy = anisotropy;
    o.seed_jitter = seed_jitter;
    o.residual_tolerance = residual_tolerance;
    o.identity_tolerance = identity_tolerance;
    o.seed = seed;
    return o;
  }
};

struct ClassifierSettings {
  double strict_band = default_strict_band;
  double threshold_band = default_threshold_band;
  /// delta of the uniform bound G(u(t)) <= -delta; <= 0 derives it from the data.
  double delta = 0.0;

  bool operator==(const ClassifierSettings&) const = default;
};

struct SweepSpec {
  std::vector<double> lambda1;
  std::vector<double> lambda2;
  /// Gaussian amplitudes of the data column; empty keeps data.amplitude.
  std::vector<double> amplitude;
  /// Compute a ground state per unstable row to obtain a predicted verdict.
  bool ground_state = true;
  /// Run the propagator per row to obtain an empirical verdict.
  bool evolve = true;

  bool operator==(const SweepSpec&) const = default;
};

struct RunConfig {
  int schema_version = config_schema_version;
  GridSpec grid;
  CouplingParams couplings{-1.0, 0.0};
  DataSpec data;
  PropagatorConfig propagator;
  MinimizerSettings minimizer;
  ClassifierSettings classifier;
  SweepSpec sweep;
  std::string out_dir = "out";
  /// Ground-state summary written by `ground-state`, read by the other commands.
  std::string ground_state;
  std::uint64_t seed = 0;

  bool operator==(const RunConfig&) const = default;
};

inline void to_json(json& j, const CouplingParams& cp) {
  j = json{{"lambda1", cp.lambda1}, {"lambda2", cp.lambda2}};
}
inline void from_json(const json& j, CouplingParams& cp) {
  cp.lambda1 = j.value("lambda1", cp.lambda1);
  cp.lambda2 = j.value("lambda2", cp.lambda2);
}

inline void to_json(json& j, const GridSpec& g) { j = json{{"n", g.n}, {"L", g.L}}; }
inline void from_json(const json& j, GridSpec& g) {
  if (j.contains("n")) {
    if (j["n"].is_number()) g.n.fill(j["n"].get<int>());
    else g.n = j["n"].get<Extents>();
  }
  if (j.contains("L")) {
    if (j["L"].is_number()) g.L.fill(j["L"].get<double>());
    else g.L = j["L"].get<Lengths>();
  }
}

inline void to_json(json& j, const DataSpec& d) {
  j = json{{"family", to_string(d.family)}, {"amplitude", d.amplitude}, {"widths", d.widths},
           {"center", d.center}, {"wavevector", d.wavevector}, {"lambda", d.lambda},
           {"mu", d.mu}, {"search", d.search}};
}
inline void from_json(const json& j, DataSpec& d) {
  if (j.contains("family")) d.family = data_family_from_string(j["family"].get<std::string>());
  d.amplitude = j.value("amplitude", d.amplitude);
  if (j.contains("widths")) {
    if (j["widths"].is_number()) d.widths.fill(j["widths"].get<double>());
    else d.widths = j["widths"].get<std::array<double, 3>>();
  }
  d.center = j.value("center", d.center);
  d.wavevector = j.value("wavevector", d.wavevector);
  d.lambda = j.value("lambda", d.lambda);
  d.mu = j.value("mu", d.mu);
  d.search = j.value("search", d.search);
}

inline void to_json(json& j, const PropagatorConfig& c) {
  j = json{{"dt", c.dt},
           {"t_end", c.t_end},
           {"diag_stride", c.diag_stride},
           {"blowup_kinetic_factor", c.blowup_kinetic_factor},
           {"resolution_floor", c.resolution_floor},
           {"tail_threshold", c.tail_threshold},
           {"adaptive", c.adaptive},
           {"safety", c.safety},
           {"min_dt_ratio", c.min_dt_ratio},
           {"virial_R", c.virial_R},
           {"envelope_constant", c.envelope_constant},
           {"snapshot_times", c.snapshot_times}};
}
inline void from_json(const json& j, PropagatorConfig& c) {
  c.dt = j.value("dt", c.dt);
  c.t_end = j.value("t_end", c.t_end);
  c.diag_stride = j.value("diag_stride", c.diag_stride);
  c.blowup_kinetic_factor = j.value("blowup_kinetic_factor", c.blowup_kinetic_factor);
  c.resolution_floor = j.value("resolution_floor", c.resolution_floor);
  c.tail_threshold = j.value("tail_threshold", c.tail_threshold);
  c.adaptive = j.value("adaptive", c.adaptive);
  c.safety = j.value("safety", c.safety);
  c.min_dt_ratio = j.value("min_dt_ratio", c.min_dt_ratio);
  c.virial_R = j.value("virial_R", c.virial_R);
  c.envelope_constant = j.value("envelope_constant", c.envelope_constant);
  c.snapshot_times = j.value("snapshot_times", c.snapshot_times);
}

inline void to_json(json& j, const MinimizerSettings& m) {
  j = json{{"max_iters", m.max_iters},       {"grad_tolerance", m.grad_tolerance},
           {"width", m.width},               {"anisotropy", m.anisotropy},
           {"seed_jitter", m.seed_jitter},   {"residual_tolerance", m.residual_tolerance},
           {"identity_tolerance", m.identity_tolerance}};
}
inline void from_json(const json& j, MinimizerSettings& m) {
  m.max_iters = j.value("max_iters", m.max_iters);
  m.grad_tolerance = j.value("grad_tolerance", m.grad_tolerance);
  m.width = j.value("width", m.width);
  m.anisotropy = j.value("anisotropy", m.anisotropy);
  m.seed_jitter = j.value("seed_jitter", m.seed_jitter);
  m.residual_tolerance = j.value("residual_tolerance", m.residual_tolerance);
  m.identity_tolerance = j.value("identity_tolerance", m.identity_tolerance);
}

inline void to_json(json& j, const ClassifierSettings& c) {
  j = json{{"strict_band", c.strict_band}, {"threshold_band", c.threshold_band}, {"delta", c.delta}};
}
inline void from_json(const json& j, ClassifierSettings& c) {
  c.strict_band = j.value("strict_band", c.strict_band);
  c.threshold_band = j.value("threshold_band", c.threshold_band);
  c.delta = j.value("delta", c.delta);
}

inline void to_json(json& j, const SweepSpec& s) {
  j = json{{"lambda1", s.lambda1},
           {"lambda2", s.lambda2},
           {"amplitude", s.amplitude},
           {"ground_state", s.ground_state},
           {"evolve", s.evolve}};
}

/// A sweep axis is either an explicit list or {"from", "to", "count"}.
inline std::vector<double> parse_axis(const json& j) {
  if (j.is_array()) return j.get<std::vector<double>>();
  if (j.is_number()) return {j.get<double>()};
  const double from = j.at("from").get<double>(), to = j.at("to").get<double>();
  const int count = j.at("count").get<int>();
  require(count >= 1, "sweep: count must be at least 1");
  std::vector<double> v(count);
  for (int i = 0; i < count; ++i) v[i] = count == 1 ? from : from + (to - from) * i / (count - 1);
  return v;
}

inline void from_json(const json& j, SweepSpec& s) {
  if (j.contains("lambda1")) s.lambda1 = parse_axis(j["lambda1"]);
  if (j.contains("lambda2")) s.lambda2 = parse_axis(j["lambda2"]);
  if (j.contains("amplitude")) s.amplitude = parse_axis(j["amplitude"]);
  s.ground_state = j.value("ground_state", s.ground_state);
  s.evolve = j.value("evolve", s.evolve);
}

inline void to_json(json& j, const RunConfig& c) {
  j = json{{"schema_version", c.schema_version},
           {"grid", c.grid},
           {"couplings", c.couplings},
           {"data", c.data},
           {"propagator", c.propagator},
           {"minimizer", c.minimizer},
           {"classifier", c.classifier},
           {"sweep", c.sweep},
           {"out_dir", c.out_dir},
           {"ground_state", c.ground_state},
           {"seed", c.seed}};
}
inline void from_json(const json& j, RunConfig& c) {
  c.schema_version = j.value("schema_version", config_schema_version);
  if (c.schema_version != config_schema_version)
    fail(ErrorKind::invalid_argument,
         "config: unsupported schema_version " + std::to_string(c.schema_version));
  if (j.contains("grid")) c.grid = j["grid"].get<GridSpec>();
  if (j.contains("couplings")) c.couplings = j["couplings"].get<CouplingParams>();
  if (j.contains("data")) c.data = j["data"].get<DataSpec>();
  if (j.contains("propagator")) c.propagator = j["propagator"].get<PropagatorConfig>();
  if (j.contains("minimizer")) c.minimizer = j["minimizer"].get<MinimizerSettings>();
  if (j.contains("classifier")) c.classifier = j["classifier"].get<ClassifierSettings>();
  if (j.contains("sweep")) c.sweep = j["sweep"].get<SweepSpec>();
  c.out_dir = j.value("out_dir", c.out_dir);
  c.ground_state = j.value("ground_state", c.ground_state);
  c.seed = j.value("seed", c.seed);
}

inline std::string serialize(const RunConfig& c) { return json(c).dump(2); }

inline RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::invalid_argument, std::string("config: ") + e.what());
  }
  try {
    return j.get<RunConfig>();
  } catch (const json::exception& e) {
    fail(ErrorKind::invalid_argument, std::string("config: ") + e.what());
  }
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::missing_input, "cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::invalid_argument, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorKind::invalid_argument, "write failed for " + path.string());
}

inline RunConfig load_config(const std::filesystem::path& path) { return parse_config(read_text(path)); }

// ---------------------------------------------------------------------------
// snapshots

namespace detail {

inline std::uint64_t fnv1a(const unsigned char* p, std::size_t n,
                           std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline void put_u64(unsigned char* p, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) p[i] = static_cast<unsigned char>(v >> (8 * i));
}
inline std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}
inline void put_f64(unsigned char* p, double v) { put_u64(p, std::bit_cast<std::uint64_t>(v)); }
inline double get_f64(const unsigned char* p) { return std::bit_cast<double>(get_u64(p)); }

}  // namespace detail

struct SnapshotHeader {
  Extents n{};
  Lengths L{};
  double time = 0.0;
  CouplingParams cp;
};

inline std::vector<unsigned char> encode_snapshot(const ComplexField& f, double time, const CouplingParams& cp) {
  require_space(f, Space::physical, "write_snapshot");
  const Grid& g = f.grid();
  std::vector<unsigned char> buf(snapshot_header_bytes + 16 * f.size());
  unsigned char* h = buf.data();
  h[0] = 'D';
  h[1] = 'G';
  h[2] = 'P';
  h[3] = 'E';
  for (int i = 0; i < 4; ++i) h[4 + i] = static_cast<unsigned char>(snapshot_version >> (8 * i));
  for (int a = 0; a < 3; ++a) detail::put_u64(h + 8 + 8 * a, static_cast<std::uint64_t>(g.n()[a]));
  for (int a = 0; a < 3; ++a) detail::put_f64(h + 32 + 8 * a, g.L()[a]);
  detail::put_f64(h + 56, time);
  detail::put_f64(h + 64, cp.lambda1);
  detail::put_f64(h + 72, cp.lambda2);
  unsigned char* p = buf.data() + snapshot_header_bytes;
  for (std::size_t i = 0; i < f.size(); ++i) {
    detail::put_f64(p + 16 * i, f[i].real());
    detail::put_f64(p + 16 * i + 8, f[i].imag());
  }
  detail::put_u64(h + 80, detail::fnv1a(p, 16 * f.size()));
  detail::put_u64(h + 88, detail::fnv1a(h, 88));
  return buf;
}

inline void write_snapshot(const std::filesystem::path& path, const ComplexField& f, double time,
                           const CouplingParams& cp) {
  const auto buf = encode_snapshot(f, time, cp);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::invalid_argument, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) fail(ErrorKind::invalid_argument, "write failed for " + path.string());
}

struct LoadedSnapshot {
  SnapshotHeader header;
  ComplexField field;
};

inline LoadedSnapshot decode_snapshot(const std::vector<unsigned char>& buf, const std::string& what) {
  const auto bad = [&](const std::string& why) {
    fail(ErrorKind::invalid_argument, "snapshot " + what + ": " + why);
  };
  if (buf.size() < snapshot_header_bytes) bad("truncated header");
  const unsigned char* h = buf.data();
  if (h[0] != 'D' || h[1] != 'G' || h[2] != 'P' || h[3] != 'E') bad("bad magic");
  std::uint32_t version = 0;
  for (int i = 0; i < 4; ++i) version |= static_cast<std::uint32_t>(h[4 + i]) << (8 * i);
  if (version != snapshot_version) bad("unsupported version " + std::to_string(version));
  if (detail::get_u64(h + 88) != detail::fnv1a(h, 88)) bad("header checksum mismatch");
  LoadedSnapshot s;
  for (int a = 0; a < 3; ++a) {
    const std::uint64_t n = detail::get_u64(h + 8 + 8 * a);
    if (n == 0 || n > (1u << 16)) bad("implausible grid size");
    s.header.n[a] = static_cast<int>(n);
    s.header.L[a] = detail::get_f64(h + 32 + 8 * a);
  }
  s.header.time = detail::get_f64(h + 56);
  s.header.cp = {detail::get_f64(h + 64), detail::get_f64(h + 72)};
  const std::size_t count = static_cast<std::size_t>(s.header.n[0]) * s.header.n[1] * s.header.n[2];
  if (buf.size() != snapshot_header_bytes + 16 * count) bad("payload length does not match 16 n1 n2 n3");
  const unsigned char* p = buf.data() + snapshot_header_bytes;
  if (detail::get_u64(h + 80) != detail::fnv1a(p, 16 * count)) bad("payload checksum mismatch");
  s.field = ComplexField(make_grid(s.header.n, s.header.L));
  for (std::size_t i = 0; i < count; ++i)
    s.field[i] = cplx(detail::get_f64(p + 16 * i), detail::get_f64(p + 16 * i + 8));
  return s;
}

inline LoadedSnapshot read_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::missing_input, "cannot open snapshot " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_snapshot(buf, path.string());
}

// ---------------------------------------------------------------------------
// diagnostics CSV

inline const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols{"t",  "M",        "H",  "N",       "E",
                                             "G",  "V",        "Vprime", "Vsecond", "L4",
                                             "L8L4_acc", "zR", "zRprime", "boundary_mass",
                                             "verdict_flag"};
  return cols;
}

inline std::string csv_header() {
  std::string s;
  for (const auto& c : csv_columns()) s += (s.empty() ? "" : ",") + c;
  return s;
}

inline std::string csv_row(const DiagnosticsRow& r) {
  char buf[640];
  std::snprintf(buf, sizeof buf,
                "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%s",
                r.t, r.b.M, r.b.H, r.b.N, r.b.E, r.b.G, r.b.V, r.b.Vp, r.b.Vpp, r.L4, r.L8L4_acc, r.zR,
                r.zRprime, r.boundary_mass, to_string(r.verdict));
  return buf;
}

inline void write_diagnostics_csv(const std::filesystem::path& path, const Trajectory& traj) {
  std::string text = csv_header() + "\n";
  for (const auto& r : traj.rows) text += csv_row(r) + "\n";
  write_text(path, text);
}

// ---------------------------------------------------------------------------
// documents

inline json to_document(const Thresholds& th) {
  return json{{"EM", th.EM}, {"HM", th.HM}, {"negNM", th.negNM}, {"Copt", th.Copt}};
}

inline json to_document(const FunctionalBundle& b) {
  return json{{"M", b.M}, {"H", b.H}, {"N", b.N}, {"E", b.E}, {"G", b.G},
              {"V", b.V}, {"Vprime", b.Vp}, {"Vsecond", b.Vpp}};
}

inline json to_document(const ConditionCheck& c) {
  return json{{"condition", c.name}, {"relation", c.relation}, {"lhs", c.lhs}, {"rhs", c.rhs},
              {"margin", c.margin}, {"holds", c.holds}, {"ambiguous", c.ambiguous}};
}

inline json to_document(const TheoremReport& r) {
  json conds = json::array();
  for (const auto& c : r.conditions) conds.push_back(to_document(c));
  json j{{"theorem", r.theorem}, {"prediction", to_string(r.prediction)}, {"conditions", conds}};
  if (!r.branch.empty()) j["branch"] = r.branch;
  if (r.any_ambiguous()) j["boundary"] = "boundary/ambiguous";
  if (!r.notes.empty()) j["notes"] = r.notes;
  return j;
}

inline json to_document(const RegimeVerdict& v) {
  return json{{"regime", to_string(v.regime)}, {"cond_GW", v.in_cond_GW}, {"notes", v.notes}};
}

inline json to_document(const TrajectoryVerdict& v) {
  return json{{"scattering_criterion", v.scattering_criterion},
              {"sup_negNM", v.sup_negNM},
              {"blowup_criterion", v.blowup_criterion},
              {"sup_G", v.sup_G},
              {"delta", v.delta},
              {"surrogate", to_string(v.surrogate)},
              {"surrogate_label", v.surrogate_label},
              {"consistent", v.consistent},
              {"samples", v.samples},
              {"sample_spacing", v.sample_spacing},
              {"notes", v.notes}};
}

inline const char* ground_state_snapshot_name = "ground_state.dgpe";
inline const char* ground_state_summary_name = "ground_state.json";

/// Summary document of a ground-state record; the profile goes to a snapshot
/// next to it.
inline json to_document(const GroundStateRecord& rec, const std::string& snapshot) {
  const Grid& g = rec.phi.grid();
  return json{{"couplings", rec.cp},
              {"grid", GridSpec{g.n(), g.L()}},
              {"thresholds", to_document(rec.thresholds())},
              {"Copt", rec.Copt},
              {"W", 1.0 / rec.Copt},
              {"EM", rec.EM},
              {"HM", rec.HM},
              {"negNM", rec.negNM},
              {"M", rec.M},
              {"H", rec.H},
              {"N", rec.N},
              {"relative_residual", rec.residual / std::sqrt(rec.M)},
              {"iterations", rec.iterations},
              {"seed", rec.seed},
              {"snapshot", snapshot}};
}

inline void write_ground_state(const std::filesystem::path& dir, const GroundStateRecord& rec) {
  write_snapshot(dir / ground_state_snapshot_name, rec.phi, 0.0, rec.cp);
  write_text(dir / ground_state_summary_name, to_document(rec, ground_state_snapshot_name).dump(2) + "\n");
}

/// Reads a record from its summary document (or the directory holding it).
/// The profile comes from the snapshot; the constants from the summary.
inline GroundStateRecord read_ground_state(std::filesystem::path path) {
  if (path.empty()) fail(ErrorKind::missing_input, "no ground-state record given");
  if (std::filesystem::is_directory(path)) path /= ground_state_summary_name;
  if (!std::filesystem::exists(path))
    fail(ErrorKind::missing_input, "ground-state record " + path.string() + " does not exist");
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    fail(ErrorKind::missing_input, "ground-state record " + path.string() + ": " + e.what());
  }
  GroundStateRecord rec;
  try {
    rec.cp = j.at("couplings").get<CouplingParams>();
    rec.Copt = j.at("Copt").get<double>();
    rec.EM = j.at("EM").get<double>();
    rec.HM = j.at("HM").get<double>();
    rec.negNM = j.at("negNM").get<double>();
    rec.M = j.at("M").get<double>();
    rec.H = j.at("H").get<double>();
    rec.N = j.at("N").get<double>();
    rec.residual = j.at("relative_residual").get<double>() * std::sqrt(rec.M);
    rec.iterations = j.value("iterations", 0);
    rec.seed = j.value("seed", std::uint64_t{0});
    const std::filesystem::path snap = path.parent_path() / j.at("snapshot").get<std::string>();
    rec.phi = read_snapshot(snap).field;
  } catch (const json::exception& e) {
    fail(ErrorKind::missing_input, "ground-state record " + path.string() + ": " + e.what());
  }
  return rec;
}

}  // namespace dgpe
