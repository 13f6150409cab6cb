#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "dgpe/io.hpp"

namespace dgpe {

/// Settings shared by every subcommand, after flag and environment overrides.
struct CommandContext {
  RunConfig config;
  std::filesystem::path out;
  int threads = 1;
  bool verbose = false;
  /// Optional initial field for evolve/classify instead of config.data.
  std::string input;
  std::ostream* log = &std::cout;
};

/// --threads wins; otherwise DGPE_THREADS; otherwise 1.
inline int resolve_threads(std::optional<int> flag, const char* env) {
  if (flag) {
    require(*flag >= 1, "--threads must be at least 1");
    return *flag;
  }
  if (env != nullptr && *env != '\0') {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    require(end != env && *end == '\0' && v >= 1, std::string("DGPE_THREADS must be a positive integer, got '") + env + "'");
    return static_cast<int>(v);
  }
  return 1;
}

namespace detail {

inline void require_unstable(const CouplingParams& cp) {
  const RegimeVerdict v = classify_regime(cp);
  if (v.regime != Regime::unstable) {
    std::ostringstream os;
    os << "couplings (" << cp.lambda1 << ", " << cp.lambda2
       << ") lie in the stable regime: N(f) >= 0 for every f, so no ground state exists";
    fail(ErrorKind::domain, os.str());
  }
}

inline std::optional<GroundStateRecord> load_record_if_any(const RunConfig& cfg) {
  if (cfg.ground_state.empty()) return std::nullopt;
  return read_ground_state(cfg.ground_state);
}

inline bool family_needs_record(DataFamily f) {
  return f == DataFamily::scaled_ground_state || f == DataFamily::quadratic_phase;
}

/// Initial field from --input if given, else from the config's data spec.
inline ComplexField initial_field(const CommandContext& ctx, const std::optional<GroundStateRecord>& rec) {
  if (!ctx.input.empty()) return read_snapshot(ctx.input).field;
  const GridPtr grid = ctx.config.grid.make();
  return make_data(ctx.config.data, grid, rec ? &*rec : nullptr);
}

inline double resolved_delta(const ClassifierSettings& cs, const FunctionalBundle& b, const Thresholds& th) {
  if (cs.delta > 0.0) return cs.delta;
  if (b.E * b.M < th.EM && b.H * b.M > th.HM) return blowup_delta(b, th);
  return 0.0;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// theorem reports for one datum

struct Classification {
  RegimeVerdict regime;
  FunctionalBundle bundle;
  std::vector<TheoremReport> reports;
  /// Strongest prediction among the reports, or "global" in the stable regime.
  std::string predicted = "none";
};

inline Classification classify_datum(const FunctionalBundle& b, const Thresholds& th, const CouplingParams& cp,
                                     const ClassifierSettings& cs) {
  Classification c;
  c.regime = classify_regime(cp);
  c.bundle = b;
  const double EM = b.E * b.M;
  if (std::abs(EM - th.EM) <= cs.threshold_band * th.EM) {
    c.reports.push_back(at_threshold_classify(b, th, cp, cs.threshold_band));
  } else if (EM < th.EM) {
    c.reports.push_back(below_threshold_report(b, th, cp, cs.strict_band));
  } else if (b.V > 0.0) {
    c.reports.push_back(above_threshold_scattering_check(b, th, cp, cs.strict_band));
    c.reports.push_back(gao_wang_blowup_check(b, th, cp, cs.strict_band));
  }
  for (const TheoremReport& r : c.reports)
    if (r.prediction != Prediction::none) {
      c.predicted = to_string(r.prediction);
      break;
    }
  if (c.regime.regime == Regime::stable) c.predicted = "global";
  return c;
}

inline json to_document(const Classification& c) {
  json reps = json::array();
  for (const TheoremReport& r : c.reports) reps.push_back(to_document(r));
  return json{{"regime", to_document(c.regime)},
              {"functionals", to_document(c.bundle)},
              {"reports", reps},
              {"predicted", c.predicted}};
}

/// Whether a surrogate label is what the prediction leads one to expect.
/// Returns "yes", "no" or "n/a" (no prediction, or an inconclusive run).
inline std::string agreement(const std::string& predicted, const std::string& empirical) {
  if (predicted == "none" || predicted == "threshold-trichotomy" || empirical == "underresolved" ||
      empirical.empty())
    return "n/a";
  const bool blew = empirical == "blowup_detected";
  if (predicted == "global") return blew ? "no" : "yes";
  if (predicted == "scatter") return blew ? "no" : empirical == "scattering-consistent" ? "yes" : "n/a";
  if (predicted == "blowup") return blew ? "yes" : empirical == "scattering-consistent" ? "no" : "n/a";
  if (predicted == "bloworgrow")
    return blew || empirical == "grow-up-consistent" ? "yes" : empirical == "scattering-consistent" ? "no" : "n/a";
  return "n/a";
}

// ---------------------------------------------------------------------------
// subcommands

inline int cmd_ground_state(const CommandContext& ctx) {
  const RunConfig& cfg = ctx.config;
  detail::require_unstable(cfg.couplings);
  MinimizerOptions opts = cfg.minimizer.options(cfg.seed);
  if (ctx.verbose)
    opts.progress = [&](int it, double logW, double grad, double step) {
      if (it % 50 == 0)
        *ctx.log << "iter " << it << "  W " << std::exp(logW) << "  |grad| " << grad << "  step " << step << '\n';
    };
  const GroundStateRecord rec = compute_ground_state(cfg.grid.make(), cfg.couplings, opts);
  write_ground_state(ctx.out, rec);
  write_text(ctx.out / "config.json", serialize(cfg));
  const Thresholds th = rec.thresholds();
  *ctx.log << "ground state written to " << (ctx.out / ground_state_summary_name).string() << '\n'
           << "  E(phi)M(phi) = " << th.EM << "\n  H(phi)M(phi) = " << th.HM
           << "\n  -N(phi)M(phi) = " << th.negNM << "\n  C_opt = " << th.Copt << '\n';
  return 0;
}

inline int cmd_make_data(const CommandContext& ctx) {
  const RunConfig& cfg = ctx.config;
  const auto rec = detail::load_record_if_any(cfg);
  if (!rec && detail::family_needs_record(cfg.data.family))
    fail(ErrorKind::missing_input, std::string("data family ") + to_string(cfg.data.family) +
                                       " needs a ground-state record (config key ground_state)");
  const ComplexField u = detail::initial_field(ctx, rec);
  write_snapshot(ctx.out / "data.dgpe", u, 0.0, cfg.couplings);
  json doc{{"snapshot", "data.dgpe"}, {"data", cfg.data}, {"functionals", to_document(evaluate(u, cfg.couplings))}};
  write_text(ctx.out / "data.json", doc.dump(2));
  write_text(ctx.out / "config.json", serialize(cfg));
  *ctx.log << "initial data written to " << (ctx.out / "data.dgpe").string() << '\n';
  return 0;
}

inline int cmd_classify(const CommandContext& ctx) {
  const RunConfig& cfg = ctx.config;
  if (cfg.ground_state.empty())
    fail(ErrorKind::missing_input, "classify needs a ground-state record (config key ground_state)");
  const GroundStateRecord rec = read_ground_state(cfg.ground_state);
  const ComplexField u = detail::initial_field(ctx, rec);
  // The thresholds belong to the record's couplings.
  const CouplingParams cp = rec.cp;
  const Classification c = classify_datum(evaluate(u, cp), rec.thresholds(), cp, cfg.classifier);
  json doc = to_document(c);
  if (!(cfg.couplings == rec.cp))
    doc["notes"] = "config couplings differ from the ground-state record; the record's couplings were used";
  doc["thresholds"] = to_document(rec.thresholds());
  write_text(ctx.out / "classify.json", doc.dump(2));
  *ctx.log << "regime: " << to_string(c.regime.regime) << "\npredicted: " << c.predicted << '\n';
  for (const TheoremReport& r : c.reports) {
    *ctx.log << r.theorem << " -> " << to_string(r.prediction);
    if (!r.branch.empty()) *ctx.log << " (" << r.branch << ")";
    *ctx.log << '\n';
    for (const ConditionCheck& k : r.conditions)
      *ctx.log << "  " << (k.holds ? "holds " : "fails ") << k.name << "  margin " << k.margin
               << (k.ambiguous ? "  [boundary/ambiguous]" : "") << '\n';
  }
  return 0;
}

inline int evolve_exit_code(Verdict v) {
  return v == Verdict::underresolved ? exit_code(ErrorKind::numerical_abort) : 0;
}

inline int cmd_evolve(const CommandContext& ctx) {
  const RunConfig& cfg = ctx.config;
  const auto rec = detail::load_record_if_any(cfg);
  const ComplexField u0 = detail::initial_field(ctx, rec);
  const Trajectory traj = evolve(u0, cfg.couplings, cfg.propagator);
  write_diagnostics_csv(ctx.out / "diagnostics.csv", traj);
  json snaps = json::array();
  for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "snapshot_%04zu.dgpe", k);
    write_snapshot(ctx.out / name, traj.snapshots[k].u, traj.snapshots[k].t, cfg.couplings);
    snaps.push_back(json{{"t", traj.snapshots[k].t}, {"file", name}});
  }
  json doc{{"verdict", to_string(traj.verdict)},
           {"steps", traj.steps},
           {"rows", traj.rows.size()},
           {"t_final", traj.rows.back().t},
           {"note", traj.note},
           {"snapshots", snaps}};
  if (rec) {
    const FunctionalBundle b0 = traj.rows.front().b;
    const double delta = detail::resolved_delta(cfg.classifier, b0, rec->thresholds());
    doc["trajectory"] = to_document(trajectory_verdict(traj, rec->thresholds(), delta, u0.grid(), cfg.propagator));
  }
  write_text(ctx.out / "evolve.json", doc.dump(2));
  write_text(ctx.out / "config.json", serialize(cfg));
  *ctx.log << "verdict: " << to_string(traj.verdict) << " at t = " << traj.rows.back().t << " after "
           << traj.steps << " steps\n";
  if (!traj.note.empty()) *ctx.log << "note: " << traj.note << '\n';
  return evolve_exit_code(traj.verdict);
}

// ---------------------------------------------------------------------------
// sweeps

struct SweepRow {
  std::size_t index = 0;
  CouplingParams cp;
  double amplitude = 0.0;
  std::string regime;
  std::string predicted = "none";
  std::string empirical;
  std::string agreement = "n/a";
  std::string status = "ok";
  std::string message;
  int code = 0;
};

inline std::vector<SweepRow> sweep_rows(const RunConfig& cfg) {
  const std::vector<double> l1 = cfg.sweep.lambda1.empty() ? std::vector<double>{cfg.couplings.lambda1} : cfg.sweep.lambda1;
  const std::vector<double> l2 = cfg.sweep.lambda2.empty() ? std::vector<double>{cfg.couplings.lambda2} : cfg.sweep.lambda2;
  const std::vector<double> amp = cfg.sweep.amplitude.empty() ? std::vector<double>{cfg.data.amplitude} : cfg.sweep.amplitude;
  std::vector<SweepRow> rows;
  for (double a : l1)
    for (double b : l2)
      for (double c : amp) {
        SweepRow r;
        r.index = rows.size();
        r.cp = {a, b};
        r.amplitude = c;
        rows.push_back(r);
      }
  return rows;
}

inline std::string sweep_csv_header() {
  return "row,lambda1,lambda2,amplitude,regime,predicted,empirical,agreement,status,message";
}

inline std::string sweep_csv_row(const SweepRow& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,", r.index, r.cp.lambda1, r.cp.lambda2, r.amplitude);
  std::string msg = r.message;
  std::replace(msg.begin(), msg.end(), '"', '\'');
  return buf + r.regime + "," + r.predicted + "," + r.empirical + "," + r.agreement + "," + r.status + ",\"" + msg + "\"";
}

/// Runs `jobs(i)` for i in [0, n) on `threads` workers.
template <class F>
void parallel_for(std::size_t n, int threads, F&& job) {
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) job(i);
  };
  const int extra = std::max(0, std::min<int>(threads, static_cast<int>(n)) - 1);
  std::vector<std::thread> pool;
  for (int t = 0; t < extra; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

inline void run_sweep_row(SweepRow& row, const RunConfig& base, const std::filesystem::path& dir,
                          const std::map<std::pair<double, double>, std::optional<GroundStateRecord>>& records,
                          const std::map<std::pair<double, double>, std::string>& record_errors) {
  RunConfig cfg = base;
  cfg.couplings = row.cp;
  cfg.data.amplitude = row.amplitude;
  cfg.sweep = SweepSpec{};
  std::filesystem::create_directories(dir);
  write_text(dir / "config.json", serialize(cfg));
  const RegimeVerdict regime = classify_regime(row.cp);
  row.regime = to_string(regime.regime);

  const auto key = std::make_pair(row.cp.lambda1, row.cp.lambda2);
  const GroundStateRecord* rec = nullptr;
  if (auto it = records.find(key); it != records.end() && it->second) rec = &*it->second;
  if (auto it = record_errors.find(key); it != record_errors.end()) row.message = "ground state: " + it->second;

  const ComplexField u0 = make_data(cfg.data, cfg.grid.make(), rec);
  const FunctionalBundle b0 = evaluate(u0, row.cp);
  json doc{{"functionals", to_document(b0)}, {"regime", to_document(regime)}};
  if (regime.regime == Regime::stable) {
    row.predicted = "global";
  } else if (rec != nullptr) {
    const Classification c = classify_datum(b0, rec->thresholds(), row.cp, cfg.classifier);
    row.predicted = c.predicted;
    doc["classification"] = to_document(c);
  }
  if (base.sweep.evolve) {
    const Trajectory traj = evolve(u0, row.cp, cfg.propagator);
    write_diagnostics_csv(dir / "diagnostics.csv", traj);
    doc["verdict"] = to_string(traj.verdict);
    if (rec != nullptr) {
      const double delta = detail::resolved_delta(cfg.classifier, b0, rec->thresholds());
      const TrajectoryVerdict tv = trajectory_verdict(traj, rec->thresholds(), delta, u0.grid(), cfg.propagator);
      row.empirical = tv.surrogate_label;
      doc["trajectory"] = to_document(tv);
    } else if (traj.verdict == Verdict::blowup_detected || traj.verdict == Verdict::underresolved) {
      row.empirical = to_string(traj.verdict);
    } else {
      row.empirical = scattering_consistent(traj) ? "scattering-consistent" : "unlabeled";
    }
    row.agreement = agreement(row.predicted, row.empirical);
  }
  write_text(dir / "row.json", doc.dump(2));
}

inline int cmd_sweep(const CommandContext& ctx) {
  const RunConfig& cfg = ctx.config;
  std::vector<SweepRow> rows = sweep_rows(cfg);

  // Thresholds depend only on the couplings, so each distinct unstable pair is minimized once.
  std::map<std::pair<double, double>, std::optional<GroundStateRecord>> records;
  std::map<std::pair<double, double>, std::string> record_errors;
  if (cfg.sweep.ground_state) {
    std::vector<CouplingParams> pairs;
    for (const SweepRow& r : rows) {
      const auto key = std::make_pair(r.cp.lambda1, r.cp.lambda2);
      if (records.count(key) || classify_regime(r.cp).regime != Regime::unstable) continue;
      records[key] = std::nullopt;
      pairs.push_back(r.cp);
    }
    std::vector<std::optional<GroundStateRecord>> found(pairs.size());
    std::vector<std::string> errors(pairs.size());
    parallel_for(pairs.size(), ctx.threads, [&](std::size_t i) {
      try {
        found[i] = compute_ground_state(cfg.grid.make(), pairs[i], cfg.minimizer.options(cfg.seed));
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    });
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto key = std::make_pair(pairs[i].lambda1, pairs[i].lambda2);
      records[key] = found[i];
      if (!errors[i].empty()) record_errors[key] = errors[i];
    }
  }

  std::mutex log_mutex;
  parallel_for(rows.size(), ctx.threads, [&](std::size_t i) {
    SweepRow& row = rows[i];
    char name[32];
    std::snprintf(name, sizeof name, "row_%04zu", i);
    try {
      run_sweep_row(row, cfg, ctx.out / "rows" / name, records, record_errors);
    } catch (const Error& e) {
      row.status = "error";
      row.message = e.what();
      row.code = exit_code(e.kind());
    } catch (const std::exception& e) {
      row.status = "error";
      row.message = e.what();
      row.code = 1;
    }
    if (ctx.verbose) {
      std::lock_guard<std::mutex> lock(log_mutex);
      *ctx.log << name << ": " << row.regime << " predicted " << row.predicted << " empirical "
               << (row.empirical.empty() ? "-" : row.empirical) << " [" << row.status << "]\n";
    }
  });

  std::string table = sweep_csv_header() + "\n";
  for (const SweepRow& r : rows) table += sweep_csv_row(r) + "\n";
  write_text(ctx.out / "verdicts.csv", table);
  write_text(ctx.out / "config.json", serialize(cfg));

  const auto ok = std::count_if(rows.begin(), rows.end(), [](const SweepRow& r) { return r.status == "ok"; });
  *ctx.log << rows.size() << " rows, " << ok << " succeeded; table at " << (ctx.out / "verdicts.csv").string() << '\n';
  if (ok > 0 || rows.empty()) return 0;
  return rows.front().code != 0 ? rows.front().code : 1;
}

}  // namespace dgpe
