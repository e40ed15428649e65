#include "async_lab/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <future>
#include <iomanip>
#include <sstream>
#include <thread>

#include "async_lab/errors.hpp"
#include "async_lab/examples.hpp"
#include "async_lab/trace_io.hpp"

namespace async_lab {

using nlohmann::json;

namespace {

std::string digest(const json& j) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void require(bool cond, const std::string& what) {
  if (!cond) throw ScenarioError(what);
}

GraphAlgebra algebra_of(const ScenarioFile& f) {
  require(f.has_graph, "this computation needs a graph section");
  return build_algebra(f.scenario.graph);
}

GainDesign gain_design(ScenarioFile& f) {
  require(f.has_model, "this computation needs a model section");
  if (f.design) return *resolve_gain(f);
  require(f.scenario.gain.size() > 0 && f.explicit_P && f.bound.mu,
          "this computation needs a design section, or gain, P and bound.mu");
  GainDesign d;
  d.K = f.scenario.gain;
  d.P = *f.explicit_P;
  d.mu = *f.bound.mu;
  return d;
}

double omega_of(const ScenarioFile& f) {
  return f.bound.omega.value_or(implied_omega(f.scenario.error_model));
}

// Lag query from explicit bound inputs, or from the relative-state design.
BoundQuery lag_query(ScenarioFile& f, double omega) {
  if (f.bound.mu) {
    BoundQuery q;
    q.mu = *f.bound.mu;
    q.eps = f.bound.eps.value_or(1.0);
    q.omega = omega;
    if (f.has_model) {
      const SpectralConstants sc = spectral_constants(f.scenario.model.A);
      q.lambda_As = sc.lambda_As;
      q.sigma_A = sc.sigma_A;
    }
    if (f.bound.sigma_G) {
      q.sigma_G = *f.bound.sigma_G;
    } else {
      require(f.scenario.coupling.has_value(), "bound.sigma_G or a coupling matrix is required");
      q.sigma_G = max_singular_value(*f.scenario.coupling);
    }
    if (f.bound.sigma_K) {
      q.sigma_K = *f.bound.sigma_K;
    } else {
      if (f.design) resolve_gain(f);
      require(f.scenario.gain.size() > 0, "bound.sigma_K or a gain is required");
      q.sigma_K = max_singular_value(f.scenario.gain);
    }
    return q;
  }
  require(f.design.has_value() && f.has_graph,
          "bound needs bound.mu (explicit query) or a design with a graph");
  const GainDesign d = gain_design(f);
  return relative_state_query(f.scenario.model, d, algebra_of(f), omega);
}

std::string bool_word(bool b) { return b ? "PASS" : "FAIL"; }

GoldenRow near(std::string name, double value, double expected, double tol, std::string note = {}) {
  GoldenRow r{std::move(name), value, expected, tol, false, false, std::move(note)};
  r.passed = std::abs(value - expected) <= tol;
  return r;
}

GoldenRow below(std::string name, double value, double limit, std::string note = {}) {
  GoldenRow r{std::move(name), value, limit, 0.0, true, false, std::move(note)};
  r.passed = value < limit;
  return r;
}

// Runs the scenario for consecutive seeds, at most thread_cap() at a time.
std::vector<Metrics> run_seeds(const ScenarioFile& f, std::uint64_t base, int seeds) {
  std::vector<Metrics> out(seeds);
  const unsigned cap = thread_cap();
  for (int start = 0; start < seeds; start += static_cast<int>(cap)) {
    std::vector<std::future<Metrics>> batch;
    for (int k = start; k < std::min(seeds, start + static_cast<int>(cap)); ++k) {
      batch.push_back(std::async(std::launch::async, [&f, base, k] {
        Scenario s = f.scenario;
        s.seed = base + static_cast<std::uint64_t>(k);
        return compute_metrics(run(s), s);
      }));
    }
    for (std::size_t b = 0; b < batch.size(); ++b) out[start + b] = batch[b].get();
  }
  return out;
}

double min_ratio(const Metrics& m) {
  const double lowest = *std::min_element(m.delta_sq.begin(), m.delta_sq.end());
  return m.delta0_sq > 0.0 ? lowest / m.delta0_sq : 0.0;
}

double trailing_min_tilde(const Metrics& m, double window) {
  double best = std::numeric_limits<double>::infinity();
  const double t_end = m.t.back();
  for (std::size_t j = 0; j < m.t.size(); ++j) {
    if (m.t[j] >= t_end - window && std::isfinite(m.delta_tilde_sq[j])) {
      best = std::min(best, m.delta_tilde_sq[j]);
    }
  }
  return best;
}

}  // namespace

unsigned thread_cap() {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("ASYNC_LAB_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return std::min<unsigned>(hw, static_cast<unsigned>(v));
  }
  return hw;
}

BoundReport compute_bound(ScenarioFile& f, const std::string& theorem) {
  if (theorem == "1") return theorem1_budget(lag_query(f, omega_of(f)));
  if (theorem == "2") {
    const GainDesign d = gain_design(f);
    return theorem2_budget(f.scenario.model, d, algebra_of(f), omega_of(f));
  }
  if (theorem == "3") return theorem3_budget(algebra_of(f));
  if (theorem == "4") {
    const GainDesign d = gain_design(f);
    const GraphAlgebra alg = algebra_of(f);
    const Scenario& s = f.scenario;
    BroadcastErrorInputs in;
    const auto& sched = s.schedule;
    require(f.bound.h || sched, "bound.h (or a schedule) is required");
    require(f.bound.tau || sched, "bound.tau (or a schedule) is required");
    in.h = f.bound.h.value_or(sched ? sched->h_max : 0.0);
    in.tau = f.bound.tau.value_or(sched ? sched->tau_max : 0.0);
    require(f.bound.delta_e.has_value(), "bound.delta_e is required");
    in.delta_e = *f.bound.delta_e;
    const int n = s.graph.vertex_count();
    const int dim = s.model.state_dim();
    require(s.x0.size() == static_cast<Eigen::Index>(n) * dim, "x0 does not match the graph and model");
    in.x0_sum = Vector::Zero(dim);
    for (int i = 0; i < n; ++i) in.x0_sum += s.x0.segment(static_cast<Eigen::Index>(i) * dim, dim);
    Theorem4Fixed fixed{f.bound.alpha, f.bound.gamma, f.bound.eta};
    return theorem4_optimize(s.model, d, alg, in, fixed, f.bound.theta.value_or(1.0 + 1e-9));
  }
  if (theorem == "c1") {
    double level = 0.0;
    if (f.bound.quant_level) {
      level = *f.bound.quant_level;
    } else if (auto* q = std::get_if<LogQuantizer>(&f.scenario.error_model)) {
      level = q->level;
    } else {
      throw ScenarioError("bound.quant_level (or a log_quantizer error model) is required");
    }
    if (!f.bound.mu && f.design && f.has_graph) {
      const GainDesign d = gain_design(f);
      return corollary1_budget(f.scenario.model, d, algebra_of(f), level);
    }
    return corollary1_budget(lag_query(f, quantizer_omega(level)), level);
  }
  if (theorem == "c2") return corollary2_budget(lag_query(f, omega_of(f)));
  if (theorem == "5") {
    BoundQuery q = lag_query(f, omega_of(f));
    q.tau_in = f.bound.tau_in.value_or(f.scenario.input_delay);
    return theorem5_budget(q);
  }
  throw ScenarioError("unknown theorem '" + theorem + "' (expected 1, 2, 3, 4, c1, c2 or 5)");
}

RunOutcome run_scenario(ScenarioFile f, const GlobalOptions& opts,
                        const std::optional<std::filesystem::path>& out_dir) {
  const auto started = std::chrono::steady_clock::now();
  if (opts.seed) f.scenario.seed = *opts.seed;
  resolve_gain(f);
  Scenario& s = f.scenario;
  s.validate();

  json bounds = json::array();
  std::vector<std::string> warnings;
  if (is_edge_mode(s.mode) && f.design && s.schedule) {
    try {
      const BoundReport b = compute_bound(f, "2");
      bounds.push_back({{"theorem", "2"}, {"report", to_json(b)}});
      const double lag = s.schedule->h_max + s.schedule->tau_max + s.input_delay;
      if (!b.feasible) {
        warnings.push_back("no certified sampling budget for this design");
      } else if (!b.unbounded && lag >= b.budget) {
        std::ostringstream os;
        os << "budget exceeded: h + tau = " << lag << " >= certified " << b.budget;
        warnings.push_back(os.str());
      }
    } catch (const Error& e) {
      warnings.push_back(std::string("budget not evaluated: ") + e.what());
    }
  }

  RunOutcome out;
  out.trace = run(s);
  out.metrics = compute_metrics(out.trace, s, opts.tol);
  for (const auto& w : out.metrics.warnings) warnings.push_back(w);

  json files = json::array();
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    const auto csv_path = *out_dir / f.outputs.csv;
    std::ofstream csv(csv_path);
    if (!csv) throw SimulationError("cannot write " + csv_path.string());
    write_trace_csv(csv, out.trace, out.metrics);
    files.push_back(csv_path.string());
    const auto ev_path = *out_dir / f.outputs.events;
    std::ofstream ev(ev_path);
    if (!ev) throw SimulationError("cannot write " + ev_path.string());
    ev << event_log_json(out.trace, out.metrics).dump() << '\n';
    files.push_back(ev_path.string());
    files.push_back((*out_dir / f.outputs.report).string());
  }

  const double runtime =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  const Metrics& m = out.metrics;
  json& r = out.report;
  r["name"] = f.name;
  r["scenario_digest"] = digest(to_json(f));
  r["mode"] = mode_name(s.mode);
  r["seed"] = s.seed;
  r["horizon"] = s.horizon;
  r["consensus"] = m.consensus;
  r["consensus_tol"] = m.consensus_tol;
  r["delta0_sq"] = m.delta0_sq;
  r["final_delta_sq"] = m.final_delta_sq;
  r["average_drift"] = m.average_drift;
  r["min_update_gap"] = finite_or_null(m.min_update_gap);
  r["events"] = out.trace.events.size();
  r["updates"] = out.trace.holds.size();
  r["snapshots"] = out.trace.times.size();
  r["bounds"] = bounds;
  r["warnings"] = warnings;
  r["runtime_s"] = runtime;
  r["outputs"] = files;

  if (out_dir) {
    const auto rep_path = *out_dir / f.outputs.report;
    std::ofstream rep(rep_path);
    if (!rep) throw SimulationError("cannot write " + rep_path.string());
    rep << r.dump(2) << '\n';
  }
  return out;
}

std::vector<GoldenRow> evaluate_goldens(int example, const GlobalOptions& opts, int seeds) {
  ScenarioFile f = builtin_example(example);
  const std::uint64_t base = opts.seed.value_or(f.scenario.seed);
  std::vector<GoldenRow> rows;
  if (example == 1) {
    const GainDesign d = *resolve_gain(f);
    rows.push_back(near("K[1]", d.K(0, 0), 0.5626, 1e-3));
    rows.push_back(near("K[2]", d.K(0, 1), 1.0633, 1e-3));
    const BoundReport b = compute_bound(f, "c1");
    rows.push_back(near("h+tau budget (log quantizer 1.1)", b.budget, 0.017, 0.002));
    const auto ms = run_seeds(f, base, seeds);
    for (int k = 0; k < seeds; ++k) {
      rows.push_back(below("min delta_sq/delta0_sq, seed " + std::to_string(base + k),
                           min_ratio(ms[k]), 1e-6));
    }
  } else if (example == 2) {
    const BoundReport b = compute_bound(f, "3");
    rows.push_back(near("h+tau budget", b.budget, 0.0691, 1e-3));
    rows.push_back(near("gamma*", b.details.at("gamma_star"), 2.618034, 1e-4));
    rows.push_back(near("inner objective", b.details.at("objective"), 0.145898, 1e-5));
    rows.push_back(near("2/lambda_n", b.details.at("synchronous_limit"), 0.5528, 1e-4));
    const auto ms = run_seeds(f, base, seeds);
    for (int k = 0; k < seeds; ++k) {
      rows.push_back(below("min delta_sq/delta0_sq, seed " + std::to_string(base + k),
                           min_ratio(ms[k]), 1e-6));
    }
  } else if (example == 3) {
    const BoundReport b = compute_bound(f, "4");
    rows.push_back(near("Delta(h)", b.details.at("delta"), 0.2894, 1e-3));
    std::ostringstream note;
    note << "beta = " << b.witness.beta;
    rows.push_back(near("consensus error bound", b.budget, 0.4535, 1e-2, note.str()));
    resolve_gain(f);
    const auto ms = run_seeds(f, base, seeds);
    for (int k = 0; k < seeds; ++k) {
      rows.push_back(below("trailing min delta~_sq, seed " + std::to_string(base + k),
                           trailing_min_tilde(ms[k], 1.0), b.budget));
    }
  } else {
    throw ParameterError("no built-in example " + std::to_string(example));
  }
  return rows;
}

namespace {

template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ScenarioError& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::invalid;
  } catch (const DesignError& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::invalid;
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::invalid;
  } catch (const PreconditionError& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::invalid;
  } catch (const SetMembershipError& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::invalid;
  } catch (const DimensionError& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::invalid;
  } catch (const InvalidGraphError& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::invalid;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << '\n';
    return exit_code::runtime;
  }
}

}  // namespace

int cmd_design(const std::filesystem::path& file, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    ScenarioFile f = load_scenario(file);
    require(f.has_model, "design needs a model section");
    require(f.design.has_value(), "design needs a design section with lambda and mu");
    const GainDesign d = *resolve_gain(f);
    out << to_json(d).dump(2) << '\n';
    return exit_code::ok;
  });
}

int cmd_bound(const std::filesystem::path& file, const std::string& theorem, std::ostream& out,
              std::ostream& err) {
  return guarded(err, [&] {
    ScenarioFile f = load_scenario(file);
    const BoundReport r = compute_bound(f, theorem);
    json j = to_json(r);
    j["theorem"] = theorem;
    out << j.dump(2) << '\n';
    return r.feasible ? exit_code::ok : exit_code::infeasible;
  });
}

int cmd_run(const std::filesystem::path& file, const std::filesystem::path& out_dir,
            const GlobalOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    ScenarioFile f = load_scenario(file);
    RunOutcome o = run_scenario(std::move(f), opts, out_dir);
    for (const auto& w : o.report["warnings"]) err << "warning: " << w.get<std::string>() << '\n';
    out << o.report.dump(2) << '\n';
    return exit_code::ok;
  });
}

int cmd_reproduce(int example, const GlobalOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const std::vector<GoldenRow> rows = evaluate_goldens(example, opts);
    bool all = true;
    out << "example " << example << '\n';
    for (const GoldenRow& r : rows) {
      all = all && r.passed;
      out << "  " << bool_word(r.passed) << "  " << std::left << std::setw(40) << r.name
          << std::right << std::setprecision(6) << "  value " << std::setw(12) << r.value;
      if (r.below) {
        out << "  limit < " << r.expected;
      } else {
        out << "  expected " << r.expected << " +/- " << r.tol;
      }
      if (!r.note.empty()) out << "  (" << r.note << ")";
      out << '\n';
    }
    out << (all ? "all goldens passed" : "golden comparison FAILED") << '\n';
    return all ? exit_code::ok : exit_code::golden;
  });
}

}  // namespace async_lab
