#include "async_lab/scenario_io.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "async_lab/errors.hpp"

namespace async_lab {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ScenarioError(where + ": " + what);
}

void require_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) fail(where, "expected an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) fail(where, "unknown key '" + key + "'");
  }
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(where, "not finite");
  return v;
}

std::optional<double> opt_number(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) return std::nullopt;
  return number(j.at(key), where + "." + key);
}

Matrix matrix(const json& j, const std::string& where) {
  if (j.is_number()) return Matrix::Constant(1, 1, number(j, where));
  if (!j.is_array() || j.empty()) fail(where, "expected a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  Eigen::Index cols = -1;
  Matrix m;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[r];
    const std::string rw = where + "[" + std::to_string(r) + "]";
    if (!row.is_array()) fail(rw, "expected an array");
    if (cols < 0) {
      cols = static_cast<Eigen::Index>(row.size());
      if (cols == 0) fail(rw, "empty row");
      m.resize(rows, cols);
    } else if (static_cast<Eigen::Index>(row.size()) != cols) {
      fail(rw, "ragged rows");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = number(row[c], rw + "[" + std::to_string(c) + "]");
    }
  }
  return m;
}

Vector vector_of(const json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array");
  std::vector<double> flat;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string w = where + "[" + std::to_string(i) + "]";
    if (j[i].is_array()) {
      for (std::size_t k = 0; k < j[i].size(); ++k) {
        flat.push_back(number(j[i][k], w + "[" + std::to_string(k) + "]"));
      }
    } else {
      flat.push_back(number(j[i], w));
    }
  }
  return Eigen::Map<Vector>(flat.data(), static_cast<Eigen::Index>(flat.size()));
}

std::vector<double> reals(const json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(number(j[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

InteractionGraph parse_graph(const json& j) {
  require_keys(j, "graph", {"n", "edges", "kind"});
  if (!j.contains("n") || !j.at("n").is_number_integer()) fail("graph.n", "expected an integer");
  const int n = j.at("n").get<int>();
  try {
    if (j.contains("kind")) {
      if (j.contains("edges")) fail("graph", "give either kind or edges, not both");
      const std::string kind = j.at("kind").get<std::string>();
      if (kind == "cycle") return InteractionGraph::cycle(n);
      if (kind == "path") return InteractionGraph::path(n);
      if (kind == "star") return InteractionGraph::star(n);
      if (kind == "complete") return InteractionGraph::complete(n);
      fail("graph.kind", "unknown kind '" + kind + "'");
    }
    std::vector<InteractionGraph::Edge> edges;
    if (j.contains("edges")) {
      const json& e = j.at("edges");
      if (!e.is_array()) fail("graph.edges", "expected an array of pairs");
      for (std::size_t p = 0; p < e.size(); ++p) {
        const std::string w = "graph.edges[" + std::to_string(p) + "]";
        if (!e[p].is_array() || e[p].size() != 2 || !e[p][0].is_number_integer() ||
            !e[p][1].is_number_integer()) {
          fail(w, "expected a pair of vertex indices");
        }
        edges.emplace_back(e[p][0].get<int>(), e[p][1].get<int>());
      }
    }
    return InteractionGraph(n, std::move(edges));
  } catch (const InvalidGraphError& err) {
    fail("graph", err.what());
  } catch (const json::exception& err) {
    fail("graph", err.what());
  }
}

DesignValue design_value(const json& j, const std::string& where) {
  if (j.is_string()) {
    if (j.get<std::string>() != "lambda2") fail(where, "only the string \"lambda2\" is accepted");
    return {0.0, true};
  }
  return {number(j, where), false};
}

json design_value_json(const DesignValue& v) {
  if (v.lambda2) return "lambda2";
  return v.value;
}

std::string trigger_form_name(TriggerForm f) {
  switch (f) {
    case TriggerForm::quadratic: return "quadratic";
    case TriggerForm::norm_relative: return "norm_relative";
    case TriggerForm::capped: return "capped";
  }
  return "quadratic";
}

json bound_inputs_json(const BoundInputs& b) {
  json j = json::object();
  auto put = [&](const char* key, const std::optional<double>& v) {
    if (v) j[key] = *v;
  };
  put("omega", b.omega);
  put("quant_level", b.quant_level);
  put("mu", b.mu);
  put("eps", b.eps);
  put("sigma_G", b.sigma_G);
  put("sigma_K", b.sigma_K);
  put("h", b.h);
  put("tau", b.tau);
  put("tau_in", b.tau_in);
  put("delta_e", b.delta_e);
  put("alpha", b.alpha);
  put("gamma", b.gamma);
  put("eta", b.eta);
  put("theta", b.theta);
  return j;
}

BoundInputs parse_bound_inputs(const json& j) {
  require_keys(j, "bound",
               {"omega", "quant_level", "mu", "eps", "sigma_G", "sigma_K", "h", "tau", "tau_in",
                "delta_e", "alpha", "gamma", "eta", "theta"});
  BoundInputs b;
  b.omega = opt_number(j, "omega", "bound");
  b.quant_level = opt_number(j, "quant_level", "bound");
  b.mu = opt_number(j, "mu", "bound");
  b.eps = opt_number(j, "eps", "bound");
  b.sigma_G = opt_number(j, "sigma_G", "bound");
  b.sigma_K = opt_number(j, "sigma_K", "bound");
  b.h = opt_number(j, "h", "bound");
  b.tau = opt_number(j, "tau", "bound");
  b.tau_in = opt_number(j, "tau_in", "bound");
  b.delta_e = opt_number(j, "delta_e", "bound");
  b.alpha = opt_number(j, "alpha", "bound");
  b.gamma = opt_number(j, "gamma", "bound");
  b.eta = opt_number(j, "eta", "bound");
  b.theta = opt_number(j, "theta", "bound");
  return b;
}

}  // namespace

json to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

ErrorModel parse_error_model(const json& j) {
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string()) {
    fail("error_model", "expected an object with a string 'kind'");
  }
  const std::string kind = j.at("kind").get<std::string>();
  ErrorModel m;
  if (kind == "none") {
    require_keys(j, "error_model", {"kind"});
    m = NoError{};
  } else if (kind == "multiplicative") {
    require_keys(j, "error_model", {"kind", "omega", "adversarial"});
    MultiplicativeError e;
    e.omega = number(j.value("omega", json()), "error_model.omega");
    if (j.contains("adversarial")) {
      if (!j.at("adversarial").is_boolean()) fail("error_model.adversarial", "expected a boolean");
      e.adversarial = j.at("adversarial").get<bool>();
    }
    m = e;
  } else if (kind == "additive") {
    require_keys(j, "error_model", {"kind", "delta_e"});
    m = AdditiveError{number(j.value("delta_e", json()), "error_model.delta_e")};
  } else if (kind == "log_quantizer") {
    require_keys(j, "error_model", {"kind", "level"});
    m = LogQuantizer{number(j.value("level", json()), "error_model.level")};
  } else if (kind == "event_trigger") {
    require_keys(j, "error_model", {"kind", "omega", "dwell", "cap", "form"});
    EventTrigger t;
    t.omega = number(j.value("omega", json()), "error_model.omega");
    t.dwell = number(j.value("dwell", json()), "error_model.dwell");
    t.cap = opt_number(j, "cap", "error_model");
    t.form = t.cap ? TriggerForm::capped : TriggerForm::quadratic;
    if (j.contains("form")) {
      const std::string f = j.at("form").is_string() ? j.at("form").get<std::string>() : "";
      if (f == "quadratic") {
        t.form = TriggerForm::quadratic;
      } else if (f == "norm_relative") {
        t.form = TriggerForm::norm_relative;
      } else if (f == "capped") {
        t.form = TriggerForm::capped;
      } else {
        fail("error_model.form", "expected quadratic, norm_relative or capped");
      }
    }
    m = t;
  } else {
    fail("error_model.kind", "unknown kind '" + kind + "'");
  }
  try {
    validate_error_model(m);
  } catch (const ParameterError& e) {
    fail("error_model", e.what());
  }
  return m;
}

json error_model_json(const ErrorModel& m) {
  json j;
  j["kind"] = error_model_kind(m);
  if (auto* e = std::get_if<MultiplicativeError>(&m)) {
    j["omega"] = e->omega;
    if (e->adversarial) j["adversarial"] = true;
  } else if (auto* a = std::get_if<AdditiveError>(&m)) {
    j["delta_e"] = a->delta_e;
  } else if (auto* q = std::get_if<LogQuantizer>(&m)) {
    j["level"] = q->level;
  } else if (auto* t = std::get_if<EventTrigger>(&m)) {
    j["omega"] = t->omega;
    j["dwell"] = t->dwell;
    if (t->cap) j["cap"] = *t->cap;
    j["form"] = trigger_form_name(t->form);
  }
  return j;
}

ScenarioFile parse_scenario(const json& j) {
  require_keys(j, "scenario",
               {"name", "mode", "model", "graph", "coupling", "gain", "P", "design", "schedule",
                "schedules", "error_model", "saturation", "input_delay", "x0", "horizon", "seed",
                "startup", "grid_points", "bound", "outputs"});
  ScenarioFile f;
  Scenario& s = f.scenario;
  try {
    if (j.contains("name")) f.name = j.at("name").get<std::string>();
    if (j.contains("mode")) s.mode = parse_mode(j.at("mode").get<std::string>());
    if (j.contains("startup")) {
      const std::string st = j.at("startup").get<std::string>();
      if (st == "zero") {
        s.startup = StartupHold::zero;
      } else if (st == "first_sample") {
        s.startup = StartupHold::first_sample;
      } else {
        fail("startup", "expected zero or first_sample");
      }
    }
    if (j.contains("seed")) {
      const json& sd = j.at("seed");
      if (!sd.is_number_integer() || (!sd.is_number_unsigned() && sd.get<std::int64_t>() < 0)) fail("seed", "expected a non-negative integer");
      s.seed = j.at("seed").get<std::uint64_t>();
    }
    if (j.contains("grid_points")) {
      if (!j.at("grid_points").is_number_integer()) fail("grid_points", "expected an integer");
      s.grid_points = j.at("grid_points").get<int>();
    }
  } catch (const json::exception& e) {
    fail("scenario", e.what());
  }

  if (j.contains("model")) {
    require_keys(j.at("model"), "model", {"A", "B"});
    if (!j.at("model").contains("A") || !j.at("model").contains("B")) {
      fail("model", "needs A and B");
    }
    s.model.A = matrix(j.at("model").at("A"), "model.A");
    s.model.B = matrix(j.at("model").at("B"), "model.B");
    try {
      s.model.validate();
    } catch (const DimensionError& e) {
      fail("model", e.what());
    }
    f.has_model = true;
  }
  if (j.contains("graph")) {
    s.graph = parse_graph(j.at("graph"));
    f.has_graph = true;
  }
  if (j.contains("coupling")) s.coupling = matrix(j.at("coupling"), "coupling");

  if (j.contains("gain") && j.contains("design")) fail("scenario", "give either gain or design, not both");
  if (j.contains("gain")) s.gain = matrix(j.at("gain"), "gain");
  if (j.contains("design")) {
    const json& d = j.at("design");
    require_keys(d, "design", {"lambda", "mu"});
    if (!d.contains("lambda") || !d.contains("mu")) fail("design", "needs lambda and mu");
    f.design = DesignSpec{design_value(d.at("lambda"), "design.lambda"),
                          design_value(d.at("mu"), "design.mu")};
  }
  if (j.contains("P")) {
    f.explicit_P = matrix(j.at("P"), "P");
    s.lyapunov_P = f.explicit_P;
  }

  if (j.contains("schedule")) {
    const json& sc = j.at("schedule");
    require_keys(sc, "schedule", {"h_min", "h_max", "tau_max"});
    ScheduleParams p;
    p.h_min = number(sc.value("h_min", json()), "schedule.h_min");
    p.h_max = number(sc.value("h_max", json()), "schedule.h_max");
    p.tau_max = number(sc.value("tau_max", json()), "schedule.tau_max");
    s.schedule = p;
  }
  if (j.contains("schedules")) {
    const json& list = j.at("schedules");
    if (!list.is_array()) fail("schedules", "expected an array");
    for (std::size_t c = 0; c < list.size(); ++c) {
      const std::string w = "schedules[" + std::to_string(c) + "]";
      require_keys(list[c], w, {"instants", "delays"});
      ChannelSchedule ch;
      ch.channel_id = static_cast<int>(c);
      ch.sample_instants = reals(list[c].value("instants", json()), w + ".instants");
      ch.delays = reals(list[c].value("delays", json()), w + ".delays");
      if (ch.sample_instants.size() != ch.delays.size()) fail(w, "instants and delays differ in length");
      s.schedules.push_back(std::move(ch));
    }
  }
  if (j.contains("error_model")) s.error_model = parse_error_model(j.at("error_model"));
  if (j.contains("saturation")) {
    const json& sat = j.at("saturation");
    require_keys(sat, "saturation", {"rho_s"});
    s.saturation = number(sat.value("rho_s", json()), "saturation.rho_s");
  }
  if (j.contains("input_delay")) s.input_delay = number(j.at("input_delay"), "input_delay");
  if (j.contains("x0")) s.x0 = vector_of(j.at("x0"), "x0");
  if (j.contains("horizon")) s.horizon = number(j.at("horizon"), "horizon");
  if (j.contains("bound")) f.bound = parse_bound_inputs(j.at("bound"));
  if (j.contains("outputs")) {
    const json& o = j.at("outputs");
    require_keys(o, "outputs", {"csv", "events", "report"});
    try {
      f.outputs.csv = o.value("csv", f.outputs.csv);
      f.outputs.events = o.value("events", f.outputs.events);
      f.outputs.report = o.value("report", f.outputs.report);
    } catch (const json::exception& e) {
      fail("outputs", e.what());
    }
  }
  return f;
}

ScenarioFile load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ScenarioError(path.string() + ": invalid JSON: " + e.what());
  }
  return parse_scenario(j);
}

json to_json(const ScenarioFile& f) {
  const Scenario& s = f.scenario;
  json j;
  if (!f.name.empty()) j["name"] = f.name;
  j["mode"] = mode_name(s.mode);
  if (f.has_model) j["model"] = {{"A", to_json(s.model.A)}, {"B", to_json(s.model.B)}};
  if (f.has_graph) {
    json edges = json::array();
    for (const auto& [a, b] : s.graph.edges()) edges.push_back({a, b});
    j["graph"] = {{"n", s.graph.vertex_count()}, {"edges", edges}};
  }
  if (s.coupling) j["coupling"] = to_json(*s.coupling);
  if (f.design) {
    j["design"] = {{"lambda", design_value_json(f.design->lambda)},
                   {"mu", design_value_json(f.design->mu)}};
  } else if (s.gain.size() > 0) {
    j["gain"] = to_json(s.gain);
  }
  if (f.explicit_P) j["P"] = to_json(*f.explicit_P);
  if (s.schedule) {
    j["schedule"] = {{"h_min", s.schedule->h_min},
                     {"h_max", s.schedule->h_max},
                     {"tau_max", s.schedule->tau_max}};
  }
  if (!s.schedules.empty()) {
    json list = json::array();
    for (const auto& ch : s.schedules) {
      list.push_back({{"instants", ch.sample_instants}, {"delays", ch.delays}});
    }
    j["schedules"] = list;
  }
  j["error_model"] = error_model_json(s.error_model);
  if (s.saturation) j["saturation"] = {{"rho_s", *s.saturation}};
  j["input_delay"] = s.input_delay;
  if (s.x0.size() > 0) j["x0"] = to_json(s.x0);
  j["horizon"] = s.horizon;
  j["seed"] = s.seed;
  j["startup"] = s.startup == StartupHold::zero ? "zero" : "first_sample";
  j["grid_points"] = s.grid_points;
  const json b = bound_inputs_json(f.bound);
  if (!b.empty()) j["bound"] = b;
  j["outputs"] = {{"csv", f.outputs.csv}, {"events", f.outputs.events}, {"report", f.outputs.report}};
  return j;
}

double resolve(const DesignValue& v, const ScenarioFile& f) {
  if (!v.lambda2) return v.value;
  if (!f.has_graph) throw ScenarioError("design: \"lambda2\" needs a graph section");
  return algebraic_connectivity(build_algebra(f.scenario.graph));
}

std::optional<GainDesign> resolve_gain(ScenarioFile& f) {
  if (!f.design) return std::nullopt;
  if (!f.has_model) throw ScenarioError("design: needs a model section");
  GainDesign d = riccati_design(f.scenario.model, resolve(f.design->lambda, f),
                                resolve(f.design->mu, f));
  f.scenario.gain = d.K;
  if (!f.explicit_P) f.scenario.lyapunov_P = d.P;
  return d;
}

double implied_omega(const ErrorModel& m) {
  if (auto* e = std::get_if<MultiplicativeError>(&m)) return e->omega;
  if (auto* q = std::get_if<LogQuantizer>(&m)) return quantizer_omega(q->level);
  if (auto* t = std::get_if<EventTrigger>(&m)) return t->omega;
  return 0.0;
}

json to_json(const BoundReport& r) {
  json j;
  j["feasible"] = r.feasible;
  j["unbounded"] = r.unbounded;
  j["budget"] = std::isfinite(r.budget) ? json(r.budget) : json(nullptr);
  j["margin"] = std::isfinite(r.margin) ? json(r.margin) : json(nullptr);
  j["witness"] = {{"alpha", r.witness.alpha},
                  {"beta", r.witness.beta},
                  {"gamma", r.witness.gamma},
                  {"eta", r.witness.eta},
                  {"theta", r.witness.theta}};
  j["diagnostics"] = r.diagnostics;
  json details = json::object();
  for (const auto& [k, v] : r.details) details[k] = std::isfinite(v) ? json(v) : json(nullptr);
  j["details"] = details;
  return j;
}

json to_json(const GainDesign& d) {
  return {{"P", to_json(d.P)},
          {"K", to_json(d.K)},
          {"mu", d.mu},
          {"lambda", d.lambda},
          {"residual", d.residual}};
}

}  // namespace async_lab
