#ifndef MESHRL_IO_HPP_
#define MESHRL_IO_HPP_

// File formats.
//
// Traces: JSON lines. The first line is a header object
//   {"format":"meshrl-trace","version":1,"scenario":..,"services":m,
//    "scalable":k,"sample_period_seconds":..,"agent_step_seconds":..}
// and every following line is one record with keys in this order:
//   t, l[m], d[m], b[m], p[m], c[k], l_c[m], d_mean[m], d_var[m]
// where l and d are the state at t, (b, p, c) the action, and the last three
// the observations at t+1.
//
// Policies: one JSON object with layer sizes, flat parameter arrays, state
// bounds and the hash of the action grid they were trained on.

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "meshrl/agent.hpp"
#include "meshrl/config.hpp"
#include "meshrl/core.hpp"
#include "meshrl/oracle.hpp"

namespace meshrl {

struct TraceHeader {
  int scenario = 0;
  std::size_t services = 0;
  std::size_t scalable = 0;
  double sample_period_seconds = 5;
  double agent_step_seconds = 5;
};

inline void write_traces(std::ostream& os, const TraceHeader& h,
                         const std::vector<TraceRecord>& traces) {
  Json head;
  head["format"] = "meshrl-trace";
  head["version"] = 1;
  head["scenario"] = h.scenario;
  head["services"] = h.services;
  head["scalable"] = h.scalable;
  head["sample_period_seconds"] = h.sample_period_seconds;
  head["agent_step_seconds"] = h.agent_step_seconds;
  os << head.dump() << '\n';
  for (const auto& r : traces) {
    Json j;
    j["t"] = r.t;
    j["l"] = r.state.load;
    j["d"] = r.state.delay;
    j["b"] = r.action.b;
    j["p"] = r.action.p;
    j["c"] = r.action.c;
    std::vector<double> lc, dm, dv;
    for (const auto& o : r.next) {
      lc.push_back(o.carried);
      dm.push_back(o.d_mean);
      dv.push_back(o.d_var);
    }
    j["l_c"] = lc;
    j["d_mean"] = dm;
    j["d_var"] = dv;
    os << j.dump() << '\n';
  }
  if (!os) throw ValidationError("failed writing traces");
}

inline std::vector<TraceRecord> read_traces(std::istream& is, TraceHeader* header = nullptr) {
  std::string line;
  if (!std::getline(is, line)) throw ValidationError("empty trace file");
  TraceHeader h;
  try {
    const Json head = Json::parse(line);
    if (head.value("format", "") != "meshrl-trace" || head.value("version", 0) != 1)
      throw ValidationError("not a meshrl trace file (bad header)");
    h.scenario = head.at("scenario").get<int>();
    h.services = head.at("services").get<std::size_t>();
    h.scalable = head.at("scalable").get<std::size_t>();
    h.sample_period_seconds = head.value("sample_period_seconds", 5.0);
    h.agent_step_seconds = head.value("agent_step_seconds", 5.0);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad trace header: ") + e.what());
  }

  std::vector<TraceRecord> out;
  long lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fail = [&](const std::string& why) {
      throw ValidationError("trace line " + std::to_string(lineno) + ": " + why);
    };
    try {
      const Json j = Json::parse(line);
      TraceRecord r;
      r.t = j.at("t").get<long>();
      r.state.load = j.at("l").get<std::vector<double>>();
      r.state.delay = j.at("d").get<std::vector<double>>();
      r.action.b = j.at("b").get<std::vector<double>>();
      r.action.p = j.at("p").get<std::vector<double>>();
      r.action.c = j.at("c").get<std::vector<int>>();
      const auto lc = j.at("l_c").get<std::vector<double>>();
      const auto dm = j.at("d_mean").get<std::vector<double>>();
      const auto dv = j.at("d_var").get<std::vector<double>>();
      const std::size_t m = h.services;
      if (r.state.load.size() != m || r.state.delay.size() != m || r.action.b.size() != m ||
          r.action.p.size() != m || r.action.c.size() != h.scalable || lc.size() != m ||
          dm.size() != m || dv.size() != m)
        fail("field arity does not match header");
      if (!out.empty() && r.t <= out.back().t) fail("step index not increasing");
      for (std::size_t i = 0; i < m; ++i) {
        if (!(lc[i] >= 0 && lc[i] <= r.state.load[i] + 1e-12)) fail("carried load outside [0, l]");
        r.next.push_back({r.state.load[i], lc[i], dm[i], dv[i]});
      }
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      fail(e.what());
    }
  }
  if (header) *header = h;
  return out;
}

inline void save_traces(const std::string& path, const TraceHeader& h,
                        const std::vector<TraceRecord>& traces) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot write " + path);
  write_traces(os, h, traces);
}

inline std::vector<TraceRecord> load_traces(const std::string& path,
                                            TraceHeader* header = nullptr) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open " + path);
  return read_traces(is, header);
}

inline void save_model(const std::string& path, const ForestModel& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot write " + path);
  save_forest(os, model);
}

inline ForestModel load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open " + path);
  return load_forest(is);
}

// --- policies --------------------------------------------------------------

inline Json policy_to_json(const PolicyNetwork& p) {
  Json j;
  j["format"] = "meshrl-policy";
  j["version"] = 1;
  j["grid_hash"] = p.grid_hash;
  j["bounds"] = {{"load_min", p.bounds.load_min},
                 {"load_max", p.bounds.load_max},
                 {"delay_max", p.bounds.delay_max}};
  j["actor"] = {{"sizes", p.actor.sizes()}, {"params", p.actor.params()}};
  j["critic"] = {{"sizes", p.critic.sizes()}, {"params", p.critic.params()}};
  return j;
}

inline PolicyNetwork policy_from_json(const Json& j) {
  try {
    if (j.value("format", "") != "meshrl-policy" || j.value("version", 0) != 1)
      throw ValidationError("not a meshrl policy (bad header)");
    PolicyNetwork p;
    p.grid_hash = j.at("grid_hash").get<std::uint64_t>();
    p.bounds.load_min = j.at("bounds").at("load_min").get<std::vector<double>>();
    p.bounds.load_max = j.at("bounds").at("load_max").get<std::vector<double>>();
    p.bounds.delay_max = j.at("bounds").at("delay_max").get<std::vector<double>>();
    p.actor = Mlp(j.at("actor").at("sizes").get<std::vector<std::size_t>>(),
                  j.at("actor").at("params").get<std::vector<double>>());
    p.critic = Mlp(j.at("critic").at("sizes").get<std::vector<std::size_t>>(),
                   j.at("critic").at("params").get<std::vector<double>>());
    p.bounds.validate();
    if (p.actor.input_size() != p.bounds.feature_count() ||
        p.critic.input_size() != p.bounds.feature_count() || p.critic.output_size() != 1)
      throw ValidationError("policy layer shapes do not match its bounds");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad policy file: ") + e.what());
  }
}

inline void save_policy(const std::string& path, const PolicyNetwork& p) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot write " + path);
  os << policy_to_json(p).dump() << '\n';
}

inline PolicyNetwork load_policy(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open " + path);
  try {
    return policy_from_json(Json::parse(is));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("policy " + path + " is not valid JSON: " + e.what());
  }
}

// --- learning curves and reports ------------------------------------------

inline void write_curve_csv(std::ostream& os, const std::vector<CurvePoint>& curve) {
  os << "step,anr,ci95\n" << std::setprecision(17);
  for (const auto& c : curve) os << c.step << ',' << c.anr << ',' << c.ci95 << '\n';
}

inline Json action_to_json(const ControlAction& a) {
  return {{"b", a.b}, {"p", a.p}, {"c", a.c}};
}

inline Json report_to_json(const EvaluationReport& r) {
  Json j;
  j["format"] = "meshrl-report";
  j["version"] = 1;
  j["environment"] = to_string(r.environment);
  j["pattern"] = to_string(r.pattern);
  j["scoring"] = to_string(r.scoring);
  j["steps"] = r.steps.size();
  j["anr"] = r.anr;
  j["ci95"] = r.ci95;
  Json rows = Json::array();
  for (const auto& s : r.steps) {
    rows.push_back({{"t", s.t},
                    {"l", s.load},
                    {"l_c", s.carried},
                    {"d", s.delay},
                    {"agent", action_to_json(s.agent_action)},
                    {"agent_reward", s.agent_reward},
                    {"optimal", action_to_json(s.optimal_action)},
                    {"optimal_reward", s.optimal_reward},
                    {"nr", s.nr}});
  }
  j["series"] = rows;
  return j;
}

// One flat CSV per plotted quantity, keyed by step.
inline void write_report_csvs(const std::string& prefix, const EvaluationReport& r) {
  auto open = [&](const std::string& suffix) {
    std::ofstream os(prefix + suffix);
    if (!os) throw ValidationError("cannot write " + prefix + suffix);
    os << std::setprecision(17);
    return os;
  };
  if (r.steps.empty()) return;
  const std::size_t m = r.steps.front().load.size();
  const std::size_t k = r.steps.front().agent_action.c.size();

  auto load = open(".load.csv");
  load << "t";
  for (std::size_t i = 0; i < m; ++i) load << ",l" << i + 1 << ",l_c" << i + 1;
  load << '\n';
  auto nr = open(".nr.csv");
  nr << "t,agent_reward,optimal_reward,nr\n";
  auto delay = open(".delay.csv");
  delay << "t";
  for (std::size_t i = 0; i < m; ++i) delay << ",d" << i + 1;
  delay << '\n';
  auto actions = open(".actions.csv");
  actions << "t";
  for (const char* who : {"agent", "optimal"}) {
    for (std::size_t i = 0; i < m; ++i) actions << ',' << who << "_b" << i + 1;
    for (std::size_t i = 0; i < m; ++i) actions << ',' << who << "_p" << i + 1;
    for (std::size_t j = 0; j < k; ++j) actions << ',' << who << "_c" << j + 1;
  }
  actions << '\n';

  for (const auto& s : r.steps) {
    load << s.t;
    for (std::size_t i = 0; i < m; ++i) load << ',' << s.load[i] << ',' << s.carried[i];
    load << '\n';
    nr << s.t << ',' << s.agent_reward << ',' << s.optimal_reward << ',' << s.nr << '\n';
    delay << s.t;
    for (double d : s.delay) delay << ',' << d;
    delay << '\n';
    actions << s.t;
    for (const ControlAction* a : {&s.agent_action, &s.optimal_action}) {
      for (double b : a->b) actions << ',' << b;
      for (double p : a->p) actions << ',' << p;
      for (int c : a->c) actions << ',' << c;
    }
    actions << '\n';
  }
}

}  // namespace meshrl

#endif  // MESHRL_IO_HPP_
