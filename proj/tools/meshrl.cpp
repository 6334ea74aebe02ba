// Command-line driver: collect -> fit-model -> train -> evaluate / oracle -> report.
// `config` prints a scenario's defaults as a starting point.
//
// Exit codes: 0 success, 1 usage, 2 data or validation error, 3 numerical failure.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "meshrl/config.hpp"
#include "meshrl/io.hpp"
#include "meshrl/oracle.hpp"
#include "meshrl/pipeline.hpp"

namespace fs = std::filesystem;
using namespace meshrl;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<long> steps;
  std::string out;
  unsigned workers = 1;
};

void ensure_parent(const std::string& path) {
  const fs::path p = fs::path(path).parent_path();
  if (!p.empty()) fs::create_directories(p);
}

int cmd_collect(const Common& o) {
  const ScenarioConfig cfg = load_config(o.config);
  const long steps = o.steps.value_or(cfg.collect.steps);
  const auto traces = collect(cfg, steps, o.seed.value_or(cfg.seeds.collect));
  const MeshTopology topo = cfg.topology();
  ensure_parent(o.out);
  save_traces(o.out,
              {cfg.scenario, topo.service_count(), topo.scalable_count(),
               cfg.collect.sample_period_seconds, cfg.collect.agent_step_seconds},
              traces);
  std::cout << "collected " << traces.size() << " records from " << steps << " steps -> "
            << o.out << '\n';
  return 0;
}

int cmd_fit(const Common& o, const std::string& traces_path) {
  const ScenarioConfig cfg = load_config(o.config);
  TraceHeader head;
  const auto traces = load_traces(traces_path, &head);
  const MeshTopology topo = cfg.topology();
  if (head.services != topo.service_count() || head.scalable != topo.scalable_count())
    throw ValidationError("trace feature arity does not match the config topology");
  if (head.scenario != cfg.scenario)
    throw ValidationError("traces were collected for scenario " + std::to_string(head.scenario));
  const FitResult fit = fit_model(cfg, traces, o.seed.value_or(cfg.seeds.fit), o.workers);
  ensure_parent(o.out);
  save_model(o.out, fit.model);
  const auto names = target_names(topo.service_count());
  std::cout << "fitted " << fit.model.tree_count() << " trees per target on "
            << fit.train_records << " records; held-out " << fit.held_out_records << '\n';
  for (std::size_t t = 0; t < names.size(); ++t)
    std::printf("nmae %-10s %.4f\n", names[t].c_str(), fit.nmae[t]);
  return 0;
}

int cmd_train(const Common& o, const std::vector<std::string>& configs,
              const std::string& model_path) {
  std::vector<ScenarioConfig> cfgs;
  for (const auto& c : configs) cfgs.push_back(load_config(c));
  auto model = std::make_shared<const ForestModel>(load_model(model_path));
  fs::create_directories(o.out);

  std::vector<std::exception_ptr> errors(cfgs.size());
  std::atomic<std::size_t> next{0};
  std::mutex print;
  auto worker = [&] {
    for (std::size_t k; (k = next++) < cfgs.size();) {
      try {
        ScenarioConfig cfg = cfgs[k];
        if (o.steps) cfg.agent.total_steps = static_cast<std::size_t>(*o.steps);
        const auto res = train_policy(cfg, model, o.seed.value_or(cfg.seeds.train));
        const std::string stem = (fs::path(o.out) / ("scenario" + std::to_string(cfg.scenario))).string();
        save_policy(stem + ".policy.json", res.policy);
        std::ofstream curve(stem + ".curve.csv");
        write_curve_csv(curve, res.curve);
        std::lock_guard lock(print);
        std::cout << "scenario " << cfg.scenario << ": " << res.gradient_steps
                  << " gradient steps";
        if (!res.curve.empty()) std::cout << ", final ANR " << res.curve.back().anr;
        std::cout << " -> " << stem << ".policy.json\n";
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const unsigned n = std::max(1u, std::min<unsigned>(o.workers, static_cast<unsigned>(cfgs.size())));
    for (unsigned w = 0; w < n; ++w) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return 0;
}

int cmd_evaluate(const Common& o, const std::string& model_path, const std::string& policy_path,
                 const std::string& env_name, const std::string& pattern_name,
                 const std::string& scoring_name, bool use_oracle) {
  const ScenarioConfig cfg = load_config(o.config);
  auto model = std::make_shared<const ForestModel>(load_model(model_path));
  const LoadPattern pattern = pattern_name == "random" ? cfg.training : cfg.evaluation;
  const long steps =
      o.steps.value_or(pattern.kind == LoadKind::random ? cfg.eval.random_steps : cfg.eval.sine_steps);
  const std::uint64_t seed = o.seed.value_or(cfg.seeds.evaluate);
  const Scoring scoring = scoring_name == "model" ? Scoring::model : Scoring::ground_truth;

  SimEnvironment sim = make_simulator(cfg, model, pattern);
  PolicyNetwork policy;
  DecisionRule rule;
  if (use_oracle) {
    rule = oracle_rule();
  } else {
    policy = load_policy(policy_path);
    check_policy_grid(policy, cfg.grid, sim.actions());
    rule = greedy_rule(policy);
  }
  const EvaluationReport rep = env_name == "sim"
                                   ? evaluate_simulator(sim, rule, steps, seed)
                                   : evaluate_surrogate(cfg.surrogate, sim, rule, pattern, steps,
                                                        seed, scoring);
  ensure_parent(o.out);
  std::ofstream js(o.out + ".json");
  if (!js) throw ValidationError("cannot write " + o.out + ".json");
  Json j = report_to_json(rep);
  j["scenario"] = cfg.scenario;
  j["policy"] = use_oracle ? "oracle" : policy_path;
  js << j.dump(1) << '\n';
  write_report_csvs(o.out, rep);
  std::printf("%s/%s ANR %.4f +- %.4f over %zu steps\n", to_string(rep.environment),
              to_string(rep.pattern), rep.anr, rep.ci95, rep.steps.size());
  return 0;
}

int cmd_config(int scenario, const std::string& out) {
  const std::string text = to_json(default_config(scenario)).dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
    return 0;
  }
  ensure_parent(out);
  std::ofstream os(out);
  if (!os) throw ValidationError("cannot write " + out);
  os << text;
  return 0;
}

int cmd_report(const std::vector<std::string>& reports, const std::string& out) {
  std::ostringstream table;
  table << "scenario,environment,pattern,scoring,policy,steps,anr,ci95\n";
  std::printf("%-8s %-10s %-10s %-12s %8s %8s\n", "scenario", "env", "pattern", "scoring", "ANR",
              "CI95");
  for (const auto& path : reports) {
    std::ifstream is(path);
    if (!is) throw ValidationError("cannot open " + path);
    Json j;
    try {
      j = Json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(path + " is not valid JSON");
    }
    if (j.value("format", "") != "meshrl-report") throw ValidationError(path + " is not a report");
    const auto env = j.at("environment").get<std::string>();
    const auto pat = j.at("pattern").get<std::string>();
    const auto sc = j.at("scoring").get<std::string>();
    const double anr = j.at("anr").get<double>(), ci = j.at("ci95").get<double>();
    std::printf("%-8d %-10s %-10s %-12s %8.4f %8.4f\n", j.value("scenario", 0), env.c_str(),
                pat.c_str(), sc.c_str(), anr, ci);
    table << j.value("scenario", 0) << ',' << env << ',' << pat << ',' << sc << ','
          << j.value("policy", "") << ',' << j.at("steps").get<std::size_t>() << ','
          << std::setprecision(17) << anr << ',' << ci << '\n';
  }
  if (!out.empty()) {
    ensure_parent(out);
    std::ofstream os(out);
    if (!os) throw ValidationError("cannot write " + out);
    os << table.str();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"meshrl: learn service-mesh control policies on a learned simulator"};
  app.require_subcommand(1);
  Common o;
  std::string traces, model, policy, env = "sim", pattern = "random", scoring = "truth";
  std::vector<std::string> configs, reports;

  auto add_common = [&](CLI::App* c, bool need_config = true) {
    auto* opt = c->add_option("--config", o.config, "scenario config (JSON)")->check(CLI::ExistingFile);
    if (need_config) opt->required();
    c->add_option("--seed", o.seed, "overrides the config seed for this stage");
    c->add_option("--steps", o.steps, "overrides the configured step count")->check(CLI::PositiveNumber);
    c->add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);
  };

  auto* collect_cmd = app.add_subcommand("collect", "run the surrogate target and record traces");
  add_common(collect_cmd);
  collect_cmd->add_option("--out", o.out, "trace file (JSON lines)")->required();

  auto* fit_cmd = app.add_subcommand("fit-model", "fit the system model and report held-out NMAE");
  add_common(fit_cmd);
  fit_cmd->add_option("--traces", traces)->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--out", o.out, "model file")->required();

  auto* train_cmd = app.add_subcommand("train", "train policies on the simulator");
  train_cmd->add_option("--config", configs, "one or more scenario configs")
      ->required()
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--seed", o.seed);
  train_cmd->add_option("--steps", o.steps, "environment steps")->check(CLI::PositiveNumber);
  train_cmd->add_option("--workers", o.workers, "scenarios trained concurrently")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--model", model)->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", o.out, "output directory")->required();

  auto add_eval = [&](CLI::App* c) {
    add_common(c);
    c->add_option("--model", model)->required()->check(CLI::ExistingFile);
    c->add_option("--env", env)->check(CLI::IsMember({"sim", "target"}));
    c->add_option("--pattern", pattern)->check(CLI::IsMember({"random", "sine"}));
    c->add_option("--scoring", scoring, "target-side NR reward source")
        ->check(CLI::IsMember({"truth", "model"}));
    c->add_option("--out", o.out, "report prefix")->required();
  };
  auto* eval_cmd = app.add_subcommand("evaluate", "greedy evaluation of a trained policy");
  add_eval(eval_cmd);
  eval_cmd->add_option("--policy", policy)->required()->check(CLI::ExistingFile);
  auto* oracle_cmd = app.add_subcommand("oracle", "evaluate the brute-force oracle as a policy");
  add_eval(oracle_cmd);

  int scenario = 1;
  auto* config_cmd = app.add_subcommand("config", "print the default config of a scenario");
  config_cmd->add_option("--scenario", scenario)->required()->check(CLI::Range(1, 4));
  config_cmd->add_option("--out", o.out, "write to a file instead of stdout");

  auto* report_cmd = app.add_subcommand("report", "summarize evaluation reports as a table");
  report_cmd->add_option("reports", reports, "report JSON files")->required()->check(CLI::ExistingFile);
  report_cmd->add_option("--out", o.out, "summary CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*collect_cmd) return cmd_collect(o);
    if (*fit_cmd) return cmd_fit(o, traces);
    if (*train_cmd) return cmd_train(o, configs, model);
    if (*eval_cmd) return cmd_evaluate(o, model, policy, env, pattern, scoring, false);
    if (*oracle_cmd) return cmd_evaluate(o, model, policy, env, pattern, scoring, true);
    if (*report_cmd) return cmd_report(reports, o.out);
    if (*config_cmd) return cmd_config(scenario, o.out);
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
