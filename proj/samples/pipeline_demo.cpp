// The whole workflow in one process, scaled down so it runs in well under a
// minute: collect traces on the surrogate target, fit the system model,
// train a policy on the learned simulator, then score it on both.
//
//   pipeline_demo [scenario]

#include <cstdio>
#include <cstdlib>
#include <memory>

#include "meshrl/pipeline.hpp"

using namespace meshrl;

int main(int argc, char** argv) {
  const int scenario = argc > 1 ? std::atoi(argv[1]) : 1;
  ScenarioConfig cfg = default_config(scenario);
  cfg.model.tree_count = 40;
  cfg.agent.total_steps = 10240;

  const auto traces = collect(cfg, 6000, cfg.seeds.collect);
  const FitResult fit = fit_model(cfg, traces, cfg.seeds.fit);
  std::printf("scenario %d: %zu traces, held-out d_mean NMAE %.3f / %.3f\n", scenario,
              traces.size(), fit.nmae[0], fit.nmae[1]);

  auto model = std::make_shared<const ForestModel>(fit.model);
  const TrainResult trained = train_policy(cfg, model, cfg.seeds.train);
  for (const auto& p : trained.curve)
    std::printf("  step %6zu  ANR %.3f\n", p.step, p.anr);

  SimEnvironment sim = make_simulator(cfg, model, cfg.evaluation);
  const auto on_sim =
      evaluate_simulator(sim, trained.policy, cfg.eval.sine_steps, cfg.seeds.evaluate);
  const auto on_target = evaluate_surrogate(cfg.surrogate, sim, trained.policy, cfg.evaluation,
                                            cfg.eval.sine_steps, cfg.seeds.evaluate);
  std::printf("sinusoidal load: simulator ANR %.3f, target ANR %.3f\n", on_sim.anr,
              on_target.anr);
  return 0;
}
