#pragma once

#include "checkpoint.hpp"
#include "config.hpp"

namespace ls::runner {

struct RunSummary {
  std::string run_dir;
  real mean_test_reward = 0.0;
  real mean_test_violations = 0.0;
  long total_training_violations = 0;
};

// Executes the full training regime from `exp` under `run_seed`: seed
// episodes, interleaved train/collect cycles with the shield schedule, a
// final shielded evaluation, and writes resolved_config.json, metrics.csv,
// eval.csv and checkpoint.bin into `out_dir`.
RunSummary run_training(const config::Experiment& exp, uint64_t run_seed,
                        const std::string& out_dir);

// Loads a checkpoint and evaluates it; writes the evaluation CSV.
RunSummary run_eval(const config::Experiment& exp, const std::string& checkpoint_path,
                    int episodes, bool shield_on, uint64_t seed, const std::string& out_csv);

// Trains and evaluates the three model-based conditions (latent ABPS,
// unshielded, oracle BPS) under identical seeds and writes a comparison CSV
// with one row per condition. Runs land under `out_dir`.
void run_compare(const config::Experiment& exp, const std::vector<uint64_t>& seeds,
                 const std::string& out_dir, const std::string& out_csv, int threads);

// Environment frames (and, given a checkpoint, open-loop predictions after
// `context` observed steps) written as PPM files into out_dir.
void run_render(const config::Experiment& exp, const std::string& checkpoint_or_empty,
                uint64_t seed, int context, int horizon, const std::string& out_dir);

// Builds an agent shaped for `exp` and loads the checkpoint into it.
trainer::Agent load_agent(const config::Experiment& exp, const std::string& checkpoint_path,
                          uint64_t run_seed);

void save_agent(const trainer::Agent& agent, const std::string& path);

}  // namespace ls::runner
