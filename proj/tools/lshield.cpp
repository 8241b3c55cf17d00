// lshield — experiment driver for the latent shielding toolkit. Talks to the
// core exclusively through the C API in latentshield/latentshield.h.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "latentshield/latentshield.h"

namespace {

// Exit-code contract: 0 ok, 2 config/usage, 3 numeric abort, 4 violation, 1
// anything else.
int exit_code(int status) {
  switch (status) {
    case LS_OK:
      return 0;
    case LS_ERR_CONFIG:
    case LS_ERR_PARSE:
      return 2;
    case LS_ERR_NUMERIC:
      return 3;
    case LS_ERR_VIOLATION:
      return 4;
    default:
      return 1;
  }
}

int fail(int status) {
  std::fprintf(stderr, "error: %s\n", ls_last_error());
  return exit_code(status);
}

struct ConfigHandle {
  ls_config* cfg = nullptr;
  ~ConfigHandle() { ls_config_free(cfg); }
};

// Loads the config file and applies --set overrides plus --threads.
int open_config(ConfigHandle& handle, const std::string& path,
                const std::vector<std::string>& overrides, int threads) {
  handle.cfg = ls_config_load(path.c_str());
  if (handle.cfg == nullptr) return LS_ERR_CONFIG;
  for (const std::string& kv : overrides) {
    const size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error: --set expects key=value, got %s\n", kv.c_str());
      return LS_ERR_CONFIG;
    }
    const std::string key = kv.substr(0, eq);
    const std::string value = kv.substr(eq + 1);
    const int rc = ls_config_set(handle.cfg, key.c_str(), value.c_str());
    if (rc != LS_OK) return rc;
  }
  if (threads > 0) {
    const int rc = ls_config_set(handle.cfg, "threads", std::to_string(threads).c_str());
    if (rc != LS_OK) return rc;
  }
  return LS_OK;
}

std::string default_out_root() {
  const char* env = std::getenv("LATENTSHIELD_OUT");
  return env != nullptr && env[0] != '\0' ? env : "runs";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latent shielding toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir, out_csv, checkpoint, spec, trace_path, alphabet;
  std::vector<std::string> overrides;
  std::vector<uint64_t> seeds;
  uint64_t seed = 0;
  int episodes = -1, threads = 0, context = 3, horizon = 8;
  bool shield_off = false, corrupt = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config,-c", config_path, "experiment config (JSON)")->required();
    cmd->add_option("--set", overrides, "override config values, dotted path: key=value");
    cmd->add_option("--threads", threads, "worker cap; 1 is bit-exact sequential");
  };

  CLI::App* train = app.add_subcommand("train", "run the full training regime");
  add_common(train);
  train->add_option("--seed", seed, "run seed");
  train->add_option("--out", out_dir, "run directory (default $LATENTSHIELD_OUT/run-<seed>)");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval);
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--episodes", episodes, "evaluation episodes (default from config)");
  eval->add_option("--seed", seed, "evaluation seed");
  eval->add_option("--out", out_csv, "evaluation CSV path");
  eval->add_flag("--shield-off", shield_off, "disable the shield at test time");

  CLI::App* compare = app.add_subcommand(
      "compare", "train latent / unshielded / oracle conditions under identical seeds");
  add_common(compare);
  compare->add_option("--seeds", seeds, "run seeds (repeatable)")->required();
  compare->add_option("--out", out_dir, "directory for the condition runs");
  compare->add_option("--csv", out_csv, "comparison CSV path");

  CLI::App* monitor = app.add_subcommand("monitor", "progress a specification over a trace");
  monitor->add_option("--spec", spec, "scLTL specification")->required();
  monitor->add_option("trace", trace_path, "trace file (see README for the format)")->required();
  monitor->add_option("--alphabet", alphabet, "comma-separated admissible propositions");

  CLI::App* render = app.add_subcommand("render", "write environment frames as PPM");
  add_common(render);
  render->add_option("--checkpoint", checkpoint, "decode open-loop predictions from this model");
  render->add_option("--seed", seed, "environment seed");
  render->add_option("--context", context, "observed steps before open-loop prediction");
  render->add_option("--horizon", horizon, "frames to roll out");
  render->add_option("--out", out_dir, "output directory")->required();

  CLI::App* selfcheck = app.add_subcommand("selfcheck", "run the built-in verification suite");
  selfcheck->add_flag("--corrupt-gradient-hook", corrupt,
                      "sabotage a gradient to prove the checker notices");

  CLI11_PARSE(app, argc, argv);

  if (train->parsed()) {
    ConfigHandle handle;
    int rc = open_config(handle, config_path, overrides, threads);
    if (rc != LS_OK) return fail(rc);
    if (out_dir.empty())
      out_dir = default_out_root() + "/run-" + std::to_string(seed);
    rc = ls_train(handle.cfg, seed, out_dir.c_str());
    if (rc != LS_OK) return fail(rc);
    std::printf("run written to %s\n", out_dir.c_str());
    return 0;
  }

  if (eval->parsed()) {
    ConfigHandle handle;
    int rc = open_config(handle, config_path, overrides, threads);
    if (rc != LS_OK) return fail(rc);
    if (out_csv.empty()) out_csv = default_out_root() + "/eval.csv";
    rc = ls_eval(handle.cfg, checkpoint.c_str(), episodes, shield_off ? 0 : 1, seed,
                 out_csv.c_str());
    if (rc != LS_OK) return fail(rc);
    std::printf("evaluation written to %s\n", out_csv.c_str());
    return 0;
  }

  if (compare->parsed()) {
    ConfigHandle handle;
    int rc = open_config(handle, config_path, overrides, threads);
    if (rc != LS_OK) return fail(rc);
    if (out_dir.empty()) out_dir = default_out_root() + "/compare";
    if (out_csv.empty()) out_csv = out_dir + "/comparison.csv";
    rc = ls_compare(handle.cfg, seeds.data(), int(seeds.size()), out_dir.c_str(),
                    out_csv.c_str(), threads > 0 ? threads : 1);
    if (rc != LS_OK) return fail(rc);
    std::printf("comparison written to %s\n", out_csv.c_str());
    return 0;
  }

  if (monitor->parsed()) {
    auto print_step = [](int step, const char* status, void*) {
      std::printf("step %d: %s\n", step, status);
    };
    const int rc = ls_monitor_run_trace(spec.c_str(),
                                        alphabet.empty() ? nullptr : alphabet.c_str(),
                                        trace_path.c_str(), print_step, nullptr);
    if (rc == LS_ERR_VIOLATION) {
      std::printf("violation\n");
      return 4;
    }
    if (rc != LS_OK) return fail(rc);
    return 0;
  }

  if (render->parsed()) {
    ConfigHandle handle;
    int rc = open_config(handle, config_path, overrides, threads);
    if (rc != LS_OK) return fail(rc);
    rc = ls_render(handle.cfg, checkpoint.empty() ? nullptr : checkpoint.c_str(), seed,
                   context, horizon, out_dir.c_str());
    if (rc != LS_OK) return fail(rc);
    std::printf("frames written to %s\n", out_dir.c_str());
    return 0;
  }

  if (selfcheck->parsed()) {
    auto print_check = [](const char* name, int ok, const char* detail, void*) {
      std::printf("%-20s %s  %s\n", name, ok ? "PASS" : "FAIL", detail);
    };
    const int rc =
        ls_selfcheck(corrupt ? LS_SELFCHECK_CORRUPT_GRADIENT : 0, print_check, nullptr);
    if (rc == LS_OK) {
      std::printf("all checks passed\n");
      return 0;
    }
    if (rc == LS_ERR) {
      std::printf("selfcheck failed\n");
      return 1;
    }
    return fail(rc);
  }

  return 2;
}
