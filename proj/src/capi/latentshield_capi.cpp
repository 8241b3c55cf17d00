#include "latentshield/latentshield.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <fstream>

#include "runner.hpp"
#include "selfcheck.hpp"

using namespace ls;

namespace {

thread_local std::string g_last_error;

void set_error(const std::string& msg) { g_last_error = msg; }

// Maps the exception hierarchy onto the status codes; runs `fn` and reports.
template <class Fn>
int guarded(Fn&& fn) {
  try {
    g_last_error.clear();
    fn();
    return LS_OK;
  } catch (const ConfigError& e) {
    set_error(e.what());
    return LS_ERR_CONFIG;
  } catch (const NumericError& e) {
    set_error(e.what());
    return LS_ERR_NUMERIC;
  } catch (const ParseError& e) {
    set_error(e.what());
    return LS_ERR_PARSE;
  } catch (const std::exception& e) {
    set_error(e.what());
    return LS_ERR;
  }
}

std::vector<std::string> split_csv(const char* csv) {
  std::vector<std::string> out;
  if (csv == nullptr) return out;
  const std::string s(csv);
  size_t start = 0;
  while (start <= s.size()) {
    size_t comma = s.find(',', start);
    if (comma == std::string::npos) comma = s.size();
    std::string item = s.substr(start, comma - start);
    const size_t b = item.find_first_not_of(" \t");
    if (b != std::string::npos) {
      const size_t e = item.find_last_not_of(" \t");
      out.push_back(item.substr(b, e - b + 1));
    }
    if (comma == s.size()) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

struct ls_config {
  config::Experiment experiment;
};

struct ls_monitor {
  scltl::Formula spec;
  scltl::Monitor monitor;
  std::vector<std::string> alphabet;
};

extern "C" {

const char* ls_version(void) { return "latentshield 1.0.0"; }

const char* ls_last_error(void) { return g_last_error.c_str(); }

ls_config* ls_config_load(const char* path) {
  ls_config* out = nullptr;
  guarded([&]() {
    check(path != nullptr, "path is null");
    out = new ls_config{config::load_file(path)};
  });
  return out;
}

ls_config* ls_config_parse(const char* json_text) {
  ls_config* out = nullptr;
  guarded([&]() {
    check(json_text != nullptr, "json_text is null");
    out = new ls_config{config::parse_text(json_text)};
  });
  return out;
}

int ls_config_set(ls_config* cfg, const char* dotted_key, const char* json_value) {
  return guarded([&]() {
    check(cfg != nullptr && dotted_key != nullptr && json_value != nullptr,
          "null argument to ls_config_set");
    config::json doc = cfg->experiment.resolved;
    config::set_path(doc, dotted_key, json_value);
    cfg->experiment = config::parse(doc);  // revalidates, including unknown keys
  });
}

char* ls_config_dump(const ls_config* cfg) {
  char* out = nullptr;
  guarded([&]() {
    check(cfg != nullptr, "config is null");
    const std::string text = cfg->experiment.resolved.dump(2);
    out = static_cast<char*>(std::malloc(text.size() + 1));
    check(out != nullptr, "out of memory");
    std::memcpy(out, text.c_str(), text.size() + 1);
  });
  return out;
}

void ls_config_free(ls_config* cfg) { delete cfg; }

void ls_string_free(char* s) { std::free(s); }

int ls_train(const ls_config* cfg, uint64_t seed, const char* out_dir) {
  return guarded([&]() {
    check(cfg != nullptr && out_dir != nullptr, "null argument to ls_train");
    runner::run_training(cfg->experiment, seed, out_dir);
  });
}

int ls_eval(const ls_config* cfg, const char* checkpoint, int episodes, int shield_on,
            uint64_t seed, const char* out_csv) {
  return guarded([&]() {
    check(cfg != nullptr && checkpoint != nullptr && out_csv != nullptr,
          "null argument to ls_eval");
    check(episodes >= 0, "episodes must be >= 0");
    runner::run_eval(cfg->experiment, checkpoint, episodes, shield_on != 0, seed, out_csv);
  });
}

int ls_compare(const ls_config* cfg, const uint64_t* seeds, int n_seeds, const char* out_dir,
               const char* out_csv, int threads) {
  return guarded([&]() {
    check(cfg != nullptr && seeds != nullptr && out_dir != nullptr && out_csv != nullptr,
          "null argument to ls_compare");
    check(n_seeds >= 1, "need at least one seed");
    std::vector<uint64_t> seed_list(seeds, seeds + n_seeds);
    runner::run_compare(cfg->experiment, seed_list, out_dir, out_csv, std::max(1, threads));
  });
}

int ls_render(const ls_config* cfg, const char* checkpoint, uint64_t seed, int context,
              int horizon, const char* out_dir) {
  return guarded([&]() {
    check(cfg != nullptr && out_dir != nullptr, "null argument to ls_render");
    runner::run_render(cfg->experiment, checkpoint == nullptr ? "" : checkpoint, seed, context,
                       horizon, out_dir);
  });
}

ls_monitor* ls_monitor_new(const char* spec, const char* alphabet_csv) {
  ls_monitor* out = nullptr;
  guarded([&]() {
    check(spec != nullptr, "spec is null");
    const std::vector<std::string> alphabet = split_csv(alphabet_csv);
    scltl::Formula f = scltl::parse(spec, alphabet);
    out = new ls_monitor{f, scltl::Monitor(f), alphabet};
  });
  return out;
}

int ls_monitor_step(ls_monitor* m, const char* props_csv) {
  int status = LS_ERR;
  const int rc = guarded([&]() {
    check(m != nullptr, "monitor is null");
    scltl::Valuation v;
    for (const std::string& p : split_csv(props_csv)) {
      if (!m->alphabet.empty() &&
          std::find(m->alphabet.begin(), m->alphabet.end(), p) == m->alphabet.end())
        throw ParseError("unknown proposition '" + p + "'", 0);
      v.set(p);
    }
    m->monitor.step(v);
    switch (m->monitor.status()) {
      case scltl::Status::Safe:
        status = LS_MON_SAFE;
        break;
      case scltl::Status::Unsafe:
        status = LS_MON_UNSAFE;
        break;
      case scltl::Status::Satisfied:
        status = LS_MON_SATISFIED;
        break;
    }
  });
  return rc == LS_OK ? status : rc;
}

int ls_monitor_free(ls_monitor* m) {
  delete m;
  return LS_OK;
}

int ls_monitor_run_trace(const char* spec, const char* alphabet_csv, const char* trace_path,
                         void (*cb)(int step, const char* status, void* user), void* user) {
  bool violated = false;
  const int rc = guarded([&]() {
    check(spec != nullptr && trace_path != nullptr, "null argument to ls_monitor_run_trace");
    std::ifstream in(trace_path);
    if (!in) throw ConfigError(std::string("cannot open trace file: ") + trace_path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    std::vector<std::string> alphabet = split_csv(alphabet_csv);
    scltl::Formula f = scltl::parse(spec, alphabet);
    std::vector<scltl::Valuation> trace = scltl::parse_trace(text, alphabet);
    if (trace.empty()) throw ConfigError("trace file has no steps");

    scltl::Monitor monitor(f);
    int step = 0;
    for (const scltl::Valuation& v : trace) {
      monitor.step(v);
      if (cb != nullptr) cb(step, scltl::to_string(monitor.status()), user);
      step++;
      if (monitor.status() == scltl::Status::Unsafe) {
        violated = true;
        return;
      }
    }
  });
  if (rc != LS_OK) return rc;
  return violated ? LS_ERR_VIOLATION : LS_OK;
}

int ls_selfcheck(int flags,
                 void (*cb)(const char* name, int ok, const char* detail, void* user),
                 void* user) {
  bool all_ok = true;
  const int rc = guarded([&]() {
    selfcheck::Options opt;
    opt.corrupt_gradient = (flags & LS_SELFCHECK_CORRUPT_GRADIENT) != 0;
    for (const selfcheck::CheckResult& r : selfcheck::run(opt)) {
      if (cb != nullptr) cb(r.name.c_str(), r.passed ? 1 : 0, r.detail.c_str(), user);
      all_ok = all_ok && r.passed;
    }
  });
  if (rc != LS_OK) return rc;
  return all_ok ? LS_OK : LS_ERR;
}

}  // extern "C"
