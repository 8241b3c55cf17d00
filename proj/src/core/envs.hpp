#pragma once

#include <memory>
#include <optional>

#include "scltl.hpp"
#include "tensor.hpp"

namespace ls::envs {

// Discrete environments use `idx`, continuous ones `value`.
struct Action {
  int idx = 0;
  real value = 0.0;
};

struct StepResult {
  num::Tensor observation;  // [3,s,s] pixels in [0,1] for VGW, [2] for CD
  real reward = 0.0;
  scltl::Valuation valuation;
  bool done = false;
};

// Step without rendering; what lookahead simulation needs.
struct LiteStep {
  real reward = 0.0;
  scltl::Valuation valuation;
  bool done = false;
};

// ---------------------------------------------------------------------------
// Visual Grid World
// ---------------------------------------------------------------------------

enum class VgwAction : int { Up = 0, Down = 1, Left = 2, Right = 3, Stay = 4 };

inline constexpr int kVgwActions = 5;
inline constexpr real kVgwTargetReward = 100.0;
inline constexpr real kVgwUnsafeReward = -40.0;
inline constexpr real kVgwNoMoveReward = -10.0;
inline constexpr real kVgwStepReward = -1.0;

inline const char* kPropRed = "agent_in_red_square";
inline const char* kPropFell = "agent_fallen_off_cliff";
inline const char* kPropEnded = "episode_ended";

enum class VgwMode { Fixed, Procedural };

struct GridWorldConfig {
  int width = 8;
  int height = 8;
  VgwMode mode = VgwMode::Fixed;
  int unsafe_cells = 6;
  uint64_t layout_seed = 0;  // fixed mode; 0 selects the built-in 8x8 layout
  int render_size = 16;      // pixels per side; 64 is full fidelity
  int episode_length = 500;
};

struct GridWorldState {
  GridWorldConfig cfg;
  std::vector<uint8_t> unsafe;  // width*height mask
  int agent_x = 0, agent_y = 0;
  int target_x = 0, target_y = 0;
  int step_count = 0;
  bool done = false;
  Rng rng;

  bool is_unsafe(int x, int y) const { return unsafe[size_t(y) * cfg.width + x] != 0; }
};

GridWorldState vgw_reset(const GridWorldConfig& cfg, uint64_t seed);
LiteStep vgw_step_lite(GridWorldState& s, VgwAction a);
StepResult vgw_step(GridWorldState& s, VgwAction a);
num::Tensor render_vgw(const GridWorldState& s);
std::pair<GridWorldState, StepResult> clone_and_simulate(const GridWorldState& s, VgwAction a);

// ---------------------------------------------------------------------------
// Cliff Driver
// ---------------------------------------------------------------------------

inline constexpr real kCdFallReward = -5.0;

struct CliffConfig {
  real p_stick = 0.1;
  real start_distance = 10.0;
  int episode_length = 20;
};

struct CliffState {
  CliffConfig cfg;
  real x = 10.0;            // distance to the cliff edge
  real v = 0.0;             // speed, lower-bounded at 0
  real prev_action = 0.0;   // a_{t-1}; 0 before the first step
  bool last_stuck = false;  // whether the most recent step ignored the input
  int step_count = 0;
  bool done = false;
  Rng rng;
};

CliffState cd_reset(const CliffConfig& cfg, uint64_t seed);
LiteStep cd_step_lite(CliffState& s, real action);
StepResult cd_step(CliffState& s, real action);
std::pair<CliffState, StepResult> clone_and_simulate(const CliffState& s, real action);

// ---------------------------------------------------------------------------
// Polymorphic wrapper used by the trainer, shields and CLI.
// ---------------------------------------------------------------------------

class Environment {
 public:
  virtual ~Environment() = default;

  virtual num::Tensor reset(uint64_t seed) = 0;
  virtual StepResult step(const Action& a) = 0;       // throws if the episode is done
  virtual LiteStep step_lite(const Action& a) = 0;    // no rendering
  virtual bool done() const = 0;

  virtual bool discrete() const = 0;
  virtual int n_actions() const = 0;                  // discrete only
  virtual int action_dim() const = 0;                 // model encoding width
  virtual std::vector<int> obs_shape() const = 0;

  virtual scltl::Formula safety_spec() const = 0;
  virtual std::vector<std::string> alphabet() const = 0;

  // State snapshots for exact-lookahead shielding. `reseed_stream` replaces
  // the live rng so stochastic branches can be re-simulated under distinct,
  // deterministically derived draws.
  virtual std::shared_ptr<const void> save_state() const = 0;
  virtual void load_state(const std::shared_ptr<const void>& snapshot) = 0;
  virtual void reseed_stream(uint64_t key) = 0;

  num::Tensor encode_action(const Action& a) const {
    num::Tensor t({action_dim()});
    if (discrete())
      t.at(a.idx) = 1.0;
    else
      t.at(0) = a.value;
    return t;
  }
};

class GridWorldEnv final : public Environment {
 public:
  explicit GridWorldEnv(GridWorldConfig cfg) : cfg_(cfg) { state_.done = true; }

  num::Tensor reset(uint64_t seed) override {
    state_ = vgw_reset(cfg_, seed);
    return render_vgw(state_);
  }
  StepResult step(const Action& a) override { return vgw_step(state_, VgwAction(a.idx)); }
  LiteStep step_lite(const Action& a) override { return vgw_step_lite(state_, VgwAction(a.idx)); }
  bool done() const override { return state_.done; }

  bool discrete() const override { return true; }
  int n_actions() const override { return kVgwActions; }
  int action_dim() const override { return kVgwActions; }
  std::vector<int> obs_shape() const override {
    return {3, cfg_.render_size, cfg_.render_size};
  }

  scltl::Formula safety_spec() const override {
    return scltl::Formula::until(scltl::Formula::not_atom(kPropRed),
                                 scltl::Formula::atom(kPropEnded));
  }
  std::vector<std::string> alphabet() const override { return {kPropRed, kPropEnded}; }

  std::shared_ptr<const void> save_state() const override {
    return std::make_shared<GridWorldState>(state_);
  }
  void load_state(const std::shared_ptr<const void>& snap) override {
    state_ = *static_cast<const GridWorldState*>(snap.get());
  }
  void reseed_stream(uint64_t key) override { state_.rng = Rng(key); }

  const GridWorldState& state() const { return state_; }
  const GridWorldConfig& config() const { return cfg_; }

 private:
  GridWorldConfig cfg_;
  GridWorldState state_;
};

class CliffEnv final : public Environment {
 public:
  explicit CliffEnv(CliffConfig cfg) : cfg_(cfg) { state_.done = true; }

  num::Tensor reset(uint64_t seed) override {
    state_ = cd_reset(cfg_, seed);
    num::Tensor obs({2});
    obs.at(0) = state_.x;
    obs.at(1) = state_.v;
    return obs;
  }
  StepResult step(const Action& a) override { return cd_step(state_, a.value); }
  LiteStep step_lite(const Action& a) override { return cd_step_lite(state_, a.value); }
  bool done() const override { return state_.done; }

  bool discrete() const override { return false; }
  int n_actions() const override { return 0; }
  int action_dim() const override { return 1; }
  std::vector<int> obs_shape() const override { return {2}; }

  scltl::Formula safety_spec() const override {
    return scltl::Formula::until(scltl::Formula::not_atom(kPropFell),
                                 scltl::Formula::atom(kPropEnded));
  }
  std::vector<std::string> alphabet() const override { return {kPropFell, kPropEnded}; }

  std::shared_ptr<const void> save_state() const override {
    return std::make_shared<CliffState>(state_);
  }
  void load_state(const std::shared_ptr<const void>& snap) override {
    state_ = *static_cast<const CliffState*>(snap.get());
  }
  void reseed_stream(uint64_t key) override { state_.rng = Rng(key); }

  const CliffState& state() const { return state_; }
  const CliffConfig& config() const { return cfg_; }

 private:
  CliffConfig cfg_;
  CliffState state_;
};

// Binary PPM (P6) with 8-bit channels; pixels clamped to [0,1].
void write_ppm(const std::string& path, const num::Tensor& image);

}  // namespace ls::envs
