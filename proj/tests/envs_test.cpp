#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "envs.hpp"

using namespace ls;
using namespace ls::envs;

namespace {

GridWorldConfig small_cfg() {
  GridWorldConfig cfg;
  cfg.width = cfg.height = 8;
  cfg.mode = VgwMode::Fixed;
  cfg.unsafe_cells = 6;
  cfg.render_size = 16;
  cfg.episode_length = 500;
  return cfg;
}

// Moves the agent to a chosen cell for targeted reward checks.
void place(GridWorldState& s, int ax, int ay, int tx, int ty) {
  s.agent_x = ax;
  s.agent_y = ay;
  s.target_x = tx;
  s.target_y = ty;
}

}  // namespace

TEST_CASE("vgw rewards: every branch pinned to the paper constants") {
  GridWorldState s = vgw_reset(small_cfg(), 1);

  // plain move
  place(s, 0, 0, 7, 7);
  CHECK(vgw_step_lite(s, VgwAction::Right).reward == -1.0);

  // reaching the target
  place(s, 6, 7, 7, 7);
  LiteStep target_step = vgw_step_lite(s, VgwAction::Right);
  CHECK(target_step.reward == 100.0);
  CHECK_FALSE(target_step.done);  // episode continues, target relocated
  const bool target_unmoved = s.target_x == 7 && s.target_y == 7;
  CHECK_FALSE(target_unmoved);
  CHECK_FALSE(s.is_unsafe(s.target_x, s.target_y));

  // entering an unsafe cell: (2,1) is red in the built-in layout
  place(s, 1, 1, 7, 7);
  LiteStep red_step = vgw_step_lite(s, VgwAction::Right);
  CHECK(red_step.reward == -40.0);
  CHECK(red_step.valuation.holds(kPropRed));

  // staying put
  place(s, 0, 0, 7, 7);
  CHECK(vgw_step_lite(s, VgwAction::Stay).reward == -10.0);

  // walking into a wall counts as not moving
  place(s, 0, 0, 7, 7);
  CHECK(vgw_step_lite(s, VgwAction::Left).reward == -10.0);

  // staying on a red cell is still a violation step (unsafe precedes no-move)
  place(s, 2, 1, 7, 7);
  LiteStep stay_red = vgw_step_lite(s, VgwAction::Stay);
  CHECK(stay_red.reward == -40.0);
  CHECK(stay_red.valuation.holds(kPropRed));
}

TEST_CASE("vgw reward/valuation consistency over random play") {
  GridWorldConfig cfg = small_cfg();
  Rng rng(9);
  for (uint64_t ep = 0; ep < 20; ep++) {
    GridWorldState s = vgw_reset(cfg, ep);
    for (int t = 0; t < 60; t++) {
      LiteStep r = vgw_step_lite(s, VgwAction(int(rng.bounded(5))));
      CHECK((r.reward == -40.0) == r.valuation.holds(kPropRed));
      const bool known = r.reward == 100.0 || r.reward == -40.0 || r.reward == -10.0 ||
                         r.reward == -1.0;
      CHECK(known);
    }
  }
}

TEST_CASE("vgw reset: fixed layouts repeat, spawns avoid landmines") {
  GridWorldConfig cfg = small_cfg();
  cfg.layout_seed = 77;
  GridWorldState a = vgw_reset(cfg, 1);
  GridWorldState b = vgw_reset(cfg, 2);
  CHECK(a.unsafe == b.unsafe);  // same layout seed, same unsafe set

  for (uint64_t seed = 0; seed < 10000; seed++) {
    GridWorldState s = vgw_reset(cfg, seed);
    CHECK_FALSE(s.is_unsafe(s.agent_x, s.agent_y));
    CHECK_FALSE(s.is_unsafe(s.target_x, s.target_y));
    const bool spawned_on_target = s.agent_x == s.target_x && s.agent_y == s.target_y;
    CHECK_FALSE(spawned_on_target);
  }
}

TEST_CASE("vgw reset: procedural layouts differ across episode seeds") {
  GridWorldConfig cfg = small_cfg();
  cfg.mode = VgwMode::Procedural;
  std::set<std::vector<uint8_t>> layouts;
  for (uint64_t seed = 0; seed < 100; seed++) layouts.insert(vgw_reset(cfg, seed).unsafe);
  // ~6e7 possible 6-of-64 layouts; 100 draws collide with probability < 1e-4
  CHECK(layouts.size() == 100);
}

TEST_CASE("vgw reset rejects impossible configs") {
  GridWorldConfig cfg = small_cfg();
  cfg.width = cfg.height = 2;
  cfg.unsafe_cells = 3;
  CHECK_THROWS_AS(vgw_reset(cfg, 0), ConfigError);
}

TEST_CASE("vgw determinism: same seed and actions, same trajectory") {
  GridWorldConfig cfg = small_cfg();
  cfg.mode = VgwMode::Procedural;
  Rng arng(4);
  std::vector<VgwAction> actions;
  for (int i = 0; i < 200; i++) actions.push_back(VgwAction(int(arng.bounded(5))));

  auto run = [&]() {
    GridWorldState s = vgw_reset(cfg, 31);
    std::vector<real> rewards;
    for (VgwAction a : actions) rewards.push_back(vgw_step_lite(s, a).reward);
    return rewards;
  };
  CHECK(run() == run());
}

TEST_CASE("vgw stepping a done episode throws") {
  GridWorldConfig cfg = small_cfg();
  cfg.episode_length = 2;
  GridWorldState s = vgw_reset(cfg, 0);
  vgw_step_lite(s, VgwAction::Stay);
  LiteStep last = vgw_step_lite(s, VgwAction::Stay);
  CHECK(last.done);
  CHECK(last.valuation.holds(kPropEnded));
  CHECK_THROWS_AS(vgw_step_lite(s, VgwAction::Stay), InvalidArgument);
}

TEST_CASE("render: one green and one black block on a clean grid") {
  GridWorldConfig cfg = small_cfg();
  cfg.unsafe_cells = 0;
  cfg.layout_seed = 5;  // non-builtin path with zero cells
  cfg.render_size = 16;
  GridWorldState s = vgw_reset(cfg, 3);
  num::Tensor img = render_vgw(s);

  int green = 0, black = 0, white = 0, red = 0;
  const int size = cfg.render_size;
  for (int p = 0; p < size * size; p++) {
    const real r = img.at(p), g = img.at(size * size + p), b = img.at(2 * size * size + p);
    if (r == 0.0 && g == 1.0 && b == 0.0) green++;
    else if (r == 0.0 && g == 0.0 && b == 0.0) black++;
    else if (r == 1.0 && g == 1.0 && b == 1.0) white++;
    else if (r == 1.0 && g == 0.0 && b == 0.0) red++;
  }
  const int px_per_cell = (16 / 8) * (16 / 8);
  CHECK(green == px_per_cell);
  CHECK(black == px_per_cell);
  CHECK(red == 0);
  CHECK(white == size * size - 2 * px_per_cell);
}

TEST_CASE("render: agent draws over red; renders are deterministic") {
  GridWorldState s = vgw_reset(small_cfg(), 3);
  place(s, 2, 1, 7, 7);  // stand on a red cell
  num::Tensor img = render_vgw(s);
  int green = 0, red = 0;
  const int size = s.cfg.render_size;
  for (int p = 0; p < size * size; p++) {
    const real r = img.at(p), g = img.at(size * size + p), b = img.at(2 * size * size + p);
    if (r == 0.0 && g == 1.0 && b == 0.0) green++;
    if (r == 1.0 && g == 0.0 && b == 0.0) red++;
  }
  CHECK(green == 4);       // agent visible on top
  CHECK(red == 5 * 4);     // one of six red cells hidden under the agent
  CHECK(render_vgw(s).data == img.data);
}

TEST_CASE("vgw clone_and_simulate leaves the original untouched") {
  GridWorldState s = vgw_reset(small_cfg(), 8);
  const GridWorldState before = s;
  auto [clone, result] = clone_and_simulate(s, VgwAction::Right);
  CHECK(s.agent_x == before.agent_x);
  CHECK(s.step_count == before.step_count);
  CHECK(clone.step_count == before.step_count + 1);

  // deterministic VGW: simulate equals step
  LiteStep direct = vgw_step_lite(s, VgwAction::Right);
  CHECK(direct.reward == result.reward);
  CHECK(s.agent_x == clone.agent_x);
  CHECK(s.agent_y == clone.agent_y);
}

TEST_CASE("cliff: unit-step kinematics and reward pins") {
  CliffConfig cfg;
  cfg.p_stick = 0.0;
  CliffState s = cd_reset(cfg, 0);
  CHECK(s.x == 10.0);
  CHECK(s.v == 0.0);

  LiteStep r = cd_step_lite(s, 1.0);
  CHECK(s.v == 1.0);
  CHECK(s.x == 9.0);
  CHECK(r.reward == doctest::Approx(0.1));

  // braking at v=0 keeps the car still; speed never goes negative
  CliffState b = cd_reset(cfg, 0);
  cd_step_lite(b, -1.0);
  CHECK(b.v == 0.0);
  CHECK(b.x == 10.0);

  // falling: reward -5, episode over, violation proposition set
  CliffState f = cd_reset(cfg, 0);
  for (int i = 0; i < 5 && !f.done; i++) cd_step_lite(f, 1.0);
  CHECK(f.x < 0.0);
  CHECK(f.done);
  CliffState f2 = cd_reset(cfg, 0);
  LiteStep fall;
  for (int i = 0; i < 5 && !f2.done; i++) fall = cd_step_lite(f2, 1.0);
  CHECK(fall.reward == -5.0);
  CHECK(fall.valuation.holds(kPropFell));
  CHECK_FALSE(fall.valuation.holds(kPropEnded));  // fall is not a natural end
}

TEST_CASE("cliff: natural end emits episode_ended, not the violation") {
  CliffConfig cfg;
  cfg.p_stick = 0.0;
  CliffState s = cd_reset(cfg, 0);
  LiteStep last;
  for (int i = 0; i < 20; i++) last = cd_step_lite(s, 0.0);
  CHECK(s.done);
  CHECK(last.valuation.holds(kPropEnded));
  CHECK_FALSE(last.valuation.holds(kPropFell));
  CHECK(last.reward == doctest::Approx(0.0));  // never moved: 1 - 10/10
}

TEST_CASE("cliff: action validation and done-episode stepping") {
  CliffConfig cfg;
  CliffState s = cd_reset(cfg, 0);
  CHECK_THROWS_AS(cd_step_lite(s, 1.5), InvalidArgument);
  CHECK_THROWS_AS(cd_step_lite(s, -2.0), InvalidArgument);
  for (int i = 0; i < 20 && !s.done; i++) cd_step_lite(s, 0.0);
  CHECK_THROWS_AS(cd_step_lite(s, 0.0), InvalidArgument);
}

TEST_CASE("cliff: sticking replays the previous applied action") {
  CliffConfig cfg;
  cfg.p_stick = 1.0;  // always stuck
  CliffState s = cd_reset(cfg, 0);
  // a_{-1} = 0, so the first action is ignored and replaced by 0
  cd_step_lite(s, 1.0);
  CHECK(s.v == 0.0);
  CHECK(s.x == 10.0);
  CHECK(s.last_stuck);
}

TEST_CASE("cliff: empirical stick rate matches p_stick") {
  for (real p : {0.1, 0.5}) {
    CliffConfig cfg;
    cfg.p_stick = p;
    Rng arng(123);
    long stuck = 0, steps = 0;
    uint64_t seed = 0;
    CliffState s = cd_reset(cfg, seed++);
    for (int i = 0; i < 100000; i++) {
      if (s.done) s = cd_reset(cfg, seed++);
      cd_step_lite(s, arng.uniform(-1.0, 1.0));
      steps++;
      if (s.last_stuck) stuck++;
    }
    const real rate = real(stuck) / real(steps);
    CHECK(std::fabs(rate - p) < 0.02);
  }
}

TEST_CASE("cliff clone_and_simulate: isolation and per-clone determinism") {
  CliffConfig cfg;
  cfg.p_stick = 0.5;
  CliffState s = cd_reset(cfg, 5);
  cd_step_lite(s, 0.7);
  const CliffState before = s;

  auto [c1, r1] = clone_and_simulate(s, -0.3);
  auto [c2, r2] = clone_and_simulate(s, -0.3);
  CHECK(s.x == before.x);
  CHECK(s.v == before.v);
  // same clone source, same rng stream: identical outcomes even with p_stick>0
  CHECK(c1.x == c2.x);
  CHECK(c1.v == c2.v);
  CHECK(r1.reward == r2.reward);
}

TEST_CASE("environment wrappers: observation shape and action encoding") {
  GridWorldEnv genv(small_cfg());
  num::Tensor obs = genv.reset(3);
  CHECK(obs.shape == std::vector<int>{3, 16, 16});
  for (real v : obs.data) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  num::Tensor enc = genv.encode_action(Action{2, 0.0});
  CHECK(enc.shape == std::vector<int>{5});
  CHECK(enc.at(2) == 1.0);

  CliffEnv cenv{CliffConfig{}};
  num::Tensor cobs = cenv.reset(3);
  CHECK(cobs.shape == std::vector<int>{2});
  CHECK(cobs.at(0) == 10.0);
  num::Tensor cenc = cenv.encode_action(Action{0, -0.25});
  CHECK(cenc.shape == std::vector<int>{1});
  CHECK(cenc.at(0) == -0.25);
}

TEST_CASE("environment snapshots restore exactly") {
  GridWorldEnv env(small_cfg());
  env.reset(11);
  env.step(Action{1, 0});
  auto snap = env.save_state();
  const int ax = env.state().agent_x;
  env.step(Action{3, 0});
  env.step(Action{3, 0});
  env.load_state(snap);
  CHECK(env.state().agent_x == ax);
}

TEST_CASE("ppm round trip") {
  GridWorldState s = vgw_reset(small_cfg(), 3);
  num::Tensor img = render_vgw(s);
  const std::string path = (std::filesystem::temp_directory_path() / "ls_frame.ppm").string();
  write_ppm(path, img);

  std::ifstream in(path, std::ios::binary);
  std::string magic;
  int w, h, maxv;
  in >> magic >> w >> h >> maxv;
  CHECK(magic == "P6");
  CHECK(w == 16);
  CHECK(h == 16);
  CHECK(maxv == 255);
  in.get();
  std::vector<unsigned char> bytes(size_t(w) * h * 3);
  in.read(reinterpret_cast<char*>(bytes.data()), std::streamsize(bytes.size()));
  CHECK(in.gcount() == std::streamsize(bytes.size()));
  // spot-check a pixel: top-left of the agent cell is pure green
  const int px = s.agent_x * 2, py = s.agent_y * 2;
  const size_t off = (size_t(py) * 16 + px) * 3;
  CHECK(int(bytes[off]) == 0);
  CHECK(int(bytes[off + 1]) == 255);
  CHECK(int(bytes[off + 2]) == 0);
  std::filesystem::remove(path);
}
