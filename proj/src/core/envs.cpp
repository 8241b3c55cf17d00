#include "envs.hpp"

#include <fstream>

namespace ls::envs {

// ---------------------------------------------------------------------------
// Visual Grid World
// ---------------------------------------------------------------------------

namespace {

// Hand-authored unsafe set for the default fixed 8x8 grid: scattered single
// cells, free space stays connected, no cell adjacent to every escape route.
const std::vector<std::pair<int, int>> kFixed8x8Unsafe = {
    {2, 1}, {5, 2}, {1, 4}, {4, 4}, {6, 5}, {3, 6}};

std::vector<uint8_t> draw_layout(int width, int height, int count, Rng& rng) {
  std::vector<uint8_t> mask(size_t(width) * height, 0);
  int placed = 0;
  while (placed < count) {
    const int cell = int(rng.bounded(uint64_t(width) * height));
    if (!mask[size_t(cell)]) {
      mask[size_t(cell)] = 1;
      placed++;
    }
  }
  return mask;
}

}  // namespace

GridWorldState vgw_reset(const GridWorldConfig& cfg, uint64_t seed) {
  check(cfg.width >= 2 && cfg.height >= 2, "grid too small");
  check(cfg.episode_length >= 1, "episode_length must be positive");
  if (cfg.unsafe_cells > cfg.width * cfg.height - 2)
    throw ConfigError("more unsafe cells than free cells: " + std::to_string(cfg.unsafe_cells) +
                      " on a " + std::to_string(cfg.width) + "x" + std::to_string(cfg.height) +
                      " grid");

  GridWorldState s;
  s.cfg = cfg;
  s.rng = Rng(splitmix64(seed ^ 0x5647565754ULL));

  if (cfg.mode == VgwMode::Fixed) {
    if (cfg.layout_seed == 0 && cfg.width == 8 && cfg.height == 8 && cfg.unsafe_cells == 6) {
      s.unsafe.assign(size_t(cfg.width) * cfg.height, 0);
      for (auto [x, y] : kFixed8x8Unsafe) s.unsafe[size_t(y) * cfg.width + x] = 1;
    } else {
      Rng layout_rng(splitmix64(cfg.layout_seed + 0x1a1a1a));
      s.unsafe = draw_layout(cfg.width, cfg.height, cfg.unsafe_cells, layout_rng);
    }
  } else {
    s.unsafe = draw_layout(cfg.width, cfg.height, cfg.unsafe_cells, s.rng);
  }

  auto draw_free = [&s, &cfg](int avoid_x, int avoid_y) {
    while (true) {
      const int cell = int(s.rng.bounded(uint64_t(cfg.width) * cfg.height));
      const int x = cell % cfg.width, y = cell / cfg.width;
      if (s.unsafe[size_t(cell)]) continue;
      if (x == avoid_x && y == avoid_y) continue;
      return std::make_pair(x, y);
    }
  };
  std::tie(s.agent_x, s.agent_y) = draw_free(-1, -1);
  std::tie(s.target_x, s.target_y) = draw_free(s.agent_x, s.agent_y);
  return s;
}

LiteStep vgw_step_lite(GridWorldState& s, VgwAction a) {
  check(!s.done, "stepping a done episode");
  const int ai = int(a);
  check(ai >= 0 && ai < kVgwActions, "invalid grid action");

  int nx = s.agent_x, ny = s.agent_y;
  switch (a) {
    case VgwAction::Up:
      ny--;
      break;
    case VgwAction::Down:
      ny++;
      break;
    case VgwAction::Left:
      nx--;
      break;
    case VgwAction::Right:
      nx++;
      break;
    case VgwAction::Stay:
      break;
  }
  // walls clamp; a clamped step counts as not moving
  nx = std::clamp(nx, 0, s.cfg.width - 1);
  ny = std::clamp(ny, 0, s.cfg.height - 1);
  const bool moved = nx != s.agent_x || ny != s.agent_y;
  s.agent_x = nx;
  s.agent_y = ny;

  LiteStep r;
  if (nx == s.target_x && ny == s.target_y) {
    r.reward = kVgwTargetReward;
    // target relocates and the episode continues
    while (true) {
      const int cell = int(s.rng.bounded(uint64_t(s.cfg.width) * s.cfg.height));
      const int tx = cell % s.cfg.width, ty = cell / s.cfg.width;
      if (s.unsafe[size_t(cell)]) continue;
      if (tx == s.agent_x && ty == s.agent_y) continue;
      if (tx == s.target_x && ty == s.target_y) continue;
      s.target_x = tx;
      s.target_y = ty;
      break;
    }
  } else if (s.is_unsafe(nx, ny)) {
    r.reward = kVgwUnsafeReward;
  } else if (!moved) {
    r.reward = kVgwNoMoveReward;
  } else {
    r.reward = kVgwStepReward;
  }

  s.step_count++;
  s.done = s.step_count >= s.cfg.episode_length;
  r.done = s.done;
  if (s.is_unsafe(s.agent_x, s.agent_y)) r.valuation.set(kPropRed);
  if (s.done) r.valuation.set(kPropEnded);
  return r;
}

StepResult vgw_step(GridWorldState& s, VgwAction a) {
  LiteStep lite = vgw_step_lite(s, a);
  StepResult r;
  r.observation = render_vgw(s);
  r.reward = lite.reward;
  r.valuation = std::move(lite.valuation);
  r.done = lite.done;
  return r;
}

num::Tensor render_vgw(const GridWorldState& s) {
  const int size = s.cfg.render_size;
  num::Tensor img({3, size, size});
  auto put = [&img, size](int px, int py, real rr, real gg, real bb) {
    img.at((0L * size + py) * size + px) = rr;
    img.at((1L * size + py) * size + px) = gg;
    img.at((2L * size + py) * size + px) = bb;
  };
  for (int py = 0; py < size; py++) {
    const int cy = py * s.cfg.height / size;
    for (int px = 0; px < size; px++) {
      const int cx = px * s.cfg.width / size;
      if (cx == s.agent_x && cy == s.agent_y)
        put(px, py, 0.0, 1.0, 0.0);  // agent (green) draws over everything
      else if (cx == s.target_x && cy == s.target_y)
        put(px, py, 0.0, 0.0, 0.0);  // target (black)
      else if (s.is_unsafe(cx, cy))
        put(px, py, 1.0, 0.0, 0.0);  // unsafe (red)
      else
        put(px, py, 1.0, 1.0, 1.0);  // background (white)
    }
  }
  return img;
}

std::pair<GridWorldState, StepResult> clone_and_simulate(const GridWorldState& s, VgwAction a) {
  GridWorldState clone = s;
  StepResult r = vgw_step(clone, a);
  return {std::move(clone), std::move(r)};
}

// ---------------------------------------------------------------------------
// Cliff Driver
// ---------------------------------------------------------------------------

CliffState cd_reset(const CliffConfig& cfg, uint64_t seed) {
  check(cfg.p_stick >= 0.0 && cfg.p_stick <= 1.0, "p_stick out of range");
  check(cfg.start_distance > 0.0, "start_distance must be positive");
  CliffState s;
  s.cfg = cfg;
  s.x = cfg.start_distance;
  s.v = 0.0;
  s.prev_action = 0.0;
  s.rng = Rng(splitmix64(seed ^ 0x434c494646ULL));
  return s;
}

LiteStep cd_step_lite(CliffState& s, real action) {
  check(!s.done, "stepping a done episode");
  check(action >= -1.0 && action <= 1.0 && std::isfinite(action),
        "cliff action out of [-1,1]");

  s.last_stuck = s.rng.bernoulli(s.cfg.p_stick);
  const real applied = s.last_stuck ? s.prev_action : action;
  s.v = std::max(0.0, s.v + applied);  // braking never reverses
  s.x -= s.v;
  s.prev_action = applied;
  s.step_count++;

  const bool fallen = s.x < 0.0;
  s.done = fallen || s.step_count >= s.cfg.episode_length;

  LiteStep r;
  r.reward = fallen ? kCdFallReward : 1.0 - s.x / s.cfg.start_distance;
  r.done = s.done;
  if (fallen) r.valuation.set(kPropFell);
  // `episode_ended` marks reaching the horizon; falling terminates without it
  // so the Until specification is not discharged by the violating step.
  if (s.done && !fallen) r.valuation.set(kPropEnded);
  return r;
}

StepResult cd_step(CliffState& s, real action) {
  LiteStep lite = cd_step_lite(s, action);
  StepResult r;
  r.observation = num::Tensor({2});
  r.observation.at(0) = s.x;
  r.observation.at(1) = s.v;
  r.reward = lite.reward;
  r.valuation = std::move(lite.valuation);
  r.done = lite.done;
  return r;
}

std::pair<CliffState, StepResult> clone_and_simulate(const CliffState& s, real action) {
  CliffState clone = s;
  StepResult r = cd_step(clone, action);
  return {std::move(clone), std::move(r)};
}

// ---------------------------------------------------------------------------

void write_ppm(const std::string& path, const num::Tensor& image) {
  check(image.rank() == 3 && image.dim(0) == 3, "write_ppm expects [3,h,w]");
  const int h = image.dim(1), w = image.dim(2);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "P6\n" << w << " " << h << "\n255\n";
  std::vector<unsigned char> row(size_t(w) * 3);
  for (int y = 0; y < h; y++) {
    for (int x = 0; x < w; x++)
      for (int c = 0; c < 3; c++) {
        const real v = std::clamp(image.at((long(c) * h + y) * w + x), 0.0, 1.0);
        row[size_t(x) * 3 + c] = static_cast<unsigned char>(std::lround(v * 255.0));
      }
    out.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size()));
  }
}

}  // namespace ls::envs
