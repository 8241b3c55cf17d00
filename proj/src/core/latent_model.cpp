#include "latent_model.hpp"

namespace ls::model {

ImaginedTrajectory imagine(num::Graph& g, const LatentModel& model, num::Var start,
                           const PolicyFn& policy, int horizon, real action_noise_var,
                           Rng& rng, const num::Tensor* first_action) {
  check(horizon >= 1, "imagine: horizon must be >= 1");
  const int n = start.val().dim(0);

  auto perturb = [&](num::Var a) {
    if (action_noise_var <= 0.0) return a;
    num::Tensor eta({n, model.action_dim()});
    const real stddev = std::sqrt(action_noise_var);
    for (real& x : eta.data) x = stddev * rng.normal();
    // noise widens the sampled trajectory distribution; keep actions in range
    return num::clamp(num::add(a, g.input(std::move(eta))), -1.0, 1.0);
  };

  ImaginedTrajectory traj;
  num::Var feat = start;
  for (int i = 0; i < horizon; i++) {
    num::Var action;
    if (i == 0 && first_action != nullptr) {
      num::Tensor a0 = *first_action;
      check(a0.rank() == 2 && a0.dim(0) == n && a0.dim(1) == model.action_dim(),
            "imagine: first_action shape mismatch");
      action = g.input(std::move(a0));
    } else {
      action = perturb(policy(g, feat, rng));
    }
    feat = model.imagine_step(g, feat, action, rng);
    traj.actions.push_back(action);
    traj.feats.push_back(feat);
    traj.rewards.push_back(model.reward_head(g, feat));
    traj.violation_probs.push_back(num::sigmoid(model.violation_logit(g, feat)));
  }
  return traj;
}

}  // namespace ls::model
