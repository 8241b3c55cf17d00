#include "gradcheck.hpp"

namespace ls::num {

namespace {
real g_corruption = 0.0;
}

void set_gradcheck_corruption(real delta) { g_corruption = delta; }

GradCheckReport grad_check(const std::function<Var(Graph&)>& f, ParamStore& ps, real fd_step) {
  // Analytic gradients from one tape.
  std::vector<Tensor> analytic;
  {
    Graph g;
    Var loss = f(g);
    check(loss.val().numel() == 1, "grad_check: f must be scalar-valued");
    g.backward(loss);
    for (size_t i = 0; i < ps.size(); i++) analytic.push_back(g.grad_of(ps.item(i).second));
  }
  if (g_corruption != 0.0)
    for (Tensor& t : analytic)
      if (t.numel() > 0) t.at(0) += g_corruption;

  auto eval = [&]() -> real {
    Graph g;
    return f(g).val().at(0);
  };

  GradCheckReport report;
  for (size_t i = 0; i < ps.size(); i++) {
    Tensor& p = ps.item(i).second;
    for (long j = 0; j < p.numel(); j++) {
      const real saved = p.at(j);
      p.at(j) = saved + fd_step;
      const real up = eval();
      p.at(j) = saved - fd_step;
      const real down = eval();
      p.at(j) = saved;
      const real fd = (up - down) / (2.0 * fd_step);
      const real ad = analytic[i].at(j);
      const real rel = std::fabs(ad - fd) / std::max({std::fabs(ad), std::fabs(fd), real(1e-6)});
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = ps.item(i).first;
        report.worst_index = j;
      }
    }
  }
  return report;
}

}  // namespace ls::num
