#pragma once

#include <functional>
#include <unordered_map>

#include "tensor.hpp"

namespace ls::num {

class Graph;

// Handle to a node in one forward pass. Cheap to copy; valid only while the
// owning Graph is alive.
struct Var {
  Graph* g = nullptr;
  int id = -1;

  const Tensor& val() const;
  bool valid() const { return g != nullptr && id >= 0; }
};

// Define-by-run reverse-mode tape. One Graph per forward pass; ops append
// nodes eagerly and record a backward closure. backward() walks the tape in
// reverse creation order, so every node is visited at most once and fan-out
// gradients accumulate additively.
class Graph {
 public:
  struct Node {
    Tensor value;
    Tensor grad;  // allocated lazily; empty until some child writes into it
    std::function<void(Graph&)> backward;
  };

  // Tracked leaf for a parameter tensor; memoized by address so repeated
  // requests share one node and gradients accumulate.
  Var leaf(Tensor& param);

  // Untracked constant input.
  Var input(Tensor value);
  Var input_scalar(real v) { return input(Tensor::scalar(v)); }

  Var push(Tensor value, std::function<void(Graph&)> bw = nullptr);
  void set_backward(int id, std::function<void(Graph&)> bw) {
    nodes_[size_t(id)].backward = std::move(bw);
  }

  const Tensor& value(Var v) const { return nodes_[size_t(v.id)].value; }
  Tensor& grad(int id);
  bool grad_present(int id) const { return !nodes_[size_t(id)].grad.data.empty(); }

  // Seeds d(root)/d(root) = 1 (root must be scalar) and propagates.
  void backward(Var root);

  // Gradient accumulated at the leaf registered for `param`; zeros if the
  // parameter never participated or received no gradient.
  Tensor grad_of(const Tensor& param) const;

  size_t size() const { return nodes_.size(); }

 private:
  std::vector<Node> nodes_;
  std::unordered_map<const Tensor*, int> leaf_ids_;
};

// --- elementwise / structural ops -----------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var neg(Var a);
Var add_scalar(Var a, real c);
Var mul_scalar(Var a, real c);

Var relu(Var a);
Var elu(Var a);
// Clamp with pass-through gradient inside the interval, zero outside.
Var clamp(Var a, real lo, real hi);
Var tanh_(Var a);
Var sigmoid(Var a);
Var softplus(Var a);
Var exp_(Var a);
Var log_(Var a);
Var square(Var a);

Var stop_grad(Var a);

// [m,n] + [n] broadcast over rows.
Var add_rowvec(Var a, Var b);
// [m,1] replicated to [m,n].
Var broadcast_col(Var a, int n);
// Row-wise sum [m,n] -> [m,1].
Var row_sum(Var a);
// Row-wise max as a constant (no gradient); used for stable softmax shifts.
Var row_max_const(Var a);

Var concat_cols(Var a, Var b);
Var slice_cols(Var a, int start, int len);
// Rows start, start+stride, start+2*stride, ... of a [m,n] matrix.
Var slice_rows_strided(Var a, int start, int stride);
// Stacks equally wide matrices on top of each other.
Var concat_rows(const std::vector<Var>& parts);
// Same data, new shape (sizes must match).
Var reshape(Var a, std::vector<int> shape);

Var sum_all(Var a);
Var mean_all(Var a);

// --- linear algebra ---------------------------------------------------------

Var matmul(Var a, Var b);
Var affine(Var x, Var w, Var b);

// --- convolution (valid padding) --------------------------------------------

// x [n,c,h,w], w [oc,c,k,k], b [oc] -> [n,oc,oh,ow], oh = (h-k)/stride + 1.
Var conv2d(Var x, Var w, Var b, int stride);
// Transposed convolution: x [n,c,h,w], w [c,oc,k,k], b [oc] ->
// [n,oc,(h-1)*stride+k,(w-1)*stride+k].
Var deconv2d(Var x, Var w, Var b, int stride);

// --- distributions / losses --------------------------------------------------

// Row-wise softmax and log-softmax, numerically stabilised.
Var softmax_rows(Var logits);
Var log_softmax_rows(Var logits);

// mean + std (*) eps, with eps a fixed standard-normal draw.
Var sample_reparam(Var mean, Var std, const Tensor& eps);

// Sum over all entries of the closed-form diagonal-Gaussian KL(q || p).
Var kl_diag_gaussian(Var q_mean, Var q_std, Var p_mean, Var p_std);

// Weighted binary cross-entropy from logits, summed over entries:
//   w_pos * y * softplus(-l) + (1-y) * softplus(l)
Var weighted_bce(Var logits, const Tensor& labels, real positive_weight);

// 0.5 * sum((x - target)^2): unit-variance Gaussian NLL up to constants.
Var gaussian_nll(Var mean, const Tensor& target);

// One-hot sample of each row's categorical distribution with the
// straight-through gradient: value is the sample, gradient flows as if the
// node were softmax(logits).
Var sample_one_hot_st(Var logits, Rng& rng);

}  // namespace ls::num
