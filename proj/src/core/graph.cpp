#include "graph.hpp"

#include <algorithm>
#include <cmath>

namespace ls::num {

const Tensor& Var::val() const { return g->value(*this); }

Var Graph::leaf(Tensor& param) {
  auto it = leaf_ids_.find(&param);
  if (it != leaf_ids_.end()) return {this, it->second};
  Var v = push(param);  // copies the current value; grads accumulate at this node
  leaf_ids_[&param] = v.id;
  return v;
}

Var Graph::input(Tensor value) { return push(std::move(value)); }

Var Graph::push(Tensor value, std::function<void(Graph&)> bw) {
  nodes_.push_back(Node{std::move(value), Tensor{}, std::move(bw)});
  return {this, int(nodes_.size()) - 1};
}

Tensor& Graph::grad(int id) {
  Node& n = nodes_[size_t(id)];
  if (n.grad.data.empty() && n.value.numel() > 0) n.grad = Tensor(n.value.shape);
  return n.grad;
}

void Graph::backward(Var root) {
  check(root.g == this, "backward: foreign var");
  check(value(root).numel() == 1, "backward: root must be scalar");
  grad(root.id).data[0] = 1.0;
  for (int i = root.id; i >= 0; i--) {
    Node& n = nodes_[size_t(i)];
    if (n.grad.data.empty() || !n.backward) continue;
    n.backward(*this);
  }
}

Tensor Graph::grad_of(const Tensor& param) const {
  auto it = leaf_ids_.find(&param);
  if (it == leaf_ids_.end()) return Tensor(param.shape);
  const Node& n = nodes_[size_t(it->second)];
  if (n.grad.data.empty()) return Tensor(param.shape);
  return n.grad;
}

namespace {

void same_graph(Var a, Var b) { check(a.g == b.g, "vars from different graphs"); }

// dfun(x, y) returns dy/dx given input and output values.
Var make_unary(Var a, real (*fun)(real), real (*dfun)(real, real)) {
  Graph& g = *a.g;
  const Tensor& x = a.val();
  Tensor y(x.shape);
  for (long i = 0; i < x.numel(); i++) y.at(i) = fun(x.at(i));
  Var out = g.push(std::move(y));
  const int aid = a.id, oid = out.id;
  g.set_backward(oid, [aid, oid, dfun](Graph& gg) {
    const Tensor& x_ = gg.value(Var{&gg, aid});
    const Tensor& y_ = gg.value(Var{&gg, oid});
    const Tensor& go = gg.grad(oid);
    Tensor& ga = gg.grad(aid);
    for (long i = 0; i < x_.numel(); i++) ga.at(i) += go.at(i) * dfun(x_.at(i), y_.at(i));
  });
  return out;
}

real softplus_scalar(real x) {
  // max(x,0) + log1p(exp(-|x|)) is stable for large |x|.
  return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

real sigmoid_scalar(real x) {
  if (x >= 0) {
    const real z = std::exp(-x);
    return 1.0 / (1.0 + z);
  }
  const real z = std::exp(x);
  return z / (1.0 + z);
}

}  // namespace

// --- elementwise ------------------------------------------------------------

Var add(Var a, Var b) {
  same_graph(a, b);
  Graph& g = *a.g;
  const Tensor& x = a.val();
  const Tensor& y = b.val();
  check(x.same_shape(y), "add: shape mismatch " + x.shape_str() + " vs " + y.shape_str());
  Tensor out(x.shape);
  for (long i = 0; i < x.numel(); i++) out.at(i) = x.at(i) + y.at(i);
  Var o = g.push(std::move(out));
  const int aid = a.id, bid = b.id, oid = o.id;
  g.set_backward(oid, [aid, bid, oid](Graph& gg) {
    const Tensor& go = gg.grad(oid);
    Tensor& ga = gg.grad(aid);
    Tensor& gb = gg.grad(bid);
    for (long i = 0; i < go.numel(); i++) {
      ga.at(i) += go.at(i);
      gb.at(i) += go.at(i);
    }
  });
  return o;
}

Var sub(Var a, Var b) {
  same_graph(a, b);
  Graph& g = *a.g;
  const Tensor& x = a.val();
  const Tensor& y = b.val();
  check(x.same_shape(y), "sub: shape mismatch");
  Tensor out(x.shape);
  for (long i = 0; i < x.numel(); i++) out.at(i) = x.at(i) - y.at(i);
  Var o = g.push(std::move(out));
  const int aid = a.id, bid = b.id, oid = o.id;
  g.set_backward(oid, [aid, bid, oid](Graph& gg) {
    const Tensor& go = gg.grad(oid);
    Tensor& ga = gg.grad(aid);
    Tensor& gb = gg.grad(bid);
    for (long i = 0; i < go.numel(); i++) {
      ga.at(i) += go.at(i);
      gb.at(i) -= go.at(i);
    }
  });
  return o;
}

Var mul(Var a, Var b) {
  same_graph(a, b);
  Graph& g = *a.g;
  const Tensor& x = a.val();
  const Tensor& y = b.val();
  check(x.same_shape(y), "mul: shape mismatch");
  Tensor out(x.shape);
  for (long i = 0; i < x.numel(); i++) out.at(i) = x.at(i) * y.at(i);
  Var o = g.push(std::move(out));
  const int aid = a.id, bid = b.id, oid = o.id;
  g.set_backward(oid, [aid, bid, oid](Graph& gg) {
    const Tensor& x_ = gg.value(Var{&gg, aid});
    const Tensor& y_ = gg.value(Var{&gg, bid});
    const Tensor& go = gg.grad(oid);
    Tensor& ga = gg.grad(aid);
    Tensor& gb = gg.grad(bid);
    for (long i = 0; i < go.numel(); i++) {
      ga.at(i) += go.at(i) * y_.at(i);
      gb.at(i) += go.at(i) * x_.at(i);
    }
  });
  return o;
}

Var div(Var a, Var b) {
  same_graph(a, b);
  Graph& g = *a.g;
  const Tensor& x = a.val();
  const Tensor& y = b.val();
  check(x.same_shape(y), "div: shape mismatch");
  Tensor out(x.shape);
  for (long i = 0; i < x.numel(); i++) out.at(i) = x.at(i) / y.at(i);
  Var o = g.push(std::move(out));
  const int aid = a.id, bid = b.id, oid = o.id;
  g.set_backward(oid, [aid, bid, oid](Graph& gg) {
    const Tensor& y_ = gg.value(Var{&gg, bid});
    const Tensor& o_ = gg.value(Var{&gg, oid});
    const Tensor& go = gg.grad(oid);
    Tensor& ga = gg.grad(aid);
    Tensor& gb = gg.grad(bid);
    for (long i = 0; i < go.numel(); i++) {
      ga.at(i) += go.at(i) / y_.at(i);
      gb.at(i) -= go.at(i) * o_.at(i) / y_.at(i);
    }
  });
  return o;
}

Var neg(Var a) {
  return make_unary(
      a, [](real x) { return -x; }, [](real, real) { return -1.0; });
}

Var add_scalar(Var a, real c) {
  Graph& g = *a.g;
  const Tensor& x = a.val();
  Tensor out(x.shape);
  for (long i = 0; i < x.numel(); i++) out.at(i) = x.at(i) + c;
  Var o = g.push(std::move(out));
  const int aid = a.id, oid = o.id;
  g.set_backward(oid, [aid, oid](Graph& gg) {
    const Tensor& go = gg.grad(oid);
    Tensor& ga = gg.grad(aid);
    for (long i = 0; i < go.numel(); i++) ga.at(i) += go.at(i);
  });
  return o;
}

Var mul_scalar(Var a, real c) {
  Graph& g = *a.g;
  const Tensor& x = a.val();
  Tensor out(x.shape);
  for (long i = 0; i < x.numel(); i++) out.at(i) = x.at(i) * c;
  Var o = g.push(std::move(out));
  const int aid = a.id, oid = o.id;
  g.set_backward(oid, [aid, oid, c](Graph& gg) {
    const Tensor& go = gg.grad(oid);
    Tensor& ga = gg.grad(aid);
    for (long i = 0; i < go.numel(); i++) ga.at(i) += go.at(i) * c;
  });
  return o;
}

Var relu(Var a) {
  return make_unary(
      a, [](real x) { return x > 0 ? x : 0.0; },
      [](real x, real) { return x > 0 ? 1.0 : 0.0; });
}

Var clamp(Var a, real lo, real hi) {
  Graph& g = *a.g;
  const Tensor& x = a.val();
  Tensor y(x.shape);
  for (long i = 0; i < x.numel(); i++) y.at(i) = std::clamp(x.at(i), lo, hi);
  Var out = g.push(std::move(y));
  const int aid = a.id, oid = out.id;
  g.set_backward(oid, [aid, oid, lo, hi](Graph& gg) {
    const Tensor& x_ = gg.value(Var{&gg, aid});
    const Tensor& go = gg.grad(oid);
    Tensor& ga = gg.grad(aid);
    for (long i = 0; i < x_.numel(); i++)
      if (x_.at(i) > lo && x_.at(i) < hi) ga.at(i) += go.at(i);
  });
  return out;
}

Var elu(Var a) {
  return make_unary(
      a, [](real x) { return x > 0 ? x : std::expm1(x); },
      [](real x, real y) { return x > 0 ? 1.0 : y + 1.0; });
}

Var tanh_(Var a) {
  return make_unary(
      a, [](real x) { return std::tanh(x); }, [](real, real y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return make_unary(
      a, [](real x) { return sigmoid_scalar(x); },
      [](real, real y) { return y * (1.0 - y); });
}

Var softplus(Var a) {
  return make_unary(
      a, [](real x) { return softplus_scalar(x); },
      [](real x, real) { return sigmoid_scalar(x); });
}

Var exp_(Var a) {
  return make_unary(
      a, [](real x) { return std::exp(x); }, [](real, real y) { return y; });
}

Var log_(Var a) {
  return make_unary(
      a, [](real x) { return std::log(x); }, [](real x, real) { return 1.0 / x; });
}

Var square(Var a) {
  return make_unary(
      a, [](real x) { return x * x; }, [](real x, real) { return 2.0 * x; });
}

Var stop_grad(Var a) { return a.g->push(a.val()); }

// --- structure --------------------------------------------------------------

Var add_rowvec(Var a, Var b) {
  same_graph(a, b);
  Graph& g = *a.g;
  const Tensor& x = a.val();
  const Tensor& v = b.val();
  check(x.rank() == 2 && v.rank() == 1 && x.dim(1) == v.dim(0), "add_rowvec: shape mismatch");
  const int m = x.dim(0), n = x.dim(1);
  Tensor out(x.shape);
  for (int i = 0; i < m; i++)
    for (int j = 0; j < n; j++) out.at(long(i) * n + j) = x.at(long(i) * n + j) + v.at(j);
  Var o = g.push(std::move(out));
  const int aid = a.id, bid = b.id, oid = o.id;
  g.set_backward(oid, [aid, bid, oid, m, n](Graph& gg) {
    const Tensor& go = gg.grad(oid);
    Tensor& ga = gg.grad(aid);
    Tensor& gb = gg.grad(bid);
    for (int i = 0; i < m; i++)
      for (int j = 0; j < n; j++) {
        ga.at(long(i) * n + j) += go.at(long(i) * n + j);
        gb.at(j) += go.at(long(i) * n + j);
      }
  });
  return o;
}

Var broadcast_col(Var a, int n) {
  Graph& g = *a.g;
  const Tensor& x = a.val();
  check(x.rank() == 2 && x.dim(1) == 1, "broadcast_col: expects [m,1]");
  const int m = x.dim(0);
  Tensor out({m, n});
  for (int i = 0; i < m; i++)
    for (int j = 0; j < n; j++) out.at(long(i) * n + j) = x.at(i);
  Var o = g.push(std::move(out));
  const int aid = a.id, oid = o.id;
  g.set_backward(oid, [aid, oid, m, n](Graph& gg) {
    const Tensor& go = gg.grad(oid);
    Tensor& ga = gg.grad(aid);
    for (int i = 0; i < m; i++) {
      real acc = 0.0;
      for (int j = 0; j < n; j++) acc += go.at(long(i) * n + j);
      ga.at(i) += acc;
    }
  });
  return o;
}

Var row_sum(Var a) {
  Graph& g = *a.g;
  const Tensor& x = a.val();
  check(x.rank() == 2, "row_sum: expects a matrix");
  const int m = x.dim(0), n = x.dim(1);
  Tensor out({m, 1});
  for (int i = 0; i < m; i++) {
    real acc = 0.0;
    for (int j = 0; j < n; j++) acc += x.at(long(i) * n + j);
    out.at(i) = acc;
  }
  Var o = g.push(std::move(out));
  const int aid = a.id, oid = o.id;
  g.set_backward(oid, [aid, oid, m, n](Graph& gg) {
    const Tensor& go = gg.grad(oid);
    Tensor& ga = gg.grad(aid);
    for (int i = 0; i < m; i++)
      for (int j = 0; j < n; j++) ga.at(long(i) * n + j) += go.at(i);
  });
  return o;
}

Var row_max_const(Var a) {
  const Tensor& x = a.val();
  check(x.rank() == 2, "row_max_const: expects a matrix");
  const int m = x.dim(0), n = x.dim(1);
  Tensor out({m, 1});
  for (int i = 0; i < m; i++) {
    real mx = x.at(long(i) * n);
    for (int j = 1; j < n; j++) mx = std::max(mx, x.at(long(i) * n + j));
    out.at(i) = mx;
  }
  return a.g->push(std::move(out));
}

Var concat_cols(Var a, Var b) {
  same_graph(a, b);
  Graph& g = *a.g;
  const Tensor& x = a.val();
  const Tensor& y = b.val();
  check(x.rank() == 2 && y.rank() == 2 && x.dim(0) == y.dim(0), "concat_cols: shape mismatch");
  const int m = x.dim(0), p = x.dim(1), q = y.dim(1);
  Tensor out({m, p + q});
  for (int i = 0; i < m; i++) {
    std::memcpy(out.ptr() + long(i) * (p + q), x.ptr() + long(i) * p, sizeof(real) * size_t(p));
    std::memcpy(out.ptr() + long(i) * (p + q) + p, y.ptr() + long(i) * q,
                sizeof(real) * size_t(q));
  }
  Var o = g.push(std::move(out));
  const int aid = a.id, bid = b.id, oid = o.id;
  g.set_backward(oid, [aid, bid, oid, m, p, q](Graph& gg) {
    const Tensor& go = gg.grad(oid);
    Tensor& ga = gg.grad(aid);
    Tensor& gb = gg.grad(bid);
    for (int i = 0; i < m; i++) {
      for (int j = 0; j < p; j++) ga.at(long(i) * p + j) += go.at(long(i) * (p + q) + j);
      for (int j = 0; j < q; j++) gb.at(long(i) * q + j) += go.at(long(i) * (p + q) + p + j);
    }
  });
  return o;
}

Var slice_cols(Var a, int start, int len) {
  Graph& g = *a.g;
  const Tensor& x = a.val();
  check(x.rank() == 2 && start >= 0 && start + len <= x.dim(1), "slice_cols: out of range");
  const int m = x.dim(0), n = x.dim(1);
  Tensor out({m, len});
  for (int i = 0; i < m; i++)
    std::memcpy(out.ptr() + long(i) * len, x.ptr() + long(i) * n + start,
                sizeof(real) * size_t(len));
  Var o = g.push(std::move(out));
  const int aid = a.id, oid = o.id;
  g.set_backward(oid, [aid, oid, m, n, start, len](Graph& gg) {
    const Tensor& go = gg.grad(oid);
    Tensor& ga = gg.grad(aid);
    for (int i = 0; i < m; i++)
      for (int j = 0; j < len; j++) ga.at(long(i) * n + start + j) += go.at(long(i) * len + j);
  });
  return o;
}

Var slice_rows_strided(Var a, int start, int stride) {
  Graph& g = *a.g;
  const Tensor& x = a.val();
  check(x.rank() == 2 && start >= 0 && start < x.dim(0) && stride >= 1,
        "slice_rows_strided: bad arguments");
  const int m = x.dim(0), n = x.dim(1);
  const int rows = (m - start + stride - 1) / stride;
  Tensor out({rows, n});
  for (int r = 0; r < rows; r++)
    std::memcpy(out.ptr() + long(r) * n, x.ptr() + long(start + r * stride) * n,
                sizeof(real) * size_t(n));
  Var o = g.push(std::move(out));
  const int aid = a.id, oid = o.id;
  g.set_backward(oid, [aid, oid, n, rows, start, stride](Graph& gg) {
    const Tensor& go = gg.grad(oid);
    Tensor& ga = gg.grad(aid);
    for (int r = 0; r < rows; r++)
      for (int j = 0; j < n; j++)
        ga.at(long(start + r * stride) * n + j) += go.at(long(r) * n + j);
  });
  return o;
}

Var concat_rows(const std::vector<Var>& parts) {
  check(!parts.empty(), "concat_rows: empty list");
  Graph& g = *parts[0].g;
  const int n = parts[0].val().dim(1);
  int total = 0;
  for (const Var& p : parts) {
    check(p.val().rank() == 2 && p.val().dim(1) == n, "concat_rows: width mismatch");
    total += p.val().dim(0);
  }
  Tensor out({total, n});
  long off = 0;
  std::vector<int> ids;
  std::vector<int> heights;
  for (const Var& p : parts) {
    const Tensor& t = p.val();
    std::memcpy(out.ptr() + off, t.ptr(), sizeof(real) * size_t(t.numel()));
    off += t.numel();
    ids.push_back(p.id);
    heights.push_back(t.dim(0));
  }
  Var o = g.push(std::move(out));
  const int oid = o.id;
  g.set_backward(oid, [ids, heights, n, oid](Graph& gg) {
    const Tensor& go = gg.grad(oid);
    long off2 = 0;
    for (size_t k = 0; k < ids.size(); k++) {
      Tensor& gp = gg.grad(ids[k]);
      const long cnt = long(heights[k]) * n;
      for (long i = 0; i < cnt; i++) gp.at(i) += go.at(off2 + i);
      off2 += cnt;
    }
  });
  return o;
}

Var reshape(Var a, std::vector<int> shape) {
  Graph& g = *a.g;
  const Tensor& x = a.val();
  check(Tensor::numel_of(shape) == x.numel(), "reshape: size mismatch");
  Tensor out(std::move(shape));
  out.data = x.data;
  Var o = g.push(std::move(out));
  const int aid = a.id, oid = o.id;
  g.set_backward(oid, [aid, oid](Graph& gg) {
    const Tensor& go = gg.grad(oid);
    Tensor& ga = gg.grad(aid);
    for (long i = 0; i < go.numel(); i++) ga.at(i) += go.at(i);
  });
  return o;
}

Var sum_all(Var a) {
  Graph& g = *a.g;
  const Tensor& x = a.val();
  real acc = 0.0;
  for (long i = 0; i < x.numel(); i++) acc += x.at(i);
  Var o = g.push(Tensor::scalar(acc));
  const int aid = a.id, oid = o.id;
  g.set_backward(oid, [aid, oid](Graph& gg) {
    const real go = gg.grad(oid).at(0);
    Tensor& ga = gg.grad(aid);
    for (long i = 0; i < ga.numel(); i++) ga.at(i) += go;
  });
  return o;
}

Var mean_all(Var a) { return mul_scalar(sum_all(a), 1.0 / real(a.val().numel())); }

// --- matmul -----------------------------------------------------------------

Var matmul(Var a, Var b) {
  same_graph(a, b);
  Graph& g = *a.g;
  const Tensor& x = a.val();
  const Tensor& y = b.val();
  check(x.rank() == 2 && y.rank() == 2 && x.dim(1) == y.dim(0),
        "matmul: shape mismatch " + x.shape_str() + " x " + y.shape_str());
  const int m = x.dim(0), k = x.dim(1), n = y.dim(1);
  Tensor out({m, n});
  matmul_acc(x.ptr(), y.ptr(), out.ptr(), m, k, n);
  Var o = g.push(std::move(out));
  const int aid = a.id, bid = b.id, oid = o.id;
  g.set_backward(oid, [aid, bid, oid, m, k, n](Graph& gg) {
    const Tensor& x_ = gg.value(Var{&gg, aid});
    const Tensor& y_ = gg.value(Var{&gg, bid});
    const Tensor& go = gg.grad(oid);
    matmul_acc_bt(go.ptr(), y_.ptr(), gg.grad(aid).ptr(), m, k, n);
    matmul_acc_at(x_.ptr(), go.ptr(), gg.grad(bid).ptr(), m, k, n);
  });
  return o;
}

Var affine(Var x, Var w, Var b) { return add_rowvec(matmul(x, w), b); }

// --- convolution ------------------------------------------------------------

namespace {

struct ConvDims {
  int n, c, h, w, oc, k, stride, oh, ow;
};

ConvDims conv_dims(const Tensor& x, const Tensor& wt, int stride) {
  check(x.rank() == 4 && wt.rank() == 4, "conv2d: expects 4-d input and kernel");
  ConvDims d;
  d.n = x.dim(0);
  d.c = x.dim(1);
  d.h = x.dim(2);
  d.w = x.dim(3);
  d.oc = wt.dim(0);
  d.k = wt.dim(2);
  d.stride = stride;
  check(wt.dim(1) == d.c && wt.dim(3) == d.k, "conv2d: kernel shape mismatch");
  check(d.h >= d.k && d.w >= d.k, "conv2d: kernel larger than input");
  d.oh = (d.h - d.k) / stride + 1;
  d.ow = (d.w - d.k) / stride + 1;
  return d;
}

// Gathers conv patches of one image into [oh*ow, c*k*k].
void im2col(const real* img, const ConvDims& d, real* cols) {
  const int ckk = d.c * d.k * d.k;
  for (int oy = 0; oy < d.oh; oy++) {
    for (int ox = 0; ox < d.ow; ox++) {
      real* dst = cols + (long(oy) * d.ow + ox) * ckk;
      for (int ch = 0; ch < d.c; ch++) {
        const real* src = img + (long(ch) * d.h + oy * d.stride) * d.w + ox * d.stride;
        for (int ky = 0; ky < d.k; ky++) {
          std::memcpy(dst, src + long(ky) * d.w, sizeof(real) * size_t(d.k));
          dst += d.k;
        }
      }
    }
  }
}

void col2im_acc(const real* cols, const ConvDims& d, real* img) {
  const int ckk = d.c * d.k * d.k;
  for (int oy = 0; oy < d.oh; oy++) {
    for (int ox = 0; ox < d.ow; ox++) {
      const real* src = cols + (long(oy) * d.ow + ox) * ckk;
      for (int ch = 0; ch < d.c; ch++) {
        real* dst = img + (long(ch) * d.h + oy * d.stride) * d.w + ox * d.stride;
        for (int ky = 0; ky < d.k; ky++) {
          for (int kx = 0; kx < d.k; kx++) dst[long(ky) * d.w + kx] += src[kx];
          src += d.k;
        }
      }
    }
  }
}

}  // namespace

Var conv2d(Var x, Var w, Var b, int stride) {
  same_graph(x, w);
  same_graph(x, b);
  Graph& g = *x.g;
  const Tensor& xt = x.val();
  const Tensor& wt = w.val();
  const Tensor& bt = b.val();
  const ConvDims d = conv_dims(xt, wt, stride);
  check(bt.rank() == 1 && bt.dim(0) == d.oc, "conv2d: bias shape mismatch");

  const int ckk = d.c * d.k * d.k;
  // W^T [ckk, oc] so each patch row multiplies into contiguous output.
  Tensor wtrans({ckk, d.oc});
  for (int o = 0; o < d.oc; o++)
    for (int p = 0; p < ckk; p++) wtrans.at(long(p) * d.oc + o) = wt.at(long(o) * ckk + p);

  Tensor out({d.n, d.oc, d.oh, d.ow});
  Tensor cols({d.oh * d.ow, ckk});
  Tensor prod({d.oh * d.ow, d.oc});
  for (int img = 0; img < d.n; img++) {
    im2col(xt.ptr() + long(img) * d.c * d.h * d.w, d, cols.ptr());
    std::fill(prod.data.begin(), prod.data.end(), 0.0);
    matmul_acc(cols.ptr(), wtrans.ptr(), prod.ptr(), d.oh * d.ow, ckk, d.oc);
    // [ohow, oc] -> [oc, oh, ow] with bias
    real* dst = out.ptr() + long(img) * d.oc * d.oh * d.ow;
    for (int o = 0; o < d.oc; o++)
      for (int s = 0; s < d.oh * d.ow; s++)
        dst[long(o) * d.oh * d.ow + s] = prod.at(long(s) * d.oc + o) + bt.at(o);
  }

  Var ov = g.push(std::move(out));
  const int xid = x.id, wid = w.id, bid = b.id, oid = ov.id;
  g.set_backward(oid, [xid, wid, bid, oid, d](Graph& gg) {
    const Tensor& xt_ = gg.value(Var{&gg, xid});
    const Tensor& wt_ = gg.value(Var{&gg, wid});
    const Tensor& go = gg.grad(oid);
    Tensor& gx = gg.grad(xid);
    Tensor& gw = gg.grad(wid);
    Tensor& gb = gg.grad(bid);

    const int ckk = d.c * d.k * d.k;
    const int ohow = d.oh * d.ow;
    Tensor cols({ohow, ckk});
    Tensor dprod({ohow, d.oc});
    Tensor dcols({ohow, ckk});
    for (int img = 0; img < d.n; img++) {
      const real* gout = go.ptr() + long(img) * d.oc * ohow;
      // d(prod) [ohow, oc] from [oc, oh, ow]; bias grad on the way
      for (int o = 0; o < d.oc; o++) {
        real acc = 0.0;
        for (int s = 0; s < ohow; s++) {
          const real v = gout[long(o) * ohow + s];
          dprod.at(long(s) * d.oc + o) = v;
          acc += v;
        }
        gb.at(o) += acc;
      }
      im2col(xt_.ptr() + long(img) * d.c * d.h * d.w, d, cols.ptr());
      // gw[o, p] += sum_s dprod[s,o] * cols[s,p] -> accumulate transposed
      for (int s = 0; s < ohow; s++) {
        const real* colrow = cols.ptr() + long(s) * ckk;
        const real* dprow = dprod.ptr() + long(s) * d.oc;
        for (int o = 0; o < d.oc; o++) {
          const real dv = dprow[o];
          if (dv == 0.0) continue;
          real* gwrow = gw.ptr() + long(o) * ckk;
          for (int p = 0; p < ckk; p++) gwrow[p] += dv * colrow[p];
        }
      }
      // dcols = dprod * W  ([ohow,oc] x [oc,ckk])
      std::fill(dcols.data.begin(), dcols.data.end(), 0.0);
      matmul_acc(dprod.ptr(), wt_.ptr(), dcols.ptr(), ohow, d.oc, ckk);
      col2im_acc(dcols.ptr(), d, gx.ptr() + long(img) * d.c * d.h * d.w);
    }
  });
  return ov;
}

Var deconv2d(Var x, Var w, Var b, int stride) {
  same_graph(x, w);
  same_graph(x, b);
  Graph& g = *x.g;
  const Tensor& xt = x.val();
  const Tensor& wt = w.val();
  const Tensor& bt = b.val();
  check(xt.rank() == 4 && wt.rank() == 4, "deconv2d: expects 4-d input and kernel");
  const int n = xt.dim(0), c = xt.dim(1), h = xt.dim(2), wd = xt.dim(3);
  const int oc = wt.dim(1), k = wt.dim(2);
  check(wt.dim(0) == c && wt.dim(3) == k, "deconv2d: kernel shape mismatch");
  check(bt.rank() == 1 && bt.dim(0) == oc, "deconv2d: bias shape mismatch");
  const int oh = (h - 1) * stride + k;
  const int ow = (wd - 1) * stride + k;
  const int ockk = oc * k * k;

  Tensor out({n, oc, oh, ow});
  Tensor xr({h * wd, c});
  Tensor contrib({h * wd, ockk});
  for (int img = 0; img < n; img++) {
    const real* src = xt.ptr() + long(img) * c * h * wd;
    for (int ch = 0; ch < c; ch++)
      for (int s = 0; s < h * wd; s++) xr.at(long(s) * c + ch) = src[long(ch) * h * wd + s];
    std::fill(contrib.data.begin(), contrib.data.end(), 0.0);
    matmul_acc(xr.ptr(), wt.ptr(), contrib.ptr(), h * wd, c, ockk);

    real* dst = out.ptr() + long(img) * oc * oh * ow;
    for (int o = 0; o < oc; o++)
      for (long s = 0; s < long(oh) * ow; s++) dst[long(o) * oh * ow + s] = bt.at(o);
    for (int iy = 0; iy < h; iy++)
      for (int ix = 0; ix < wd; ix++) {
        const real* row = contrib.ptr() + (long(iy) * wd + ix) * ockk;
        for (int o = 0; o < oc; o++) {
          real* base = dst + (long(o) * oh + iy * stride) * ow + ix * stride;
          const real* krow = row + long(o) * k * k;
          for (int ky = 0; ky < k; ky++)
            for (int kx = 0; kx < k; kx++) base[long(ky) * ow + kx] += krow[long(ky) * k + kx];
        }
      }
  }

  Var ov = g.push(std::move(out));
  const int xid = x.id, wid = w.id, bid = b.id, oid = ov.id;
  g.set_backward(oid, [xid, wid, bid, oid, n, c, h, wd, oc, k, stride, oh, ow](Graph& gg) {
    const Tensor& xt_ = gg.value(Var{&gg, xid});
    const Tensor& wt_ = gg.value(Var{&gg, wid});
    const Tensor& go = gg.grad(oid);
    Tensor& gx = gg.grad(xid);
    Tensor& gw = gg.grad(wid);
    Tensor& gb = gg.grad(bid);

    const int ockk = oc * k * k;
    Tensor dcontrib({h * wd, ockk});
    Tensor xr({h * wd, c});
    Tensor dxr({h * wd, c});
    for (int img = 0; img < n; img++) {
      const real* gout = go.ptr() + long(img) * oc * oh * ow;
      for (int o = 0; o < oc; o++) {
        real acc = 0.0;
        for (long s = 0; s < long(oh) * ow; s++) acc += gout[long(o) * oh * ow + s];
        gb.at(o) += acc;
      }
      // gather d(contrib) from the scatter pattern
      for (int iy = 0; iy < h; iy++)
        for (int ix = 0; ix < wd; ix++) {
          real* row = dcontrib.ptr() + (long(iy) * wd + ix) * ockk;
          for (int o = 0; o < oc; o++) {
            const real* base = gout + (long(o) * oh + iy * stride) * ow + ix * stride;
            real* krow = row + long(o) * k * k;
            for (int ky = 0; ky < k; ky++)
              for (int kx = 0; kx < k; kx++) krow[long(ky) * k + kx] = base[long(ky) * ow + kx];
          }
        }
      const real* src = xt_.ptr() + long(img) * c * h * wd;
      for (int ch = 0; ch < c; ch++)
        for (int s = 0; s < h * wd; s++) xr.at(long(s) * c + ch) = src[long(ch) * h * wd + s];
      // dW [c, ockk] += xr^T * dcontrib
      matmul_acc_at(xr.ptr(), dcontrib.ptr(), gw.ptr(), h * wd, c, ockk);
      // dX [hw, c] += dcontrib * W^T
      std::fill(dxr.data.begin(), dxr.data.end(), 0.0);
      matmul_acc_bt(dcontrib.ptr(), wt_.ptr(), dxr.ptr(), h * wd, c, ockk);
      real* gximg = gx.ptr() + long(img) * c * h * wd;
      for (int ch = 0; ch < c; ch++)
        for (int s = 0; s < h * wd; s++) gximg[long(ch) * h * wd + s] += dxr.at(long(s) * c + ch);
    }
  });
  return ov;
}

// --- distributions / losses ---------------------------------------------------

Var softmax_rows(Var logits) {
  Var shifted = sub(logits, broadcast_col(row_max_const(logits), logits.val().dim(1)));
  Var e = exp_(shifted);
  Var denom = broadcast_col(row_sum(e), logits.val().dim(1));
  return div(e, denom);
}

Var log_softmax_rows(Var logits) {
  const int n = logits.val().dim(1);
  Var shifted = sub(logits, broadcast_col(row_max_const(logits), n));
  Var lse = log_(row_sum(exp_(shifted)));
  return sub(shifted, broadcast_col(lse, n));
}

Var sample_reparam(Var mean, Var std, const Tensor& eps) {
  check(mean.val().same_shape(eps), "sample_reparam: eps shape mismatch");
  return add(mean, mul(std, mean.g->input(eps)));
}

Var kl_diag_gaussian(Var q_mean, Var q_std, Var p_mean, Var p_std) {
  check(q_mean.val().same_shape(p_mean.val()), "kl: dimension mismatch");
  // log(p_std/q_std) + (q_std^2 + (q_mean - p_mean)^2) / (2 p_std^2) - 1/2
  Var logr = sub(log_(p_std), log_(q_std));
  Var var_ratio = div(add(square(q_std), square(sub(q_mean, p_mean))),
                      mul_scalar(square(p_std), 2.0));
  return sum_all(add_scalar(add(logr, var_ratio), -0.5));
}

Var weighted_bce(Var logits, const Tensor& labels, real positive_weight) {
  check(logits.val().same_shape(labels), "weighted_bce: label shape mismatch");
  Tensor wpos(labels.shape), wneg(labels.shape);
  for (long i = 0; i < labels.numel(); i++) {
    wpos.at(i) = positive_weight * labels.at(i);
    wneg.at(i) = 1.0 - labels.at(i);
  }
  Graph& g = *logits.g;
  Var pos_term = mul(g.input(std::move(wpos)), softplus(neg(logits)));
  Var neg_term = mul(g.input(std::move(wneg)), softplus(logits));
  return sum_all(add(pos_term, neg_term));
}

Var gaussian_nll(Var mean, const Tensor& target) {
  check(mean.val().same_shape(target), "gaussian_nll: target shape mismatch");
  Var diff = sub(mean, mean.g->input(target));
  return mul_scalar(sum_all(square(diff)), 0.5);
}

Var sample_one_hot_st(Var logits, Rng& rng) {
  Var probs = softmax_rows(logits);
  const Tensor& p = probs.val();
  const int m = p.dim(0), n = p.dim(1);
  Tensor onehot_minus_p({m, n});
  for (int i = 0; i < m; i++) {
    real u = rng.uniform();
    int pick = n - 1;
    real cum = 0.0;
    for (int j = 0; j < n; j++) {
      cum += p.at(long(i) * n + j);
      if (u < cum) {
        pick = j;
        break;
      }
    }
    for (int j = 0; j < n; j++)
      onehot_minus_p.at(long(i) * n + j) = (j == pick ? 1.0 : 0.0) - p.at(long(i) * n + j);
  }
  // sample = probs + sg(onehot - probs): value is the one-hot draw, gradient
  // is the softmax path.
  return add(probs, logits.g->input(std::move(onehot_minus_p)));
}

}  // namespace ls::num
