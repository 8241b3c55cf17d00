#include "nets.hpp"

namespace ls::num {

uint64_t ParamStore::content_hash() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* p, size_t n) {
    const unsigned char* b = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < n; i++) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [name, t] : items_) {
    mix(name.data(), name.size());
    mix(t.data.data(), t.data.size() * sizeof(real));
  }
  return h;
}

Tensor glorot_uniform(int fan_in, int fan_out, std::vector<int> shape, Rng& rng) {
  const real limit = std::sqrt(6.0 / real(fan_in + fan_out));
  Tensor t(std::move(shape));
  for (real& x : t.data) x = rng.uniform(-limit, limit);
  return t;
}

// --- Dense -------------------------------------------------------------------

Dense::Dense(ParamStore& ps, const std::string& name, int in, int out, Rng& rng)
    : ps_(&ps), name_(name), out_(out) {
  ps.add(name + "/w", glorot_uniform(in, out, {in, out}, rng));
  ps.add(name + "/b", Tensor({out}));
}

Var Dense::operator()(Graph& g, Var x) const {
  return affine(x, g.leaf(ps_->get(name_ + "/w")), g.leaf(ps_->get(name_ + "/b")));
}

// --- GruCell -------------------------------------------------------------------

GruCell::GruCell(ParamStore& ps, const std::string& name, int input, int hidden, Rng& rng)
    : ps_(&ps), name_(name), hidden_(hidden) {
  ps.add(name + "/wx_zr", glorot_uniform(input, 2 * hidden, {input, 2 * hidden}, rng));
  ps.add(name + "/wh_zr", glorot_uniform(hidden, 2 * hidden, {hidden, 2 * hidden}, rng));
  ps.add(name + "/b_zr", Tensor({2 * hidden}));
  ps.add(name + "/wx_c", glorot_uniform(input, hidden, {input, hidden}, rng));
  ps.add(name + "/wh_c", glorot_uniform(hidden, hidden, {hidden, hidden}, rng));
  ps.add(name + "/b_c", Tensor({hidden}));
}

Var GruCell::operator()(Graph& g, Var h, Var x) const {
  const int hd = hidden_;
  Var gates = sigmoid(add(add_rowvec(matmul(x, g.leaf(ps_->get(name_ + "/wx_zr"))),
                                     g.leaf(ps_->get(name_ + "/b_zr"))),
                          matmul(h, g.leaf(ps_->get(name_ + "/wh_zr")))));
  Var z = slice_cols(gates, 0, hd);
  Var r = slice_cols(gates, hd, hd);
  Var cand = tanh_(add(add_rowvec(matmul(x, g.leaf(ps_->get(name_ + "/wx_c"))),
                                  g.leaf(ps_->get(name_ + "/b_c"))),
                       matmul(mul(r, h), g.leaf(ps_->get(name_ + "/wh_c")))));
  // h' = (1-z)*h + z*cand
  Var one_minus_z = add_scalar(neg(z), 1.0);
  return add(mul(one_minus_z, h), mul(z, cand));
}

// --- ConvEncoder ---------------------------------------------------------------

ConvEncoder::ConvEncoder(ParamStore& ps, const std::string& name, int channels, int size,
                         int depth, Rng& rng)
    : ps_(&ps), name_(name), in_size_(size) {
  check(size >= 8, "ConvEncoder: image size too small");
  int s = size;
  int in_ch = channels;
  int out_ch = depth;
  int idx = 0;
  while (s >= 4) {
    layers_.push_back({in_ch, out_ch});
    const int k = 4, stride = 2;
    ps.add(name + "/conv" + std::to_string(idx) + "/w",
           glorot_uniform(in_ch * k * k, out_ch * k * k, {out_ch, in_ch, k, k}, rng));
    ps.add(name + "/conv" + std::to_string(idx) + "/b", Tensor({out_ch}));
    s = (s - k) / stride + 1;
    in_ch = out_ch;
    out_ch *= 2;
    idx++;
  }
  final_size_ = s;
  embed_ = layers_.back().out_ch * s * s;
}

Var ConvEncoder::operator()(Graph& g, Var images) const {
  Var x = images;
  for (size_t i = 0; i < layers_.size(); i++) {
    const std::string base = name_ + "/conv" + std::to_string(i);
    x = conv2d(x, g.leaf(ps_->get(base + "/w")), g.leaf(ps_->get(base + "/b")), 2);
    x = relu(x);
  }
  // flatten [n, ch, s, s] -> [n, embed]; row-major layout already matches
  Tensor flat({x.val().dim(0), embed_});
  flat.data = x.val().data;
  Graph& gg = *x.g;
  Var out = gg.push(std::move(flat));
  const int xid = x.id, oid = out.id;
  gg.set_backward(oid, [xid, oid](Graph& g2) {
    const Tensor& go = g2.grad(oid);
    Tensor& gx = g2.grad(xid);
    for (long i = 0; i < go.numel(); i++) gx.at(i) += go.at(i);
  });
  return out;
}

// --- ConvDecoder ---------------------------------------------------------------

ConvDecoder::ConvDecoder(ParamStore& ps, const std::string& name, int feat_dim, int channels,
                         int size, int depth, Rng& rng)
    : ps_(&ps), name_(name), out_size_(size) {
  // Kernel schedule reaching the target size exactly from 1x1 with stride 2:
  // 16 -> {6,6}, 64 -> {5,5,6,6}.
  std::vector<int> kernels;
  if (size == 16)
    kernels = {6, 6};
  else if (size == 64)
    kernels = {5, 5, 6, 6};
  else
    throw InvalidArgument("ConvDecoder: unsupported render size " + std::to_string(size));

  const int n_layers = int(kernels.size());
  dense_ch_ = depth * (1 << n_layers);  // e.g. depth 32, 4 layers -> 512
  ps.add(name + "/in/w", glorot_uniform(feat_dim, dense_ch_, {feat_dim, dense_ch_}, rng));
  ps.add(name + "/in/b", Tensor({dense_ch_}));

  int in_ch = dense_ch_;
  for (int i = 0; i < n_layers; i++) {
    const bool last = i == n_layers - 1;
    const int out_ch = last ? channels : depth * (1 << (n_layers - 2 - i));
    layers_.push_back({in_ch, out_ch, kernels[size_t(i)]});
    const int k = kernels[size_t(i)];
    ps.add(name + "/deconv" + std::to_string(i) + "/w",
           glorot_uniform(in_ch * k * k, out_ch * k * k, {in_ch, out_ch, k, k}, rng));
    ps.add(name + "/deconv" + std::to_string(i) + "/b", Tensor({out_ch}));
    in_ch = out_ch;
  }
}

Var ConvDecoder::operator()(Graph& g, Var feat) const {
  Var x = affine(feat, g.leaf(ps_->get(name_ + "/in/w")), g.leaf(ps_->get(name_ + "/in/b")));
  // reshape [n, dense_ch] -> [n, dense_ch, 1, 1]
  Tensor r({x.val().dim(0), dense_ch_, 1, 1});
  r.data = x.val().data;
  Graph& gg = *x.g;
  Var cur = gg.push(std::move(r));
  {
    const int xid = x.id, oid = cur.id;
    gg.set_backward(oid, [xid, oid](Graph& g2) {
      const Tensor& go = g2.grad(oid);
      Tensor& gx = g2.grad(xid);
      for (long i = 0; i < go.numel(); i++) gx.at(i) += go.at(i);
    });
  }
  for (size_t i = 0; i < layers_.size(); i++) {
    const std::string base = name_ + "/deconv" + std::to_string(i);
    cur = deconv2d(cur, g.leaf(ps_->get(base + "/w")), g.leaf(ps_->get(base + "/b")), 2);
    if (i + 1 < layers_.size()) cur = relu(cur);
  }
  return cur;
}

// --- Mlp -------------------------------------------------------------------------

Mlp::Mlp(ParamStore& ps, const std::string& name, std::vector<int> dims, Act act, Rng& rng)
    : act_(act) {
  check(dims.size() >= 2, "Mlp: need at least input and output dims");
  for (size_t i = 0; i + 1 < dims.size(); i++)
    layers_.emplace_back(ps, name + "/fc" + std::to_string(i), dims[i], dims[i + 1], rng);
}

Var Mlp::operator()(Graph& g, Var x) const {
  for (size_t i = 0; i < layers_.size(); i++) {
    x = layers_[i](g, x);
    if (i + 1 < layers_.size()) {
      switch (act_) {
        case Act::Relu:
          x = relu(x);
          break;
        case Act::Elu:
          x = elu(x);
          break;
        case Act::Tanh:
          x = tanh_(x);
          break;
      }
    }
  }
  return x;
}

}  // namespace ls::num
