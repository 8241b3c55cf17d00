#pragma once

#include <unordered_map>

#include "graph.hpp"

namespace ls::num {

// Ordered, named parameter collection. Order is creation order so optimizer
// state and checkpoints line up deterministically.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor init) {
    check(index_.find(name) == index_.end(), "duplicate parameter " + name);
    index_[name] = int(items_.size());
    items_.emplace_back(name, std::move(init));
    return items_.back().second;
  }

  Tensor& get(const std::string& name) {
    auto it = index_.find(name);
    check(it != index_.end(), "unknown parameter " + name);
    return items_[size_t(it->second)].second;
  }
  const Tensor& get(const std::string& name) const {
    return const_cast<ParamStore*>(this)->get(name);
  }
  bool has(const std::string& name) const { return index_.count(name) > 0; }

  size_t size() const { return items_.size(); }
  std::pair<std::string, Tensor>& item(size_t i) { return items_[i]; }
  const std::pair<std::string, Tensor>& item(size_t i) const { return items_[i]; }

  std::vector<Tensor*> tensors() {
    std::vector<Tensor*> out;
    out.reserve(items_.size());
    for (auto& [name, t] : items_) out.push_back(&t);
    return out;
  }

  long total_params() const {
    long n = 0;
    for (auto& [name, t] : items_) n += t.numel();
    return n;
  }

  // 64-bit FNV-1a over the raw parameter bytes; used by tests to detect
  // updates.
  uint64_t content_hash() const;

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
  std::unordered_map<std::string, int> index_;
};

Tensor glorot_uniform(int fan_in, int fan_out, std::vector<int> shape, Rng& rng);

// Fully connected layer; weights registered in a ParamStore at construction.
class Dense {
 public:
  Dense() = default;
  Dense(ParamStore& ps, const std::string& name, int in, int out, Rng& rng);

  Var operator()(Graph& g, Var x) const;
  int out_dim() const { return out_; }

 private:
  ParamStore* ps_ = nullptr;
  std::string name_;
  int out_ = 0;
};

// GRU cell:
//   z = sigmoid(x Wxz + h Whz + bz),  r = sigmoid(x Wxr + h Whr + br)
//   cand = tanh(x Wxc + (r*h) Whc + bc)
//   h' = (1 - z) * h + z * cand
// z and r share fused weight matrices.
class GruCell {
 public:
  GruCell() = default;
  GruCell(ParamStore& ps, const std::string& name, int input, int hidden, Rng& rng);

  Var operator()(Graph& g, Var h, Var x) const;
  int hidden_dim() const { return hidden_; }

 private:
  ParamStore* ps_ = nullptr;
  std::string name_;
  int hidden_ = 0;
};

// Convolutional image encoder: kernel-4 stride-2 valid convolutions with
// channel doubling until the spatial extent drops below 4, then flatten.
// For 64x64 inputs this is the classic 4-layer stack ending at 2x2; a 16x16
// input gets 2 layers.
class ConvEncoder {
 public:
  ConvEncoder() = default;
  ConvEncoder(ParamStore& ps, const std::string& name, int channels, int size, int depth,
              Rng& rng);

  Var operator()(Graph& g, Var images) const;  // [n,c,s,s] -> [n, embed]
  int embed_dim() const { return embed_; }

 private:
  ParamStore* ps_ = nullptr;
  std::string name_;
  struct Layer {
    int in_ch, out_ch;
  };
  std::vector<Layer> layers_;
  int in_size_ = 0, embed_ = 0, final_size_ = 0;
};

// Mirror of ConvEncoder: dense layer to a 1x1 feature map, then stride-2
// transposed convolutions chosen to land exactly on the target resolution
// (kernels 6,6 for 16x16 and 5,5,6,6 for 64x64).
class ConvDecoder {
 public:
  ConvDecoder() = default;
  ConvDecoder(ParamStore& ps, const std::string& name, int feat_dim, int channels, int size,
              int depth, Rng& rng);

  Var operator()(Graph& g, Var feat) const;  // [n, feat] -> [n,c,s,s]

 private:
  ParamStore* ps_ = nullptr;
  std::string name_;
  struct Layer {
    int in_ch, out_ch, kernel;
  };
  std::vector<Layer> layers_;
  int dense_ch_ = 0, out_size_ = 0;
};

// Multi-layer perceptron with a fixed activation on hidden layers and a
// linear head.
class Mlp {
 public:
  enum class Act { Relu, Elu, Tanh };

  Mlp() = default;
  Mlp(ParamStore& ps, const std::string& name, std::vector<int> dims, Act act, Rng& rng);

  Var operator()(Graph& g, Var x) const;
  int out_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim(); }

 private:
  std::vector<Dense> layers_;
  Act act_ = Act::Elu;
};

}  // namespace ls::num
