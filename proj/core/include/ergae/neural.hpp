#pragma once

// Sub-architectures shared by the graph model: affine maps, MLPs, embeddings,
// GRU text encoder/decoder, batch normalization and per-property losses.

#include <cstdint>
#include <deque>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "ergae/autodiff.hpp"

namespace ergae {

/// Owns the parameters of one model. Addresses stay stable as parameters are added.
class ParameterStore {
 public:
  Parameter& add(std::string name, Tensor value, bool trainable = true);
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  std::vector<Parameter*> trainable();
  std::size_t count() const { return params_.size(); }
  std::size_t scalar_count() const;
  void zero_grad();

 private:
  std::deque<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Deterministic initializers; independent of the standard library's
/// distribution implementations.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi);
  double normal();
  /// Uniform in +-sqrt(6 / (fan_in + fan_out)).
  Tensor glorot(std::size_t fan_in, std::size_t fan_out);
  /// normal(0, 1) / sqrt(dim)
  Tensor embedding(std::size_t rows, std::size_t dim);

 private:
  std::mt19937_64 rng_;
};

/// One forward pass: the tape, the train/eval switch, and parameter leaves
/// bound once per pass so repeated use (GRU steps) shares a node.
class Forward {
 public:
  Forward(Tape& tape, bool training) : tape_(tape), training_(training) {}

  Tape& tape() { return tape_; }
  bool training() const { return training_; }
  Var param(Parameter& p);
  Var constant(Tensor t) { return tape_.constant(std::move(t)); }

 private:
  Tape& tape_;
  bool training_;
  std::unordered_map<const Parameter*, Var> bound_;
};

class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, Initializer& init);

  Var operator()(Forward& f, Var x) const;
  std::size_t in() const { return in_; }
  std::size_t out() const { return out_; }

 private:
  Parameter* weight_ = nullptr;  // (in, out)
  Parameter* bias_ = nullptr;    // (out)
  std::size_t in_ = 0;
  std::size_t out_ = 0;
};

/// Affine layers with relu between them; the last layer has no activation.
class Mlp {
 public:
  Mlp() = default;
  Mlp(ParameterStore& store, const std::string& name, std::size_t in, const std::vector<std::size_t>& hidden,
      std::size_t out, Initializer& init);

  Var operator()(Forward& f, Var x) const;
  std::size_t in() const { return layers_.empty() ? 0 : layers_.front().in(); }
  std::size_t out() const { return layers_.empty() ? 0 : layers_.back().out(); }

 private:
  std::vector<Linear> layers_;
};

class Embedding {
 public:
  Embedding() = default;
  Embedding(ParameterStore& store, const std::string& name, std::size_t count, std::size_t dim, Initializer& init);

  /// Index -1 gives a zero row.
  Var operator()(Forward& f, std::span<const std::int64_t> indices) const;
  std::size_t count() const { return count_; }
  std::size_t dim() const { return dim_; }

 private:
  Parameter* table_ = nullptr;
  std::size_t count_ = 0;
  std::size_t dim_ = 0;
};

/// z = s(x Wz + h Uz + bz), r = s(x Wr + h Ur + br),
/// n = tanh(x Wn + (r * h) Un + bn), h' = n + z * (h - n)
class GruCell {
 public:
  GruCell() = default;
  GruCell(ParameterStore& store, const std::string& name, std::size_t in, std::size_t hidden, Initializer& init);

  Var operator()(Forward& f, Var x, Var h) const;
  std::size_t in() const { return in_; }
  std::size_t hidden() const { return hidden_; }

 private:
  Parameter* w_ = nullptr;   // (in, 3H) columns z | r | n
  Parameter* u_ = nullptr;   // (H, 2H) columns z | r
  Parameter* un_ = nullptr;  // (H, H)
  Parameter* b_ = nullptr;   // (3H)
  std::size_t in_ = 0;
  std::size_t hidden_ = 0;
};

using Symbols = std::vector<std::int32_t>;

/// Embeds each symbol and runs a GRU; the final hidden state is the encoding.
class TextEncoder {
 public:
  TextEncoder() = default;
  TextEncoder(ParameterStore& store, const std::string& name, std::size_t symbols, std::size_t embedding,
              std::size_t hidden, Initializer& init);

  /// (n, hidden); an empty sequence encodes to zeros.
  Var operator()(Forward& f, const std::vector<const Symbols*>& sequences) const;
  std::size_t out() const { return cell_.hidden(); }

 private:
  Embedding embed_;
  GruCell cell_;
  std::size_t symbols_ = 0;
};

/// Autoregressive GRU decoder. The input vector is projected (tanh) to the
/// initial hidden state; the first input symbol is the start symbol.
class TextDecoder {
 public:
  TextDecoder() = default;
  TextDecoder(ParameterStore& store, const std::string& name, std::size_t in, std::size_t symbols,
              std::size_t embedding, std::size_t hidden, Initializer& init);

  /// Teacher-forced per-position distributions for target = sequence + end
  /// symbol; returns one (n, symbols) Var per position up to the longest target.
  /// Rows whose target is shorter than a position get that position masked by
  /// `active` (1 = position counts).
  std::vector<Var> teacher_forced(Forward& f, Var input, const std::vector<const Symbols*>& targets,
                                  std::vector<Tensor>* active = nullptr) const;

  /// Summed per-position cross-entropy for each row, shape (n, 1).
  Var loss(Forward& f, Var input, const std::vector<const Symbols*>& targets) const;

  /// Greedy decoding until the end symbol or `max_length` symbols.
  std::vector<Symbols> greedy(Forward& f, Var input, std::size_t max_length) const;

  std::size_t in() const { return init_.in(); }
  std::size_t symbols() const { return symbols_; }

 private:
  Linear init_;
  Embedding embed_;
  GruCell cell_;
  Linear out_;
  std::size_t symbols_ = 0;
};

/// Per-feature normalization with learned scale and shift. Running statistics
/// are stored as non-trainable parameters so they serialize with the model.
class BatchNorm {
 public:
  static constexpr double kMomentum = 0.1;
  static constexpr double kEpsilon = 1e-5;

  BatchNorm() = default;
  BatchNorm(ParameterStore& store, const std::string& name, std::size_t features);

  /// Training with >= 2 rows uses batch statistics and updates the running
  /// ones; otherwise the running statistics are used.
  Var operator()(Forward& f, Var x) const;
  std::size_t features() const { return features_; }

 private:
  Parameter* gamma_ = nullptr;
  Parameter* beta_ = nullptr;
  Parameter* running_mean_ = nullptr;
  Parameter* running_var_ = nullptr;
  std::size_t features_ = 0;
};

// Losses return one value per row, shape (n, 1).

/// Mean over columns of the squared difference.
Var mse_rows(Forward& f, Var prediction, const Tensor& target);
/// -log softmax(logits)[target] per row.
Var cross_entropy_rows(Forward& f, Var logits, std::span<const std::int64_t> targets);
/// Numerically stable log(softmax(x)) along the last axis.
Var log_softmax(Forward& f, Var logits);

}  // namespace ergae
