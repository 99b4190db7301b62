#include "ergae/neural.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ergae {

Parameter& ParameterStore::add(std::string name, Tensor value, bool trainable) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter name " + name);
  index_.emplace(name, params_.size());
  params_.emplace_back(std::move(name), std::move(value), trainable);
  return params_.back();
}

Parameter* ParameterStore::find(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &params_[it->second];
}

const Parameter* ParameterStore::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &params_[it->second];
}

std::vector<Parameter*> ParameterStore::all() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(&p);
  return out;
}

std::vector<const Parameter*> ParameterStore::all() const {
  std::vector<const Parameter*> out;
  for (const auto& p : params_) out.push_back(&p);
  return out;
}

std::vector<Parameter*> ParameterStore::trainable() {
  std::vector<Parameter*> out;
  for (auto& p : params_) {
    if (p.trainable) out.push_back(&p);
  }
  return out;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

double Initializer::uniform(double lo, double hi) {
  const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

double Initializer::normal() {
  double u1 = uniform(0.0, 1.0);
  while (u1 <= 0.0) u1 = uniform(0.0, 1.0);
  const double u2 = uniform(0.0, 1.0);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Tensor Initializer::glorot(std::size_t fan_in, std::size_t fan_out) {
  Tensor t(Shape{fan_in, fan_out});
  const double limit = fan_in + fan_out == 0 ? 0.0 : std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : t.storage()) v = uniform(-limit, limit);
  return t;
}

Tensor Initializer::embedding(std::size_t rows, std::size_t dim) {
  Tensor t(Shape{rows, dim});
  const double s = dim == 0 ? 0.0 : 1.0 / std::sqrt(static_cast<double>(dim));
  for (double& v : t.storage()) v = normal() * s;
  return t;
}

Var Forward::param(Parameter& p) {
  auto it = bound_.find(&p);
  if (it != bound_.end()) return it->second;
  Var v = tape_.param(p);
  bound_.emplace(&p, v);
  return v;
}

Linear::Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, Initializer& init)
    : in_(in), out_(out) {
  weight_ = &store.add(name + ".weight", init.glorot(in, out));
  bias_ = &store.add(name + ".bias", Tensor(Shape{out}));
}

Var Linear::operator()(Forward& f, Var x) const {
  if (x.value().rank() != 2 || x.value().dim(1) != in_) {
    throw ShapeError("linear " + weight_->name + ": expected (n, " + std::to_string(in_) + ") input, got " +
                     shape_string(x.shape()));
  }
  return add(matmul(x, f.param(*weight_)), f.param(*bias_));
}

Mlp::Mlp(ParameterStore& store, const std::string& name, std::size_t in, const std::vector<std::size_t>& hidden,
         std::size_t out, Initializer& init) {
  std::size_t prev = in;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    layers_.emplace_back(store, name + "." + std::to_string(i), prev, hidden[i], init);
    prev = hidden[i];
  }
  layers_.emplace_back(store, name + "." + std::to_string(hidden.size()), prev, out, init);
}

Var Mlp::operator()(Forward& f, Var x) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = layers_[i](f, x);
    if (i + 1 < layers_.size()) x = relu(x);
  }
  return x;
}

Embedding::Embedding(ParameterStore& store, const std::string& name, std::size_t count, std::size_t dim,
                     Initializer& init)
    : count_(count), dim_(dim) {
  table_ = &store.add(name + ".table", init.embedding(count, dim));
}

Var Embedding::operator()(Forward& f, std::span<const std::int64_t> indices) const {
  return gather_rows(f.param(*table_), indices);
}

GruCell::GruCell(ParameterStore& store, const std::string& name, std::size_t in, std::size_t hidden,
                 Initializer& init)
    : in_(in), hidden_(hidden) {
  // Each gate's block is initialized with its own fan-in/fan-out.
  Tensor w(Shape{in, 3 * hidden});
  for (std::size_t g = 0; g < 3; ++g) {
    Tensor block = init.glorot(in, hidden);
    for (std::size_t r = 0; r < in; ++r) {
      for (std::size_t c = 0; c < hidden; ++c) w.at(r, g * hidden + c) = block.at(r, c);
    }
  }
  Tensor u(Shape{hidden, 2 * hidden});
  for (std::size_t g = 0; g < 2; ++g) {
    Tensor block = init.glorot(hidden, hidden);
    for (std::size_t r = 0; r < hidden; ++r) {
      for (std::size_t c = 0; c < hidden; ++c) u.at(r, g * hidden + c) = block.at(r, c);
    }
  }
  w_ = &store.add(name + ".w", std::move(w));
  u_ = &store.add(name + ".u", std::move(u));
  un_ = &store.add(name + ".un", init.glorot(hidden, hidden));
  b_ = &store.add(name + ".bias", Tensor(Shape{3 * hidden}));
}

Var GruCell::operator()(Forward& f, Var x, Var h) const {
  const std::size_t H = hidden_;
  Var xw = add(matmul(x, f.param(*w_)), f.param(*b_));
  Var hu = matmul(h, f.param(*u_));
  Var z = sigmoid(add(slice(xw, 1, 0, H), slice(hu, 1, 0, H)));
  Var r = sigmoid(add(slice(xw, 1, H, 2 * H), slice(hu, 1, H, 2 * H)));
  Var n = tanh(add(slice(xw, 1, 2 * H, 3 * H), matmul(mul(r, h), f.param(*un_))));
  return add(n, mul(z, sub(h, n)));
}

namespace {

Tensor column(const std::vector<double>& v) { return Tensor(Shape{v.size(), 1}, v); }

std::size_t longest(const std::vector<const Symbols*>& seqs) {
  std::size_t m = 0;
  for (const auto* s : seqs) m = std::max(m, s->size());
  return m;
}

}  // namespace

TextEncoder::TextEncoder(ParameterStore& store, const std::string& name, std::size_t symbols, std::size_t embedding,
                         std::size_t hidden, Initializer& init)
    : embed_(store, name + ".embed", symbols, embedding, init),
      cell_(store, name + ".gru", embedding, hidden, init),
      symbols_(symbols) {}

Var TextEncoder::operator()(Forward& f, const std::vector<const Symbols*>& sequences) const {
  const std::size_t n = sequences.size();
  Var h = f.constant(Tensor(Shape{n, cell_.hidden()}));
  const std::size_t steps = longest(sequences);
  std::vector<std::int64_t> idx(n);
  std::vector<double> live(n);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const Symbols& s = *sequences[i];
      if (t < s.size()) {
        if (s[t] < 0 || static_cast<std::size_t>(s[t]) >= symbols_) {
          throw std::out_of_range("text encoder: symbol " + std::to_string(s[t]) + " outside vocabulary of " +
                                  std::to_string(symbols_));
        }
        idx[i] = s[t];
        live[i] = 1.0;
      } else {
        idx[i] = -1;
        live[i] = 0.0;
      }
    }
    Var next = cell_(f, embed_(f, idx), h);
    h = add(h, mul(f.constant(column(live)), sub(next, h)));
  }
  return h;
}

TextDecoder::TextDecoder(ParameterStore& store, const std::string& name, std::size_t in, std::size_t symbols,
                         std::size_t embedding, std::size_t hidden, Initializer& init)
    : init_(store, name + ".init", in, hidden, init),
      embed_(store, name + ".embed", symbols, embedding, init),
      cell_(store, name + ".gru", embedding, hidden, init),
      out_(store, name + ".out", hidden, symbols, init),
      symbols_(symbols) {}

namespace {
constexpr std::int64_t kStart = 1;
constexpr std::int64_t kEnd = 2;
}  // namespace

std::vector<Var> TextDecoder::teacher_forced(Forward& f, Var input, const std::vector<const Symbols*>& targets,
                                             std::vector<Tensor>* active) const {
  const std::size_t n = targets.size();
  const std::size_t steps = targets.empty() ? 0 : longest(targets) + 1;
  Var h = tanh(init_(f, input));
  std::vector<Var> out;
  std::vector<std::int64_t> prev(n, kStart);
  for (std::size_t t = 0; t < steps; ++t) {
    h = cell_(f, embed_(f, prev), h);
    out.push_back(softmax(out_(f, h)));
    std::vector<double> live(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const Symbols& s = *targets[i];
      live[i] = t <= s.size() ? 1.0 : 0.0;
      prev[i] = t < s.size() ? s[t] : -1;
    }
    if (active) active->push_back(column(live));
  }
  return out;
}

Var TextDecoder::loss(Forward& f, Var input, const std::vector<const Symbols*>& targets) const {
  const std::size_t n = targets.size();
  const std::size_t steps = longest(targets) + 1;
  Var h = tanh(init_(f, input));
  Var total = f.constant(Tensor(Shape{n, 1}));
  std::vector<std::int64_t> prev(n, kStart);
  std::vector<std::int64_t> gold(n);
  for (std::size_t t = 0; t < steps; ++t) {
    h = cell_(f, embed_(f, prev), h);
    std::vector<double> live(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const Symbols& s = *targets[i];
      if (t < s.size()) {
        gold[i] = s[t];
        live[i] = 1.0;
      } else if (t == s.size()) {
        gold[i] = kEnd;
        live[i] = 1.0;
      } else {
        gold[i] = kEnd;
      }
      prev[i] = t < s.size() ? s[t] : -1;
    }
    Var ce = cross_entropy_rows(f, out_(f, h), gold);
    total = add(total, mul(ce, f.constant(column(live))));
  }
  return total;
}

std::vector<Symbols> TextDecoder::greedy(Forward& f, Var input, std::size_t max_length) const {
  const std::size_t n = input.value().dim(0);
  std::vector<Symbols> out(n);
  if (max_length == 0) return out;
  Var h = tanh(init_(f, input));
  std::vector<std::int64_t> prev(n, kStart);
  std::vector<char> done(n, 0);
  for (std::size_t t = 0; t < max_length; ++t) {
    h = cell_(f, embed_(f, prev), h);
    const Tensor& logits = out_(f, h).value();
    bool all_done = true;
    for (std::size_t i = 0; i < n; ++i) {
      if (done[i]) {
        prev[i] = -1;
        continue;
      }
      auto r = logits.row(i);
      auto best = static_cast<std::int32_t>(std::max_element(r.begin(), r.end()) - r.begin());
      if (best == kEnd) {
        done[i] = 1;
        prev[i] = -1;
        continue;
      }
      out[i].push_back(best);
      prev[i] = best;
      all_done = false;
    }
    if (all_done) break;
  }
  return out;
}

BatchNorm::BatchNorm(ParameterStore& store, const std::string& name, std::size_t features) : features_(features) {
  gamma_ = &store.add(name + ".gamma", Tensor(Shape{features}, 1.0));
  beta_ = &store.add(name + ".beta", Tensor(Shape{features}));
  running_mean_ = &store.add(name + ".running_mean", Tensor(Shape{features}), false);
  running_var_ = &store.add(name + ".running_var", Tensor(Shape{features}, 1.0), false);
}

Var BatchNorm::operator()(Forward& f, Var x) const {
  const std::size_t rows = x.value().dim(0);
  if (f.training() && rows >= 2) {
    Var mu = mean(x, 0);
    Var centered = sub(x, mu);
    Var var = mean(mul(centered, centered), 0);
    Var inv = exp(scale(log(add(var, f.constant(Tensor::scalar(kEpsilon)))), -0.5));
    Var y = add(mul(mul(centered, inv), f.param(*gamma_)), f.param(*beta_));
    const double m = kMomentum;
    const double unbias = static_cast<double>(rows) / static_cast<double>(rows - 1);
    for (std::size_t j = 0; j < features_; ++j) {
      running_mean_->value[j] = (1.0 - m) * running_mean_->value[j] + m * mu.value()[j];
      running_var_->value[j] = (1.0 - m) * running_var_->value[j] + m * var.value()[j] * unbias;
    }
    return y;
  }
  Tensor inv(Shape{features_});
  for (std::size_t j = 0; j < features_; ++j) inv[j] = 1.0 / std::sqrt(running_var_->value[j] + kEpsilon);
  Var centered = sub(x, f.constant(running_mean_->value));
  return add(mul(mul(centered, f.constant(std::move(inv))), f.param(*gamma_)), f.param(*beta_));
}

Var mse_rows(Forward& f, Var prediction, const Tensor& target) {
  if (prediction.shape() != target.shape()) {
    throw ShapeError("mse: prediction " + shape_string(prediction.shape()) + " vs target " +
                     shape_string(target.shape()));
  }
  Var d = sub(prediction, f.constant(target));
  const std::size_t n = target.rank() == 0 ? 1 : target.dim(0);
  return reshape(mean(mul(d, d), -1), Shape{n, 1});
}

Var log_softmax(Forward& f, Var logits) {
  const Tensor& x = logits.value();
  const std::size_t n = x.rows();
  const std::size_t v = x.cols();
  Tensor hi(Shape{n, 1});
  for (std::size_t i = 0; i < n; ++i) {
    auto r = x.row(i);
    hi[i] = v == 0 ? 0.0 : *std::max_element(r.begin(), r.end());
  }
  Var shifted = sub(logits, f.constant(std::move(hi)));
  Var lse = reshape(log(sum(exp(shifted), -1)), Shape{n, 1});
  return sub(shifted, lse);
}

Var cross_entropy_rows(Forward& f, Var logits, std::span<const std::int64_t> targets) {
  const std::size_t n = logits.value().rows();
  const std::size_t v = logits.value().cols();
  if (targets.size() != n) {
    throw ShapeError("cross-entropy: " + std::to_string(targets.size()) + " targets for logits " +
                     shape_string(logits.shape()));
  }
  Tensor onehot(Shape{n, v});
  for (std::size_t i = 0; i < n; ++i) {
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= v) {
      throw std::out_of_range("cross-entropy: target " + std::to_string(targets[i]) + " outside " +
                              std::to_string(v) + " classes");
    }
    onehot.at(i, static_cast<std::size_t>(targets[i])) = 1.0;
  }
  Var picked = sum(mul(log_softmax(f, logits), f.constant(std::move(onehot))), -1);
  return scale(reshape(picked, Shape{n, 1}), -1.0);
}

}  // namespace ergae
