#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>

#include "ergae/validate.hpp"

#ifndef ERGAE_TEST_DATA_DIR
#define ERGAE_TEST_DATA_DIR "tests/data"
#endif

namespace ergae::testing {

std::string data_path(const std::string& name) { return std::string(ERGAE_TEST_DATA_DIR) + "/" + name; }

namespace {

double evaluate(const std::function<Var(Forward&)>& loss, bool training) {
  Tape tape;
  tape.set_recording(false);
  Forward f(tape, training);
  return loss(f).value().item();
}

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Tensor t(std::move(shape));
  for (double& x : t.values()) x = u(rng);
  return t;
}

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng() % (hi - lo + 1));
}

std::string random_word(std::mt19937_64& rng, std::size_t max_len) {
  static const std::string alphabet = "abcde";
  std::string s;
  const std::size_t n = pick(rng, 0, max_len);
  for (std::size_t i = 0; i < n; ++i) s += alphabet[rng() % alphabet.size()];
  return s;
}

// Contracts an output against fixed random weights so every entry matters.
Var contract(Forward& f, Var out, const Tensor& weights) { return sum_all(mul(out, f.constant(weights))); }

}  // namespace

GradientCheck check_gradients(const std::function<Var(Forward&)>& loss, const std::vector<Parameter*>& params,
                              bool training, std::mt19937_64& rng, std::size_t max_coordinates, double step) {
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    Forward f(tape, training);
    tape.backward(loss(f));
  }
  std::vector<std::pair<Parameter*, std::size_t>> coords;
  for (Parameter* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) coords.emplace_back(p, i);
  }
  std::shuffle(coords.begin(), coords.end(), rng);
  if (coords.size() > max_coordinates) coords.resize(max_coordinates);

  double diff = 0.0, na = 0.0, nn = 0.0;
  for (auto [p, i] : coords) {
    const double analytic = p->grad[i];
    const double saved = p->value[i];
    p->value[i] = saved + step;
    const double up = evaluate(loss, training);
    p->value[i] = saved - step;
    const double down = evaluate(loss, training);
    p->value[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    diff += (analytic - numeric) * (analytic - numeric);
    na += analytic * analytic;
    nn += numeric * numeric;
  }
  GradientCheck r;
  r.coordinates = coords.size();
  const double denom = std::sqrt(na) + std::sqrt(nn);
  r.relative_error = denom > 0.0 ? std::sqrt(diff) / denom : 0.0;
  return r;
}

DomainSchema mixed_schema(bool distribution_kld) {
  DomainSchema base = schema_from_json(Json::parse(R"({
    "entity_types": {"alpha": ["amount", "kind", "label"], "beta": ["spot", "mix", "when", "size"]},
    "properties": {
      "amount": {"type": "scalar"}, "kind": {"type": "categorical"}, "label": {"type": "text"},
      "spot": {"type": "place"}, "mix": {"type": "distribution"}, "when": {"type": "date"},
      "size": {"type": "scalar"}
    },
    "relationships": {
      "link": {"source_entity_type": "alpha", "target_entity_type": "beta"},
      "back": {"source_entity_type": "beta", "target_entity_type": "alpha"},
      "peer": {"source_entity_type": "alpha", "target_entity_type": "alpha"}
    }
  })"));
  Json rules = Json::array();
  rules.push_back(Json::array({"$.properties.*", {{"hidden_size", 4}, {"encoded_size", 3}, {"embedding_size", 3}}}));
  if (!distribution_kld) rules.push_back(Json::array({"$.properties.mix", {{"loss", "MSE"}}}));
  return apply_rules(base, rules_from_json(rules));
}

GraphFixture mixed_graph(std::size_t entities, std::uint64_t seed, bool distribution_kld) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::bernoulli_distribution present(0.8);
  std::vector<Json> records;
  std::vector<std::string> alphas, betas;
  for (std::size_t i = 0; i < entities; ++i) {
    const bool alpha = i % 2 == 0;
    Json r{{"entity_type", alpha ? "alpha" : "beta"}, {"id", (alpha ? "a" : "b") + std::to_string(i)}};
    if (alpha) {
      if (present(rng)) r["amount"] = u(rng) * 5.0;
      if (present(rng)) r["kind"] = std::string(1, static_cast<char>('p' + rng() % 3));
      if (present(rng)) r["label"] = random_word(rng, 4);
      alphas.push_back(r["id"]);
    } else {
      if (present(rng)) r["spot"] = {{"latitude", u(rng) * 80.0}, {"longitude", u(rng) * 170.0}};
      if (present(rng)) r["mix"] = {std::abs(u(rng)) + 0.1, std::abs(u(rng)), std::abs(u(rng)) + 0.05};
      if (present(rng)) r["when"] = format_iso_date(static_cast<long long>(pick(rng, 0, 20000)));
      if (present(rng)) r["size"] = u(rng);
      betas.push_back(r["id"]);
    }
    records.push_back(std::move(r));
  }
  auto add_edge = [&](Json& r, const char* rel, const std::string& target) {
    if (!r.contains(rel)) r[rel] = Json::array();
    r[rel].push_back(target);
  };
  const std::size_t edges = entities + entities / 2;
  for (std::size_t k = 0; k < edges && !alphas.empty() && !betas.empty(); ++k) {
    const std::size_t kind = rng() % 3;
    if (kind == 0) {
      const std::string& s = alphas[rng() % alphas.size()];
      add_edge(records[std::stoul(s.substr(1))], "link", betas[rng() % betas.size()]);
    } else if (kind == 1) {
      const std::string& s = betas[rng() % betas.size()];
      add_edge(records[std::stoul(s.substr(1))], "back", alphas[rng() % alphas.size()]);
    } else {
      const std::string& s = alphas[rng() % alphas.size()];
      add_edge(records[std::stoul(s.substr(1))], "peer", alphas[rng() % alphas.size()]);
    }
  }
  GraphFixture fx;
  fx.schema = std::make_shared<const DomainSchema>(mixed_schema(distribution_kld));
  fx.codecs = build_codecs(*fx.schema, records);
  fx.dataset = std::make_unique<Dataset>(fx.schema, fx.codecs, records);
  return fx;
}

WiringConfig tiny_wiring(std::size_t depth, Wiring wiring, bool bidirectional, std::uint64_t seed) {
  WiringConfig w;
  w.depth = depth;
  w.wiring = wiring;
  w.bidirectional = bidirectional;
  w.autoencoder_shape = {5, 3};
  w.summary_size = 2;
  w.seed = seed;
  return w;
}

std::vector<GradientCase> run_gradient_suite(std::size_t fixtures, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<GradientCase> cases;
  auto run = [&](const std::string& name, const std::function<double(std::mt19937_64&)>& one) {
    GradientCase c{name, fixtures, 0.0};
    for (std::size_t i = 0; i < fixtures; ++i) c.worst = std::max(c.worst, one(rng));
    cases.push_back(c);
  };

  run("mlp", [](std::mt19937_64& g) {
    ParameterStore store;
    Initializer init(g());
    const std::size_t in = pick(g, 1, 6), hid = pick(g, 1, 6), out = pick(g, 1, 5), n = pick(g, 1, 5);
    Mlp mlp(store, "mlp", in, {hid}, out, init);
    Parameter& x = store.add("x", random_tensor({n, in}, g));
    Tensor w = random_tensor({n, out}, g);
    return check_gradients([&](Forward& f) { return contract(f, mlp(f, f.param(x)), w); }, store.trainable(), true, g)
        .relative_error;
  });

  run("embedding", [](std::mt19937_64& g) {
    ParameterStore store;
    Initializer init(g());
    const std::size_t count = pick(g, 2, 8), dim = pick(g, 1, 5), n = pick(g, 1, 7);
    Embedding emb(store, "emb", count, dim, init);
    std::vector<std::int64_t> idx(n);
    for (auto& i : idx) i = static_cast<std::int64_t>(g() % (count + 1)) - 1;
    Tensor w = random_tensor({n, dim}, g);
    return check_gradients([&](Forward& f) { return contract(f, emb(f, idx), w); }, store.trainable(), true, g)
        .relative_error;
  });

  run("gru step", [](std::mt19937_64& g) {
    ParameterStore store;
    Initializer init(g());
    const std::size_t in = pick(g, 1, 5), h = pick(g, 1, 5), n = pick(g, 1, 4);
    GruCell cell(store, "gru", in, h, init);
    Parameter& x = store.add("x", random_tensor({n, in}, g));
    Parameter& h0 = store.add("h", random_tensor({n, h}, g));
    Tensor w = random_tensor({n, h}, g);
    return check_gradients([&](Forward& f) { return contract(f, cell(f, f.param(x), f.param(h0)), w); },
                           store.trainable(), true, g)
        .relative_error;
  });

  run("text encoder", [](std::mt19937_64& g) {
    ParameterStore store;
    Initializer init(g());
    const std::size_t symbols = pick(g, 4, 7), h = pick(g, 1, 4), n = pick(g, 1, 4);
    TextEncoder enc(store, "enc", symbols, pick(g, 1, 3), h, init);
    std::vector<Symbols> seqs(n);
    for (auto& s : seqs) {
      s.resize(pick(g, 0, 4));
      for (auto& c : s) c = static_cast<std::int32_t>(pick(g, 3, symbols - 1));
    }
    std::vector<const Symbols*> ptrs;
    for (const auto& s : seqs) ptrs.push_back(&s);
    Tensor w = random_tensor({n, h}, g);
    return check_gradients([&](Forward& f) { return contract(f, enc(f, ptrs), w); }, store.trainable(), true, g)
        .relative_error;
  });

  run("text decoder loss", [](std::mt19937_64& g) {
    ParameterStore store;
    Initializer init(g());
    const std::size_t symbols = pick(g, 4, 7), in = pick(g, 1, 4), n = pick(g, 1, 4);
    TextDecoder dec(store, "dec", in, symbols, pick(g, 1, 3), pick(g, 1, 4), init);
    Parameter& x = store.add("x", random_tensor({n, in}, g));
    std::vector<Symbols> seqs(n);
    for (auto& s : seqs) {
      s.resize(pick(g, 0, 3));
      for (auto& c : s) c = static_cast<std::int32_t>(pick(g, 3, symbols - 1));
    }
    std::vector<const Symbols*> ptrs;
    for (const auto& s : seqs) ptrs.push_back(&s);
    return check_gradients([&](Forward& f) { return sum_all(dec.loss(f, f.param(x), ptrs)); }, store.trainable(),
                           true, g)
        .relative_error;
  });

  run("batch-norm", [](std::mt19937_64& g) {
    ParameterStore store;
    const std::size_t features = pick(g, 1, 4), n = pick(g, 2, 6);
    BatchNorm bn(store, "bn", features);
    for (Parameter* p : store.trainable()) p->value = random_tensor(p->value.shape(), g);
    Parameter& x = store.add("x", random_tensor({n, features}, g, 2.0));
    Tensor w = random_tensor({n, features}, g);
    const bool training = g() % 4 != 0;
    return check_gradients([&](Forward& f) { return contract(f, bn(f, f.param(x)), w); }, store.trainable(),
                           training, g)
        .relative_error;
  });

  run("mse loss", [](std::mt19937_64& g) {
    ParameterStore store;
    const std::size_t n = pick(g, 1, 5), c = pick(g, 1, 4);
    Parameter& x = store.add("x", random_tensor({n, c}, g));
    Tensor target = random_tensor({n, c}, g);
    Tensor w = random_tensor({n, 1}, g);
    return check_gradients([&](Forward& f) { return contract(f, mse_rows(f, f.param(x), target), w); },
                           store.trainable(), true, g)
        .relative_error;
  });

  run("cross-entropy loss", [](std::mt19937_64& g) {
    ParameterStore store;
    const std::size_t n = pick(g, 1, 5), c = pick(g, 2, 6);
    Parameter& x = store.add("x", random_tensor({n, c}, g, 3.0));
    std::vector<std::int64_t> targets(n);
    for (auto& t : targets) t = static_cast<std::int64_t>(g() % c);
    Tensor w = random_tensor({n, 1}, g);
    return check_gradients([&](Forward& f) { return contract(f, cross_entropy_rows(f, f.param(x), targets), w); },
                           store.trainable(), true, g)
        .relative_error;
  });

  run("distribution losses", [](std::mt19937_64& g) {
    // KLD(target || softmax) and MSE on softmax, as configured per property.
    ParameterStore store;
    const std::size_t n = pick(g, 1, 5), c = pick(g, 2, 5);
    Parameter& x = store.add("x", random_tensor({n, c}, g, 2.0));
    Tensor target({n, c});
    for (std::size_t i = 0; i < n; ++i) {
      double z = 0.0;
      for (std::size_t j = 0; j < c; ++j) z += target.at(i, j) = std::uniform_real_distribution<double>(0.01, 1.0)(g);
      for (std::size_t j = 0; j < c; ++j) target.at(i, j) /= z;
    }
    const bool kld = g() % 2 == 0;
    return check_gradients(
               [&](Forward& f) {
                 Var logits = f.param(x);
                 if (kld) return scale(sum_all(mul(log_softmax(f, logits), f.constant(target))), -1.0);
                 return sum_all(mse_rows(f, softmax(logits), target));
               },
               store.trainable(), true, g)
        .relative_error;
  });

  auto graph_case = [](std::mt19937_64& g, std::size_t depth, const std::string& prefix) {
    const auto wiring = static_cast<Wiring>(g() % 3);
    GraphFixture fx = mixed_graph(pick(g, 6, 10), g(), g() % 2 == 0);
    GraphModel model(*fx.schema, fx.codecs, tiny_wiring(depth, wiring, g() % 2 == 0, g()));
    std::vector<std::size_t> all(fx.dataset->size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    Batch batch = make_batch(*fx.dataset, all);
    // Zero biases put ReLU units with zero input exactly on the kink, where
    // central differences disagree with any subgradient.
    std::normal_distribution<double> jitter(0.0, 0.3);
    std::vector<Parameter*> params;
    for (Parameter* p : model.parameters().trainable()) {
      if (p->name.size() > 5 && p->name.compare(p->name.size() - 5, 5, ".bias") == 0) {
        for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] = jitter(g);
      }
      if (p->name.find(prefix) != std::string::npos) params.push_back(p);
    }
    return check_gradients([&](Forward& f) { return model.forward(f, *fx.dataset, batch).total; }, params, true, g,
                           200)
        .relative_error;
  };
  run("autoencoder", [&](std::mt19937_64& g) { return graph_case(g, pick(g, 0, 2), ".autoencoder"); });
  run("projector", [&](std::mt19937_64& g) { return graph_case(g, pick(g, 1, 2), "projector."); });
  run("property decoders", [&](std::mt19937_64& g) { return graph_case(g, pick(g, 0, 1), ".decoder."); });
  run("property encoders", [&](std::mt19937_64& g) { return graph_case(g, pick(g, 0, 1), "property."); });
  return cases;
}

GraphFixture random_multigraph(std::size_t entities, std::size_t edges, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Json> records;
  for (std::size_t i = 0; i < entities; ++i) {
    records.push_back({{"entity_type", "node"}, {"id", "n" + std::to_string(i)},
                       {"weight", std::uniform_real_distribution<double>(-1.0, 1.0)(rng)}});
  }
  for (std::size_t k = 0; k < edges; ++k) {
    auto& r = records[rng() % entities];
    if (!r.contains("to")) r["to"] = Json::array();
    r["to"].push_back("n" + std::to_string(rng() % entities));
  }
  GraphFixture fx;
  fx.schema = std::make_shared<const DomainSchema>(apply_rules(schema_from_json(Json::parse(R"({
    "entity_types": {"node": ["weight"]},
    "properties": {"weight": {"type": "scalar"}},
    "relationships": {"to": {"source_entity_type": "node", "target_entity_type": "node"}}
  })")), {}));
  fx.codecs = build_codecs(*fx.schema, records);
  fx.dataset = std::make_unique<Dataset>(fx.schema, fx.codecs, records);
  return fx;
}

DomainSchema hierarchy_schema(const HierarchySpec& spec) {
  Json doc = Json::parse(R"({
    "entity_types": {
      "group": ["family", "group_size"],
      "subgroup": ["subgroup_size"],
      "item": ["label", "measure"]
    },
    "properties": {
      "family": {"type": "categorical"},
      "group_size": {"type": "scalar"},
      "subgroup_size": {"type": "scalar"},
      "label": {"type": "categorical"},
      "measure": {"type": "scalar"}
    },
    "relationships": {
      "in_group": {"source_entity_type": "subgroup", "target_entity_type": "group"},
      "in_subgroup": {"source_entity_type": "item", "target_entity_type": "subgroup"}
    }
  })");
  for (std::size_t k = 0; k < spec.features; ++k) {
    const std::string name = "feature" + std::to_string(k);
    doc["entity_types"]["item"].push_back(name);
    doc["properties"][name] = {{"type", "categorical"}};
  }
  return schema_from_json(doc);
}

std::vector<Json> hierarchy_entities(const HierarchySpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise;
  std::bernoulli_distribution faithful(spec.fidelity);
  auto value = [&](std::size_t v) { return "v" + std::to_string(v); };
  std::vector<Json> out;
  for (std::size_t g = 0; g < spec.groups; ++g) {
    const std::string family = "f" + std::to_string(rng() % spec.categories);
    std::vector<std::size_t> profile(spec.features);
    for (auto& v : profile) v = rng() % spec.feature_values;
    const std::string gid = "g" + std::to_string(g);
    out.push_back({{"entity_type", "group"}, {"id", gid}, {"family", family},
                   {"group_size", static_cast<double>(spec.subgroups_per_group) + noise(rng)}});
    for (std::size_t s = 0; s < spec.subgroups_per_group; ++s) {
      const std::string sid = gid + "_s" + std::to_string(s);
      out.push_back({{"entity_type", "subgroup"}, {"id", sid}, {"in_group", gid},
                     {"subgroup_size", static_cast<double>(spec.items_per_subgroup) + noise(rng)}});
      for (std::size_t i = 0; i < spec.items_per_subgroup; ++i) {
        Json item{{"entity_type", "item"}, {"id", sid + "_i" + std::to_string(i)}, {"in_subgroup", sid},
                  {"label", family}, {"measure", noise(rng)}};
        for (std::size_t k = 0; k < spec.features; ++k) {
          item["feature" + std::to_string(k)] = value(faithful(rng) ? profile[k] : rng() % spec.feature_values);
        }
        out.push_back(std::move(item));
      }
    }
  }
  return out;
}

DomainSchema classifier_schema() {
  return schema_from_json(Json::parse(R"({
    "entity_types": {"point": ["x", "y", "side"]},
    "properties": {"x": {"type": "scalar"}, "y": {"type": "scalar"}, "side": {"type": "categorical"}},
    "relationships": {}
  })"));
}

std::vector<Json> separable_points(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Json> out;
  while (out.size() < count) {
    const double x = u(rng), y = u(rng);
    const double s = 0.8 * x - 0.6 * y + 0.1;
    if (std::abs(s) < 0.1) continue;  // margin
    out.push_back({{"entity_type", "point"}, {"id", "p" + std::to_string(out.size())}, {"x", x}, {"y", y},
                   {"side", s > 0 ? "east" : "west"}});
  }
  return out;
}

Json random_value(PropertyType type, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  switch (type) {
    case PropertyType::kScalar:
      return u(rng) * std::pow(10.0, std::uniform_int_distribution<int>(-3, 6)(rng));
    case PropertyType::kCategorical: {
      const auto k = rng() % 3;
      if (k == 0) return "c" + std::to_string(rng() % 20);
      if (k == 1) return static_cast<int>(rng() % 20);
      return rng() % 2 == 0;
    }
    case PropertyType::kText: {
      static const std::u32string alphabet = U"abcxyz éü漢字 ";
      std::u32string s;
      const std::size_t n = rng() % 12;
      for (std::size_t i = 0; i < n; ++i) s += alphabet[rng() % alphabet.size()];
      return utf8_encode(s);
    }
    case PropertyType::kDate:
      return format_iso_date(std::uniform_int_distribution<long long>(-200000, 200000)(rng));
    case PropertyType::kPlace:
      return Json{{"latitude", u(rng) * 90.0}, {"longitude", u(rng) * 180.0}};
    case PropertyType::kDistribution: {
      Json d = Json::array();
      for (int i = 0; i < 4; ++i) d.push_back(std::abs(u(rng)) + (i == 0 ? 0.01 : 0.0));
      return d;
    }
    case PropertyType::kImage:
      return "image" + std::to_string(rng() % 100) + ".png";
  }
  return nullptr;
}

std::vector<std::size_t> hop_distances(const Dataset& dataset, std::size_t source) {
  std::vector<std::vector<std::size_t>> adj(dataset.size());
  for (const auto& edges : dataset.edges()) {
    for (const auto& [a, b] : edges) {
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
  }
  const std::size_t far = static_cast<std::size_t>(-1);
  std::vector<std::size_t> dist(dataset.size(), far);
  std::deque<std::size_t> queue{source};
  dist[source] = 0;
  while (!queue.empty()) {
    const std::size_t u = queue.front();
    queue.pop_front();
    for (std::size_t v : adj[u]) {
      if (dist[v] == far) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
    }
  }
  return dist;
}

}  // namespace ergae::testing
