#include "ergae/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ergae/adam.hpp"

namespace ergae {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix(splitmix(splitmix(seed) ^ a) ^ b);
}

bool is_identity(const std::vector<std::size_t>& entities, std::size_t n) {
  if (entities.size() != n) return false;
  for (std::size_t i = 0; i < n; ++i) {
    if (entities[i] != i) return false;
  }
  return true;
}

std::vector<std::size_t> all_entities(const Dataset& d) {
  std::vector<std::size_t> v(d.size());
  std::iota(v.begin(), v.end(), 0);
  return v;
}

}  // namespace

Split split_dataset(const Dataset& dataset, std::array<double, 3> fractions, std::uint64_t seed) {
  double total = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0)) throw std::invalid_argument("split fractions must be non-negative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("split fractions must sum to 1");
  auto components = connected_components(dataset);
  std::mt19937_64 rng(seed);
  for (std::size_t i = components.size(); i > 1; --i) {
    std::swap(components[i - 1], components[static_cast<std::size_t>(rng() % i)]);
  }
  std::array<std::size_t, 3> capacity{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    capacity[k] = static_cast<std::size_t>(std::llround(fractions[k] * static_cast<double>(dataset.size())));
    assigned += capacity[k];
  }
  // Rounding slack goes to train.
  if (assigned < dataset.size()) capacity[0] += dataset.size() - assigned;

  Split split;
  std::array<std::vector<std::size_t>*, 3> parts{&split.train, &split.dev, &split.test};
  for (const auto& c : components) {
    bool placed = false;
    for (std::size_t k = 0; k < 3 && !placed; ++k) {
      if (parts[k]->size() + c.entities.size() <= capacity[k]) {
        parts[k]->insert(parts[k]->end(), c.entities.begin(), c.entities.end());
        placed = true;
      }
    }
    if (!placed) {
      split.train.insert(split.train.end(), c.entities.begin(), c.entities.end());
      split.warnings.push_back("component of " + std::to_string(c.entities.size()) +
                               " entities exceeds the remaining split capacity; assigned to train");
    }
  }
  for (auto* p : parts) std::sort(p->begin(), p->end());
  return split;
}

PreparedData prepare_dataset(DomainSchema resolved, std::vector<Json> records, std::array<double, 3> fractions,
                             std::uint64_t seed) {
  PreparedData out;
  out.schema = std::make_shared<const DomainSchema>(std::move(resolved));
  Dataset provisional(out.schema, build_codecs(*out.schema, records), records);
  out.split = split_dataset(provisional, fractions, seed);
  std::set<std::string> train_ids;
  for (std::size_t e : out.split.train) train_ids.insert(provisional.id(e));
  out.codecs = build_codecs(*out.schema, records, train_ids);
  out.dataset = Dataset(out.schema, out.codecs, std::move(records));
  return out;
}

void TrainConfig::check() const {
  if (early_stop < patience) throw std::invalid_argument("early stop must be at least the patience");
  if (sampling.budget == 0) throw std::invalid_argument("batch budget must be positive");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  mask.check();
}

Json TrainConfig::to_json() const {
  Json m{{"property_rate", mask.property_rate},
         {"entity_rate", mask.entity_rate},
         {"relationship_rate", mask.relationship_rate},
         {"property_rates", mask.property_rates},
         {"always_mask", mask.always_mask}};
  Json s{{"policy", to_string(sampling.policy)}, {"budget", sampling.budget}, {"radius", sampling.radius}};
  if (!sampling.anchor_type.empty()) s["anchor_type"] = sampling.anchor_type;
  if (!sampling.anchor_ids.empty()) s["anchor_ids"] = sampling.anchor_ids;
  return Json{{"max_epochs", max_epochs},   {"learning_rate", learning_rate},
              {"patience", patience},       {"early_stop", early_stop},
              {"sampling", std::move(s)},   {"mask", std::move(m)},
              {"seed", seed},               {"warm_start_epochs", warm_start_epochs}};
}

TrainConfig TrainConfig::from_json(const Json& j) {
  TrainConfig c;
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.patience = j.value("patience", c.patience);
  c.early_stop = j.value("early_stop", c.early_stop);
  c.seed = j.value("seed", c.seed);
  c.warm_start_epochs = j.value("warm_start_epochs", c.warm_start_epochs);
  if (j.contains("sampling")) {
    const Json& s = j.at("sampling");
    if (s.contains("policy")) c.sampling.policy = sampling_policy_from_string(s.at("policy").get<std::string>());
    c.sampling.budget = s.value("budget", c.sampling.budget);
    c.sampling.radius = s.value("radius", c.sampling.radius);
    c.sampling.anchor_type = s.value("anchor_type", std::string());
    if (s.contains("anchor_ids")) c.sampling.anchor_ids = s.at("anchor_ids").get<std::vector<std::string>>();
  }
  if (j.contains("mask")) {
    const Json& m = j.at("mask");
    c.mask.property_rate = m.value("property_rate", c.mask.property_rate);
    c.mask.entity_rate = m.value("entity_rate", 0.0);
    c.mask.relationship_rate = m.value("relationship_rate", 0.0);
    if (m.contains("property_rates")) c.mask.property_rates = m.at("property_rates").get<std::map<std::string, double>>();
    if (m.contains("always_mask")) c.mask.always_mask = m.at("always_mask").get<std::set<std::string>>();
  }
  c.check();
  return c;
}

Json EpochRecord::to_json() const {
  return Json{{"epoch", epoch},
              {"train_loss", train_loss},
              {"dev_loss", dev_loss},
              {"learning_rate", learning_rate},
              {"improved", improved}};
}

PlateauSchedule::Step PlateauSchedule::observe(double loss) {
  Step s;
  if (!seen_ || loss < best_) {
    best_ = loss;
    seen_ = true;
    bad_ = 0;
    s.improved = true;
    return s;
  }
  ++bad_;
  if (patience_ > 0 && bad_ % patience_ == 0) {
    lr_ *= 0.5;
    s.halved = true;
  }
  s.stop = bad_ >= early_stop_;
  return s;
}

double evaluate_loss(const GraphModel& model, const Dataset& dataset, const std::vector<std::size_t>& entities,
                     const std::set<std::string>& always_mask, std::size_t budget) {
  if (entities.empty()) return 0.0;
  Dataset owned;
  const Dataset* d = &dataset;
  if (!is_identity(entities, dataset.size())) {
    owned = dataset.subset(entities);
    d = &owned;
  }
  SamplingConfig cfg;
  cfg.budget = budget;
  MaskSpec mask;
  mask.always_mask = always_mask;
  double total = 0.0;
  for (auto& batch : sample_batches(*d, cfg, 0)) {
    if (!always_mask.empty()) batch = apply_mask(*d, std::move(batch), mask);
    Tape tape;
    tape.set_recording(false);
    Forward f(tape, false);
    total += model.forward(f, *d, batch).total.value().item();
  }
  return total / static_cast<double>(d->size());
}

namespace {

void warm_start(GraphModel& model, const Dataset& train, const TrainConfig& cfg) {
  const auto& schema = model.schema();
  for (std::size_t p = 0; p < schema.properties.size(); ++p) {
    if (!model.has_encoder(p)) continue;
    std::vector<Parameter*> params;
    for (Parameter* prm : model.property_parameters(p)) {
      if (prm->trainable) params.push_back(prm);
    }
    if (params.empty()) continue;
    Adam adam(AdamOptions{cfg.learning_rate});
    auto entities = all_entities(train);
    std::mt19937_64 rng(derive(cfg.seed, 0xA11CE, p));
    for (std::size_t epoch = 0; epoch < cfg.warm_start_epochs; ++epoch) {
      for (std::size_t i = entities.size(); i > 1; --i) std::swap(entities[i - 1], entities[rng() % i]);
      for (std::size_t start = 0; start < entities.size(); start += cfg.sampling.budget) {
        std::vector<std::size_t> chunk(entities.begin() + static_cast<std::ptrdiff_t>(start),
                                       entities.begin() + static_cast<std::ptrdiff_t>(
                                                              std::min(entities.size(), start + cfg.sampling.budget)));
        Tape tape;
        Forward f(tape, true);
        Var loss = model.property_autoencode_loss(f, train, chunk, p);
        if (!loss.requires_grad()) continue;
        for (Parameter* prm : params) prm->zero_grad();
        tape.backward(loss);
        adam.step(params);
      }
    }
  }
}

}  // namespace

TrainResult train(GraphModel& model, const Dataset& dataset, const Split& split, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.check();
  if (split.train.empty()) throw TrainingError("training split is empty");
  TrainResult result;
  result.warnings = split.warnings;
  const Dataset train_data = dataset.subset(split.train);
  const Dataset dev_data = dataset.subset(split.dev);
  if (dev_data.size() == 0) result.warnings.push_back("dev split is empty; early stopping uses the training loss");

  if (config.warm_start_epochs > 0) warm_start(model, train_data, config);

  std::vector<Parameter*> params = model.parameters().trainable();
  std::vector<Parameter*> everything = model.parameters().all();
  Adam adam(AdamOptions{config.learning_rate});
  PlateauSchedule schedule(config.learning_rate, config.patience, config.early_stop);
  std::vector<Tensor> best;
  auto snapshot = [&] {
    best.clear();
    for (const Parameter* p : everything) best.push_back(p->value);
  };
  snapshot();

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    adam.set_learning_rate(schedule.learning_rate());
    auto batches = sample_batches(train_data, config.sampling, derive(config.seed, epoch));
    double total = 0.0;
    std::size_t seen = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      MaskSpec mask = config.mask;
      mask.seed = derive(config.seed, epoch, b + 1);
      Batch batch = apply_mask(train_data, std::move(batches[b]), mask);
      Tape tape;
      Forward f(tape, true);
      ForwardOutput out = model.forward(f, train_data, batch);
      const double loss = out.total.value().item();
      if (!std::isfinite(loss)) {
        std::string culprit = "internal reconstruction";
        for (const auto& [name, v] : out.property_losses) {
          if (!std::isfinite(v.value().item())) {
            culprit = "property " + name;
            break;
          }
        }
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(b) +
                            " (" + culprit + ")");
      }
      total += loss;
      seen += batch.size();
      if (!out.total.requires_grad()) continue;
      for (Parameter* p : params) p->zero_grad();
      tape.backward(out.total);
      adam.step(params);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.learning_rate = adam.learning_rate();
    rec.train_loss = seen ? total / static_cast<double>(seen) : 0.0;
    rec.dev_loss = dev_data.size() ? evaluate_loss(model, dev_data, all_entities(dev_data), config.mask.always_mask,
                                                   std::max<std::size_t>(config.sampling.budget, 1024))
                                   : rec.train_loss;
    if (!std::isfinite(rec.dev_loss)) throw TrainingError("non-finite dev loss at epoch " + std::to_string(epoch));
    auto step = schedule.observe(rec.dev_loss);
    rec.improved = step.improved;
    if (step.improved) {
      snapshot();
      result.best_epoch = epoch;
      result.best_dev_loss = rec.dev_loss;
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (step.stop) {
      result.stopped_early = true;
      break;
    }
  }
  for (std::size_t i = 0; i < everything.size(); ++i) everything[i]->value = best[i];
  return result;
}

const PropertyMetrics* EvalReport::find(const std::string& property) const {
  for (const auto& m : properties) {
    if (m.property == property) return &m;
  }
  return nullptr;
}

Json EvalReport::to_json() const {
  Json props = Json::object();
  for (const auto& m : properties) {
    Json j{{"type", std::string(to_string(m.type))}, {"count", m.count}};
    if (m.accuracy) j["accuracy"] = *m.accuracy;
    if (m.mse) j["mse"] = *m.mse;
    if (m.exact_match) j["exact_match"] = *m.exact_match;
    if (m.char_accuracy) j["char_accuracy"] = *m.char_accuracy;
    props[m.property] = std::move(j);
  }
  return Json{{"entities", entities}, {"loss", loss}, {"properties", std::move(props)}};
}

namespace {

// Colours batch entities so that two entities within `radius` hops (edges
// taken as undirected) never share a colour.
std::vector<std::size_t> distance_colouring(const Batch& batch, std::size_t radius) {
  const std::size_t n = batch.size();
  std::vector<std::vector<std::size_t>> adj(n);
  for (const auto& edges : batch.edges) {
    for (const auto& [a, b] : edges) {
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
  }
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> colour(n, kNone);
  std::vector<std::size_t> dist(n, kNone);
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<std::size_t> seen{s};
    std::set<std::size_t> taken;
    dist[s] = 0;
    for (std::size_t q = 0; q < seen.size(); ++q) {
      const std::size_t u = seen[q];
      if (colour[u] != kNone) taken.insert(colour[u]);
      if (dist[u] == radius) continue;
      for (std::size_t v : adj[u]) {
        if (dist[v] == kNone) {
          dist[v] = dist[u] + 1;
          seen.push_back(v);
        }
      }
    }
    for (std::size_t u : seen) dist[u] = kNone;
    std::size_t c = 0;
    while (taken.count(c)) ++c;
    colour[s] = c;
  }
  return colour;
}

}  // namespace

EvalReport evaluate_masked(const GraphModel& model, const Dataset& dataset, const std::set<std::string>& masked,
                           const std::vector<std::size_t>& entities, std::size_t budget, MaskScope scope) {
  const DomainSchema& schema = model.schema();
  std::vector<std::size_t> props;
  for (const auto& name : masked) {
    auto p = schema.property_index(name);
    if (!p) throw std::invalid_argument("cannot evaluate unknown property '" + name + "'");
    props.push_back(*p);
  }
  EvalReport report;
  report.entities = entities.size();
  if (props.empty() || entities.empty()) return report;

  Dataset owned;
  const Dataset* d = &dataset;
  if (!is_identity(entities, dataset.size())) {
    owned = dataset.subset(entities);
    d = &owned;
  }
  struct Acc {
    std::size_t count = 0;
    double correct = 0.0;
    double squared = 0.0;
    double exact = 0.0;
    double chars_right = 0.0;
    double chars_total = 0.0;
  };
  std::vector<Acc> acc(props.size());
  MaskSpec mask;
  mask.always_mask = masked;
  SamplingConfig cfg;
  cfg.budget = budget;
  double loss = 0.0;
  for (const auto& plain : sample_batches(*d, cfg, 0)) {
    Batch batch = apply_mask(*d, plain, mask);
    Tape tape;
    tape.set_recording(false);
    Forward f(tape, false);
    ForwardOutput out = model.forward(f, *d, batch);
    loss += out.total.value().item();
    std::vector<Json> rec = model.reconstruct(f, out, *d, batch);
    std::vector<std::size_t> colour;
    std::size_t rounds = 1;
    if (scope == MaskScope::kIsolated) {
      colour = distance_colouring(plain, model.wiring().depth);
      rounds = colour.empty() ? 0 : *std::max_element(colour.begin(), colour.end()) + 1;
      rec.assign(plain.size(), Json());
      for (std::size_t c = 0; c < rounds; ++c) {
        Batch round = plain;
        for (std::size_t i = 0; i < round.size(); ++i) {
          if (colour[i] != c) continue;
          for (std::size_t p : props) round.hidden[i][p] = round.excluded[i][p] = 1;
        }
        Tape rt;
        rt.set_recording(false);
        Forward rf(rt, false);
        ForwardOutput ro = model.forward(rf, *d, round);
        std::vector<Json> rr = model.reconstruct(rf, ro, *d, round);
        for (std::size_t i = 0; i < round.size(); ++i) {
          if (colour[i] == c) rec[i] = std::move(rr[i]);
        }
      }
    }
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const std::size_t e = batch.entities[i];
      for (std::size_t k = 0; k < props.size(); ++k) {
        const std::size_t p = props[k];
        const PackedValue* truth = d->value(e, p);
        if (!truth || !model.has_decoder(d->entity_type(e), p)) continue;
        const PropertyCodec& codec = model.codecs()[p];
        const Json& guess = rec[i].at(schema.properties[p].name);
        Acc& a = acc[k];
        ++a.count;
        switch (codec.type()) {
          case PropertyType::kCategorical: {
            const auto truth_index = truth->symbols.at(0);
            if (!guess.is_null() && truth_index != codec.unknown_category() && codec.category_index(guess) == truth_index) {
              a.correct += 1.0;
            }
            break;
          }
          case PropertyType::kText: {
            const std::string want = codec.unpack(*truth).get<std::string>();
            const std::string got = guess.get<std::string>();
            if (want == got) a.exact += 1.0;
            const auto w = utf8_decode(want);
            const auto g = utf8_decode(got);
            const std::size_t len = std::max(w.size(), g.size());
            for (std::size_t c = 0; c < std::min(w.size(), g.size()); ++c) a.chars_right += w[c] == g[c] ? 1.0 : 0.0;
            a.chars_total += static_cast<double>(len);
            break;
          }
          default: {
            const PackedValue packed = codec.pack(guess);
            double s = 0.0;
            for (std::size_t c = 0; c < truth->dense.size(); ++c) {
              const double diff = packed.dense[c] - truth->dense[c];
              s += diff * diff;
            }
            a.squared += truth->dense.empty() ? 0.0 : s / static_cast<double>(truth->dense.size());
          }
        }
      }
    }
  }
  report.loss = loss / static_cast<double>(d->size());
  for (std::size_t k = 0; k < props.size(); ++k) {
    PropertyMetrics m;
    m.property = schema.properties[props[k]].name;
    m.type = schema.properties[props[k]].type;
    m.count = acc[k].count;
    if (m.count > 0) {
      const double n = static_cast<double>(m.count);
      switch (m.type) {
        case PropertyType::kCategorical:
          m.accuracy = 100.0 * acc[k].correct / n;
          break;
        case PropertyType::kText:
          m.exact_match = 100.0 * acc[k].exact / n;
          m.char_accuracy = acc[k].chars_total > 0 ? 100.0 * acc[k].chars_right / acc[k].chars_total : 100.0;
          break;
        case PropertyType::kImage:
          break;
        default:
          m.mse = acc[k].squared / n;
      }
    }
    report.properties.push_back(std::move(m));
  }
  return report;
}

double apply_operation(const std::string& op, double left, double right) {
  if (op == "add") return left + right;
  if (op == "sub") return left - right;
  if (op == "mul") return left * right;
  if (op == "div") return left / right;
  throw std::invalid_argument("unknown operation '" + op + "'");
}

namespace {

struct TreeBuilder {
  std::mt19937_64& rng;
  std::string prefix;
  std::size_t next = 0;

  double uniform(double lo, double hi) { return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53; }
  std::size_t pick(std::size_t n) { return static_cast<std::size_t>(rng() % n); }

  // Generates a subtree of `size` nodes into `nodes` (pre-order) and returns its value.
  double build(std::size_t size, std::vector<Json>& nodes) {
    static const char* kOps[] = {"add", "sub", "mul", "div"};
    const std::string id = prefix + std::to_string(next++);
    const std::size_t at = nodes.size();
    nodes.push_back(Json{{"entity_type", "expression"}, {"id", id}});
    if (size == 1) {
      const double c = uniform(-1.0, 1.0);
      nodes[at]["operation"] = "const";
      nodes[at]["value"] = c;
      return c;
    }
    const std::string op = kOps[pick(4)];
    const std::size_t left_size = 2 * pick((size - 1) / 2) + 1;
    const std::size_t right_size = size - 1 - left_size;
    const std::string left_id = prefix + std::to_string(next);
    const double left = build(left_size, nodes);
    const std::size_t right_at = nodes.size();
    const std::size_t right_next = next;
    const std::string right_id = prefix + std::to_string(next);
    double right = build(right_size, nodes);
    while (op == "div" && std::abs(right) < 0.1) {
      nodes.resize(right_at);
      next = right_next;
      right = build(right_size, nodes);
    }
    nodes[at]["operation"] = op;
    nodes[at]["value"] = apply_operation(op, left, right);
    nodes[at]["left"] = left_id;
    nodes[at]["right"] = right_id;
    return nodes[at]["value"].get<double>();
  }
};

}  // namespace

GeneratedData generate_arithmetic(std::size_t count, std::size_t max_nodes, std::uint64_t seed) {
  if (max_nodes == 0 || max_nodes % 2 == 0) throw std::invalid_argument("max nodes must be odd and at least 1");
  GeneratedData data;
  data.schema = schema_from_json(Json::parse(R"({
    "entity_types": {"expression": ["operation", "value"]},
    "properties": {"operation": {"type": "categorical"}, "value": {"type": "scalar"}},
    "relationships": {
      "left": {"source_entity_type": "expression", "target_entity_type": "expression"},
      "right": {"source_entity_type": "expression", "target_entity_type": "expression"}
    }
  })"));
  std::mt19937_64 rng(seed);
  const std::size_t choices = (max_nodes + 1) / 2;
  for (std::size_t t = 0; t < count; ++t) {
    TreeBuilder builder{rng, "t" + std::to_string(t) + "_n"};
    const std::size_t size = 2 * builder.pick(choices) + 1;
    std::vector<Json> nodes;
    builder.build(size, nodes);
    for (auto& n : nodes) data.entities.push_back(std::move(n));
  }
  return data;
}

}  // namespace ergae
