#include "ergae/graph_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "ergae/json_io.hpp"

namespace ergae {

std::string to_string(Wiring w) {
  switch (w) {
    case Wiring::kNaive:
      return "naive";
    case Wiring::kHighway:
      return "highway";
    case Wiring::kCulDeSac:
      return "cul-de-sac";
  }
  return "naive";
}

Wiring wiring_from_string(const std::string& name) {
  if (name == "naive") return Wiring::kNaive;
  if (name == "highway") return Wiring::kHighway;
  if (name == "cul-de-sac" || name == "culdesac") return Wiring::kCulDeSac;
  throw std::invalid_argument("unknown wiring '" + name + "' (naive, highway, cul-de-sac)");
}

void WiringConfig::check() const {
  if (autoencoder_shape.empty()) throw ModelError("autoencoder shape needs at least the bottleneck size");
  for (auto s : autoencoder_shape) {
    if (s == 0) throw ModelError("autoencoder layer sizes must be positive");
  }
  if (depth > 0 && summary_size == 0) throw ModelError("relationship summary size must be positive");
}

Json WiringConfig::to_json() const {
  return Json{{"depth", depth},
              {"wiring", to_string(wiring)},
              {"bidirectional", bidirectional},
              {"autoencoder_shape", autoencoder_shape},
              {"summary_size", summary_size},
              {"internal_loss", internal_loss},
              {"seed", seed}};
}

WiringConfig WiringConfig::from_json(const Json& j) {
  WiringConfig w;
  w.depth = j.value("depth", w.depth);
  if (j.contains("wiring")) w.wiring = wiring_from_string(j.at("wiring").get<std::string>());
  w.bidirectional = j.value("bidirectional", w.bidirectional);
  if (j.contains("autoencoder_shape")) w.autoencoder_shape = j.at("autoencoder_shape").get<std::vector<std::size_t>>();
  w.summary_size = j.value("summary_size", w.summary_size);
  w.internal_loss = j.value("internal_loss", w.internal_loss);
  w.seed = j.value("seed", w.seed);
  w.check();
  return w;
}

namespace {

std::string meta_string(const PropertyDef& def, const char* key) {
  auto it = def.meta.find(key);
  if (it == def.meta.end()) {
    throw ModelError("property " + def.name + ": meta has no '" + key + "' (were the default rules applied?)");
  }
  if (!it->is_string()) throw ModelError("property " + def.name + ": meta." + key + " must be a string");
  return it->get<std::string>();
}

std::size_t meta_size(const PropertyDef& def, const char* key, std::size_t fallback) {
  auto it = def.meta.find(key);
  if (it == def.meta.end()) return fallback;
  if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<std::int64_t>() >= 0)) {
    throw ModelError("property " + def.name + ": meta." + key + " must be a non-negative integer");
  }
  return it->get<std::size_t>();
}

bool is_dense(PropertyType t) {
  return t == PropertyType::kScalar || t == PropertyType::kDate || t == PropertyType::kPlace ||
         t == PropertyType::kDistribution;
}

std::vector<std::size_t> reversed_hidden(const std::vector<std::size_t>& shape) {
  std::vector<std::size_t> h(shape.begin(), shape.end() - 1);
  std::reverse(h.begin(), h.end());
  return h;
}

Tensor dense_rows(const std::vector<const PackedValue*>& values, std::size_t width) {
  Tensor t(Shape{values.size(), width});
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i]->dense.size() != width) throw ModelError("packed value has the wrong width");
    std::copy(values[i]->dense.begin(), values[i]->dense.end(), t.data() + i * width);
  }
  return t;
}

}  // namespace

bool same_structure(const DomainSchema& a, const DomainSchema& b) {
  if (a.entity_types.size() != b.entity_types.size() || a.properties.size() != b.properties.size() ||
      a.relationships.size() != b.relationships.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.entity_types.size(); ++i) {
    if (a.entity_types[i].name != b.entity_types[i].name ||
        a.entity_types[i].properties != b.entity_types[i].properties) {
      return false;
    }
  }
  for (std::size_t i = 0; i < a.properties.size(); ++i) {
    if (a.properties[i].name != b.properties[i].name || a.properties[i].type != b.properties[i].type) return false;
  }
  for (std::size_t i = 0; i < a.relationships.size(); ++i) {
    const auto& x = a.relationships[i];
    const auto& y = b.relationships[i];
    if (x.name != y.name || x.source_entity_type != y.source_entity_type ||
        x.target_entity_type != y.target_entity_type) {
      return false;
    }
  }
  return true;
}

GraphModel::GraphModel(DomainSchema schema, std::vector<PropertyCodec> codecs, WiringConfig wiring)
    : schema_(std::make_shared<const DomainSchema>(std::move(schema))),
      codecs_(std::move(codecs)),
      wiring_(std::move(wiring)) {
  wiring_.check();
  auto problems = check_schema(*schema_);
  if (!problems.ok()) throw SchemaError(problems);
  if (codecs_.size() != schema_->properties.size()) throw ModelError("one codec per schema property is required");
  for (std::size_t p = 0; p < codecs_.size(); ++p) {
    if (codecs_[p].property() != schema_->properties[p].name || codecs_[p].type() != schema_->properties[p].type) {
      throw ModelError("codec for " + schema_->properties[p].name + " does not match the schema");
    }
  }
  build();
}

std::size_t GraphModel::decoder_output_size(std::size_t p) const {
  const PropertyCodec& c = codecs_[p];
  switch (c.type()) {
    case PropertyType::kCategorical:
      return c.vocabulary_size() + 1;  // last index = unknown
    case PropertyType::kText:
      return c.symbol_count();
    default:
      return c.dense_width();
  }
}

void GraphModel::build() {
  const DomainSchema& s = *schema_;
  Initializer init(wiring_.seed);
  properties_.assign(s.properties.size(), {});

  for (std::size_t p = 0; p < s.properties.size(); ++p) {
    const PropertyDef& def = s.properties[p];
    const PropertyCodec& codec = codecs_[p];
    PropertyModel& m = properties_[p];
    const std::string base = "property." + def.name;
    const std::string enc = meta_string(def, "encoder");
    const std::string dec = meta_string(def, "decoder");
    const std::string loss = def.meta.contains("loss") ? meta_string(def, "loss") : "MSE";
    m.hidden = meta_size(def, "hidden_size", 128);
    m.embedding = meta_size(def, "embedding_size", 32);
    if (def.meta.contains("loss_weight")) {
      if (!def.meta.at("loss_weight").is_number()) throw ModelError(def.name + ": loss_weight must be a number");
      m.weight = def.meta.at("loss_weight").get<double>();
      if (!(m.weight >= 0.0)) throw ModelError(def.name + ": loss_weight must be >= 0");
    }

    if (enc == "NullEncoder" || enc == "Null") {
      m.encoder = EncoderKind::kNull;
      m.encoded = meta_size(def, "encoded_size", 0);
    } else if (def.type == PropertyType::kImage) {
      throw ModelError("property " + def.name + ": image properties only support NullEncoder/NullDecoder");
    } else if (enc == "MLP") {
      if (!is_dense(def.type)) throw ModelError("property " + def.name + ": MLP encoder needs a numeric property type");
      m.encoder = EncoderKind::kMlp;
      m.encoded = meta_size(def, "encoded_size", m.hidden);
      if (codec.dense_width() == 0) throw ModelError("property " + def.name + ": zero-width numeric form");
      m.mlp = Mlp(store_, base + ".encoder", codec.dense_width(), {m.hidden}, m.encoded, init);
    } else if (enc == "Embed") {
      if (def.type != PropertyType::kCategorical) throw ModelError("property " + def.name + ": Embed needs categorical");
      m.encoder = EncoderKind::kEmbed;
      m.encoded = m.embedding;
      m.embed = Embedding(store_, base + ".encoder", codec.vocabulary_size() + 1, m.embedding, init);
    } else if (enc == "EmbedGRU") {
      if (def.type != PropertyType::kText) throw ModelError("property " + def.name + ": EmbedGRU needs text");
      m.encoder = EncoderKind::kEmbedGru;
      m.encoded = m.hidden;
      m.text = TextEncoder(store_, base + ".encoder", codec.symbol_count(), m.embedding, m.hidden, init);
    } else {
      throw ModelError("property " + def.name + ": unknown encoder '" + enc + "'");
    }
    if (m.encoder != EncoderKind::kNull && m.encoded > 0) m.norm.emplace(store_, base + ".norm", m.encoded);

    if (dec == "NullDecoder" || dec == "Null") {
      m.decoder = DecoderKind::kNull;
    } else if (def.type == PropertyType::kImage) {
      throw ModelError("property " + def.name + ": image properties only support NullEncoder/NullDecoder");
    } else if (dec == "MLP") {
      if (def.type == PropertyType::kText) throw ModelError("property " + def.name + ": text needs the GRU decoder");
      m.decoder = DecoderKind::kMlp;
    } else if (dec == "GRU") {
      if (def.type != PropertyType::kText) throw ModelError("property " + def.name + ": GRU decoder needs text");
      m.decoder = DecoderKind::kGru;
    } else {
      throw ModelError("property " + def.name + ": unknown decoder '" + dec + "'");
    }

    if (loss == "MSE") {
      m.loss = LossKind::kMse;
    } else if (loss == "KLD") {
      m.loss = LossKind::kKld;
    } else {
      throw ModelError("property " + def.name + ": unknown loss '" + loss + "'");
    }
    if (m.decoder != DecoderKind::kNull) {
      const bool needs_kld = def.type == PropertyType::kCategorical || def.type == PropertyType::kText;
      const bool mse_only = def.type == PropertyType::kScalar || def.type == PropertyType::kDate ||
                            def.type == PropertyType::kPlace;
      if ((needs_kld && m.loss != LossKind::kKld) || (mse_only && m.loss != LossKind::kMse)) {
        throw ModelError("property " + def.name + ": loss " + loss + " does not apply to " +
                         std::string(to_string(def.type)) + " values");
      }
    }
  }

  const std::size_t D = wiring_.depth;
  const std::size_t B = wiring_.bottleneck();
  types_.assign(s.entity_types.size(), {});
  for (std::size_t t = 0; t < s.entity_types.size(); ++t) {
    TypeModel& tm = types_[t];
    for (const auto& name : s.entity_types[t].properties) {
      const std::size_t p = *s.property_index(name);
      tm.properties.push_back(p);
      tm.offsets.push_back(tm.representation);
      tm.representation += properties_[p].encoded;
    }
    if (D > 0) {
      for (std::size_t r = 0; r < s.relationships.size(); ++r) {
        const auto& rel = s.relationships[r];
        const std::size_t src = *s.entity_type_index(rel.source_entity_type);
        const std::size_t tgt = *s.entity_type_index(rel.target_entity_type);
        if (src == t) tm.slots.push_back({r, false, t, tgt});
        if (wiring_.bidirectional && tgt == t) tm.slots.push_back({r, true, t, src});
      }
    }
  }

  for (std::size_t t = 0; t < types_.size(); ++t) {
    TypeModel& tm = types_[t];
    const std::string base = "type." + s.entity_types[t].name;
    std::vector<std::size_t> enc_hidden(wiring_.autoencoder_shape.begin(), wiring_.autoencoder_shape.end() - 1);
    for (std::size_t d = 0; d <= D; ++d) {
      Autoencoder ae;
      const std::string name = base + ".autoencoder" + std::to_string(d);
      ae.encoder = Mlp(store_, name + ".encoder", autoencoder_input_size(t, d), enc_hidden, B, init);
      ae.decoder = Mlp(store_, name + ".decoder", B, reversed_hidden(wiring_.autoencoder_shape), tm.representation,
                       init);
      tm.autoencoders.push_back(std::move(ae));
    }
    const std::size_t fae = decoder_input_size(t);
    for (std::size_t p : tm.properties) {
      const PropertyModel& pm = properties_[p];
      if (pm.decoder == DecoderKind::kNull) continue;
      DecoderModel dm;
      dm.kind = pm.decoder;
      const std::string name = base + ".decoder." + s.properties[p].name;
      if (pm.decoder == DecoderKind::kMlp) {
        dm.mlp = Mlp(store_, name, fae, {pm.hidden}, decoder_output_size(p), init);
      } else {
        dm.text = TextDecoder(store_, name, fae, codecs_[p].symbol_count(), pm.embedding, pm.hidden, init);
      }
      tm.decoders.emplace(p, std::move(dm));
    }
  }

  if (D > 0) {
    for (std::size_t t = 0; t < types_.size(); ++t) {
      for (const Slot& slot : types_[t].slots) {
        auto key = std::make_pair(slot.relationship, slot.reverse);
        if (projectors_.count(key)) continue;
        const std::string name = "projector." + s.relationships[slot.relationship].name + (slot.reverse ? ".reverse" : "");
        projectors_.emplace(key, Projector{Linear(store_, name, B, wiring_.summary_size, init)});
      }
    }
  }
}

std::size_t GraphModel::decoder_input_size(std::size_t type) const {
  const std::size_t r = types_[type].representation;
  return wiring_.wiring == Wiring::kHighway ? (wiring_.depth + 1) * r : r;
}

std::size_t GraphModel::autoencoder_input_size(std::size_t type, std::size_t depth) const {
  const TypeModel& tm = types_[type];
  return depth == 0 ? tm.representation : tm.representation + tm.slots.size() * wiring_.summary_size;
}

std::size_t GraphModel::autoencoder_count() const {
  std::size_t n = 0;
  for (const auto& t : types_) n += t.autoencoders.size();
  return n;
}

bool GraphModel::has_encoder(std::size_t property) const {
  return properties_[property].encoder != EncoderKind::kNull;
}

bool GraphModel::has_decoder(std::size_t type, std::size_t property) const {
  return types_[type].decoders.count(property) > 0;
}

Var GraphModel::encode_property(Forward& f, std::size_t p, const std::vector<const PackedValue*>& values) const {
  const PropertyModel& m = properties_[p];
  Var out;
  switch (m.encoder) {
    case EncoderKind::kMlp:
      out = m.mlp(f, f.constant(dense_rows(values, codecs_[p].dense_width())));
      break;
    case EncoderKind::kEmbed: {
      std::vector<std::int64_t> idx;
      for (const auto* v : values) idx.push_back(v->symbols.at(0));
      out = m.embed(f, idx);
      break;
    }
    case EncoderKind::kEmbedGru: {
      std::vector<const Symbols*> seqs;
      for (const auto* v : values) seqs.push_back(&v->symbols);
      out = m.text(f, seqs);
      break;
    }
    case EncoderKind::kNull:
      return f.constant(Tensor(Shape{values.size(), m.encoded}));
  }
  return m.norm ? (*m.norm)(f, out) : out;
}

Var GraphModel::decode_loss(Forward& f, const DecoderModel& dec, std::size_t p, Var input,
                            const std::vector<const PackedValue*>& targets, Var* decoded) const {
  const PropertyModel& pm = properties_[p];
  const PropertyCodec& codec = codecs_[p];
  if (dec.kind == DecoderKind::kGru) {
    std::vector<const Symbols*> seqs;
    for (const auto* v : targets) seqs.push_back(&v->symbols);
    return dec.text.loss(f, input, seqs);
  }
  Var raw = dec.mlp(f, input);
  switch (codec.type()) {
    case PropertyType::kCategorical: {
      std::vector<std::int64_t> idx;
      for (const auto* v : targets) idx.push_back(v->symbols.at(0));
      if (decoded) *decoded = softmax(raw);
      return cross_entropy_rows(f, raw, idx);
    }
    case PropertyType::kDistribution: {
      Tensor target = dense_rows(targets, codec.dense_width());
      if (pm.loss == LossKind::kKld) {
        if (decoded) *decoded = softmax(raw);
        Tensor entropy_part(Shape{targets.size(), 1});
        for (std::size_t i = 0; i < targets.size(); ++i) {
          for (double t : targets[i]->dense) entropy_part[i] += t > 0.0 ? t * std::log(t) : 0.0;
        }
        Var cross = sum(mul(log_softmax(f, raw), f.constant(target)), -1);
        return sub(f.constant(std::move(entropy_part)), reshape(cross, Shape{targets.size(), 1}));
      }
      Var probs = softmax(raw);
      if (decoded) *decoded = probs;
      return mse_rows(f, probs, target);
    }
    default: {
      if (decoded) *decoded = raw;
      return mse_rows(f, raw, dense_rows(targets, codec.dense_width()));
    }
  }
}

ForwardOutput GraphModel::forward(Forward& f, const Dataset& data, const Batch& batch, ForwardOptions options) const {
  const DomainSchema& s = *schema_;
  const std::size_t T = types_.size();
  const std::size_t D = wiring_.depth;
  const std::size_t n = batch.size();
  if (&data.schema() != schema_.get() && !same_structure(data.schema(), *schema_)) {
    throw ModelError("dataset schema differs from the model schema");
  }
  ForwardOutput out;
  out.members.assign(T, {});
  out.row_of.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t t = data.entity_type(batch.entities[i]);
    out.row_of[i] = out.members[t].size();
    out.members[t].push_back(i);
  }

  auto readable = [&](std::size_t i, std::size_t p) -> const PackedValue* {
    if (!batch.hidden.empty() && batch.hidden[i][p]) return nullptr;
    return data.value(batch.entities[i], p);
  };

  // Property encoders run once over every visible value of the property,
  // across entity-types; blocks are then gathered per type.
  std::vector<std::vector<std::vector<std::int64_t>>> block_index(T);
  for (std::size_t t = 0; t < T; ++t) block_index[t].assign(types_[t].properties.size(), {});
  std::vector<Var> encoded(s.properties.size());
  for (std::size_t p = 0; p < s.properties.size(); ++p) {
    if (properties_[p].encoded == 0) continue;
    std::vector<const PackedValue*> values;
    for (std::size_t t = 0; t < T; ++t) {
      const auto& props = types_[t].properties;
      auto k = std::find(props.begin(), props.end(), p);
      if (k == props.end()) continue;
      auto& idx = block_index[t][static_cast<std::size_t>(k - props.begin())];
      idx.assign(out.members[t].size(), -1);
      for (std::size_t r = 0; r < out.members[t].size(); ++r) {
        const std::size_t i = out.members[t][r];
        if (const PackedValue* v = readable(i, p)) {
          if (options.encoder_reads) options.encoder_reads->emplace_back(i, p);
          idx[r] = static_cast<std::int64_t>(values.size());
          values.push_back(v);
        }
      }
    }
    if (!values.empty()) encoded[p] = encode_property(f, p, values);
  }

  out.representations.assign(T, Var());
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t nt = out.members[t].size();
    if (nt == 0) continue;
    std::vector<Var> blocks;
    for (std::size_t k = 0; k < types_[t].properties.size(); ++k) {
      const std::size_t p = types_[t].properties[k];
      const std::size_t F = properties_[p].encoded;
      if (F == 0) continue;
      if (encoded[p].valid()) {
        blocks.push_back(gather_rows(encoded[p], block_index[t][k]));
      } else {
        blocks.push_back(f.constant(Tensor(Shape{nt, F})));
      }
    }
    out.representations[t] = blocks.empty() ? f.constant(Tensor(Shape{nt, 0})) : concat(blocks, -1);
  }

  // Neighbor lists per slot (receiver row -> sender rows with mean weights).
  auto slot_rows = [&](const Slot& slot) {
    auto rows = std::make_shared<SparseRows>(out.members[slot.receiver_type].size());
    std::vector<std::size_t> degree(rows->size(), 0);
    for (const auto& [a, b] : batch.edges[slot.relationship]) {
      const std::size_t recv = slot.reverse ? b : a;
      const std::size_t send = slot.reverse ? a : b;
      (*rows)[out.row_of[recv]].emplace_back(out.row_of[send], 1.0);
      ++degree[out.row_of[recv]];
    }
    for (std::size_t r = 0; r < rows->size(); ++r) {
      for (auto& [j, w] : (*rows)[r]) w = 1.0 / static_cast<double>(degree[r]);
    }
    return std::make_pair(rows, degree);
  };

  out.outputs.assign(D + 1, std::vector<Var>(T));
  out.bottlenecks.assign(D + 1, std::vector<Var>(T));
  for (std::size_t d = 0; d <= D; ++d) {
    for (std::size_t t = 0; t < T; ++t) {
      const std::size_t nt = out.members[t].size();
      if (nt == 0) continue;
      Var input = out.representations[t];
      if (d > 0) {
        std::vector<Var> parts{out.outputs[d - 1][t]};
        for (const Slot& slot : types_[t].slots) {
          Var sender = out.bottlenecks[d - 1][slot.sender_type];
          auto [rows, degree] = slot_rows(slot);
          const bool any = std::any_of(degree.begin(), degree.end(), [](std::size_t k) { return k > 0; });
          if (!sender.valid() || !any) {
            parts.push_back(f.constant(Tensor(Shape{nt, wiring_.summary_size})));
            continue;
          }
          Var mixed = sparse_mix(sender, nt, rows);
          Var summary = tanh(projectors_.at({slot.relationship, slot.reverse}).linear(f, mixed));
          std::vector<double> has(nt);
          for (std::size_t r = 0; r < nt; ++r) has[r] = degree[r] > 0 ? 1.0 : 0.0;
          parts.push_back(mul(summary, f.constant(Tensor(Shape{nt, 1}, std::move(has)))));
        }
        input = concat(parts, -1);
      }
      const Autoencoder& ae = types_[t].autoencoders[d];
      out.bottlenecks[d][t] = tanh(ae.encoder(f, input));
      out.outputs[d][t] = ae.decoder(f, out.bottlenecks[d][t]);
    }
  }

  // Decoding and losses.
  out.decoder_inputs.assign(T, Var());
  Var total;
  auto accumulate = [&](Var& acc, Var v) { acc = acc.valid() ? add(acc, v) : v; };
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t nt = out.members[t].size();
    if (nt == 0) continue;
    std::vector<std::pair<std::size_t, Var>> inputs;
    if (wiring_.wiring == Wiring::kHighway) {
      std::vector<Var> all;
      for (std::size_t d = 0; d <= D; ++d) all.push_back(out.outputs[d][t]);
      inputs.emplace_back(D, concat(all, -1));
    } else if (wiring_.wiring == Wiring::kCulDeSac) {
      for (std::size_t d = 0; d <= D; ++d) inputs.emplace_back(d, out.outputs[d][t]);
    } else {
      inputs.emplace_back(D, out.outputs[D][t]);
    }
    out.decoder_inputs[t] = inputs.back().second;

    for (const auto& [p, dec] : types_[t].decoders) {
      std::vector<std::size_t> rows;
      std::vector<std::int64_t> gather;
      std::vector<const PackedValue*> targets;
      for (std::size_t r = 0; r < nt; ++r) {
        const std::size_t i = out.members[t][r];
        if (!batch.excluded.empty() && batch.excluded[i][p]) continue;
        const PackedValue* v = data.value(batch.entities[i], p);
        if (!v) continue;
        rows.push_back(r);
        gather.push_back(static_cast<std::int64_t>(r));
        targets.push_back(v);
      }
      if (rows.empty()) continue;
      out.observed_targets += rows.size();
      Var property_total;
      for (const auto& [d, input] : inputs) {
        DecodedProperty dp;
        dp.type = t;
        dp.property = p;
        dp.depth = d;
        dp.rows = rows;
        Var selected = rows.size() == nt ? input : gather_rows(input, gather);
        dp.loss_rows = decode_loss(f, dec, p, selected, targets, &dp.decoded);
        accumulate(property_total, sum_all(dp.loss_rows));
        out.decoded.push_back(std::move(dp));
      }
      if (inputs.size() > 1) property_total = scale(property_total, 1.0 / static_cast<double>(inputs.size()));
      property_total = scale(property_total, properties_[p].weight);
      const std::string& name = s.properties[p].name;
      auto it = out.property_losses.find(name);
      if (it == out.property_losses.end()) {
        out.property_losses.emplace(name, property_total);
      } else {
        it->second = add(it->second, property_total);
      }
      accumulate(total, property_total);
    }
  }

  if (wiring_.internal_loss) {
    for (std::size_t d = 0; d <= D; ++d) {
      Var depth_loss;
      for (std::size_t t = 0; t < T; ++t) {
        if (out.members[t].empty() || types_[t].representation == 0) continue;
        accumulate(depth_loss, sum_all(mse_rows(f, out.outputs[d][t], out.representations[t].value())));
      }
      if (depth_loss.valid()) {
        out.internal_losses.push_back(depth_loss);
        accumulate(total, depth_loss);
      }
    }
  }
  out.total = total.valid() ? total : f.constant(Tensor::scalar(0.0));
  return out;
}

std::vector<Json> GraphModel::reconstruct(Forward& f, const ForwardOutput& out, const Dataset& data,
                                          const Batch& batch) const {
  const DomainSchema& s = *schema_;
  std::vector<Json> result(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const std::size_t e = batch.entities[i];
    result[i] = Json{{"entity_type", s.entity_types[data.entity_type(e)].name}, {"id", data.id(e)}};
  }
  for (std::size_t t = 0; t < types_.size(); ++t) {
    const auto& members = out.members[t];
    if (members.empty()) continue;
    Var input = out.decoder_inputs[t];
    for (const auto& [p, dec] : types_[t].decoders) {
      const PropertyCodec& codec = codecs_[p];
      const std::string& name = s.properties[p].name;
      if (dec.kind == DecoderKind::kGru) {
        auto seqs = dec.text.greedy(f, input, std::max<std::size_t>(codec.max_length(), 1));
        for (std::size_t r = 0; r < members.size(); ++r) {
          PackedValue v;
          v.symbols = seqs[r];
          result[members[r]][name] = codec.unpack(v);
        }
        continue;
      }
      const Tensor raw = dec.mlp(f, input).value();
      for (std::size_t r = 0; r < members.size(); ++r) {
        auto row = raw.row(r);
        PackedValue v;
        switch (codec.type()) {
          case PropertyType::kCategorical: {
            // The unknown slot is never a useful answer; pick the best known value.
            const std::size_t known = codec.vocabulary_size();
            if (known == 0) {
              result[members[r]][name] = nullptr;
              continue;
            }
            v.symbols = {static_cast<std::int32_t>(std::max_element(row.begin(), row.begin() + known) - row.begin())};
            break;
          }
          case PropertyType::kDistribution: {
            double hi = row.empty() ? 0.0 : *std::max_element(row.begin(), row.end());
            double z = 0.0;
            for (double x : row) {
              v.dense.push_back(std::exp(x - hi));
              z += v.dense.back();
            }
            for (double& x : v.dense) x /= z;
            break;
          }
          default:
            v.dense.assign(row.begin(), row.end());
        }
        result[members[r]][name] = codec.unpack(v);
      }
    }
  }
  return result;
}

std::vector<Parameter*> GraphModel::property_parameters(std::size_t property) {
  const std::string name = schema_->properties.at(property).name;
  std::vector<Parameter*> out;
  const std::string enc = "property." + name + ".";
  std::vector<std::string> decs;
  for (const auto& et : schema_->entity_types) decs.push_back("type." + et.name + ".decoder." + name + ".");
  for (Parameter* prm : store_.all()) {
    bool match = prm->name.rfind(enc, 0) == 0;
    for (const auto& d : decs) match = match || prm->name.rfind(d, 0) == 0;
    if (match) out.push_back(prm);
  }
  return out;
}

Var GraphModel::property_autoencode_loss(Forward& f, const Dataset& data, const std::vector<std::size_t>& entities,
                                         std::size_t p) const {
  const PropertyModel& pm = properties_[p];
  Var total = f.constant(Tensor::scalar(0.0));
  std::vector<const PackedValue*> values;
  std::vector<std::size_t> types;
  for (std::size_t e : entities) {
    if (const PackedValue* v = data.value(e, p)) {
      values.push_back(v);
      types.push_back(data.entity_type(e));
    }
  }
  if (values.empty() || pm.encoded == 0) return total;
  Var code = encode_property(f, p, values);
  // The decoder of each entity-type sees the property block at its offset in
  // an otherwise empty decoder input.
  for (std::size_t t = 0; t < types_.size(); ++t) {
    auto dec = types_[t].decoders.find(p);
    if (dec == types_[t].decoders.end()) continue;
    std::vector<std::int64_t> idx;
    std::vector<const PackedValue*> targets;
    for (std::size_t k = 0; k < values.size(); ++k) {
      if (types[k] != t) continue;
      idx.push_back(static_cast<std::int64_t>(k));
      targets.push_back(values[k]);
    }
    if (idx.empty()) continue;
    const auto& props = types_[t].properties;
    const std::size_t offset = types_[t].offsets[static_cast<std::size_t>(std::find(props.begin(), props.end(), p) -
                                                                        props.begin())];
    const std::size_t width = decoder_input_size(t);
    std::vector<Var> parts;
    if (offset > 0) parts.push_back(f.constant(Tensor(Shape{idx.size(), offset})));
    parts.push_back(gather_rows(code, idx));
    if (width > offset + pm.encoded) parts.push_back(f.constant(Tensor(Shape{idx.size(), width - offset - pm.encoded})));
    Var input = concat(parts, -1);
    total = add(total, sum_all(decode_loss(f, dec->second, p, input, targets, nullptr)));
  }
  return total;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[8] = {'E', 'R', 'G', 'A', 'E', 'C', 'K', 'P'};
constexpr std::uint32_t kFormatVersion = 1;

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename T>
void put_le(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(std::string_view in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw ModelError("checkpoint truncated");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += sizeof(T);
  return v;
}

}  // namespace

std::string GraphModel::serialize(const Json& extra) const {
  Json header;
  header["format"] = "ergae-checkpoint";
  header["schema"] = schema_to_json(*schema_);
  Json codecs = Json::array();
  for (const auto& c : codecs_) codecs.push_back(c.to_json());
  header["codecs"] = std::move(codecs);
  header["wiring"] = wiring_.to_json();
  header["extra"] = extra;
  Json table = Json::array();
  std::string payload;
  std::size_t offset = 0;
  for (const Parameter* p : store_.all()) {
    table.push_back(Json{{"name", p->name}, {"shape", p->value.shape()}, {"offset", offset}, {"trainable", p->trainable}});
    for (double v : p->value.values()) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      put_le(payload, bits);
    }
    offset += p->value.size();
  }
  header["parameters"] = std::move(table);
  const std::string text = header.dump();

  std::string body;
  put_le<std::uint64_t>(body, text.size());
  body += text;
  put_le<std::uint64_t>(body, payload.size());
  body += payload;

  std::string out(kMagic, sizeof kMagic);
  put_le(out, kFormatVersion);
  put_le(out, fnv1a(body));
  out += body;
  return out;
}

GraphModel GraphModel::deserialize(std::string_view bytes, Json* extra) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw ModelError("not a checkpoint file (bad magic)");
  }
  std::size_t pos = sizeof kMagic;
  const auto version = get_le<std::uint32_t>(bytes, pos);
  if (version != kFormatVersion) {
    throw ModelError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                     std::to_string(kFormatVersion) + ")");
  }
  const auto checksum = get_le<std::uint64_t>(bytes, pos);
  const std::string_view body = bytes.substr(pos);
  if (fnv1a(body) != checksum) throw ModelError("corrupt checkpoint (checksum mismatch)");
  const auto text_len = get_le<std::uint64_t>(bytes, pos);
  if (pos + text_len > bytes.size()) throw ModelError("checkpoint truncated");
  const Json header = Json::parse(bytes.substr(pos, text_len));
  pos += text_len;
  const auto payload_len = get_le<std::uint64_t>(bytes, pos);
  if (pos + payload_len != bytes.size()) throw ModelError("checkpoint payload size mismatch");
  const std::string_view payload = bytes.substr(pos);

  DomainSchema schema = schema_from_json(header.at("schema"));
  std::vector<PropertyCodec> codecs;
  for (const auto& c : header.at("codecs")) codecs.push_back(PropertyCodec::from_json(c));
  GraphModel model(std::move(schema), std::move(codecs), WiringConfig::from_json(header.at("wiring")));

  const Json& table = header.at("parameters");
  if (table.size() != model.store_.count()) throw ModelError("checkpoint parameter count does not match the model");
  for (const auto& entry : table) {
    const std::string name = entry.at("name").get<std::string>();
    Parameter* p = model.store_.find(name);
    if (!p) throw ModelError("checkpoint has unknown parameter " + name);
    if (entry.at("shape").get<Shape>() != p->value.shape()) throw ModelError("checkpoint shape mismatch for " + name);
    std::size_t at = entry.at("offset").get<std::size_t>() * sizeof(std::uint64_t);
    if (at + p->value.size() * sizeof(std::uint64_t) > payload.size()) throw ModelError("checkpoint truncated");
    for (double& v : p->value.storage()) {
      const auto bits = get_le<std::uint64_t>(payload, at);
      std::memcpy(&v, &bits, sizeof v);
    }
  }
  if (extra) *extra = header.value("extra", Json::object());
  return model;
}

void GraphModel::save(const std::filesystem::path& path, const Json& extra) const {
  write_text_file(path.string(), serialize(extra));
}

GraphModel GraphModel::load(const std::filesystem::path& path, Json* extra) {
  return deserialize(read_text_file(path.string()), extra);
}

}  // namespace ergae
