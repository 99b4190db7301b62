#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ergae/codec.hpp"
#include "ergae/dataset.hpp"
#include "ergae/neural.hpp"
#include "ergae/schema.hpp"

namespace ergae {

enum class Wiring { kNaive, kHighway, kCulDeSac };

std::string to_string(Wiring w);
Wiring wiring_from_string(const std::string& name);

struct WiringConfig {
  std::size_t depth = 1;
  Wiring wiring = Wiring::kNaive;
  bool bidirectional = false;
  std::vector<std::size_t> autoencoder_shape{128, 64};  // hidden layers, last one is the bottleneck
  std::size_t summary_size = 32;                        // per relationship slot
  bool internal_loss = false;
  std::uint64_t seed = 0;  // parameter initialization

  std::size_t bottleneck() const { return autoencoder_shape.empty() ? 0 : autoencoder_shape.back(); }
  void check() const;
  Json to_json() const;
  static WiringConfig from_json(const Json& j);
  friend bool operator==(const WiringConfig&, const WiringConfig&) = default;
};

/// Same entity-types, properties (names and types) and relationships, in the
/// same order; meta annotations are ignored.
bool same_structure(const DomainSchema& a, const DomainSchema& b);

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A neighbor summary feeding an entity-type's autoencoders at depth >= 1.
struct Slot {
  std::size_t relationship;
  bool reverse;  // false: the source receives its targets' summary
  std::size_t receiver_type;
  std::size_t sender_type;
};

struct DecodedProperty {
  std::size_t type = 0;
  std::size_t property = 0;
  std::size_t depth = 0;          // decoder input taken from this depth
  std::vector<std::size_t> rows;  // rows of the type block that carry an observed target
  Var decoded;                    // MLP decoders: decoded representation of those rows
  Var loss_rows;                  // (rows.size(), 1), unweighted
};

/// Everything a forward pass produced for one batch. Vars live on the
/// caller's tape.
struct ForwardOutput {
  std::vector<std::vector<std::size_t>> members;  // [type] -> local entity indices
  std::vector<std::size_t> row_of;                // local entity -> row in its type block
  std::vector<Var> representations;               // [type] encoded entity (n, R_e)
  std::vector<std::vector<Var>> outputs;          // [depth][type] autoencoder output (n, R_e)
  std::vector<std::vector<Var>> bottlenecks;      // [depth][type] (n, B)
  std::vector<Var> decoder_inputs;                // [type] input of the reported reconstruction
  std::vector<DecodedProperty> decoded;
  std::map<std::string, Var> property_losses;     // weighted, summed over rows, averaged over depths
  std::vector<Var> internal_losses;               // per depth, when enabled
  Var total;                                      // scalar
  std::size_t observed_targets = 0;               // (entity, property) pairs scored
};

struct ForwardOptions {
  /// Records every (local entity, property) whose packed value was read for
  /// encoding; used to check that masked ground truth never reaches the model.
  std::vector<std::pair<std::size_t, std::size_t>>* encoder_reads = nullptr;
};

class GraphModel {
 public:
  /// Compiles a rule-resolved schema. Fails on unknown architecture names,
  /// loss/type mismatches and size inconsistencies.
  GraphModel(DomainSchema schema, std::vector<PropertyCodec> codecs, WiringConfig wiring);

  GraphModel(const GraphModel&) = delete;
  GraphModel& operator=(const GraphModel&) = delete;
  GraphModel(GraphModel&&) = default;

  const DomainSchema& schema() const { return *schema_; }
  std::shared_ptr<const DomainSchema> schema_ptr() const { return schema_; }
  const std::vector<PropertyCodec>& codecs() const { return codecs_; }
  const WiringConfig& wiring() const { return wiring_; }
  ParameterStore& parameters() { return store_; }
  const ParameterStore& parameters() const { return store_; }

  std::size_t representation_size(std::size_t type) const { return types_[type].representation; }
  std::size_t decoder_input_size(std::size_t type) const;
  std::size_t autoencoder_input_size(std::size_t type, std::size_t depth) const;
  std::size_t encoded_size(std::size_t property) const { return properties_[property].encoded; }
  const std::vector<Slot>& slots(std::size_t type) const { return types_[type].slots; }
  std::size_t autoencoder_count() const;
  std::size_t projector_count() const { return projectors_.size(); }
  bool has_encoder(std::size_t property) const;
  bool has_decoder(std::size_t type, std::size_t property) const;

  ForwardOutput forward(Forward& f, const Dataset& data, const Batch& batch, ForwardOptions options = {}) const;

  /// Human-form reconstruction of each batch entity from the final decoder
  /// input. Properties with a Null decoder are absent.
  std::vector<Json> reconstruct(Forward& f, const ForwardOutput& out, const Dataset& data, const Batch& batch) const;

  /// Checkpoint with embedded schema, codecs, wiring and `extra` metadata.
  void save(const std::filesystem::path& path, const Json& extra = Json::object()) const;
  static GraphModel load(const std::filesystem::path& path, Json* extra = nullptr);
  std::string serialize(const Json& extra = Json::object()) const;
  static GraphModel deserialize(std::string_view bytes, Json* extra = nullptr);

  /// Encoder/decoder parameters of one property (for warm-start).
  std::vector<Parameter*> property_parameters(std::size_t property);
  /// Standalone encode -> batch-norm -> decode of one property (warm-start).
  Var property_autoencode_loss(Forward& f, const Dataset& data, const std::vector<std::size_t>& entities,
                               std::size_t property) const;

 private:
  enum class EncoderKind { kNull, kMlp, kEmbed, kEmbedGru };
  enum class DecoderKind { kNull, kMlp, kGru };
  enum class LossKind { kMse, kKld };

  struct PropertyModel {
    EncoderKind encoder = EncoderKind::kNull;
    std::size_t encoded = 0;
    Mlp mlp;
    Embedding embed;
    TextEncoder text;
    std::optional<BatchNorm> norm;
    DecoderKind decoder = DecoderKind::kNull;
    LossKind loss = LossKind::kMse;
    double weight = 1.0;
    std::size_t hidden = 128;
    std::size_t embedding = 32;
  };

  struct DecoderModel {
    DecoderKind kind = DecoderKind::kNull;
    Mlp mlp;
    TextDecoder text;
  };

  struct Autoencoder {
    Mlp encoder;  // input -> bottleneck (tanh applied)
    Mlp decoder;  // bottleneck -> R_e
  };

  struct TypeModel {
    std::vector<std::size_t> properties;  // schema property indices, in entity-type order
    std::vector<std::size_t> offsets;     // block offset of each property in R_e
    std::size_t representation = 0;
    std::vector<Slot> slots;
    std::vector<Autoencoder> autoencoders;  // per depth
    std::map<std::size_t, DecoderModel> decoders;  // by property
  };

  struct Projector {
    Linear linear;
  };

  std::shared_ptr<const DomainSchema> schema_;
  std::vector<PropertyCodec> codecs_;
  WiringConfig wiring_;
  ParameterStore store_;
  std::vector<PropertyModel> properties_;
  std::vector<TypeModel> types_;
  std::map<std::pair<std::size_t, bool>, Projector> projectors_;  // (relationship, reverse)

  void build();
  std::size_t decoder_output_size(std::size_t property) const;
  Var encode_property(Forward& f, std::size_t p, const std::vector<const PackedValue*>& values) const;
  Var decode_loss(Forward& f, const DecoderModel& dec, std::size_t p, Var input,
                  const std::vector<const PackedValue*>& targets, Var* decoded) const;
};

}  // namespace ergae
