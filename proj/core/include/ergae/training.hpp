#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ergae/dataset.hpp"
#include "ergae/graph_model.hpp"
#include "ergae/sampling.hpp"

namespace ergae {

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> dev;
  std::vector<std::size_t> test;
  std::vector<std::string> warnings;
};

/// Whole connected components go to one split. Components are shuffled and
/// each goes to the first split (train, dev, test) with room left; one that
/// fits nowhere goes to train with a warning.
Split split_dataset(const Dataset& dataset, std::array<double, 3> fractions = {0.8, 0.1, 0.1},
                    std::uint64_t seed = 0);

/// A packed dataset whose codecs were fitted on its own training split.
struct PreparedData {
  std::shared_ptr<const DomainSchema> schema;
  std::vector<PropertyCodec> codecs;
  Dataset dataset;
  Split split;
};

/// Splits by component, then fits codecs on the training entities only.
PreparedData prepare_dataset(DomainSchema resolved, std::vector<Json> records,
                             std::array<double, 3> fractions = {0.8, 0.1, 0.1}, std::uint64_t seed = 0);

struct TrainConfig {
  std::size_t max_epochs = 200;
  double learning_rate = 1e-3;
  std::size_t patience = 10;    // epochs without dev improvement before halving the learning rate
  std::size_t early_stop = 20;  // epochs without dev improvement before stopping
  SamplingConfig sampling;
  // Input dropout on every property; its seed is ignored, per-batch seeds derive from `seed`.
  MaskSpec mask = [] {
    MaskSpec m;
    m.property_rate = 0.25;
    return m;
  }();
  std::uint64_t seed = 0;
  std::size_t warm_start_epochs = 0;

  void check() const;
  Json to_json() const;
  static TrainConfig from_json(const Json& j);
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double dev_loss = 0.0;
  double learning_rate = 0.0;
  bool improved = false;

  Json to_json() const;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_dev_loss = 0.0;
  bool stopped_early = false;
  std::vector<std::string> warnings;
};

/// Reduce-on-plateau plus early stopping, driven by one loss per epoch.
class PlateauSchedule {
 public:
  struct Step {
    bool improved = false;
    bool halved = false;
    bool stop = false;
  };

  PlateauSchedule(double learning_rate, std::size_t patience, std::size_t early_stop)
      : lr_(learning_rate), patience_(patience), early_stop_(early_stop) {}

  Step observe(double loss);
  double learning_rate() const { return lr_; }
  double best() const { return best_; }
  std::size_t epochs_since_best() const { return bad_; }

 private:
  double lr_;
  std::size_t patience_;
  std::size_t early_stop_;
  double best_ = 0.0;
  bool seen_ = false;
  std::size_t bad_ = 0;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains on split.train, early-stops on split.dev (train loss when dev is
/// empty) and leaves the model at its best-dev parameters.
TrainResult train(GraphModel& model, const Dataset& dataset, const Split& split, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

/// Mean total loss per entity over `entities`, evaluation mode, whole components.
double evaluate_loss(const GraphModel& model, const Dataset& dataset, const std::vector<std::size_t>& entities,
                     const std::set<std::string>& always_mask = {}, std::size_t budget = 1024);

struct PropertyMetrics {
  std::string property;
  PropertyType type = PropertyType::kScalar;
  std::size_t count = 0;
  std::optional<double> accuracy;        // categorical, percent
  std::optional<double> mse;             // scalar/date: standardized scale; place/distribution: packed scale
  std::optional<double> exact_match;     // text, percent
  std::optional<double> char_accuracy;   // text, percent
};

struct EvalReport {
  std::vector<PropertyMetrics> properties;
  double loss = 0.0;  // mean total loss per entity with the masked properties hidden
  std::size_t entities = 0;

  const PropertyMetrics* find(const std::string& property) const;
  Json to_json() const;
};

enum class MaskScope {
  kAll,       // the masked properties are hidden on every evaluated entity at once
  kIsolated,  // each entity is scored with only its own values hidden
};

/// Hides `masked` on `entities`, runs the model in evaluation mode and scores
/// the reconstruction of the masked properties against the stored values.
/// kIsolated runs one pass per colour of a distance colouring, so entities
/// hidden together are further apart than the model depth.
EvalReport evaluate_masked(const GraphModel& model, const Dataset& dataset, const std::set<std::string>& masked,
                           const std::vector<std::size_t>& entities, std::size_t budget = 1024,
                           MaskScope scope = MaskScope::kAll);

struct GeneratedData {
  DomainSchema schema;
  std::vector<Json> entities;
};

/// Random arithmetic expression trees: each node an "expression" entity with
/// categorical operation, scalar value and left/right relationships to its
/// operands. Tree sizes are uniform over the odd numbers up to max_nodes.
GeneratedData generate_arithmetic(std::size_t count, std::size_t max_nodes = 7, std::uint64_t seed = 0);

/// Applies an operation name to two operands (add, sub, mul, div).
double apply_operation(const std::string& op, double left, double right);

}  // namespace ergae
