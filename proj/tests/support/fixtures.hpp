#pragma once
// Test-only fixtures and independent oracles shared by the unit tests and the
// acceptance runner.

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "ergae/dataset.hpp"
#include "ergae/graph_model.hpp"
#include "ergae/neural.hpp"
#include "ergae/rules.hpp"

namespace ergae::testing {

std::string data_path(const std::string& name);

// ---- finite differences ----------------------------------------------------

struct GradientCheck {
  double relative_error = 0.0;  // ||analytic - numeric|| / (||analytic|| + ||numeric||)
  std::size_t coordinates = 0;
};

/// Compares reverse-mode gradients of `loss` with central differences on up
/// to `max_coordinates` sampled entries of `params`.
GradientCheck check_gradients(const std::function<Var(Forward&)>& loss, const std::vector<Parameter*>& params,
                              bool training, std::mt19937_64& rng, std::size_t max_coordinates = 120,
                              double step = 1e-6);

struct GradientCase {
  std::string name;
  std::size_t fixtures = 0;
  double worst = 0.0;
};

/// Every sub-architecture over `fixtures` random instances each.
std::vector<GradientCase> run_gradient_suite(std::size_t fixtures, std::uint64_t seed);

// ---- small mixed-type graph --------------------------------------------------

struct GraphFixture {
  std::shared_ptr<const DomainSchema> schema;
  std::vector<PropertyCodec> codecs;
  std::unique_ptr<Dataset> dataset;
};

/// Two entity types carrying every modeled property type, three relationships
/// (one a self-relationship), tiny layer sizes.
DomainSchema mixed_schema(bool distribution_kld = true);
GraphFixture mixed_graph(std::size_t entities, std::uint64_t seed, bool distribution_kld = true);
WiringConfig tiny_wiring(std::size_t depth, Wiring wiring, bool bidirectional, std::uint64_t seed);

// ---- batching ---------------------------------------------------------------

/// One entity type, one relationship, `entities` nodes and random edges
/// (self loops and parallel edges allowed), some isolated nodes.
GraphFixture random_multigraph(std::size_t entities, std::size_t edges, std::uint64_t seed);

// ---- hierarchy --------------------------------------------------------------

/// group -> subgroup -> item chains, shaped like a language catalogue: each
/// group has a family and a profile of preferred feature values; its items
/// carry `features` categorical features that follow the profile with
/// probability `fidelity`, plus a label equal to the group's family.
struct HierarchySpec {
  std::size_t groups = 40;
  std::size_t subgroups_per_group = 3;
  std::size_t items_per_subgroup = 4;
  std::size_t categories = 4;
  std::size_t features = 12;
  std::size_t feature_values = 4;
  double fidelity = 0.7;
};
std::vector<Json> hierarchy_entities(const HierarchySpec& spec, std::uint64_t seed);
DomainSchema hierarchy_schema(const HierarchySpec& spec = {});

// ---- classifier -------------------------------------------------------------

/// Points with two scalar features and a categorical label given by the sign
/// of a fixed linear function (linearly separable with a margin).
std::vector<Json> separable_points(std::size_t count, std::uint64_t seed);
DomainSchema classifier_schema();

// ---- packing ----------------------------------------------------------------

/// Random human-form value of a property type.
Json random_value(PropertyType type, std::mt19937_64& rng);

// ---- graph distance ---------------------------------------------------------

/// Undirected hop distances from `source` over every relationship.
std::vector<std::size_t> hop_distances(const Dataset& dataset, std::size_t source);

}  // namespace ergae::testing
