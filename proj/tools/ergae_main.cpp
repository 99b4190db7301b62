#include <csignal>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "ergae/explore.hpp"
#include "ergae/rules.hpp"
#include "ergae/service.hpp"
#include "ergae/tabular.hpp"
#include "ergae/training.hpp"
#include "ergae/validate.hpp"

namespace {

using namespace ergae;

constexpr int kExitInvalid = 1;
constexpr int kExitUsage = 2;

struct Common {
  std::uint64_t seed = 0;
  std::string config;  // rules file
  std::string checkpoint;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--seed", c.seed, "Random seed");
  app->add_option("--config", c.config, "Configuration rules file");
  app->add_option("--checkpoint", c.checkpoint, "Model checkpoint");
}

std::vector<ConfigRule> load_rules(const std::string& path) {
  if (path.empty()) return {};
  return parse_rules(read_text_file(path));
}

DomainSchema resolved_schema(const std::string& schema_path, const std::string& rules_path,
                             ValidationReport* report = nullptr) {
  return apply_rules(parse_schema(read_text_file(schema_path), report), load_rules(rules_path), report);
}

void write_entities(const std::string& path, const std::vector<Json>& entities) {
  std::ostringstream out;
  for (const auto& e : entities) out << e.dump() << '\n';
  write_text_file(path, out.str());
}

Dataset dataset_for(const GraphModel& model, const std::string& entities_path) {
  return Dataset(model.schema_ptr(), model.codecs(), load_entities(read_text_file(entities_path)));
}

std::vector<std::size_t> split_entities(const Dataset& data, const Json& extra, const std::string& which) {
  if (which == "all") {
    std::vector<std::size_t> all(data.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }
  auto fractions = extra.value("split_fractions", std::array<double, 3>{0.8, 0.1, 0.1});
  Split split = split_dataset(data, fractions, extra.value("split_seed", std::uint64_t{0}));
  if (which == "train") return split.train;
  if (which == "dev") return split.dev;
  return split.test;
}

HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-aware autoencoder ensembles compiled from entity-relationship schemas", "ergae"};
  app.require_subcommand(1);

  // validate
  Common validate_common;
  std::string v_schema, v_entities;
  auto* validate = app.add_subcommand("validate", "Check a schema, entities and rules");
  add_common(validate, validate_common);
  validate->add_option("--schema", v_schema, "Schema file")->required()->check(CLI::ExistingFile);
  validate->add_option("--entities", v_entities, "Entity file")->check(CLI::ExistingFile);

  // ingest
  Common ingest_common;
  std::string i_csv, i_hints, i_schema_out, i_entities_out;
  auto* ingest = app.add_subcommand("ingest", "Derive a schema and entities from a CSV table");
  add_common(ingest, ingest_common);
  ingest->add_option("--csv", i_csv, "Input table")->required()->check(CLI::ExistingFile);
  ingest->add_option("--hints", i_hints, "Column hints (JSON)")->check(CLI::ExistingFile);
  ingest->add_option("--schema-out", i_schema_out, "Schema output")->required();
  ingest->add_option("--entities-out", i_entities_out, "Entity output (JSON Lines)")->required();

  // generate-arithmetic
  Common gen_common;
  std::size_t g_count = 5000, g_max_nodes = 7;
  std::string g_schema_out, g_entities_out;
  auto* gen = app.add_subcommand("generate-arithmetic", "Write random arithmetic expression trees");
  add_common(gen, gen_common);
  gen->add_option("--count", g_count, "Number of trees")->capture_default_str();
  gen->add_option("--max-nodes", g_max_nodes, "Largest tree size (odd)")->capture_default_str();
  gen->add_option("--schema-out", g_schema_out, "Schema output")->required();
  gen->add_option("--entities-out", g_entities_out, "Entity output (JSON Lines)")->required();

  // train
  Common train_common;
  std::string t_schema, t_entities, t_settings, t_history, t_wiring = "naive", t_policy = "component";
  std::size_t t_depth = 1;
  std::optional<std::size_t> t_epochs, t_budget;
  std::optional<double> t_lr, t_mask_rate;
  bool t_bidirectional = false, t_internal = false;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
  add_common(train_cmd, train_common);
  train_cmd->add_option("--schema", t_schema, "Schema file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--entities", t_entities, "Entity file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--settings", t_settings, "Training settings (JSON with 'wiring' and 'training')")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--depth", t_depth, "Graph depth")->capture_default_str();
  train_cmd->add_option("--wiring", t_wiring, "naive, highway or cul-de-sac")
      ->check(CLI::IsMember({"naive", "highway", "cul-de-sac"}))
      ->capture_default_str();
  train_cmd->add_flag("--bidirectional", t_bidirectional, "Model relationships in both directions");
  train_cmd->add_flag("--internal-loss", t_internal, "Add autoencoder reconstruction losses");
  train_cmd->add_option("--epochs", t_epochs, "Maximum epochs");
  train_cmd->add_option("--learning-rate", t_lr, "Initial learning rate");
  train_cmd->add_option("--budget", t_budget, "Entities per batch");
  train_cmd->add_option("--policy", t_policy, "Batch sampling policy")
      ->check(CLI::IsMember({"component", "conditional-independence", "snowflake", "entity"}));
  train_cmd->add_option("--mask-rate", t_mask_rate, "Input dropout rate per property");
  train_cmd->add_option("--history", t_history, "Write epoch records here as JSON Lines");
  train_cmd->get_option("--checkpoint")->required();

  // evaluate
  Common eval_common;
  std::string e_entities, e_split = "test";
  std::vector<std::string> e_mask;
  auto* evaluate = app.add_subcommand("evaluate", "Score reconstruction of masked properties");
  add_common(evaluate, eval_common);
  evaluate->add_option("--entities", e_entities, "Entity file")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--mask", e_mask, "Properties to mask")->required()->delimiter(',');
  evaluate->add_option("--split", e_split, "train, dev, test or all")
      ->check(CLI::IsMember({"train", "dev", "test", "all"}))
      ->capture_default_str();
  evaluate->get_option("--checkpoint")->required();

  // neighbors
  Common nb_common;
  std::string n_entities, n_type, n_export;
  std::optional<std::size_t> n_depth;
  std::size_t n_k = 10;
  bool n_approximate = false, n_all_types = false;
  auto* neighbors = app.add_subcommand("neighbors", "Most similar entity pairs by bottleneck cosine similarity");
  add_common(neighbors, nb_common);
  neighbors->add_option("--entities", n_entities, "Entity file")->required()->check(CLI::ExistingFile);
  neighbors->add_option("--type", n_type, "Entity type to compare within");
  neighbors->add_flag("--all-types", n_all_types, "Compare across entity types");
  neighbors->add_option("-k,--top", n_k, "Number of pairs")->capture_default_str();
  neighbors->add_option("--depth", n_depth, "Bottleneck depth (default: model depth)");
  neighbors->add_flag("--approximate", n_approximate, "Hash-bucketed search instead of exhaustive");
  neighbors->add_option("--export", n_export, "Also write the bottleneck table (JSON Lines)");
  neighbors->get_option("--checkpoint")->required();

  // serve
  Common serve_common;
  std::string s_entities, s_host;
  std::optional<int> s_port;
  auto* serve = app.add_subcommand("serve", "HTTP inference service");
  add_common(serve, serve_common);
  serve->add_option("--entities", s_entities, "Entity file")->required()->check(CLI::ExistingFile);
  serve->add_option("--host", s_host, "Bind address (default ERGAE_HOST or 127.0.0.1)");
  serve->add_option("--port", s_port, "Port (default ERGAE_PORT or 8080)");
  serve->get_option("--checkpoint")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*validate) {
      ValidationReport report;
      DomainSchema schema;
      try {
        schema = resolved_schema(v_schema, validate_common.config, &report);
      } catch (const SchemaError& err) {
        report.merge(err.report());
      }
      if (report.ok() && !v_entities.empty()) {
        auto entities = load_entities(read_text_file(v_entities));
        std::set<std::string> ids;
        for (std::size_t i = 0; i < entities.size(); ++i) {
          const std::string where = "entity " + std::to_string(i);
          report.merge(validate_entity(schema, entities[i], where));
          if (entities[i].is_object() && entities[i].contains(kIdKey) && entities[i].at(kIdKey).is_string() &&
              !ids.insert(entities[i].at(kIdKey).get<std::string>()).second) {
            report.error(where, "duplicate id " + entities[i].at(kIdKey).dump());
          }
        }
        for (std::size_t i = 0; i < entities.size() && report.ok(); ++i) {
          for (const auto& rel : schema.relationships) {
            auto it = entities[i].find(rel.name);
            if (it == entities[i].end()) continue;
            for (const auto& target : relationship_targets(*it).value_or(std::vector<std::string>{})) {
              if (!ids.count(target)) {
                report.warn("entity " + std::to_string(i), rel.name + " names '" + target + "', which is not in the file");
              }
            }
          }
        }
        if (report.ok()) {
          try {
            DatasetOptions options;
            options.drop_dangling_edges = true;
            Dataset(std::make_shared<const DomainSchema>(schema), build_codecs(schema, entities), entities, options);
          } catch (const DatasetError& err) {
            report.error("entities", err.what());
          }
        }
      }
      std::cout << report.to_json().dump(2) << '\n';
      return report.ok() ? 0 : kExitInvalid;
    }

    if (*ingest) {
      TabularHints hints;
      if (!i_hints.empty()) {
        Json h = parse_relaxed_json(read_text_file(i_hints));
        hints.default_group = h.value("default_group", hints.default_group);
        for (const auto& [column, spec] : h.value("columns", Json::object()).items()) {
          ColumnHint c;
          if (spec.contains("type")) {
            auto t = property_type_from_string(spec.at("type").get<std::string>());
            if (!t) throw std::invalid_argument("unknown property type for column " + column);
            c.type = *t;
          }
          c.group = spec.value("group", std::string());
          c.references = spec.value("references", std::string());
          c.key = spec.value("key", false);
          hints.columns.emplace(column, c);
        }
      }
      TabularDerivation d = derive_schema_from_tabular(parse_csv(read_text_file(i_csv)), hints);
      write_text_file(i_schema_out, schema_to_json(d.schema).dump(2) + "\n");
      write_entities(i_entities_out, d.entities);
      std::cerr << d.entities.size() << " entities\n";
      return 0;
    }

    if (*gen) {
      GeneratedData g = generate_arithmetic(g_count, g_max_nodes, gen_common.seed);
      write_text_file(g_schema_out, schema_to_json(g.schema).dump(2) + "\n");
      write_entities(g_entities_out, g.entities);
      std::cerr << g.entities.size() << " entities in " << g_count << " trees\n";
      return 0;
    }

    if (*train_cmd) {
      Json settings = t_settings.empty() ? Json::object() : parse_relaxed_json(read_text_file(t_settings));
      WiringConfig wiring = settings.contains("wiring") ? WiringConfig::from_json(settings.at("wiring")) : WiringConfig{};
      TrainConfig config = settings.contains("training") ? TrainConfig::from_json(settings.at("training")) : TrainConfig{};
      if (!settings.contains("wiring")) {
        wiring.depth = t_depth;
        wiring.wiring = wiring_from_string(t_wiring);
        wiring.bidirectional = t_bidirectional;
        wiring.internal_loss = t_internal;
      }
      wiring.seed = train_common.seed;
      config.seed = train_common.seed;
      if (t_epochs) config.max_epochs = *t_epochs;
      if (t_lr) config.learning_rate = *t_lr;
      if (t_budget) config.sampling.budget = *t_budget;
      if (train_cmd->count("--policy")) config.sampling.policy = sampling_policy_from_string(t_policy);
      if (t_mask_rate) config.mask.property_rate = *t_mask_rate;
      config.check();

      ValidationReport report;
      DomainSchema schema = resolved_schema(t_schema, train_common.config, &report);
      for (const auto& w : report.warnings) std::cerr << "warning: " << w.location << ": " << w.message << '\n';
      const std::array<double, 3> fractions{0.8, 0.1, 0.1};
      PreparedData data =
          prepare_dataset(schema, load_entities(read_text_file(t_entities)), fractions, train_common.seed);
      for (const auto& w : data.split.warnings) std::cerr << "warning: " << w << '\n';
      GraphModel model(*data.schema, data.codecs, wiring);

      std::ofstream history;
      if (!t_history.empty()) history.open(t_history);
      TrainResult result = train(model, data.dataset, data.split, config, [&](const EpochRecord& r) {
        const std::string line = r.to_json().dump();
        std::cout << line << std::endl;
        if (history) history << line << '\n';
      });
      for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
      Json extra{{"split_seed", train_common.seed},
                 {"split_fractions", fractions},
                 {"training", config.to_json()},
                 {"best_epoch", result.best_epoch},
                 {"best_dev_loss", result.best_dev_loss}};
      model.save(train_common.checkpoint, extra);
      std::cerr << "best epoch " << result.best_epoch << ", dev loss " << result.best_dev_loss << ", saved "
                << train_common.checkpoint << '\n';
      return 0;
    }

    if (*evaluate) {
      Json extra;
      GraphModel model = GraphModel::load(eval_common.checkpoint, &extra);
      Dataset data = dataset_for(model, e_entities);
      auto entities = split_entities(data, extra, e_split);
      EvalReport report =
          evaluate_masked(model, data, std::set<std::string>(e_mask.begin(), e_mask.end()), entities);
      std::cout << report.to_json().dump(2) << '\n';
      return 0;
    }

    if (*neighbors) {
      GraphModel model = GraphModel::load(nb_common.checkpoint);
      Dataset data = dataset_for(model, n_entities);
      BottleneckTable table = export_bottlenecks(model, data, n_depth);
      if (!n_export.empty()) {
        std::ofstream out(n_export);
        table.write_jsonl(out);
      }
      PairSearchOptions options;
      if (!n_all_types) {
        if (n_type.empty()) {
          if (model.schema().entity_types.size() != 1) {
            std::cerr << "--type is required when the schema has several entity types (or pass --all-types)\n";
            return kExitUsage;
          }
          n_type = model.schema().entity_types.front().name;
        }
        options.type = n_type;
      }
      options.mode = n_approximate ? SearchMode::kApproximate : SearchMode::kAuto;
      options.seed = nb_common.seed;
      PairSearchResult r = nearest_pairs(table, n_k, options);
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
      Json pairs = Json::array();
      for (const auto& p : r.pairs) pairs.push_back({{"first", p.first}, {"second", p.second}, {"similarity", p.similarity}});
      std::cout << Json{{"depth", table.depth}, {"approximate", r.approximate}, {"pairs", pairs}}.dump(2) << '\n';
      return 0;
    }

    if (*serve) {
      auto model = std::make_shared<const GraphModel>(GraphModel::load(serve_common.checkpoint));
      auto data = std::make_shared<const Dataset>(dataset_for(*model, s_entities));
      Service service(model, data);
      auto [host, port] = bind_address_from_env();
      if (!s_host.empty()) host = s_host;
      if (s_port) port = *s_port;
      HttpServer server(service);
      const int bound = server.bind(host, port);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "listening on http://" << host << ':' << bound << std::endl;
      server.listen();
      g_server = nullptr;
      return 0;
    }
  } catch (const SchemaError& err) {
    std::cerr << "error: " << err.what() << '\n' << err.report().to_json().dump(2) << '\n';
    return kExitInvalid;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitInvalid;
  }
  return kExitUsage;
}
