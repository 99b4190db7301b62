#include "ergae/explore.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include "ergae/sampling.hpp"

namespace ergae {

const BottleneckRow* BottleneckTable::find(const std::string& id) const {
  for (const auto& r : rows) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

void BottleneckTable::write_jsonl(std::ostream& out) const {
  out << Json{{"depth", depth}, {"size", size}, {"count", rows.size()}}.dump() << '\n';
  for (const auto& r : rows) out << Json{{"id", r.id}, {"type", r.type}, {"values", r.values}}.dump() << '\n';
}

BottleneckTable BottleneckTable::read_jsonl(std::string_view text) {
  BottleneckTable t;
  bool header = true;
  std::size_t count = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    Json j = Json::parse(line);
    if (header) {
      t.depth = j.at("depth").get<std::size_t>();
      t.size = j.at("size").get<std::size_t>();
      count = j.at("count").get<std::size_t>();
      header = false;
      continue;
    }
    BottleneckRow r{j.at("id").get<std::string>(), j.at("type").get<std::string>(),
                    j.at("values").get<std::vector<double>>()};
    if (r.values.size() != t.size) throw std::runtime_error("bottleneck row '" + r.id + "' has the wrong width");
    t.rows.push_back(std::move(r));
  }
  if (header) throw std::runtime_error("bottleneck file has no header");
  if (t.rows.size() != count) throw std::runtime_error("bottleneck file row count does not match its header");
  return t;
}

BottleneckTable export_bottlenecks(const GraphModel& model, const Dataset& dataset, std::optional<std::size_t> depth) {
  const std::size_t d = depth.value_or(model.wiring().depth);
  if (d > model.wiring().depth) {
    throw std::out_of_range("depth " + std::to_string(d) + " exceeds model depth " +
                            std::to_string(model.wiring().depth));
  }
  BottleneckTable table;
  table.depth = d;
  table.size = model.wiring().bottleneck();
  table.rows.resize(dataset.size());
  SamplingConfig cfg;
  cfg.budget = 1024;
  for (const auto& batch : sample_batches(dataset, cfg, 0)) {
    Tape tape;
    tape.set_recording(false);
    Forward f(tape, false);
    ForwardOutput out = model.forward(f, dataset, batch);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const std::size_t e = batch.entities[i];
      const std::size_t type = dataset.entity_type(e);
      const Tensor& b = out.bottlenecks[d][type].value();
      const std::size_t row = out.row_of[i];
      BottleneckRow& r = table.rows[e];
      r.id = dataset.id(e);
      r.type = dataset.schema().entity_types[type].name;
      r.values.assign(table.size, 0.0);
      for (std::size_t c = 0; c < table.size; ++c) r.values[c] = b.at(row, c);
    }
  }
  return table;
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine similarity of vectors of different sizes");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

namespace {

struct Unit {
  const std::string* id;
  std::vector<double> v;  // normalized
};

bool ranks_before(const SimilarPair& a, const SimilarPair& b) {
  if (a.similarity != b.similarity) return a.similarity > b.similarity;
  if (a.first != b.first) return a.first < b.first;
  return a.second < b.second;
}

// Keeps the best k pairs seen so far; worst at the heap front.
class TopK {
 public:
  explicit TopK(std::size_t k) : k_(k) {}

  void offer(const Unit& a, const Unit& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.v.size(); ++i) s += a.v[i] * b.v[i];
    SimilarPair p = *a.id < *b.id ? SimilarPair{*a.id, *b.id, s} : SimilarPair{*b.id, *a.id, s};
    if (heap_.size() < k_) {
      heap_.push_back(std::move(p));
      std::push_heap(heap_.begin(), heap_.end(), ranks_before);
    } else if (ranks_before(p, heap_.front())) {
      std::pop_heap(heap_.begin(), heap_.end(), ranks_before);
      heap_.back() = std::move(p);
      std::push_heap(heap_.begin(), heap_.end(), ranks_before);
    }
  }

  std::vector<SimilarPair> take() {
    std::sort(heap_.begin(), heap_.end(), ranks_before);
    return std::move(heap_);
  }

 private:
  std::size_t k_;
  std::vector<SimilarPair> heap_;
};

std::vector<Unit> usable_units(const BottleneckTable& table, const std::optional<std::string>& type,
                               std::vector<std::string>& warnings) {
  std::vector<Unit> units;
  for (const auto& r : table.rows) {
    if (type && r.type != *type) continue;
    double n = 0.0;
    for (double x : r.values) n += x * x;
    if (!std::isfinite(n)) throw std::invalid_argument("bottleneck of '" + r.id + "' is not finite");
    if (n == 0.0) {
      warnings.push_back("entity '" + r.id + "' has a zero bottleneck and was excluded");
      continue;
    }
    const double inv = 1.0 / std::sqrt(n);
    Unit u{&r.id, r.values};
    for (double& x : u.v) x *= inv;
    units.push_back(std::move(u));
  }
  return units;
}

}  // namespace

PairSearchResult nearest_pairs(const BottleneckTable& table, std::size_t k, const PairSearchOptions& options) {
  if (k == 0) throw std::invalid_argument("k must be at least 1");
  PairSearchResult result;
  std::vector<Unit> units = usable_units(table, options.type, result.warnings);
  if (units.size() < 2) throw std::invalid_argument("fewer than two entities to compare");
  result.approximate = options.mode == SearchMode::kApproximate ||
                       (options.mode == SearchMode::kAuto && units.size() > options.exact_limit);
  TopK top(k);
  if (!result.approximate) {
    for (std::size_t i = 0; i < units.size(); ++i) {
      for (std::size_t j = i + 1; j < units.size(); ++j) top.offer(units[i], units[j]);
    }
    result.pairs = top.take();
    return result;
  }

  const std::size_t bits = std::clamp<std::size_t>(options.hash_bits, 1, 63);
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal;
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (std::size_t t = 0; t < std::max<std::size_t>(options.hash_tables, 1); ++t) {
    std::vector<std::vector<double>> planes(bits, std::vector<double>(table.size));
    for (auto& p : planes) {
      for (double& x : p) x = normal(rng);
    }
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
    for (std::size_t i = 0; i < units.size(); ++i) {
      std::uint64_t h = 0;
      for (std::size_t b = 0; b < bits; ++b) {
        double s = 0.0;
        for (std::size_t c = 0; c < table.size; ++c) s += planes[b][c] * units[i].v[c];
        if (s >= 0.0) h |= std::uint64_t{1} << b;
      }
      buckets[h].push_back(i);
    }
    for (const auto& [h, members] : buckets) {
      for (std::size_t a = 0; a < members.size(); ++a) {
        for (std::size_t b = a + 1; b < members.size(); ++b) {
          if (seen.emplace(members[a], members[b]).second) top.offer(units[members[a]], units[members[b]]);
        }
      }
    }
  }
  result.pairs = top.take();
  return result;
}

PairSearchResult nearest_to(const BottleneckTable& table, const std::string& id, std::size_t k) {
  if (k == 0) throw std::invalid_argument("k must be at least 1");
  const BottleneckRow* query = table.find(id);
  if (!query) throw std::out_of_range("unknown entity '" + id + "'");
  PairSearchResult result;
  std::vector<Unit> units = usable_units(table, query->type, result.warnings);
  auto self = std::find_if(units.begin(), units.end(), [&](const Unit& u) { return *u.id == id; });
  if (self == units.end()) return result;
  TopK top(k);
  for (const auto& u : units) {
    if (&u != &*self) top.offer(*self, u);
  }
  result.pairs = top.take();
  return result;
}

}  // namespace ergae
