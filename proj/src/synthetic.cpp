#include "gnnbd/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <vector>

namespace gnnbd {

namespace {

int poisson(Rng& rng, Real mean) {
  const Real limit = std::exp(-mean);
  int k = 0;
  Real p = 1.0;
  do {
    ++k;
    p *= rng.uniform();
  } while (p > limit);
  return k - 1;
}

// cumulative-weight sampler
class WeightedPicker {
 public:
  WeightedPicker(const std::vector<int>& ids, const std::vector<Real>& weights) : ids_(ids) {
    cumulative_.reserve(ids.size());
    Real total = 0.0;
    for (int id : ids) {
      total += weights[static_cast<size_t>(id)];
      cumulative_.push_back(total);
    }
  }

  int pick(Rng& rng) const {
    Real u = rng.uniform() * cumulative_.back();
    size_t i = static_cast<size_t>(
        std::lower_bound(cumulative_.begin(), cumulative_.end(), u) - cumulative_.begin());
    if (i >= ids_.size()) i = ids_.size() - 1;
    return ids_[i];
  }

 private:
  std::vector<int> ids_;
  std::vector<Real> cumulative_;
};

}  // namespace

SyntheticSpec SyntheticSpec::cora_like() {
  SyntheticSpec s;
  s.name = "cora";
  s.nodes = 2708;
  s.features = 1433;
  s.classes = 7;
  s.edges = 5278;
  s.homophily = 0.76;
  s.mean_words = 18.0;
  s.signature_words = 40;
  s.signature_fraction = 0.50;
  s.cross_class_leak = 0.15;
  s.class_weights = {0.13, 0.08, 0.15, 0.30, 0.16, 0.11, 0.07};
  return s;
}

SyntheticSpec SyntheticSpec::citeseer_like() {
  SyntheticSpec s;
  s.name = "citeseer";
  s.nodes = 3327;
  s.features = 3703;
  s.classes = 6;
  s.edges = 4552;
  s.homophily = 0.74;
  s.mean_words = 32.0;
  s.signature_words = 90;
  s.signature_fraction = 0.50;
  s.cross_class_leak = 0.15;
  s.class_weights = {0.08, 0.18, 0.20, 0.21, 0.18, 0.15};
  return s;
}

void write_synthetic_dataset(const SyntheticSpec& spec, const std::string& content_path,
                             const std::string& cites_path) {
  if (spec.classes * spec.signature_words >= spec.features) {
    throw ConfigError("synthetic: signature blocks exceed the vocabulary");
  }
  if (static_cast<int>(spec.class_weights.size()) != spec.classes) {
    throw ConfigError("synthetic: need one class weight per class");
  }
  Rng rng(spec.seed);

  // class assignment by cumulative weights
  std::vector<int> labels(static_cast<size_t>(spec.nodes));
  std::vector<Real> cum;
  Real total = 0.0;
  for (Real w : spec.class_weights) {
    total += w;
    cum.push_back(total);
  }
  for (int v = 0; v < spec.nodes; ++v) {
    Real u = rng.uniform() * total;
    int c = static_cast<int>(std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
    labels[static_cast<size_t>(v)] = std::min(c, spec.classes - 1);
  }

  // documents: signature block [c*k, (c+1)*k), background after all blocks.
  // background usage is Zipf-skewed so most of the vocabulary is rare,
  // matching the long tail of real bag-of-words corpora.
  const int background_start = spec.classes * spec.signature_words;
  const int background_size = spec.features - background_start;
  std::vector<Real> zipf_cumulative(static_cast<size_t>(background_size));
  Real zipf_total = 0.0;
  for (int w = 0; w < background_size; ++w) {
    zipf_total += 1.0 / std::pow(static_cast<Real>(w + 1), 1.3);
    zipf_cumulative[static_cast<size_t>(w)] = zipf_total;
  }
  auto background_word = [&](Rng& r) {
    Real u = r.uniform() * zipf_total;
    size_t i = static_cast<size_t>(
        std::lower_bound(zipf_cumulative.begin(), zipf_cumulative.end(), u) - zipf_cumulative.begin());
    if (i >= zipf_cumulative.size()) i = zipf_cumulative.size() - 1;
    return background_start + static_cast<int>(i);
  };
  std::vector<std::set<int>> words(static_cast<size_t>(spec.nodes));
  for (int v = 0; v < spec.nodes; ++v) {
    int count = std::max(3, poisson(rng, spec.mean_words));
    for (int w = 0; w < count; ++w) {
      if (rng.uniform() < spec.signature_fraction) {
        int block_class = labels[static_cast<size_t>(v)];
        if (rng.uniform() < spec.cross_class_leak) block_class = rng.uniform_int(spec.classes);
        words[static_cast<size_t>(v)].insert(block_class * spec.signature_words +
                                             rng.uniform_int(spec.signature_words));
      } else {
        words[static_cast<size_t>(v)].insert(background_word(rng));
      }
    }
  }

  // degree-skewed homophilous citation links; Pareto weights give the
  // leaf-heavy power-law degree profile of real citation graphs
  std::vector<Real> node_weight(static_cast<size_t>(spec.nodes));
  for (int v = 0; v < spec.nodes; ++v) {
    Real u = 1.0 - rng.uniform();  // (0, 1]
    node_weight[static_cast<size_t>(v)] = std::min(std::pow(u, -1.0 / 1.7), 60.0);
  }
  std::vector<int> all_nodes(static_cast<size_t>(spec.nodes));
  for (int v = 0; v < spec.nodes; ++v) all_nodes[static_cast<size_t>(v)] = v;
  WeightedPicker global(all_nodes, node_weight);
  std::vector<WeightedPicker> per_class;
  for (int c = 0; c < spec.classes; ++c) {
    std::vector<int> members;
    for (int v = 0; v < spec.nodes; ++v) {
      if (labels[static_cast<size_t>(v)] == c) members.push_back(v);
    }
    if (members.empty()) throw ConfigError("synthetic: empty class " + std::to_string(c));
    per_class.emplace_back(members, node_weight);
  }

  std::set<std::pair<int, int>> edges;
  long attempts = 0;
  const long max_attempts = static_cast<long>(spec.edges) * 50;
  while (static_cast<int>(edges.size()) < spec.edges && attempts < max_attempts) {
    ++attempts;
    int u = global.pick(rng);
    int v = rng.uniform() < spec.homophily ? per_class[static_cast<size_t>(labels[static_cast<size_t>(u)])].pick(rng)
                                           : global.pick(rng);
    if (u == v) continue;
    edges.insert({std::min(u, v), std::max(u, v)});
  }

  std::ofstream content(content_path);
  if (!content) throw DataError("cannot write " + content_path);
  for (int v = 0; v < spec.nodes; ++v) {
    content << spec.name << "_doc" << v;
    const auto& doc = words[static_cast<size_t>(v)];
    for (int f = 0; f < spec.features; ++f) {
      content << (doc.count(f) ? " 1" : " 0");
    }
    content << " class_" << labels[static_cast<size_t>(v)] << "\n";
  }

  std::ofstream cites(cites_path);
  if (!cites) throw DataError("cannot write " + cites_path);
  for (const auto& [u, v] : edges) {
    cites << spec.name << "_doc" << u << " " << spec.name << "_doc" << v << "\n";
  }
}

}  // namespace gnnbd
