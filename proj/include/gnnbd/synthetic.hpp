#pragma once

#include "gnnbd/common.hpp"

#include <string>
#include <vector>

namespace gnnbd {

/// Seeded generator of citation-style corpora in the loader's text format:
/// class-conditional bag-of-words rows (per-class signature vocabulary plus
/// shared background words) over a homophilous, degree-skewed citation
/// graph. Profiles below mirror the published summary statistics of the
/// standard citation benchmarks so full-scale runs behave realistically.
struct SyntheticSpec {
  std::string name;
  int nodes = 0;
  int features = 0;
  int classes = 0;
  int edges = 0;
  Real homophily = 0.8;        // probability an edge stays within class
  Real mean_words = 18.0;      // Poisson mean of words per document
  int signature_words = 100;   // vocabulary block reserved per class
  Real signature_fraction = 0.55;  // share of a doc's words from signature blocks
  Real cross_class_leak = 0.3;     // signature draws that land in a random class's block
  std::vector<Real> class_weights;
  uint64_t seed = 20240901;

  static SyntheticSpec cora_like();
  static SyntheticSpec citeseer_like();
};

void write_synthetic_dataset(const SyntheticSpec& spec, const std::string& content_path,
                             const std::string& cites_path);

}  // namespace gnnbd
