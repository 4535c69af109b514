#include "gnnbd/experiment.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace gnnbd {

namespace {

using json = nlohmann::ordered_json;

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  size_t b = s.find_last_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string token;
  std::istringstream ss(value);
  while (ss >> token) {
    while (!token.empty() && token.back() == ',') token.pop_back();
    if (!token.empty()) out.push_back(token);
  }
  return out;
}

int parse_int(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    int v = std::stoi(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected integer, got '" + value + "'");
  }
}

uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    uint64_t v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected unsigned integer, got '" + value + "'");
  }
}

Real parse_real(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    Real v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected number, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError(key + ": expected boolean, got '" + value + "'");
}

DatasetRef& dataset_slot(ExperimentConfig& config, const std::string& name) {
  for (DatasetRef& d : config.datasets) {
    if (d.name == name) return d;
  }
  config.datasets.push_back(DatasetRef{name, ""});
  return config.datasets.back();
}

std::string join_names(const std::vector<std::string>& names) {
  std::string out;
  for (const std::string& n : names) {
    if (!out.empty()) out += " ";
    out += n;
  }
  return out;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (datasets.empty()) throw ConfigError("no datasets configured");
  for (const DatasetRef& d : datasets) {
    if (d.prefix.empty()) throw ConfigError("dataset '" + d.name + "' has no path prefix");
  }
  if (models.empty()) throw ConfigError("no models configured");
  if (strategies.empty()) throw ConfigError("no strategies configured");
  if (repeats < 1) throw ConfigError("repeats must be >= 1");
  if (target_label < 0) throw ConfigError("target label must be >= 0");
  if (parallel < 1) throw ConfigError("parallel must be >= 1");
  if (split_fraction <= 0.0 || split_fraction >= 1.0) throw ConfigError("split fraction must be in (0, 1)");
  if (histogram_bins < 1) throw ConfigError("histogram bins must be >= 1");
  if (extension_gamma < 1) throw ConfigError("gamma must be >= 1");
  if (train.epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (train.learning_rate <= 0.0) throw ConfigError("train.learning_rate must be > 0");
  if (train.hidden < 1 || train.heads < 1 || train.head_dim < 1) {
    throw ConfigError("model widths must be >= 1");
  }
  if (explainer.steps < 1) throw ConfigError("explainer.steps must be >= 1");
  if (explainer.mask_learning_rate <= 0.0) throw ConfigError("explainer.mask_lr must be > 0");
  if (explainer.lambda_size < 0.0 || explainer.lambda_entropy < 0.0) {
    throw ConfigError("explainer regularization coefficients must be >= 0");
  }
  if (attack.poison_rate <= 0.0 || attack.poison_rate >= 1.0) {
    throw ConfigError("attack.poison_rate must be in (0, 1)");
  }
  if (attack.epochs < 0) throw ConfigError("attack.epochs must be >= 0");
}

std::vector<std::string> ExperimentConfig::resolved_entries() const {
  std::vector<std::string> out;
  std::vector<std::string> names;
  for (const DatasetRef& d : datasets) names.push_back(d.name);
  out.push_back("experiment.datasets = " + join_names(names));
  for (const DatasetRef& d : datasets) {
    out.push_back("dataset." + d.name + ".prefix = " + d.prefix);
  }
  std::vector<std::string> model_names;
  for (Architecture a : models) model_names.push_back(architecture_name(a));
  out.push_back("experiment.models = " + join_names(model_names));
  std::vector<std::string> strategy_names;
  for (Strategy s : strategies) strategy_names.push_back(strategy_name(s));
  out.push_back("experiment.strategies = " + join_names(strategy_names));
  out.push_back("experiment.repeats = " + std::to_string(repeats));
  out.push_back("experiment.seed = " + std::to_string(base_seed));
  out.push_back("experiment.target_label = " + std::to_string(target_label));
  out.push_back("experiment.out = " + out_dir);
  out.push_back("experiment.parallel = " + std::to_string(parallel));
  out.push_back("experiment.histogram_bins = " + std::to_string(histogram_bins));
  out.push_back("experiment.gamma = " + std::to_string(extension_gamma));
  out.push_back("experiment.export_orders = " + std::string(export_orders ? "true" : "false"));
  out.push_back("split.fraction = " + std::to_string(split_fraction));
  out.push_back("train.epochs = " + std::to_string(train.epochs));
  out.push_back("train.learning_rate = " + std::to_string(train.learning_rate));
  out.push_back("train.hidden = " + std::to_string(train.hidden));
  out.push_back("train.heads = " + std::to_string(train.heads));
  out.push_back("train.head_dim = " + std::to_string(train.head_dim));
  out.push_back("explainer.steps = " + std::to_string(explainer.steps));
  out.push_back("explainer.mask_lr = " + std::to_string(explainer.mask_learning_rate));
  out.push_back("explainer.lambda_size = " + std::to_string(explainer.lambda_size));
  out.push_back("explainer.lambda_entropy = " + std::to_string(explainer.lambda_entropy));
  out.push_back("explainer.init_scale = " + std::to_string(explainer.init_scale));
  out.push_back("attack.poison_rate = " + std::to_string(attack.poison_rate));
  out.push_back("attack.trigger_size = " + std::to_string(attack.trigger_size));
  out.push_back("attack.trigger_value = " + std::to_string(attack.trigger_value));
  out.push_back("attack.epochs = " + std::to_string(attack.epochs));
  return out;
}

void apply_config_entry(ExperimentConfig& config, const std::string& key, const std::string& value) {
  if (key == "experiment.datasets") {
    for (const std::string& name : split_list(value)) dataset_slot(config, name);
  } else if (key.rfind("dataset.", 0) == 0 && key.size() > 8 + 7 &&
             key.substr(key.size() - 7) == ".prefix") {
    const std::string name = key.substr(8, key.size() - 8 - 7);
    if (name.empty()) throw ConfigError("bad dataset key: " + key);
    dataset_slot(config, name).prefix = value;
  } else if (key == "experiment.models") {
    config.models.clear();
    for (const std::string& m : split_list(value)) config.models.push_back(architecture_from_name(m));
  } else if (key == "experiment.strategy" || key == "experiment.strategies") {
    config.strategies.clear();
    if (value == "both") {
      config.strategies = {Strategy::kMias, Strategy::kLias};
    } else {
      for (const std::string& s : split_list(value)) config.strategies.push_back(strategy_from_name(s));
    }
  } else if (key == "experiment.repeats") {
    config.repeats = parse_int(key, value);
  } else if (key == "experiment.seed") {
    config.base_seed = parse_u64(key, value);
  } else if (key == "experiment.target_label") {
    config.target_label = parse_int(key, value);
  } else if (key == "experiment.out") {
    config.out_dir = value;
  } else if (key == "experiment.parallel") {
    config.parallel = parse_int(key, value);
  } else if (key == "experiment.histogram_bins") {
    config.histogram_bins = parse_int(key, value);
  } else if (key == "experiment.gamma") {
    config.extension_gamma = parse_int(key, value);
  } else if (key == "experiment.export_orders") {
    config.export_orders = parse_bool(key, value);
  } else if (key == "split.fraction") {
    config.split_fraction = parse_real(key, value);
  } else if (key == "train.epochs") {
    config.train.epochs = parse_int(key, value);
  } else if (key == "train.learning_rate") {
    config.train.learning_rate = parse_real(key, value);
  } else if (key == "train.hidden") {
    config.train.hidden = parse_int(key, value);
  } else if (key == "train.heads") {
    config.train.heads = parse_int(key, value);
  } else if (key == "train.head_dim") {
    config.train.head_dim = parse_int(key, value);
  } else if (key == "explainer.steps") {
    config.explainer.steps = parse_int(key, value);
  } else if (key == "explainer.mask_lr") {
    config.explainer.mask_learning_rate = parse_real(key, value);
  } else if (key == "explainer.lambda_size") {
    config.explainer.lambda_size = parse_real(key, value);
  } else if (key == "explainer.lambda_entropy") {
    config.explainer.lambda_entropy = parse_real(key, value);
  } else if (key == "explainer.init_scale") {
    config.explainer.init_scale = parse_real(key, value);
  } else if (key == "attack.poison_rate") {
    config.attack.poison_rate = parse_real(key, value);
  } else if (key == "attack.trigger_size") {
    config.attack.trigger_size = parse_int(key, value);
  } else if (key == "attack.trigger_value") {
    config.attack.trigger_value = parse_real(key, value);
  } else if (key == "attack.epochs") {
    config.attack.epochs = parse_int(key, value);
  } else {
    throw ConfigError("unknown config key: " + key);
  }
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  ExperimentConfig config;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key");
    }
    apply_config_entry(config, key, value);
  }
  return config;
}

uint64_t repeat_seed(const ExperimentConfig& config, int repeat) {
  return config.base_seed + static_cast<uint64_t>(repeat);
}

uint64_t stage_seed(uint64_t repeat_seed_value, uint64_t stage_tag) {
  return mix_seed(repeat_seed_value, stage_tag);
}

ModelRepeatOutcome run_model_repeat(const CitationGraph& graph, const ExperimentConfig& config,
                                    Architecture architecture, int repeat) {
  if (config.target_label >= graph.num_classes) {
    throw ConfigError("target label " + std::to_string(config.target_label) +
                      " outside the dataset's " + std::to_string(graph.num_classes) + " classes");
  }
  ModelRepeatOutcome out;
  out.seed = repeat_seed(config, repeat);
  out.data_split = split(graph, config.split_fraction, stage_seed(out.seed, kSplitStage));

  TrainConfig tc = config.train;
  tc.architecture = architecture;
  tc.seed = stage_seed(out.seed, kInitStage);
  out.clean = train(graph, out.data_split.train, graph.labels, tc);
  out.clean_accuracy = accuracy(out.clean, graph, out.data_split.test, graph.labels);

  AttackConfig base_attack = config.attack;
  base_attack.target_label = config.target_label;
  base_attack.seed = stage_seed(out.seed, kSampleStage);
  ExplainerConfig ec = config.explainer;
  ec.seed = stage_seed(out.seed, kExplainStage);
  const int trigger = resolve_trigger_size(base_attack, graph.num_features);

  // clean-model explanations are strategy-independent; compute them once
  const std::vector<int> poison_nodes = sample_poison_nodes(out.data_split, graph.labels, base_attack);
  const std::vector<FeatureImportanceOrder> train_orders =
      compute_clean_orders(out.clean, graph, poison_nodes, graph.labels, ec, config.parallel);
  std::vector<int> eligible_test;
  for (int v : out.data_split.test) {
    if (graph.labels[static_cast<size_t>(v)] != config.target_label) eligible_test.push_back(v);
  }
  const std::vector<FeatureImportanceOrder> test_orders =
      compute_clean_orders(out.clean, graph, eligible_test, graph.labels, ec, config.parallel);

  for (Strategy strategy : config.strategies) {
    AttackConfig ac = base_attack;
    ac.strategy = strategy;
    StrategyOutcome so;
    so.strategy = strategy;
    so.poisoned_train =
        build_poisoned_train(graph, out.data_split, out.clean, ac, ec, config.parallel, &train_orders);
    so.poisoned_test =
        build_poisoned_test(graph, out.data_split, out.clean, ac, ec, config.parallel, &test_orders);
    so.backdoored = train_backdoored(graph, out.data_split, out.clean, so.poisoned_train, ac);
    SuccessReport success = attack_success_rate(so.backdoored, graph, so.poisoned_test);
    so.asr = success.asr;
    so.cad = clean_accuracy_drop(out.clean, so.backdoored, graph, out.data_split.test);
    so.predicted = generate_predicted_masks(so.backdoored, graph, so.poisoned_test, ac, ec,
                                            config.parallel);
    for (size_t i = 0; i < so.poisoned_test.nodes.size(); ++i) {
      so.records.push_back(RecallRecord{
          so.poisoned_test.nodes[i], strategy, trigger,
          recall_score(so.poisoned_test.target_masks[i], so.predicted.masks[i]),
          success.flags[i] != 0});
    }
    if (config.extension_gamma > 1 &&
        config.extension_gamma * trigger <= graph.num_features) {
      so.extended_records = extended_mask_analysis(
          so.poisoned_test.clean_orders, so.predicted.orders, so.poisoned_test.nodes, success.flags,
          strategy, trigger, config.extension_gamma);
    }
    out.strategies.push_back(std::move(so));
  }
  return out;
}

namespace {

json histogram_to_json(const Histogram& h) {
  return json{{"edges", h.edges}, {"counts", h.counts}};
}

Real group_mean(const std::vector<RecallRecord>& records) {
  if (records.empty()) return 0.0;
  Real total = 0.0;
  for (const RecallRecord& r : records) total += r.recall;
  return total / static_cast<Real>(records.size());
}

std::vector<Real> recalls_of(const std::vector<RecallRecord>& records) {
  std::vector<Real> out;
  out.reserve(records.size());
  for (const RecallRecord& r : records) out.push_back(r.recall);
  return out;
}

json recall_group_json(const std::vector<RecallRecord>& records, int bins) {
  auto [s, u] = split_su(records);
  json j;
  j["count"] = records.size();
  j["mean"] = group_mean(records);
  j["mean_s"] = group_mean(s);
  j["mean_u"] = group_mean(u);
  j["count_s"] = s.size();
  j["count_u"] = u.size();
  j["histogram"] = histogram_to_json(histogram(recalls_of(records), bins));
  j["histogram_s"] = histogram_to_json(histogram(recalls_of(s), bins));
  j["histogram_u"] = histogram_to_json(histogram(recalls_of(u), bins));
  return j;
}

void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << body;
}

std::string csv_provenance(const ExperimentConfig& config, const std::string& context) {
  std::string head;
  for (const std::string& line : config.resolved_entries()) head += "# " + line + "\n";
  head += "# " + context + "\n";
  return head;
}

void write_recall_csv(const std::string& path, const ExperimentConfig& config,
                      const std::string& context, const std::vector<RecallRecord>& records) {
  std::ostringstream out;
  out << csv_provenance(config, context);
  out << "node_id,strategy,mask_len,recall,success\n";
  out.precision(17);
  for (const RecallRecord& r : records) {
    out << r.node << "," << strategy_name(r.strategy) << "," << r.mask_len << "," << r.recall << ","
        << (r.success ? 1 : 0) << "\n";
  }
  write_text_file(path, out.str());
}

void write_histograms_csv(const std::string& path, const ExperimentConfig& config,
                          const std::string& context,
                          const std::vector<std::pair<std::string, Histogram>>& groups) {
  std::ostringstream out;
  out << csv_provenance(config, context);
  out << "strategy,group,mask_len,bin_lo,bin_hi,count\n";
  out.precision(17);
  for (const auto& [label, h] : groups) {
    for (size_t b = 0; b + 1 < h.edges.size(); ++b) {
      out << label << "," << h.edges[b] << "," << h.edges[b + 1] << "," << h.counts[b] << "\n";
    }
  }
  write_text_file(path, out.str());
}

std::vector<std::pair<std::string, Histogram>> strategy_histograms(const StrategyOutcome& so,
                                                                   int bins, int trigger, int gamma) {
  const std::string s = strategy_name(so.strategy);
  auto [sn, un] = split_su(so.records);
  std::vector<std::pair<std::string, Histogram>> out;
  auto tag = [&](const std::string& group, int len) {
    return s + "," + group + "," + std::to_string(len);
  };
  out.emplace_back(tag("all", trigger), histogram(recalls_of(so.records), bins));
  out.emplace_back(tag("s", trigger), histogram(recalls_of(sn), bins));
  out.emplace_back(tag("u", trigger), histogram(recalls_of(un), bins));
  if (!so.extended_records.empty()) {
    auto [s2, u2] = split_su(so.extended_records);
    out.emplace_back(tag("all", gamma * trigger), histogram(recalls_of(so.extended_records), bins));
    out.emplace_back(tag("s", gamma * trigger), histogram(recalls_of(s2), bins));
    out.emplace_back(tag("u", gamma * trigger), histogram(recalls_of(u2), bins));
  }
  return out;
}

CitationGraph load_dataset(const DatasetRef& ref) {
  std::cerr << "[gnnbd] loading dataset '" << ref.name << "' from " << ref.prefix << ".{content,cites}\n";
  CitationGraph g = load_citation_dataset(ref.prefix + ".content", ref.prefix + ".cites");
  std::cerr << "[gnnbd]   nodes=" << g.num_nodes << " features=" << g.num_features
            << " classes=" << g.num_classes << " edges=" << g.edges.size()
            << " (skipped cites=" << g.skipped_cite_lines << ", self-loops=" << g.dropped_self_loops
            << ", duplicates=" << g.collapsed_duplicates << ")\n";
  return g;
}

std::string cell_tag(const std::string& dataset, Architecture arch) {
  return dataset + "_" + architecture_name(arch);
}

}  // namespace

void cmd_train_clean(const ExperimentConfig& config) {
  config.validate();
  std::filesystem::create_directories(config.out_dir);
  json report;
  report["format"] = "gnnbd-clean-report";
  json config_echo = json::array();
  for (const std::string& line : config.resolved_entries()) config_echo.push_back(line);
  report["config"] = config_echo;
  report["entries"] = json::array();
  for (const DatasetRef& ref : config.datasets) {
    CitationGraph graph = load_dataset(ref);
    for (Architecture arch : config.models) {
      const uint64_t seed = repeat_seed(config, 0);
      DataSplit ds = split(graph, config.split_fraction, stage_seed(seed, kSplitStage));
      TrainConfig tc = config.train;
      tc.architecture = arch;
      tc.seed = stage_seed(seed, kInitStage);
      TrainedModel model = train(graph, ds.train, graph.labels, tc);
      const Real acc = accuracy(model, graph, ds.test, graph.labels);
      const std::string checkpoint =
          config.out_dir + "/clean_" + cell_tag(ref.name, arch) + ".json";
      save_checkpoint(model, checkpoint);
      std::cerr << "[gnnbd] clean " << cell_tag(ref.name, arch) << " accuracy=" << acc << "\n";
      report["entries"].push_back(json{{"dataset", ref.name},
                                       {"model", architecture_name(arch)},
                                       {"seed", seed},
                                       {"test_accuracy", acc},
                                       {"final_loss", model.loss_trace.empty() ? 0.0 : model.loss_trace.back()},
                                       {"checkpoint", checkpoint}});
    }
  }
  write_text_file(config.out_dir + "/clean_report.json", report.dump(2) + "\n");
}

namespace {

// shared by cmd_attack / cmd_explain: single-repeat pipeline over the grid
void run_single_repeat_command(const ExperimentConfig& config, bool write_attack_files,
                               bool write_explain_files) {
  config.validate();
  std::filesystem::create_directories(config.out_dir);
  json report;
  report["format"] = "gnnbd-attack-report";
  json config_echo = json::array();
  for (const std::string& line : config.resolved_entries()) config_echo.push_back(line);
  report["config"] = config_echo;
  report["cells"] = json::array();

  for (const DatasetRef& ref : config.datasets) {
    CitationGraph graph = load_dataset(ref);
    AttackConfig resolved = config.attack;
    const int trigger = resolve_trigger_size(resolved, graph.num_features);
    for (Architecture arch : config.models) {
      ModelRepeatOutcome outcome = run_model_repeat(graph, config, arch, 0);
      const std::string tag = cell_tag(ref.name, arch);
      for (const StrategyOutcome& so : outcome.strategies) {
        const std::string cell = tag + "_" + strategy_name(so.strategy);
        std::cerr << "[gnnbd] " << cell << " asr=" << so.asr << " cad=" << so.cad << "\n";
        json cell_json{{"dataset", ref.name},
                       {"model", architecture_name(arch)},
                       {"strategy", strategy_name(so.strategy)},
                       {"seed", outcome.seed},
                       {"trigger_size", trigger},
                       {"clean_accuracy", outcome.clean_accuracy},
                       {"asr", so.asr},
                       {"cad", so.cad},
                       {"recall", recall_group_json(so.records, config.histogram_bins)}};
        if (!so.extended_records.empty()) {
          cell_json["recall_extended"] = recall_group_json(so.extended_records, config.histogram_bins);
        }
        report["cells"].push_back(cell_json);

        if (write_attack_files) {
          save_checkpoint(so.backdoored, config.out_dir + "/backdoored_" + cell + ".json");
          write_poisoned_train_csv(config.out_dir + "/poisoned_train_" + cell + ".csv", graph,
                                   so.poisoned_train, so.strategy,
                                   config.resolved_entries());
        }
        if (write_explain_files && config.export_orders) {
          write_orders_csv(config.out_dir + "/orders_" + cell + ".csv", so.poisoned_test.nodes,
                           so.predicted.orders, config.resolved_entries());
        }
      }
      if (write_explain_files) {
        std::vector<RecallRecord> all_records;
        std::vector<std::pair<std::string, Histogram>> hist_groups;
        for (const StrategyOutcome& so : outcome.strategies) {
          all_records.insert(all_records.end(), so.records.begin(), so.records.end());
          all_records.insert(all_records.end(), so.extended_records.begin(),
                             so.extended_records.end());
          auto groups = strategy_histograms(so, config.histogram_bins, trigger, config.extension_gamma);
          hist_groups.insert(hist_groups.end(), groups.begin(), groups.end());
        }
        write_recall_csv(config.out_dir + "/recall_records_" + tag + ".csv", config,
                         "dataset = " + ref.name + ", model = " + architecture_name(arch),
                         all_records);
        write_histograms_csv(config.out_dir + "/histograms_" + tag + ".csv", config,
                             "dataset = " + ref.name + ", model = " + architecture_name(arch),
                             hist_groups);
      }
    }
  }
  const std::string name = write_attack_files ? "attack_report.json" : "explain_report.json";
  write_text_file(config.out_dir + "/" + name, report.dump(2) + "\n");
}

}  // namespace

void cmd_attack(const ExperimentConfig& config) { run_single_repeat_command(config, true, false); }

void cmd_explain(const ExperimentConfig& config) { run_single_repeat_command(config, false, true); }

void cmd_experiment(const ExperimentConfig& config) {
  config.validate();
  std::filesystem::create_directories(config.out_dir);
  json report;
  report["format"] = "gnnbd-report";
  json config_echo = json::array();
  for (const std::string& line : config.resolved_entries()) config_echo.push_back(line);
  report["config"] = config_echo;
  report["datasets"] = json::array();

  for (const DatasetRef& ref : config.datasets) {
    CitationGraph graph = load_dataset(ref);
    AttackConfig resolved = config.attack;
    const int trigger = resolve_trigger_size(resolved, graph.num_features);
    json dataset_json{{"name", ref.name},
                      {"nodes", graph.num_nodes},
                      {"features", graph.num_features},
                      {"classes", graph.num_classes},
                      {"edges", graph.edges.size()},
                      {"trigger_size", trigger}};
    dataset_json["models"] = json::array();

    for (Architecture arch : config.models) {
      json model_json{{"model", architecture_name(arch)}};
      model_json["clean_accuracy_per_repeat"] = json::array();
      model_json["repeat_seeds"] = json::array();
      std::vector<AttackReport> reports(config.strategies.size());

      for (int repeat = 0; repeat < config.repeats; ++repeat) {
        std::cerr << "[gnnbd] " << ref.name << "/" << architecture_name(arch) << " repeat "
                  << (repeat + 1) << "/" << config.repeats << "\n";
        ModelRepeatOutcome outcome = run_model_repeat(graph, config, arch, repeat);
        model_json["clean_accuracy_per_repeat"].push_back(outcome.clean_accuracy);
        model_json["repeat_seeds"].push_back(outcome.seed);
        for (size_t s = 0; s < outcome.strategies.size(); ++s) {
          const StrategyOutcome& so = outcome.strategies[s];
          reports[s].asr_per_repeat.push_back(so.asr);
          reports[s].cad_per_repeat.push_back(so.cad);
          reports[s].recall_records.insert(reports[s].recall_records.end(), so.records.begin(),
                                           so.records.end());
          reports[s].extended_records.insert(reports[s].extended_records.end(),
                                             so.extended_records.begin(), so.extended_records.end());
        }
      }

      model_json["strategies"] = json::array();
      std::vector<RecallRecord> all_records;
      std::vector<std::pair<std::string, Histogram>> hist_groups;
      for (size_t s = 0; s < config.strategies.size(); ++s) {
        AttackReport& ar = reports[s];
        ar.finalize(config.histogram_bins);
        auto [sg, ug] = split_su(ar.recall_records);
        json strategy_json{{"strategy", strategy_name(config.strategies[s])},
                           {"asr_mean", ar.asr_mean},
                           {"asr_sd", ar.asr_sd},
                           {"asr_per_repeat", ar.asr_per_repeat},
                           {"cad_mean", ar.cad_mean},
                           {"cad_sd", ar.cad_sd},
                           {"cad_per_repeat", ar.cad_per_repeat},
                           {"recall", recall_group_json(ar.recall_records, config.histogram_bins)}};
        if (!ar.extended_records.empty()) {
          strategy_json["recall_extended"] =
              recall_group_json(ar.extended_records, config.histogram_bins);
        }
        model_json["strategies"].push_back(strategy_json);
        std::cerr << "[gnnbd]   " << strategy_name(config.strategies[s]) << ": asr=" << ar.asr_mean
                  << " +/- " << ar.asr_sd << ", cad=" << ar.cad_mean << " +/- " << ar.cad_sd
                  << ", rs(S)=" << group_mean(sg) << " rs(U)=" << group_mean(ug) << "\n";

        all_records.insert(all_records.end(), ar.recall_records.begin(), ar.recall_records.end());
        all_records.insert(all_records.end(), ar.extended_records.begin(), ar.extended_records.end());
        StrategyOutcome pooled;
        pooled.strategy = config.strategies[s];
        pooled.records = ar.recall_records;
        pooled.extended_records = ar.extended_records;
        auto groups = strategy_histograms(pooled, config.histogram_bins, trigger, config.extension_gamma);
        hist_groups.insert(hist_groups.end(), groups.begin(), groups.end());
      }
      const std::string tag = cell_tag(ref.name, arch);
      std::sort(all_records.begin(), all_records.end(), [](const RecallRecord& a, const RecallRecord& b) {
        if (a.strategy != b.strategy) return a.strategy < b.strategy;
        if (a.mask_len != b.mask_len) return a.mask_len < b.mask_len;
        return a.node < b.node;
      });
      write_recall_csv(config.out_dir + "/recall_records_" + tag + ".csv", config,
                       "dataset = " + ref.name + ", model = " + architecture_name(arch), all_records);
      write_histograms_csv(config.out_dir + "/histograms_" + tag + ".csv", config,
                           "dataset = " + ref.name + ", model = " + architecture_name(arch),
                           hist_groups);
      dataset_json["models"].push_back(model_json);
    }
    report["datasets"].push_back(dataset_json);
  }
  write_text_file(config.out_dir + "/report.json", report.dump(2) + "\n");
  std::cerr << "[gnnbd] wrote " << config.out_dir << "/report.json\n";
}

}  // namespace gnnbd
