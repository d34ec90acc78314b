#include <fstream>
#include <set>

#include "sofim/cli.hpp"

namespace sofim::cli {
namespace {

using harness::DatasetSpec;
using harness::ExperimentConfig;
using harness::OptimizerSpec;
using harness::ProblemSpec;
using nlohmann::json;

std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where.empty() ? "<root>" : where, "expected an object");
}

double as_number(const json& j, const std::string& key) {
  if (!j.is_number()) throw ConfigError(key, "expected a number");
  return j.get<double>();
}

std::int64_t as_integer(const json& j, const std::string& key) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) throw ConfigError(key, "expected an integer");
  return j.get<std::int64_t>();
}

std::size_t as_count(const json& j, const std::string& key) {
  const auto v = as_integer(j, key);
  if (v < 0) throw ConfigError(key, "must be >= 0");
  return static_cast<std::size_t>(v);
}

std::uint64_t as_seed(const json& j, const std::string& key) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  const auto v = as_integer(j, key);
  if (v < 0) throw ConfigError(key, "must be >= 0");
  return static_cast<std::uint64_t>(v);
}

std::string as_string(const json& j, const std::string& key) {
  if (!j.is_string()) throw ConfigError(key, "expected a string");
  return j.get<std::string>();
}

bool as_bool(const json& j, const std::string& key) {
  if (!j.is_boolean()) throw ConfigError(key, "expected true or false");
  return j.get<bool>();
}

std::vector<double> as_number_list(const json& j, const std::string& key) {
  if (!j.is_array() || j.empty()) throw ConfigError(key, "expected a non-empty list of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_number(j[i], key + "[" + std::to_string(i) + "]"));
  return out;
}

void parse_dataset(const json& j, DatasetSpec& d, const std::string& where) {
  require_object(j, where);
  for (const auto& [key, value] : j.items()) {
    const std::string k = join(where, key);
    if (key == "kind") {
      const auto kind = as_string(value, k);
      if (kind == "blobs") d.kind = DatasetSpec::Kind::kBlobs;
      else if (kind == "csv") d.kind = DatasetSpec::Kind::kCsv;
      else throw ConfigError(k, "expected 'blobs' or 'csv'");
    } else if (key == "samples") d.samples = as_count(value, k);
    else if (key == "features") d.features = as_count(value, k);
    else if (key == "classes") d.classes = static_cast<int>(as_integer(value, k));
    else if (key == "spread") d.spread = as_number(value, k);
    else if (key == "seed") d.seed = as_seed(value, k);
    else if (key == "path") d.path = as_string(value, k);
    else if (key == "label_column") d.label_column = as_string(value, k);
    else if (key == "train_fraction") d.train_fraction = as_number(value, k);
    else throw ConfigError(k, "unknown key");
  }
}

void parse_problem(const json& j, ProblemSpec& p) {
  require_object(j, "problem");
  for (const auto& [key, value] : j.items()) {
    const std::string k = join("problem", key);
    if (key == "kind") {
      const auto kind = as_string(value, k);
      if (kind == "quadratic") p.kind = ProblemSpec::Kind::kQuadratic;
      else if (kind == "logistic") p.kind = ProblemSpec::Kind::kLogistic;
      else if (kind == "softmax") p.kind = ProblemSpec::Kind::kSoftmax;
      else if (kind == "mlp") p.kind = ProblemSpec::Kind::kMlp;
      else throw ConfigError(k, "expected quadratic, logistic, softmax or mlp");
    } else if (key == "dim") p.dim = static_cast<Eigen::Index>(as_integer(value, k));
    else if (key == "condition_number") p.condition_number = as_number(value, k);
    else if (key == "seed") p.quadratic_seed = as_seed(value, k);
    else if (key == "hidden") p.hidden = as_count(value, k);
    else if (key == "activation") {
      const auto act = as_string(value, k);
      if (act == "tanh") p.activation = problems::Activation::kTanh;
      else if (act == "relu") p.activation = problems::Activation::kRelu;
      else throw ConfigError(k, "expected 'tanh' or 'relu'");
    } else if (key == "dataset") parse_dataset(value, p.data, k);
    else throw ConfigError(k, "unknown key");
  }
}

void parse_hyperparameters(const json& j, OptimizerSpec& o) {
  require_object(j, "hyperparameters");
  for (const auto& [key, value] : j.items()) {
    const std::string k = join("hyperparameters", key);
    if (key == "cosine_schedule") {
      o.cosine_schedule = as_bool(value, k);
      continue;
    }
    try {
      set_hyperparameter(o, key, as_number(value, k));
    } catch (const ConfigError& e) {
      throw ConfigError(k, e.message());
    }
  }
}

void parse_scaling(const json& j, ScalingSettings& s) {
  require_object(j, "scaling");
  for (const auto& [key, value] : j.items()) {
    const std::string k = join("scaling", key);
    if (key == "dims") {
      if (!value.is_array() || value.empty()) throw ConfigError(k, "expected a non-empty list of integers");
      s.dims.clear();
      for (std::size_t i = 0; i < value.size(); ++i) {
        s.dims.push_back(static_cast<Eigen::Index>(as_integer(value[i], k + "[" + std::to_string(i) + "]")));
      }
    } else if (key == "repeats") {
      s.repeats = static_cast<int>(as_integer(value, k));
      if (s.repeats < 1) throw ConfigError(k, "must be >= 1");
    } else if (key == "optimizers") {
      if (!value.is_array() || value.empty()) throw ConfigError(k, "expected a non-empty list of optimizer names");
      s.optimizers.clear();
      for (const auto& name : value) {
        try {
          s.optimizers.push_back(harness::parse_optimizer_id(as_string(name, k)));
        } catch (const ConfigError& e) {
          throw ConfigError(k, e.message());
        }
      }
    } else {
      throw ConfigError(k, "unknown key");
    }
  }
}

json dataset_json(const DatasetSpec& d) {
  json j;
  j["kind"] = d.kind == DatasetSpec::Kind::kBlobs ? "blobs" : "csv";
  j["samples"] = d.samples;
  j["features"] = d.features;
  j["classes"] = d.classes;
  j["spread"] = d.spread;
  j["seed"] = d.seed;
  j["path"] = d.path;
  j["label_column"] = d.label_column;
  j["train_fraction"] = d.train_fraction;
  return j;
}

}  // namespace

void set_hyperparameter(OptimizerSpec& o, const std::string& name, double value) {
  if (name == "eta") o.eta = value;
  else if (name == "rho") o.rho = value;
  else if (name == "beta") o.beta = value;
  else if (name == "momentum") o.momentum = value;
  else if (name == "weight_decay") o.weight_decay = value;
  else if (name == "beta1") o.beta1 = value;
  else if (name == "beta2") o.beta2 = value;
  else if (name == "epsilon") o.epsilon = value;
  else if (name == "damping") o.damping = value;
  else throw ConfigError(name, "unknown hyperparameter");
}

CliConfig from_json(const json& j) {
  require_object(j, "");
  CliConfig cfg;
  ExperimentConfig& e = cfg.experiment;
  for (const auto& [key, value] : j.items()) {
    if (key == "problem") parse_problem(value, e.problem);
    else if (key == "optimizer") e.optimizer.id = harness::parse_optimizer_id(as_string(value, key));
    else if (key == "hyperparameters") parse_hyperparameters(value, e.optimizer);
    else if (key == "iterations") e.total_iterations = as_integer(value, key);
    else if (key == "eval_every") e.eval_every = as_integer(value, key);
    else if (key == "batch_size") {
      const auto b = as_integer(value, key);
      if (b < 1) throw ConfigError(key, "must be >= 1");
      e.batch_size = static_cast<std::size_t>(b);
    } else if (key == "seed") e.seed = as_seed(value, key);
    else if (key == "loss_thresholds") {
      if (!value.is_array()) throw ConfigError(key, "expected a list of numbers");
      e.loss_thresholds.clear();
      for (std::size_t i = 0; i < value.size(); ++i) {
        e.loss_thresholds.push_back(as_number(value[i], key + "[" + std::to_string(i) + "]"));
      }
    } else if (key == "output_dir") cfg.output_dir = as_string(value, key);
    else if (key == "grid") {
      require_object(value, key);
      cfg.grid.clear();
      for (const auto& [name, values] : value.items()) {
        const std::string k = join(key, name);
        OptimizerSpec probe;
        try {
          set_hyperparameter(probe, name, 0.0);
        } catch (const ConfigError& err) {
          throw ConfigError(k, err.message());
        }
        cfg.grid.emplace_back(name, as_number_list(values, k));
      }
    } else if (key == "rho_grid") {
      cfg.rho_grid = as_number_list(value, key);
    } else if (key == "scaling") {
      parse_scaling(value, cfg.scaling);
    } else if (key == "threads") {
      const auto t = as_integer(value, key);
      if (t < 1) throw ConfigError(key, "must be >= 1");
      cfg.threads = static_cast<unsigned>(t);
    } else {
      throw ConfigError(key, "unknown key");
    }
  }
  return cfg;
}

json to_json(const CliConfig& cfg) {
  const ExperimentConfig& e = cfg.experiment;
  const ProblemSpec& p = e.problem;
  const OptimizerSpec& o = e.optimizer;
  json j;
  j["problem"] = {{"kind", harness::to_string(p.kind)},
                  {"dim", p.dim},
                  {"condition_number", p.condition_number},
                  {"seed", p.quadratic_seed},
                  {"hidden", p.hidden},
                  {"activation", p.activation == problems::Activation::kTanh ? "tanh" : "relu"},
                  {"dataset", dataset_json(p.data)}};
  j["optimizer"] = harness::to_string(o.id);
  j["hyperparameters"] = {{"eta", o.eta},         {"rho", o.rho},
                          {"beta", o.beta},       {"momentum", o.momentum},
                          {"weight_decay", o.weight_decay}, {"cosine_schedule", o.cosine_schedule},
                          {"beta1", o.beta1},     {"beta2", o.beta2},
                          {"epsilon", o.epsilon}, {"damping", o.damping}};
  j["iterations"] = e.total_iterations;
  j["eval_every"] = e.eval_every;
  j["batch_size"] = e.batch_size;
  j["seed"] = e.seed;
  j["loss_thresholds"] = e.loss_thresholds;
  j["output_dir"] = cfg.output_dir.string();
  json grid = json::object();
  for (const auto& [name, values] : cfg.grid) grid[name] = values;
  j["grid"] = grid;
  j["rho_grid"] = cfg.rho_grid;
  json opts = json::array();
  for (auto id : cfg.scaling.optimizers) opts.push_back(harness::to_string(id));
  j["scaling"] = {{"dims", cfg.scaling.dims}, {"repeats", cfg.scaling.repeats}, {"optimizers", opts}};
  j["threads"] = cfg.threads;
  return j;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError(assignment, "override must look like key=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);

  json value = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = text;

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError(path, "empty key segment");
    if (!node->is_object()) throw ConfigError(path, "cannot descend into a non-object");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

CliConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open '" + path.string() + "'");
  json doc = json::parse(in, nullptr, /*allow_exceptions=*/false, /*ignore_comments=*/true);
  if (doc.is_discarded()) throw ConfigError("config", "'" + path.string() + "' is not valid JSON");
  for (const auto& o : overrides) apply_override(doc, o);
  return from_json(doc);
}

std::vector<ExperimentConfig> expand_grid(const CliConfig& cfg) {
  std::vector<ExperimentConfig> points{cfg.experiment};
  for (const auto& [name, values] : cfg.grid) {
    std::vector<ExperimentConfig> next;
    for (const auto& base : points) {
      for (double v : values) {
        ExperimentConfig c = base;
        set_hyperparameter(c.optimizer, name, v);
        next.push_back(std::move(c));
      }
    }
    points = std::move(next);
  }
  return points;
}

}  // namespace sofim::cli
