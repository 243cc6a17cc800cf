#include "stdagcn/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

#include "json.hpp"
#include "stdagcn/error.hpp"

namespace stdagcn {

namespace {

using nlohmann::json;

std::string trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_integer(std::string_view key, std::string_view text) {
  T v{};
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size()) {
    throw ConfigError("config key '" + std::string(key) + "': expected a non-negative integer, got '" +
                      std::string(text) + "'");
  }
  return v;
}

double parse_real(std::string_view key, std::string_view text) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size()) {
    throw ConfigError("config key '" + std::string(key) + "': expected a number, got '" +
                      std::string(text) + "'");
  }
  return v;
}

template <class Target>
using Setter = std::function<void(Target&, std::string_view key, std::string_view value)>;

template <class Target, class Field>
Setter<Target> field(Field Target::*member) {
  return [member](Target& t, std::string_view key, std::string_view value) {
    if constexpr (std::is_floating_point_v<Field>) {
      t.*member = parse_real(key, value);
    } else {
      t.*member = parse_integer<Field>(key, value);
    }
  };
}

const std::map<std::string, Setter<RunConfig>, std::less<>>& run_fields() {
  static const std::map<std::string, Setter<RunConfig>, std::less<>> fields = {
      {"window", field(&RunConfig::window)},
      {"voters", field(&RunConfig::voters)},
      {"lambda", field(&RunConfig::lambda)},
      {"learning_rate", field(&RunConfig::learning_rate)},
      {"batch_size", field(&RunConfig::batch_size)},
      {"dropout", field(&RunConfig::dropout)},
      {"weight_decay", field(&RunConfig::weight_decay)},
      {"beta", field(&RunConfig::beta)},
      {"gamma", field(&RunConfig::gamma)},
      {"epsilon", field(&RunConfig::epsilon)},
      {"inner_epochs", field(&RunConfig::inner_epochs)},
      {"h_tol", field(&RunConfig::h_tol)},
      {"k_max", field(&RunConfig::k_max)},
      {"c_max", field(&RunConfig::c_max)},
      {"eta_init", field(&RunConfig::eta_init)},
      {"c_init", field(&RunConfig::c_init)},
      {"init_scale", field(&RunConfig::init_scale)},
      {"kernel_size", field(&RunConfig::kernel_size)},
      {"hidden", field(&RunConfig::hidden)},
      {"fixed_graph_epochs", field(&RunConfig::fixed_graph_epochs)},
      {"trials", field(&RunConfig::trials)},
      {"folds", field(&RunConfig::folds)},
      {"repeats", field(&RunConfig::repeats)},
      {"top_k", field(&RunConfig::top_k)},
      {"seed", field(&RunConfig::seed)},
  };
  return fields;
}

const std::map<std::string, Setter<SyntheticSpec>, std::less<>>& spec_fields() {
  static const std::map<std::string, Setter<SyntheticSpec>, std::less<>> fields = {
      {"nodes", field(&SyntheticSpec::nodes)},
      {"length", field(&SyntheticSpec::length)},
      {"subjects_per_class", field(&SyntheticSpec::subjects_per_class)},
      {"edge_probability", field(&SyntheticSpec::edge_probability)},
      {"weight_min", field(&SyntheticSpec::weight_min)},
      {"weight_max", field(&SyntheticSpec::weight_max)},
      {"persistence", field(&SyntheticSpec::persistence)},
      {"noise_std", field(&SyntheticSpec::noise_std)},
      {"perturbed_fraction", field(&SyntheticSpec::perturbed_fraction)},
      {"class_scale", field(&SyntheticSpec::class_scale)},
      {"burn_in", field(&SyntheticSpec::burn_in)},
      {"seed", field(&SyntheticSpec::seed)},
  };
  return fields;
}

template <class Target, class Fields>
void apply(Target& t, const Fields& fields, std::string_view key, std::string_view value) {
  auto it = fields.find(key);
  if (it == fields.end()) {
    std::string known;
    for (const auto& [name, _] : fields) known += (known.empty() ? "" : ", ") + name;
    throw ConfigError("unknown config key '" + std::string(key) + "' (known keys: " + known + ")");
  }
  it->second(t, key, trim(value));
}

// Flattens either file form into ordered (key, text value) pairs.
std::vector<std::pair<std::string, std::string>> read_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  std::vector<std::pair<std::string, std::string>> pairs;

  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    json doc;
    try {
      doc = json::parse(text);
    } catch (const json::exception& e) {
      throw ParseError("config file " + path.string() + ": " + e.what());
    }
    for (const auto& [key, value] : doc.items()) {
      if (value.is_number_unsigned() || value.is_number_integer() || value.is_number_float()) {
        pairs.emplace_back(key, value.dump());
      } else if (value.is_string()) {
        pairs.emplace_back(key, value.get<std::string>());
      } else {
        throw ConfigError("config key '" + key + "' must be a number");
      }
    }
    return pairs;
  }

  std::istringstream lines(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("config file " + path.string() + ", line " + std::to_string(lineno) +
                       ": expected key=value");
    }
    pairs.emplace_back(trim(std::string_view(line).substr(0, eq)),
                       trim(std::string_view(line).substr(eq + 1)));
  }
  return pairs;
}

}  // namespace

void RunConfig::validate() const {
  fit_config().validate();
  if (voters < 1) throw ConfigError("voters must be at least 1");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (trials < 1) throw ConfigError("trials must be at least 1");
  if (folds < 2) throw ConfigError("folds must be at least 2");
  if (repeats < 1) throw ConfigError("repeats must be at least 1");
  if (fixed_graph_epochs < 1) throw ConfigError("fixed_graph_epochs must be at least 1");
}

FitConfig RunConfig::fit_config() const {
  FitConfig f;
  f.score.lambda = lambda;
  f.score.batch_size = batch_size;
  f.score.learning_rate = learning_rate;
  f.score.inner_epochs = inner_epochs;
  f.score.dropout = dropout;
  f.score.weight_decay = weight_decay;
  f.hidden = hidden;
  f.kernel_size = kernel_size;
  f.window = window;
  f.beta = beta;
  f.gamma = gamma;
  f.eta_init = eta_init;
  f.c_init = c_init;
  f.h_tol = h_tol;
  f.c_max = c_max;
  f.k_max = k_max;
  f.init_scale = init_scale;
  return f;
}

EvalOptions RunConfig::eval_options(std::size_t jobs) const {
  EvalOptions e;
  e.folds = folds;
  e.repeats = repeats;
  e.voters = voters;
  e.window = window;
  e.seed = seed;
  e.jobs = jobs;
  return e;
}

void set_option(RunConfig& cfg, std::string_view key, std::string_view value) {
  apply(cfg, run_fields(), key, value);
}

void set_option(SyntheticSpec& spec, std::string_view key, std::string_view value) {
  apply(spec, spec_fields(), key, value);
}

RunConfig load_run_config(const std::filesystem::path& path) {
  RunConfig cfg;
  for (const auto& [k, v] : read_pairs(path)) set_option(cfg, k, v);
  cfg.validate();
  return cfg;
}

SyntheticSpec load_synthetic_spec(const std::filesystem::path& path) {
  SyntheticSpec spec;
  for (const auto& [k, v] : read_pairs(path)) set_option(spec, k, v);
  spec.validate();
  return spec;
}

std::string to_json(const RunConfig& c) {
  json j = {{"window", c.window},
            {"voters", c.voters},
            {"lambda", c.lambda},
            {"learning_rate", c.learning_rate},
            {"batch_size", c.batch_size},
            {"dropout", c.dropout},
            {"weight_decay", c.weight_decay},
            {"beta", c.beta},
            {"gamma", c.gamma},
            {"epsilon", c.epsilon},
            {"inner_epochs", c.inner_epochs},
            {"h_tol", c.h_tol},
            {"k_max", c.k_max},
            {"c_max", c.c_max},
            {"eta_init", c.eta_init},
            {"c_init", c.c_init},
            {"init_scale", c.init_scale},
            {"kernel_size", c.kernel_size},
            {"hidden", c.hidden},
            {"fixed_graph_epochs", c.fixed_graph_epochs},
            {"trials", c.trials},
            {"folds", c.folds},
            {"repeats", c.repeats},
            {"top_k", c.top_k},
            {"seed", c.seed}};
  return j.dump(2);
}

std::string to_json(const SyntheticSpec& s) {
  json j = {{"nodes", s.nodes},
            {"length", s.length},
            {"subjects_per_class", s.subjects_per_class},
            {"edge_probability", s.edge_probability},
            {"weight_min", s.weight_min},
            {"weight_max", s.weight_max},
            {"persistence", s.persistence},
            {"noise_std", s.noise_std},
            {"perturbed_fraction", s.perturbed_fraction},
            {"class_scale", s.class_scale},
            {"burn_in", s.burn_in},
            {"seed", s.seed}};
  return j.dump(2);
}

}  // namespace stdagcn
