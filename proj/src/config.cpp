#include "tvkd/config.hpp"

#include <fstream>
#include <iterator>
#include <limits>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "tvkd/errors.hpp"

namespace tvkd {

namespace {

using nlohmann::json;

class Section {
 public:
  Section(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) throw ConfigError(prefix_.empty() ? "<root>" : prefix_, "expected an object");
  }

  std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <class T>
  void get(const std::string& key, T& out) {
    if (const json* v = find(key)) out = convert<T>(*v, path(key));
  }

  template <class T>
  T require(const std::string& key) {
    const json* v = find(key);
    if (!v) throw ConfigError(path(key), "required field is missing");
    return convert<T>(*v, path(key));
  }

  Section sub(const std::string& key) {
    static const json empty = json::object();
    const json* v = find(key);
    return Section(v ? *v : empty, path(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(path(it.key()), "unknown field");
    }
  }

  template <class T>
  static T convert(const json& v, const std::string& field) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(field, "expected a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(field, "expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(field, "expected a number");
      return v.get<T>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(field, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_unsigned()) {
          const auto x = v.get<std::uint64_t>();
          if (x > std::numeric_limits<T>::max()) throw ConfigError(field, "value out of range");
          return static_cast<T>(x);
        }
        throw ConfigError(field, "expected a nonnegative integer");
      } else {
        const auto x = v.get<std::int64_t>();
        if (x < std::numeric_limits<T>::min() || x > std::numeric_limits<T>::max()) {
          throw ConfigError(field, "value out of range");
        }
        return static_cast<T>(x);
      }
    } else {
      using E = typename T::value_type;
      if (!v.is_array()) throw ConfigError(field, "expected an array");
      T out;
      for (std::size_t i = 0; i < v.size(); ++i) out.push_back(convert<E>(v[i], fmt::format("{}[{}]", field, i)));
      return out;
    }
  }

 private:
  const json& j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

template <class Fn>
auto parse_enum(const std::string& field, const std::string& text, Fn fn) {
  try {
    return fn(text);
  } catch (const InvalidArgument& e) {
    throw ConfigError(field, e.what());
  }
}

LogLevel parse_log_level(const std::string& s) {
  if (s == "error") return LogLevel::Error;
  if (s == "warn") return LogLevel::Warn;
  if (s == "info") return LogLevel::Info;
  if (s == "debug") return LogLevel::Debug;
  throw InvalidArgument(fmt::format("unknown log level '{}'", s));
}

const char* to_string(LogLevel l) {
  switch (l) {
    case LogLevel::Error: return "error";
    case LogLevel::Warn: return "warn";
    case LogLevel::Info: return "info";
    case LogLevel::Debug: return "debug";
  }
  return "info";
}

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adam") return OptimizerKind::Adam;
  if (s == "sgd") return OptimizerKind::Sgd;
  throw InvalidArgument(fmt::format("unknown optimizer '{}'", s));
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

GlobalConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", fmt::format("invalid JSON: {}", e.what()));
  }
  GlobalConfig cfg;
  Section top(root, "");
  cfg.format_version = top.require<int>("format_version");
  if (cfg.format_version != kConfigFormatVersion) {
    throw ConfigError("format_version", fmt::format("expected {}, got {}", kConfigFormatVersion, cfg.format_version));
  }
  cfg.seed = top.require<std::uint64_t>("seed");
  std::string level = "info";
  top.get("log_level", level);
  cfg.log_level = parse_enum("log_level", level, parse_log_level);
  top.get("workers", cfg.workers);
  if (cfg.workers == 0) throw ConfigError("workers", "must be at least 1");

  ExperimentConfig& ex = cfg.experiment;
  ex.gen.seed = cfg.seed;
  ex.seeds = {0, 1, 2, 3, 4};

  {
    Section s = top.sub("paths");
    std::string p;
    auto path_field = [&](const char* key, std::filesystem::path& out) {
      out = resolve(base_dir, out.string());
      if (s.has(key)) {
        s.get(key, p);
        out = resolve(base_dir, p);
      } else {
        s.find(key);
      }
    };
    path_field("dataset", cfg.paths.dataset);
    path_field("manifest", cfg.paths.manifest);
    path_field("cache", cfg.paths.cache);
    path_field("checkpoints", cfg.paths.checkpoints);
    path_field("reports", cfg.paths.reports);
    s.finish();
  }
  {
    Section s = top.sub("generation");
    GenConfig& g = ex.gen;
    s.get("vocab_size", g.vocab_size);
    s.get("horizon", g.horizon);
    s.get("num_prompts", g.num_prompts);
    s.get("pairs_per_prompt", g.pairs_per_prompt);
    s.get("reward_low", g.reward_low);
    s.get("reward_high", g.reward_high);
    std::string sampler(to_string(g.sampler));
    s.get("sampler", sampler);
    g.sampler = parse_enum(s.path("sampler"), sampler, parse_sampler);
    s.get("sampler_beta", g.sampler_beta);
    s.get("bt_temperature", g.bt_temperature);
    s.get("variable_length", g.variable_length);
    s.finish();
  }
  {
    Section s = top.sub("teacher");
    std::string kind(to_string(ex.teacher_kind));
    s.get("kind", kind);
    ex.teacher_kind = parse_enum(s.path("kind"), kind, parse_teacher_kind);
    if (const json* b = s.find("beta"); b && !b->is_null()) ex.beta_teacher = Section::convert<double>(*b, s.path("beta"));
    s.get("top_k", ex.top_k);
    s.finish();
  }
  {
    Section s = top.sub("training");
    std::string method = to_string(cfg.method);
    s.get("method", method);
    cfg.method = parse_enum(s.path("method"), method, parse_method);
    s.get("alpha", ex.loss.alpha);
    s.get("beta", ex.loss.beta);
    s.get("epochs", ex.training.epochs);
    s.get("batch_size", ex.training.batch_size);
    std::string opt = ex.training.optimizer == OptimizerKind::Adam ? "adam" : "sgd";
    s.get("optimizer", opt);
    ex.training.optimizer = parse_enum(s.path("optimizer"), opt, parse_optimizer);
    s.get("learning_rate", ex.training.learning_rate);
    s.get("init_stddev", ex.training.init_stddev);
    s.get("select_best_epoch", ex.training.select_best_epoch);
    s.get("eval_fraction", ex.eval_fraction);
    std::string align(to_string(ex.alignment));
    s.get("alignment", align);
    ex.alignment = parse_enum(s.path("alignment"), align, parse_alignment_mode);
    s.finish();
  }
  {
    Section s = top.sub("sweep");
    s.get("alphas", ex.alpha_grid);
    s.get("betas", ex.beta_grid);
    s.get("seeds", ex.seeds);
    s.finish();
  }
  {
    Section s = top.sub("verify");
    s.get("num_mdps", cfg.verify.num_mdps);
    s.get("num_potentials", cfg.verify.num_potentials);
    s.get("potential_seed", cfg.verify.potential_seed);
    s.get("terminal_potential", cfg.verify.terminal_potential);
    s.finish();
  }
  {
    Section s = top.sub("report");
    s.get("token_top_k", cfg.report.token_top_k);
    s.get("annotate_pairs", cfg.report.annotate_pairs);
    s.finish();
  }
  top.finish();

  try {
    ex.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError("<config>", e.what());
  }
  if (cfg.verify.num_mdps == 0) throw ConfigError("verify.num_mdps", "must be at least 1");
  if (cfg.report.token_top_k == 0) throw ConfigError("report.token_top_k", "must be at least 1");
  return cfg;
}

GlobalConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open config {}", path.string()));
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config(text, path.parent_path());
}

std::string config_to_json(const GlobalConfig& cfg) {
  const ExperimentConfig& ex = cfg.experiment;
  nlohmann::ordered_json j;
  j["format_version"] = cfg.format_version;
  j["seed"] = cfg.seed;
  j["log_level"] = to_string(cfg.log_level);
  j["workers"] = cfg.workers;
  j["paths"] = {{"dataset", cfg.paths.dataset.string()},
                {"manifest", cfg.paths.manifest.string()},
                {"cache", cfg.paths.cache.string()},
                {"checkpoints", cfg.paths.checkpoints.string()},
                {"reports", cfg.paths.reports.string()}};
  j["generation"] = {{"vocab_size", ex.gen.vocab_size},
                     {"horizon", ex.gen.horizon},
                     {"num_prompts", ex.gen.num_prompts},
                     {"pairs_per_prompt", ex.gen.pairs_per_prompt},
                     {"reward_low", ex.gen.reward_low},
                     {"reward_high", ex.gen.reward_high},
                     {"sampler", std::string(to_string(ex.gen.sampler))},
                     {"sampler_beta", ex.gen.sampler_beta},
                     {"bt_temperature", ex.gen.bt_temperature},
                     {"variable_length", ex.gen.variable_length}};
  nlohmann::ordered_json teacher = {{"kind", std::string(to_string(ex.teacher_kind))}};
  teacher["beta"] = ex.beta_teacher ? nlohmann::ordered_json(*ex.beta_teacher) : nlohmann::ordered_json(nullptr);
  teacher["top_k"] = ex.top_k;
  j["teacher"] = teacher;
  j["training"] = {{"method", to_string(cfg.method)},
                   {"alpha", ex.loss.alpha},
                   {"beta", ex.loss.beta},
                   {"epochs", ex.training.epochs},
                   {"batch_size", ex.training.batch_size},
                   {"optimizer", ex.training.optimizer == OptimizerKind::Adam ? "adam" : "sgd"},
                   {"learning_rate", ex.training.learning_rate},
                   {"init_stddev", ex.training.init_stddev},
                   {"select_best_epoch", ex.training.select_best_epoch},
                   {"eval_fraction", ex.eval_fraction},
                   {"alignment", std::string(to_string(ex.alignment))}};
  j["sweep"] = {{"alphas", ex.alpha_grid}, {"betas", ex.beta_grid}, {"seeds", ex.seeds}};
  j["verify"] = {{"num_mdps", cfg.verify.num_mdps},
                 {"num_potentials", cfg.verify.num_potentials},
                 {"potential_seed", cfg.verify.potential_seed},
                 {"terminal_potential", cfg.verify.terminal_potential}};
  j["report"] = {{"token_top_k", cfg.report.token_top_k}, {"annotate_pairs", cfg.report.annotate_pairs}};
  return j.dump(2);
}

}  // namespace tvkd
