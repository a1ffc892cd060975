// tvkd: data generation, teacher caching, training, verification and reports.
//
// Exit codes:
//   0 success
//   1 usage or unexpected error
//   2 config error
//   3 IO error
//   4 dataset or cache checksum mismatch
//   5 missing teacher cache
//   6 invariance assertion failed
//   7 missing checkpoint

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "tvkd/config.hpp"
#include "tvkd/errors.hpp"
#include "tvkd/experiments.hpp"
#include "tvkd/reports.hpp"
#include "tvkd/synthetic_data.hpp"
#include "tvkd/value_cache.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace tvkd;

namespace {

enum Exit : int {
  kOk = 0,
  kUsage = 1,
  kConfig = 2,
  kIo = 3,
  kChecksum = 4,
  kNoCache = 5,
  kVerify = 6,
  kNoCheckpoint = 7,
};

struct CliFailure {
  int code;
  std::string message;
};

LogLevel g_level = LogLevel::Info;

template <class... Args>
void log(LogLevel level, fmt::format_string<Args...> f, Args&&... args) {
  if (static_cast<int>(level) > static_cast<int>(g_level)) return;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::cerr << "tvkd: " << names[static_cast<int>(level)] << ": " << fmt::format(f, std::forward<Args>(args)...)
            << '\n';
}

void ensure_parent(const fs::path& p) {
  std::error_code ec;
  if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
  if (ec) throw IoError(fmt::format("cannot create directory {}: {}", p.parent_path().string(), ec.message()));
}

void write_text(const fs::path& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError(fmt::format("write to {} failed", path.string()));
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

GenConfig gen_for(const GlobalConfig& cfg) {
  GenConfig gen = cfg.experiment.gen;
  gen.seed = cfg.seed;
  return gen;
}

std::string checkpoint_stem(const Method& m) {
  std::string s = to_string(m);
  for (char& c : s) {
    if (c == ':') c = '_';
  }
  return s;
}

// Dataset as written by gen-data, checked against the manifest.
struct LoadedData {
  TokenMDP mdp;
  Dataset data;
  Sha256 checksum{};
};

LoadedData load_checked_dataset(const GlobalConfig& cfg) {
  const std::string text = read_text(cfg.paths.dataset);
  const Sha256 actual = sha256(text);
  const json manifest = json::parse(read_text(cfg.paths.manifest), nullptr, false);
  if (manifest.is_discarded() || !manifest.contains("dataset_sha256") || !manifest["dataset_sha256"].is_string()) {
    throw IoError(fmt::format("manifest {} is malformed", cfg.paths.manifest.string()));
  }
  const std::string expected = manifest["dataset_sha256"].get<std::string>();
  if (expected != to_hex(actual)) {
    throw CliFailure{kChecksum, fmt::format("dataset {} has sha256 {} but the manifest records {}",
                                            cfg.paths.dataset.string(), to_hex(actual), expected)};
  }
  LoadedData out{sample_mdp(gen_for(cfg)), read_dataset(cfg.paths.dataset), actual};
  log(LogLevel::Debug, "loaded {} pairs from {}", out.data.size(), cfg.paths.dataset.string());
  return out;
}

TeacherValueCache load_checked_cache(const GlobalConfig& cfg, const Sha256& dataset_checksum) {
  if (!fs::exists(cfg.paths.cache)) {
    throw CliFailure{kNoCache, fmt::format("teacher cache {} not found; run cache-teacher first",
                                           cfg.paths.cache.string())};
  }
  TeacherValueCache cache = load_cache(cfg.paths.cache);
  if (cache.dataset_checksum != dataset_checksum) {
    throw CliFailure{kChecksum, fmt::format("cache {} was built for dataset {}, current dataset is {}",
                                            cfg.paths.cache.string(), to_hex(cache.dataset_checksum),
                                            to_hex(dataset_checksum))};
  }
  if (cache.beta_teacher != cfg.experiment.teacher_beta() || cache.top_k != cfg.experiment.top_k) {
    throw CliFailure{kChecksum, fmt::format("cache {} was built with beta {} top_k {}, config asks for beta {} top_k {}",
                                            cfg.paths.cache.string(), cache.beta_teacher, cache.top_k,
                                            cfg.experiment.teacher_beta(), cfg.experiment.top_k)};
  }
  return cache;
}

Instance checked_instance(const GlobalConfig& cfg, bool require_cache) {
  LoadedData d = load_checked_dataset(cfg);
  std::optional<TeacherValueCache> cache;
  if (require_cache || fs::exists(cfg.paths.cache)) cache = load_checked_cache(cfg, d.checksum);
  return assemble_instance(cfg.experiment, cfg.seed, std::move(d.mdp), std::move(d.data), std::move(cache));
}

int cmd_gen_data(const GlobalConfig& cfg) {
  const GenConfig gen = gen_for(cfg);
  const TokenMDP mdp = sample_mdp(gen);
  const Dataset data = sample_preference_pairs(mdp, gen);
  const std::string text = dataset_to_string(data);
  write_text(cfg.paths.dataset, text);

  json manifest;
  manifest["format_version"] = kConfigFormatVersion;
  manifest["seed"] = cfg.seed;
  manifest["config"] = json::parse(config_to_json(cfg));
  manifest["dataset"] = cfg.paths.dataset.filename().string();
  manifest["dataset_sha256"] = to_hex(sha256(text));
  manifest["pairs"] = data.size();
  write_text(cfg.paths.manifest, manifest.dump(2) + "\n");
  log(LogLevel::Info, "wrote {} pairs to {}", data.size(), cfg.paths.dataset.string());

  json summary{{"dataset", cfg.paths.dataset.string()},
               {"manifest", cfg.paths.manifest.string()},
               {"pairs", data.size()},
               {"dataset_sha256", manifest["dataset_sha256"]}};
  std::cout << summary.dump() << '\n';
  return kOk;
}

int cmd_cache_teacher(const GlobalConfig& cfg) {
  LoadedData d = load_checked_dataset(cfg);
  const auto split = split_indices(d.data.size(), cfg.experiment.eval_fraction, cfg.seed);
  Dataset train;
  train.reserve(split.first.size());
  for (std::size_t i : split.first) train.push_back(d.data[i]);
  const TeacherModel teacher = make_teacher(cfg.experiment, d.mdp, train, cfg.seed);
  const TeacherValueCache cache = build_value_cache(teacher, d.data, cfg.experiment.top_k, d.checksum, cfg.workers);
  ensure_parent(cfg.paths.cache);
  save_cache(cfg.paths.cache, cache);

  std::size_t positions = 0;
  for (const auto& p : cache.pairs) positions += p.values_winner.size() + p.values_loser.size();
  log(LogLevel::Info, "cached {} pairs ({} positions) to {}", cache.pairs.size(), positions,
      cfg.paths.cache.string());
  json summary{{"pairs", cache.pairs.size()},
               {"positions", positions},
               {"top_k", cache.top_k == 0 ? json("full") : json(cache.top_k)},
               {"beta_teacher", cache.beta_teacher},
               {"cache", cfg.paths.cache.string()}};
  std::cout << summary.dump() << '\n';
  return kOk;
}

int cmd_train(GlobalConfig cfg, const std::optional<std::string>& method, const std::optional<double>& alpha,
              const std::optional<double>& beta) {
  ExperimentConfig& ex = cfg.experiment;
  if (method) {
    try {
      cfg.method = parse_method(*method);
    } catch (const InvalidArgument& e) {
      throw CliFailure{kUsage, fmt::format("--method: {}", e.what())};
    }
  }
  // The teacher is fixed by the cache; a --beta override only changes the student.
  if (!ex.beta_teacher) ex.beta_teacher = ex.teacher_beta();
  if (alpha) ex.loss.alpha = *alpha;
  if (beta) ex.loss.beta = *beta;
  ex.validate();

  const bool needs_cache = cfg.method.kind != MethodKind::Dpo;
  const Instance inst = checked_instance(cfg, needs_cache);
  TrainResult result = train_student(ex, inst, cfg.method);

  const fs::path stem = cfg.paths.checkpoints / checkpoint_stem(cfg.method);
  const fs::path policy_path = fs::path(stem.string() + ".policy");
  const fs::path report_path = fs::path(stem.string() + ".report.json");
  ensure_parent(policy_path);
  save_policy(policy_path, result.policy);
  std::ostringstream report;
  write_run_report_json(report, result.report);
  write_text(report_path, report.str());
  log(LogLevel::Info, "{}: ground-truth accuracy {:.4f} after {} steps", result.report.method,
      result.report.accuracy_ground_truth, result.report.steps);
  std::cout << report.str();
  return kOk;
}

std::string describe_state(const StateSpace& space, StateIndex s) {
  const State st = space.state_at(s);
  std::string tokens;
  for (std::size_t i = 0; i < st.generated.size(); ++i) {
    tokens += (i ? "," : "") + std::to_string(st.generated[i].value);
  }
  return fmt::format("state {} (prompt {}, tokens [{}])", s, st.prompt_id, tokens);
}

int cmd_verify(const GlobalConfig& cfg) {
  const VerifyConfig& vc = cfg.verify;
  Rng rng(vc.potential_seed, Stream::Verification);
  const double beta = cfg.experiment.loss.beta;
  InvarianceReport worst;
  worst.passed = true;
  std::uint32_t checked = 0;
  for (std::uint32_t m = 0; m < vc.num_mdps; ++m) {
    const TokenMDP mdp = random_verification_mdp(rng);
    const StateSpace& space = mdp.space();
    const std::uint32_t count = vc.num_potentials / vc.num_mdps + (m < vc.num_potentials % vc.num_mdps ? 1 : 0);
    for (std::uint32_t k = 0; k < count; ++k) {
      std::vector<double> phi = random_potential(space, rng);
      if (vc.terminal_potential != 0.0) {
        for (StateIndex s = 0; s < phi.size(); ++s) {
          if (space.is_terminal(s)) {
            phi[s] = vc.terminal_potential;
            break;
          }
        }
      }
      InvarianceReport r;
      try {
        r = verify_invariance(mdp, phi, beta);
      } catch (const PotentialError& e) {
        throw CliFailure{kVerify, fmt::format("mdp {} potential {}: {}: {}", m, k, describe_state(space, e.state()),
                                              e.what())};
      }
      ++checked;
      if (!r.passed) {
        throw CliFailure{kVerify, fmt::format("mdp {} potential {}: invariance violated at {} action {}: policy KL "
                                              "{:.3e}, Q deviation {:.3e}, V deviation {:.3e}",
                                              m, k, describe_state(space, r.worst_state), r.worst_action,
                                              r.max_policy_kl, r.max_q_deviation, r.max_v_deviation)};
      }
      worst.max_policy_kl = std::max(worst.max_policy_kl, r.max_policy_kl);
      worst.max_q_deviation = std::max(worst.max_q_deviation, r.max_q_deviation);
      worst.max_v_deviation = std::max(worst.max_v_deviation, r.max_v_deviation);
    }
  }
  log(LogLevel::Info, "{} potentials on {} MDPs: max policy KL {:.3e}", checked, vc.num_mdps, worst.max_policy_kl);

  const ActionShapingReport ce =
      verify_action_shaping_breaks(counterexample_mdp(), ShapingVariant::LogProbability, 1.0, 1.0);
  if (!(ce.policy_kl > 0.01)) {
    throw CliFailure{kVerify, fmt::format("counterexample: action-dependent shaping left the policy unchanged at "
                                          "state 0 (KL {:.3e})",
                                          ce.policy_kl)};
  }

  json summary{{"mdps", vc.num_mdps},
               {"potentials", checked},
               {"potential_seed", vc.potential_seed},
               {"max_policy_kl", worst.max_policy_kl},
               {"max_q_deviation", worst.max_q_deviation},
               {"max_v_deviation", worst.max_v_deviation},
               {"passed", true},
               {"counterexample",
                {{"variant", "LogProbability"},
                 {"original_root", ce.original_root},
                 {"shaped_root", ce.shaped_root},
                 {"policy_kl", ce.policy_kl}}}};
  std::cout << summary.dump() << '\n';
  return kOk;
}

std::vector<Instance> sweep_instances(const GlobalConfig& cfg) {
  std::vector<Instance> out;
  out.reserve(cfg.experiment.seeds.size());
  for (std::uint64_t s : cfg.experiment.seeds) out.push_back(make_instance(cfg.experiment, s));
  return out;
}

std::string render_sweep(const GlobalConfig& cfg, SweepReport& report) {
  const std::vector<Instance> instances = sweep_instances(cfg);
  report = sweep_hyperparameters(cfg.experiment, instances);
  if (!report.alpha_zero_matches_baseline) log(LogLevel::Warn, "alpha = 0 cells differ from the DPO baseline");
  std::ostringstream out;
  write_sweep_csv(out, report);
  return out.str();
}

int cmd_sweep(const GlobalConfig& cfg) {
  SweepReport report;
  const std::string text = render_sweep(cfg, report);
  const fs::path path = cfg.paths.reports / "sweep.csv";
  write_text(path, text);
  json summary{{"sweep", path.string()},
               {"cells", report.cells.size()},
               {"baseline", report.baseline.size()},
               {"alpha_zero_matches_baseline", report.alpha_zero_matches_baseline}};
  std::cout << summary.dump() << '\n';
  return kOk;
}

TabularPolicy load_checkpoint(const GlobalConfig& cfg, const char* name) {
  const fs::path p = cfg.paths.checkpoints / (std::string(name) + ".policy");
  if (!fs::exists(p)) {
    throw CliFailure{kNoCheckpoint, fmt::format("checkpoint {} not found; run train --method {} first", p.string(),
                                                name)};
  }
  return load_policy(p);
}

int cmd_report(const GlobalConfig& cfg) {
  const TabularPolicy dpo = load_checkpoint(cfg, "dpo");
  const TabularPolicy tvkd = load_checkpoint(cfg, "tvkd");
  const Instance inst = checked_instance(cfg, false);
  if (!(dpo.space() == inst.mdp.space()) || !(tvkd.space() == inst.mdp.space())) {
    throw CliFailure{kNoCheckpoint, "checkpoints do not match the configured state space; retrain"};
  }

  std::vector<std::pair<std::string, std::string>> artifacts;
  {
    std::ostringstream out;
    write_table4_csv(out, table4_rows(inst, dpo));
    artifacts.emplace_back("table4.csv", out.str());
  }
  {
    std::ostringstream out;
    write_table5_csv(out, table5_rows(cfg.experiment, inst, dpo, tvkd));
    artifacts.emplace_back("table5.csv", out.str());
  }
  {
    std::ostringstream out;
    write_table6_csv(out, sweep_auxiliary(cfg.experiment, inst));
    artifacts.emplace_back("table6.csv", out.str());
  }
  {
    SweepReport report;
    artifacts.emplace_back("sweep.csv", render_sweep(cfg, report));
  }
  {
    std::vector<TokenAnnotation> rows;
    const std::size_t n = std::min<std::size_t>(cfg.report.annotate_pairs, inst.eval.size());
    for (std::size_t i = 0; i < n; ++i) {
      rows.push_back(export_token_shaping(inst.teacher, inst.eval[i].winner, cfg.report.token_top_k));
    }
    std::ostringstream out;
    write_token_annotation_csv(out, rows);
    artifacts.emplace_back("token_annotation.csv", out.str());
  }

  json manifest;
  manifest["format_version"] = kConfigFormatVersion;
  manifest["seed"] = cfg.seed;
  manifest["seeds"] = cfg.experiment.seeds;
  manifest["config"] = json::parse(config_to_json(cfg));
  manifest["dataset_sha256"] = inst.cache.dataset_checksum == Sha256{} ? json(nullptr)
                                                                       : json(to_hex(inst.cache.dataset_checksum));
  json files = json::object();
  for (const auto& [name, text] : artifacts) {
    write_text(cfg.paths.reports / name, text);
    files[name] = to_hex(sha256(text));
  }
  manifest["artifacts"] = files;
  const std::string manifest_text = manifest.dump(2) + "\n";
  write_text(cfg.paths.reports / "manifest.json", manifest_text);
  log(LogLevel::Info, "wrote {} reports to {}", artifacts.size(), cfg.paths.reports.string());

  json summary{{"reports", cfg.paths.reports.string()}, {"artifacts", files}};
  std::cout << summary.dump() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Teacher value-based knowledge distillation on synthetic token MDPs"};
  app.require_subcommand(1);
  std::string config_path;
  std::string log_level;
  app.add_option("-c,--config", config_path, "JSON config file")->required();
  app.add_option("--log-level", log_level, "error|warn|info|debug (overrides the config)")
      ->check(CLI::IsMember({"error", "warn", "info", "debug"}));

  auto* gen = app.add_subcommand("gen-data", "sample the MDP and write the preference dataset");
  auto* cache = app.add_subcommand("cache-teacher", "precompute teacher values along every dataset response");
  auto* train = app.add_subcommand("train", "train one student and write its checkpoint and run report");
  std::optional<std::string> method;
  std::optional<double> alpha;
  std::optional<double> beta;
  train->add_option("--method", method, "dpo | tvkd | tvkd_ref | aux:<Variant>");
  train->add_option("--alpha", alpha, "shaping weight");
  train->add_option("--beta", beta, "student temperature");
  auto* verify = app.add_subcommand("verify", "check potential-shaping invariance and the action-shaping counterexample");
  auto* report = app.add_subcommand("report", "write the analysis tables from trained checkpoints");
  auto* sweep = app.add_subcommand("sweep", "train the alpha x beta grid and write sweep.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    GlobalConfig cfg = load_config(config_path);
    g_level = cfg.log_level;
    if (log_level == "error") g_level = LogLevel::Error;
    if (log_level == "warn") g_level = LogLevel::Warn;
    if (log_level == "info") g_level = LogLevel::Info;
    if (log_level == "debug") g_level = LogLevel::Debug;

    if (*gen) return cmd_gen_data(cfg);
    if (*cache) return cmd_cache_teacher(cfg);
    if (*train) return cmd_train(cfg, method, alpha, beta);
    if (*verify) return cmd_verify(cfg);
    if (*report) return cmd_report(cfg);
    if (*sweep) return cmd_sweep(cfg);
    return kUsage;
  } catch (const CliFailure& f) {
    log(LogLevel::Error, "{}", f.message);
    return f.code;
  } catch (const ConfigError& e) {
    log(LogLevel::Error, "config error: {}", e.what());
    return kConfig;
  } catch (const IoError& e) {
    log(LogLevel::Error, "{}", e.what());
    return kIo;
  } catch (const ParseError& e) {
    log(LogLevel::Error, "{}", e.what());
    return kIo;
  } catch (const ChecksumMismatch& e) {
    log(LogLevel::Error, "{}", e.what());
    return kChecksum;
  } catch (const std::exception& e) {
    log(LogLevel::Error, "{}", e.what());
    return kUsage;
  }
}
