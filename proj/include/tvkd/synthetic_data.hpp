#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "tvkd/core_mdp.hpp"
#include "tvkd/soft_rl.hpp"
#include "tvkd/teacher.hpp"
#include "tvkd/value_cache.hpp"

namespace tvkd {

enum class SamplerPolicy { Uniform, TeacherBoltzmann };

std::string_view to_string(SamplerPolicy s) noexcept;
SamplerPolicy parse_sampler(std::string_view name);

struct GenConfig {
  std::uint64_t seed = 0;
  std::uint32_t vocab_size = 3;
  std::uint32_t horizon = 3;
  std::uint32_t num_prompts = 50;
  std::uint32_t pairs_per_prompt = 400;
  double reward_low = -1.0;   // rewards ~ U[reward_low, reward_high)
  double reward_high = 1.0;
  SamplerPolicy sampler = SamplerPolicy::Uniform;
  double sampler_beta = 1.0;  // temperature of the TeacherBoltzmann sampler
  double bt_temperature = 1.0;
  bool variable_length = false;  // response lengths ~ U{1..horizon}

  void validate() const;
};

/// Prompts 0..num_prompts-1 with uniform weights; rewards drawn row by row
/// (prompt-major, then state row, then action) from the Rewards stream.
TokenMDP sample_mdp(const GenConfig& cfg);

/// Teacher logits = soft-optimal Q of `mdp` at `beta_teacher`, V(terminal) = 0.
TeacherModel make_soft_optimal_teacher(const TokenMDP& mdp, double beta_teacher);

/// Teacher with logits Q(s, a) = R(s) + Q*(s, a), where R(s) is the reward
/// accumulated on the way to s, and flat terminal rows whose soft value is the
/// response return. Its Boltzmann policy equals the soft-optimal one and its
/// value at any state is the return so far plus the soft value to go.
TeacherModel make_sequence_value_teacher(const TokenMDP& mdp, double beta_teacher);

/// Bradley-Terry labelled pairs; see docs/formats.md for the draw order.
/// ExhaustionError after 1000 consecutive rejected candidate pairs.
Dataset sample_preference_pairs(const TokenMDP& mdp, const GenConfig& cfg);

/// JSON-lines file, one pair per line.
void write_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset read_dataset(const std::filesystem::path& path);
std::string dataset_to_string(const Dataset& data);

Sha256 sha256(std::string_view bytes);
Sha256 sha256_file(const std::filesystem::path& path);
std::string to_hex(const Sha256& digest);
Sha256 sha256_from_hex(std::string_view hex);  // InvalidArgument on malformed input

}  // namespace tvkd
