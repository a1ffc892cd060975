#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "tvkd/core_mdp.hpp"
#include "tvkd/teacher.hpp"

namespace tvkd {

using Sha256 = std::array<std::uint8_t, 32>;

/// Teacher values and shaping terms along one preference pair.
struct CachedPair {
  std::vector<double> values_winner;  // |winner| + 1
  std::vector<double> values_loser;   // |loser| + 1
  std::vector<double> psi_winner;     // |winner|
  std::vector<double> psi_loser;      // |loser|
  // Only with top_k > 0: one record per visited state. A state whose value is
  // 0 by convention (terminal, Zero mode) has an empty record.
  std::vector<TopKLogitRecord> records_winner;
  std::vector<TopKLogitRecord> records_loser;

  friend bool operator==(const CachedPair&, const CachedPair&) = default;
};

struct TeacherValueCache {
  static constexpr std::uint32_t kFormatVersion = 1;

  std::uint32_t version = kFormatVersion;
  double beta_teacher = 1.0;
  std::uint32_t top_k = 0;  // 0: values computed from full logit rows
  TerminalValue terminal = TerminalValue::Zero;
  Sha256 dataset_checksum{};
  std::vector<CachedPair> pairs;  // dataset order

  friend bool operator==(const TeacherValueCache&, const TeacherValueCache&) = default;
};

/// Computes the cache for every pair. With top_k > 0 each visited state's row
/// is reduced to a TopKLogitRecord and the values are recomputed from it.
/// Pairs are sharded over `workers` threads; each writes its own slots.
/// CoverageError if a trajectory leaves the teacher's state space.
TeacherValueCache build_value_cache(const TeacherModel& teacher, const Dataset& pairs, std::uint32_t top_k,
                                    const Sha256& dataset_checksum, unsigned workers = 1);

/// Little-endian binary layout documented in docs/formats.md.
void save_cache(std::ostream& out, const TeacherValueCache& cache);
TeacherValueCache load_cache(std::istream& in);
void save_cache(const std::filesystem::path& path, const TeacherValueCache& cache);
TeacherValueCache load_cache(const std::filesystem::path& path);

/// Re-derives psi from the stored values (psi_t = v_{t+1} - v_t).
std::vector<double> psi_from_values(const std::vector<double>& values);

}  // namespace tvkd
