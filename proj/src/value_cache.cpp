#include "tvkd/value_cache.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <exception>
#include <fstream>
#include <istream>
#include <ostream>
#include <thread>

#include <fmt/format.h>

#include "tvkd/errors.hpp"

namespace tvkd {

namespace {

constexpr char kMagic[8] = {'T', 'V', 'K', 'D', 'C', 'A', 'C', 'H'};

void check_coverage(const StateSpace& space, const Trajectory& traj) {
  if (!space.has_prompt(traj.prompt_id)) {
    throw CoverageError(fmt::format("prompt {} is not covered by the teacher", traj.prompt_id));
  }
  if (traj.size() > space.horizon()) {
    throw CoverageError(fmt::format("trajectory of length {} exceeds the teacher horizon", traj.size()));
  }
  for (TokenId a : traj.actions) {
    if (a.value >= space.vocab_size()) {
      throw CoverageError(fmt::format("token {} is outside the teacher vocabulary", a.value));
    }
  }
}

void fill_side(const TeacherModel& teacher, const Trajectory& traj, std::uint32_t top_k,
               std::vector<double>& values, std::vector<double>& psi, std::vector<TopKLogitRecord>& records) {
  check_coverage(teacher.space(), traj);
  const auto states = trajectory_states(teacher.space(), traj);
  values.resize(states.size());
  if (top_k == 0) {
    for (std::size_t t = 0; t < states.size(); ++t) values[t] = teacher.value(states[t]);
  } else {
    records.resize(states.size());
    for (std::size_t t = 0; t < states.size(); ++t) {
      if (!teacher.has_logits(states[t])) {
        records[t] = TopKLogitRecord{};
        values[t] = 0.0;
        continue;
      }
      records[t] = make_topk_record(teacher.logits(states[t]), top_k, teacher.beta);
      values[t] = value_from_topk(records[t], teacher.beta);
    }
  }
  psi = psi_from_values(values);
}

// Little-endian primitives.
template <class T>
void put(std::ostream& out, T x) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &x, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) throw IoError("truncated cache file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  T x;
  std::memcpy(&x, buf, sizeof(T));
  return x;
}

void put_doubles(std::ostream& out, const std::vector<double>& xs) {
  for (double x : xs) put(out, x);
}

std::vector<double> get_doubles(std::istream& in, std::size_t n) {
  std::vector<double> xs(n);
  for (double& x : xs) x = get<double>(in);
  return xs;
}

void put_records(std::ostream& out, const std::vector<TopKLogitRecord>& records) {
  for (const auto& r : records) {
    put(out, static_cast<std::uint32_t>(r.token_ids.size()));
    for (std::size_t i = 0; i < r.token_ids.size(); ++i) {
      put(out, r.token_ids[i]);
      put(out, r.logits[i]);
    }
    put(out, r.remainder_logsumexp);
  }
}

std::vector<TopKLogitRecord> get_records(std::istream& in, std::size_t n, std::uint32_t top_k) {
  std::vector<TopKLogitRecord> records(n);
  for (auto& r : records) {
    const auto k = get<std::uint32_t>(in);
    if (k > top_k) throw IoError(fmt::format("record holds {} logits, more than top_k = {}", k, top_k));
    r.token_ids.resize(k);
    r.logits.resize(k);
    for (std::uint32_t i = 0; i < k; ++i) {
      r.token_ids[i] = get<std::uint32_t>(in);
      r.logits[i] = get<double>(in);
    }
    r.remainder_logsumexp = get<double>(in);
  }
  return records;
}

}  // namespace

std::vector<double> psi_from_values(const std::vector<double>& values) {
  std::vector<double> psi(values.empty() ? 0 : values.size() - 1);
  for (std::size_t t = 0; t < psi.size(); ++t) psi[t] = values[t + 1] - values[t];
  return psi;
}

TeacherValueCache build_value_cache(const TeacherModel& teacher, const Dataset& pairs, std::uint32_t top_k,
                                    const Sha256& dataset_checksum, unsigned workers) {
  validate_teacher(teacher);
  TeacherValueCache cache;
  cache.beta_teacher = teacher.beta;
  cache.top_k = top_k;
  cache.terminal = teacher.terminal;
  cache.dataset_checksum = dataset_checksum;
  cache.pairs.resize(pairs.size());

  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      auto& slot = cache.pairs[i];
      fill_side(teacher, pairs[i].winner, top_k, slot.values_winner, slot.psi_winner, slot.records_winner);
      fill_side(teacher, pairs[i].loser, top_k, slot.values_loser, slot.psi_loser, slot.records_loser);
    }
  };

  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(pairs.size(), 1))));
  if (workers == 1) {
    work(0, pairs.size());
    return cache;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  const std::size_t chunk = (pairs.size() + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t begin = std::min(pairs.size(), w * chunk);
    const std::size_t end = std::min(pairs.size(), begin + chunk);
    threads.emplace_back([&, w, begin, end] {
      try {
        work(begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return cache;
}

void save_cache(std::ostream& out, const TeacherValueCache& cache) {
  out.write(kMagic, sizeof kMagic);
  put(out, cache.version);
  put(out, cache.top_k);
  put(out, cache.beta_teacher);
  put(out, static_cast<std::uint32_t>(cache.terminal));
  out.write(reinterpret_cast<const char*>(cache.dataset_checksum.data()), 32);
  put(out, static_cast<std::uint64_t>(cache.pairs.size()));
  for (const auto& p : cache.pairs) {
    put(out, static_cast<std::uint32_t>(p.psi_winner.size()));
    put(out, static_cast<std::uint32_t>(p.psi_loser.size()));
    put_doubles(out, p.values_winner);
    put_doubles(out, p.psi_winner);
    put_doubles(out, p.values_loser);
    put_doubles(out, p.psi_loser);
    if (cache.top_k > 0) {
      put_records(out, p.records_winner);
      put_records(out, p.records_loser);
    }
  }
  if (!out) throw IoError("cache write failed");
}

TeacherValueCache load_cache(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw IoError("not a teacher value cache");
  }
  TeacherValueCache cache;
  cache.version = get<std::uint32_t>(in);
  if (cache.version != TeacherValueCache::kFormatVersion) {
    throw IoError(fmt::format("unsupported cache version {}", cache.version));
  }
  cache.top_k = get<std::uint32_t>(in);
  cache.beta_teacher = get<double>(in);
  const auto terminal = get<std::uint32_t>(in);
  if (terminal > 1) throw IoError("bad terminal mode in cache header");
  cache.terminal = static_cast<TerminalValue>(terminal);
  if (!in.read(reinterpret_cast<char*>(cache.dataset_checksum.data()), 32)) throw IoError("truncated cache file");
  const auto count = get<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < count; ++i) {
    CachedPair p;
    const auto lw = get<std::uint32_t>(in);
    const auto ll = get<std::uint32_t>(in);
    p.values_winner = get_doubles(in, lw + 1);
    p.psi_winner = get_doubles(in, lw);
    p.values_loser = get_doubles(in, ll + 1);
    p.psi_loser = get_doubles(in, ll);
    if (cache.top_k > 0) {
      p.records_winner = get_records(in, lw + 1, cache.top_k);
      p.records_loser = get_records(in, ll + 1, cache.top_k);
    }
    cache.pairs.push_back(std::move(p));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw IoError("trailing bytes after cache records");
  return cache;
}

void save_cache(const std::filesystem::path& path, const TeacherValueCache& cache) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  save_cache(out, cache);
}

TeacherValueCache load_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  return load_cache(in);
}

}  // namespace tvkd
