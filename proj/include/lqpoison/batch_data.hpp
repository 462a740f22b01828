#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "lqpoison/linalg.hpp"
#include "lqpoison/lq_model.hpp"

namespace lqpoison {

/// One record (x_k, u_k, c_k): the state at t = k dt, the input held on
/// [k dt, (k+1) dt) and the instantaneous cost x'Qx + u'Ru.
struct SamplePoint {
  long k = 0;
  Vec x;
  Vec u;
  double c = 0.0;
};

struct BatchDataset {
  std::vector<SamplePoint> samples;
  double dt = 0.0;
  long n = 0;
  long m = 0;
  std::uint64_t seed = 0;

  long size() const { return static_cast<long>(samples.size()); }
  /// N x n matrix whose rows are x_k'.
  Mat states() const;
  /// N x m matrix whose rows are u_k'.
  Mat inputs() const;
  Vec costs() const;
};

/// Throws ValidationError unless indices run 0..N-1 and every row has shape
/// (n, m).
void check_consistent(const BatchDataset& d);

enum class ExcitationKind { kIidUniform, kPrbs, kGainPlusDither };

std::string to_string(ExcitationKind kind);
ExcitationKind excitation_kind_from_string(const std::string& s);

/**
 * How the recorded inputs are chosen.
 *
 * iid-uniform: u_k ~ U[-a, a]^m independently per interval.
 * prbs: u_k in {-a, +a}^m with independent fair signs.
 * gain-plus-dither: u_k = K x_k + U[-a, a]^m.
 */
struct ExcitationPolicy {
  ExcitationKind kind = ExcitationKind::kIidUniform;
  double amplitude = 1.0;
  std::optional<Mat> gain;
  std::uint64_t seed = 42;
};

/**
 * Reproducible random source: std::mt19937_64 (whose output sequence is fixed
 * by the C++ standard) with doubles built from the top 53 bits, so that a seed
 * yields the same numbers on every conforming platform.
 */
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  /// Uniform on [0, 1).
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  bool coin() { return (engine_() >> 63) != 0; }

 private:
  std::mt19937_64 engine_;
};

/**
 * Samples N records of the plant under zero-order hold. States propagate by
 * the exact pair (F, G) = zoh_pair(A, B, dt) starting from sys.x0.
 * Validates the system first (LearnabilityError when rho(A) dt >= 1).
 */
BatchDataset simulate_zoh(const LQSystem& sys, const ExcitationPolicy& policy,
                          long n_samples);

/// Sidecar path: "data.csv" -> "data.meta.json".
std::filesystem::path meta_path_for(const std::filesystem::path& csv_path);

/// Writes the CSV (header k,t,x0..,u0..,c) and the .meta.json sidecar.
void dataset_write(const BatchDataset& d, const std::filesystem::path& path);

/// Reads a dataset written by dataset_write. Throws ParseError (with the
/// offending line number when applicable) on malformed input.
BatchDataset dataset_read(const std::filesystem::path& path);

/// Shortest decimal string that parses back to exactly `v`.
std::string format_double(double v);

/// Strict full-string parse; throws ParseError(line) on failure.
double parse_double(const std::string& s, long line);

}  // namespace lqpoison
