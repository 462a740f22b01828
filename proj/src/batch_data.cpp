#include "lqpoison/batch_data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include "json.hpp"

#include "lqpoison/errors.hpp"

namespace lqpoison {

Mat BatchDataset::states() const {
  Mat out(size(), n);
  for (long i = 0; i < size(); ++i) out.row(i) = samples[i].x.transpose();
  return out;
}

Mat BatchDataset::inputs() const {
  Mat out(size(), m);
  for (long i = 0; i < size(); ++i) out.row(i) = samples[i].u.transpose();
  return out;
}

Vec BatchDataset::costs() const {
  Vec out(size());
  for (long i = 0; i < size(); ++i) out(i) = samples[i].c;
  return out;
}

void check_consistent(const BatchDataset& d) {
  if (d.n <= 0 || d.m <= 0) throw ValidationError("dataset: n and m must be positive");
  if (!(d.dt > 0.0)) throw ValidationError("dataset: dt must be positive");
  for (long i = 0; i < d.size(); ++i) {
    const SamplePoint& s = d.samples[i];
    if (s.k != i) {
      throw ValidationError("dataset: sample " + std::to_string(i) +
                            " has index " + std::to_string(s.k));
    }
    if (s.x.size() != d.n || s.u.size() != d.m) {
      throw DimensionError("dataset: sample " + std::to_string(i) +
                           " has wrong state/input size");
    }
  }
}

std::string to_string(ExcitationKind kind) {
  switch (kind) {
    case ExcitationKind::kIidUniform:
      return "iid-uniform";
    case ExcitationKind::kPrbs:
      return "prbs";
    case ExcitationKind::kGainPlusDither:
      return "gain-plus-dither";
  }
  return "?";
}

ExcitationKind excitation_kind_from_string(const std::string& s) {
  if (s == "iid-uniform") return ExcitationKind::kIidUniform;
  if (s == "prbs") return ExcitationKind::kPrbs;
  if (s == "gain-plus-dither") return ExcitationKind::kGainPlusDither;
  throw ValidationError("unknown excitation kind '" + s + "'");
}

BatchDataset simulate_zoh(const LQSystem& sys, const ExcitationPolicy& policy,
                          long n_samples) {
  validate(sys);
  if (n_samples < 2) throw ValidationError("simulate_zoh: need N >= 2");
  if (!(policy.amplitude > 0.0)) {
    throw ValidationError("excitation amplitude must be positive");
  }
  const long n = sys.n();
  const long m = sys.m();
  if (policy.kind == ExcitationKind::kGainPlusDither) {
    if (!policy.gain) throw ValidationError("gain-plus-dither needs a gain");
    require_shape(*policy.gain, m, n, "excitation gain");
  }

  const ZohPair fg = zoh_pair(sys.A, sys.B, sys.dt);
  Rng rng(policy.seed);
  const double a = policy.amplitude;

  BatchDataset d;
  d.dt = sys.dt;
  d.n = n;
  d.m = m;
  d.seed = policy.seed;
  d.samples.reserve(static_cast<size_t>(n_samples));

  Vec x = sys.x0;
  for (long k = 0; k < n_samples; ++k) {
    Vec u(m);
    for (long j = 0; j < m; ++j) {
      switch (policy.kind) {
        case ExcitationKind::kPrbs:
          u(j) = rng.coin() ? a : -a;
          break;
        case ExcitationKind::kIidUniform:
        case ExcitationKind::kGainPlusDither:
          u(j) = rng.uniform(-a, a);
          break;
      }
    }
    if (policy.kind == ExcitationKind::kGainPlusDither) u += *policy.gain * x;
    const double c = x.dot(sys.Q * x) + u.dot(sys.R * u);
    d.samples.push_back({k, x, u, c});
    x = fg.F * x + fg.G * u;
  }
  return d;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, long line) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  // from_chars rejects a leading '+', which some writers emit.
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last || first == last) {
    throw ParseError("not a number: '" + s + "'", line);
  }
  return v;
}

std::filesystem::path meta_path_for(const std::filesystem::path& csv_path) {
  std::filesystem::path p = csv_path;
  p.replace_extension(".meta.json");
  return p;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string expected_header(long n, long m) {
  std::string h = "k,t";
  for (long i = 0; i < n; ++i) h += ",x" + std::to_string(i);
  for (long j = 0; j < m; ++j) h += ",u" + std::to_string(j);
  return h + ",c";
}

}  // namespace

void dataset_write(const BatchDataset& d, const std::filesystem::path& path) {
  check_consistent(d);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << expected_header(d.n, d.m) << '\n';
  for (const SamplePoint& s : d.samples) {
    out << s.k << ',' << format_double(static_cast<double>(s.k) * d.dt);
    for (long i = 0; i < d.n; ++i) out << ',' << format_double(s.x(i));
    for (long j = 0; j < d.m; ++j) out << ',' << format_double(s.u(j));
    out << ',' << format_double(s.c) << '\n';
  }
  if (!out) throw Error("write failed for '" + path.string() + "'");

  nlohmann::ordered_json meta;
  meta["dt"] = d.dt;
  meta["n"] = d.n;
  meta["m"] = d.m;
  meta["seed"] = d.seed;
  std::ofstream mout(meta_path_for(path), std::ios::binary);
  if (!mout) throw Error("cannot write metadata sidecar for '" + path.string() + "'");
  mout << meta.dump(2) << '\n';
}

BatchDataset dataset_read(const std::filesystem::path& path) {
  const auto meta_path = meta_path_for(path);
  std::ifstream min(meta_path);
  if (!min) throw ParseError("missing metadata sidecar '" + meta_path.string() + "'", 0);
  nlohmann::json meta;
  try {
    min >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("metadata sidecar: " + std::string(e.what()), 0);
  }

  BatchDataset d;
  try {
    d.dt = meta.at("dt").get<double>();
    d.n = meta.at("n").get<long>();
    d.m = meta.at("m").get<long>();
    d.seed = meta.value("seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("metadata sidecar: " + std::string(e.what()), 0);
  }
  if (!(d.dt > 0.0) || d.n <= 0 || d.m <= 0) {
    throw ParseError("metadata sidecar: dt, n, m must be positive", 0);
  }

  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'", 0);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty file", 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::string header = expected_header(d.n, d.m);
  if (line != header) {
    throw ParseError("header mismatch: expected '" + header + "', got '" + line + "'", 1);
  }
  const size_t cols = static_cast<size_t>(d.n + d.m + 3);

  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != cols) {
      throw ParseError("expected " + std::to_string(cols) + " columns, got " +
                           std::to_string(cells.size()),
                       lineno);
    }
    SamplePoint s;
    const double kval = parse_double(cells[0], lineno);
    s.k = static_cast<long>(kval);
    if (static_cast<double>(s.k) != kval || s.k != d.size()) {
      throw ParseError("non-contiguous sample index '" + cells[0] + "'", lineno);
    }
    s.x.resize(d.n);
    s.u.resize(d.m);
    for (long i = 0; i < d.n; ++i) s.x(i) = parse_double(cells[2 + i], lineno);
    for (long j = 0; j < d.m; ++j) s.u(j) = parse_double(cells[2 + d.n + j], lineno);
    s.c = parse_double(cells[cols - 1], lineno);
    d.samples.push_back(std::move(s));
  }
  if (d.samples.empty()) throw ParseError("no data rows", lineno);
  return d;
}

}  // namespace lqpoison
