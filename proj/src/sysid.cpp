#include "lqpoison/sysid.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "lqpoison/errors.hpp"
#include "lqpoison/json_io.hpp"

namespace lqpoison {

namespace {

constexpr double kRankTol = 1e-10;

// Unit-norm column scaling; zero columns are left alone so they still show up
// as rank loss.
Vec column_scales(const Mat& z) {
  Vec s = z.colwise().norm().transpose();
  for (long i = 0; i < s.size(); ++i) {
    if (s(i) == 0.0) s(i) = 1.0;
  }
  return s;
}

std::vector<std::vector<double>> null_directions(const Mat& z, long rank) {
  Eigen::JacobiSVD<Mat> svd(z, Eigen::ComputeThinV);
  const Mat& v = svd.matrixV();
  std::vector<std::vector<double>> dirs;
  for (long c = rank; c < v.cols(); ++c) {
    std::vector<double> dir(static_cast<size_t>(v.rows()));
    for (long r = 0; r < v.rows(); ++r) dir[static_cast<size_t>(r)] = v(r, c);
    dirs.push_back(std::move(dir));
  }
  return dirs;
}

std::string format_directions(const std::vector<std::vector<double>>& dirs) {
  std::string out;
  for (const auto& d : dirs) {
    out += " [";
    for (size_t i = 0; i < d.size(); ++i) {
      if (i) out += ", ";
      const double v = std::abs(d[i]) < 1e-12 ? 0.0 : d[i];
      out += std::to_string(v);
    }
    out += "]";
  }
  return out;
}

// Scaled QR solve that reports rank loss as an identifiability problem.
Mat identify_lstsq(const Mat& z, const Mat& y, const std::string& what) {
  const Vec scale = column_scales(z);
  const Mat zs = z * scale.cwiseInverse().asDiagonal();
  const long rank = numerical_rank(zs, kRankTol);
  if (rank < z.cols()) {
    auto dirs = null_directions(zs, rank);
    const std::string msg = what + ": regressor rank " + std::to_string(rank) +
                            " < " + std::to_string(z.cols()) +
                            "; unexcited directions:" + format_directions(dirs);
    throw IdentifiabilityError(msg, rank, std::move(dirs));
  }
  return scale.cwiseInverse().asDiagonal() * lstsq(zs, y, kRankTol);
}

}  // namespace

DiscreteModel estimate_fg(const BatchDataset& d) {
  check_consistent(d);
  const long n = d.n;
  const long m = d.m;
  const long transitions = d.size() - 1;
  if (d.size() < n + m + 1) {
    throw IdentifiabilityError("estimate_fg: need at least n + m + 1 = " +
                                   std::to_string(n + m + 1) + " samples, got " +
                                   std::to_string(d.size()),
                               std::max(0L, transitions));
  }

  Mat z(transitions, n + m);
  Mat y(transitions, n);
  for (long k = 0; k < transitions; ++k) {
    z.row(k).head(n) = d.samples[k].x.transpose();
    z.row(k).tail(m) = d.samples[k].u.transpose();
    y.row(k) = d.samples[k + 1].x.transpose();
  }
  const Mat theta = identify_lstsq(z, y, "estimate_fg");

  DiscreteModel out;
  out.F = theta.topRows(n).transpose();
  out.G = theta.bottomRows(m).transpose();
  out.residual = (z * theta - y).squaredNorm() / static_cast<double>(transitions);
  return out;
}

void log_series_step(LogSeriesState& s) {
  const double i = static_cast<double>(s.iter);
  s.term = -((i + 1.0) / (i + 2.0)) * (s.L * s.term);
  s.accum += s.term;
  ++s.iter;
}

ContinuousModel log_indirect(const Mat& f, const Mat& g, double dt, double eps,
                             int max_iter) {
  require_square(f, "F");
  if (g.rows() != f.rows()) throw DimensionError("log_indirect: G rows != F order");
  if (!(dt > 0.0)) throw ValidationError("log_indirect: dt must be positive");
  if (!(eps > 0.0)) throw ValidationError("log_indirect: eps must be positive");
  if (max_iter < 1) throw ValidationError("log_indirect: max_iter must be >= 1");
  const long n = f.rows();

  LogSeriesState s;
  s.L = f - Mat::Identity(n, n);
  const double rho = spectral_radius(s.L);
  if (rho >= 1.0) {
    throw ValidationError("log_indirect: spectral_radius(F - I) = " +
                          std::to_string(rho) +
                          " >= 1, the log series diverges; resample with a "
                          "smaller dt");
  }
  s.term = Mat::Identity(n, n);
  s.accum = Mat::Identity(n, n);
  while (s.iter < max_iter) {
    log_series_step(s);
    if (s.term.norm() <= eps) break;
  }
  return {s.accum * s.L / dt, s.accum * g / dt, s.iter};
}

CostEstimate estimate_qr(const BatchDataset& d) {
  check_consistent(d);
  const long n = d.n;
  const long m = d.m;
  const long qn = n * (n + 1) / 2;
  const long rn = m * (m + 1) / 2;
  if (d.size() < qn + rn) {
    throw IdentifiabilityError("estimate_qr: need at least " +
                                   std::to_string(qn + rn) + " samples, got " +
                                   std::to_string(d.size()),
                               d.size());
  }

  Mat phi(d.size(), qn + rn);
  Mat c(d.size(), 1);
  for (long k = 0; k < d.size(); ++k) {
    const SamplePoint& s = d.samples[k];
    long col = 0;
    for (long i = 0; i < n; ++i) {
      for (long j = i; j < n; ++j) {
        phi(k, col++) = (i == j ? 1.0 : 2.0) * s.x(i) * s.x(j);
      }
    }
    for (long i = 0; i < m; ++i) {
      for (long j = i; j < m; ++j) {
        phi(k, col++) = (i == j ? 1.0 : 2.0) * s.u(i) * s.u(j);
      }
    }
    c(k, 0) = s.c;
  }
  const Mat theta = identify_lstsq(phi, c, "estimate_qr");

  CostEstimate out;
  out.Qhat = Mat::Zero(n, n);
  out.Rhat = Mat::Zero(m, m);
  long col = 0;
  for (long i = 0; i < n; ++i) {
    for (long j = i; j < n; ++j) {
      out.Qhat(i, j) = out.Qhat(j, i) = theta(col++, 0);
    }
  }
  for (long i = 0; i < m; ++i) {
    for (long j = i; j < m; ++j) {
      out.Rhat(i, j) = out.Rhat(j, i) = theta(col++, 0);
    }
  }
  out.Qhat = psd_project(out.Qhat);
  Eigen::LLT<Mat> llt(out.Rhat);
  if (llt.info() != Eigen::Success) {
    throw EstimationError("estimate_qr: fitted R-hat is not positive definite");
  }
  return out;
}

SysIdEstimate identify(const BatchDataset& d, double eps, bool with_qr,
                       int max_iter) {
  const DiscreteModel dm = estimate_fg(d);
  const ContinuousModel cm = log_indirect(dm.F, dm.G, d.dt, eps, max_iter);
  SysIdEstimate est;
  est.Ahat = cm.Ahat;
  est.Bhat = cm.Bhat;
  est.series_terms = cm.series_terms;
  est.dt = d.dt;
  if (with_qr) {
    CostEstimate qr = estimate_qr(d);
    est.Qhat = std::move(qr.Qhat);
    est.Rhat = std::move(qr.Rhat);
  }
  return est;
}

void model_write(const SysIdEstimate& est, const std::filesystem::path& path) {
  Json j;
  j["n"] = est.Ahat.rows();
  j["m"] = est.Bhat.cols();
  j["dt"] = est.dt;
  j["Ahat"] = mat_to_json(est.Ahat);
  j["Bhat"] = mat_to_json(est.Bhat);
  j["Qhat"] = est.Qhat ? mat_to_json(*est.Qhat) : Json(nullptr);
  j["Rhat"] = est.Rhat ? mat_to_json(*est.Rhat) : Json(nullptr);
  j["series_terms"] = est.series_terms;
  write_text_atomic(path, j.dump(2) + "\n");
}

SysIdEstimate model_read(const std::filesystem::path& path) {
  const Json j = read_json_file(path);
  SysIdEstimate est;
  try {
    const long n = j.at("n").get<long>();
    const long m = j.at("m").get<long>();
    est.dt = j.at("dt").get<double>();
    est.Ahat = mat_from_json(j, "Ahat", n, n);
    est.Bhat = mat_from_json(j, "Bhat", n, m);
    if (j.contains("Qhat") && !j.at("Qhat").is_null()) est.Qhat = mat_from_json(j, "Qhat", n, n);
    if (j.contains("Rhat") && !j.at("Rhat").is_null()) est.Rhat = mat_from_json(j, "Rhat", m, m);
    est.series_terms = j.value("series_terms", 0);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return est;
}

}  // namespace lqpoison
