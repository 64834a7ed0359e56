#include "emsca/novelty.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "byte_io.hpp"
#include "emsca/error.hpp"
#include "emsca/parallel.hpp"
#include "emsca/rng.hpp"
#include "emsca/text.hpp"

namespace emsca {

namespace {

constexpr std::uint64_t kOrderTag = 0x6f726472;  // "ordr"

double sq_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

// Dual: min 1/2 a'Qa  s.t. 0 <= a_i <= 1, sum a = nu * l. Second-order
// working-set selection, all labels +1.
struct Solver {
  const Eigen::MatrixXd& q;
  std::vector<double> alpha;
  std::vector<double> grad;
  double tol;

  bool at_upper(std::size_t i) const { return alpha[i] >= 1.0; }
  bool at_lower(std::size_t i) const { return alpha[i] <= 0.0; }

  // Returns false once the KKT gap is below tol.
  bool select(std::size_t& out_i, std::size_t& out_j) const {
    const std::size_t l = alpha.size();
    double gmax = -std::numeric_limits<double>::infinity();
    double gmax2 = -std::numeric_limits<double>::infinity();
    std::size_t i = l;
    for (std::size_t t = 0; t < l; ++t) {
      if (!at_upper(t) && -grad[t] >= gmax) {
        gmax = -grad[t];
        i = t;
      }
    }
    if (i == l) return false;
    std::size_t j = l;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < l; ++t) {
      if (at_lower(t)) continue;
      gmax2 = std::max(gmax2, grad[t]);
      const double b = gmax + grad[t];
      if (b > 0.0) {
        double quad = q(i, i) + q(t, t) - 2.0 * q(i, t);
        if (quad <= 0.0) quad = 1e-12;
        const double obj = -(b * b) / quad;
        if (obj <= best) {
          best = obj;
          j = t;
        }
      }
    }
    if (gmax + gmax2 < tol || j == l) return false;
    out_i = i;
    out_j = j;
    return true;
  }

  void update(std::size_t i, std::size_t j) {
    const double old_i = alpha[i];
    const double old_j = alpha[j];
    double quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
    if (quad <= 0.0) quad = 1e-12;
    const double delta = (grad[i] - grad[j]) / quad;
    const double sum = alpha[i] + alpha[j];
    alpha[i] -= delta;
    alpha[j] += delta;
    if (sum > 1.0) {
      if (alpha[i] > 1.0) {
        alpha[i] = 1.0;
        alpha[j] = sum - 1.0;
      }
    } else if (alpha[j] < 0.0) {
      alpha[j] = 0.0;
      alpha[i] = sum;
    }
    if (sum > 1.0) {
      if (alpha[j] > 1.0) {
        alpha[j] = 1.0;
        alpha[i] = sum - 1.0;
      }
    } else if (alpha[i] < 0.0) {
      alpha[i] = 0.0;
      alpha[j] = sum;
    }
    const double di = alpha[i] - old_i;
    const double dj = alpha[j] - old_j;
    for (std::size_t t = 0; t < alpha.size(); ++t) grad[t] += q(t, i) * di + q(t, j) * dj;
  }

  double rho() const {
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double free_sum = 0.0;
    std::size_t n_free = 0;
    for (std::size_t t = 0; t < alpha.size(); ++t) {
      if (at_upper(t)) {
        lb = std::max(lb, grad[t]);
      } else if (at_lower(t)) {
        ub = std::min(ub, grad[t]);
      } else {
        free_sum += grad[t];
        ++n_free;
      }
    }
    return n_free > 0 ? free_sum / static_cast<double>(n_free) : 0.5 * (ub + lb);
  }
};

}  // namespace

void NoveltyConfig::validate() const {
  if (!(nu > 0.0 && nu <= 1.0)) fail(Errc::invalid_argument, "nu must lie in (0, 1]");
  if (gamma && !(*gamma > 0.0)) fail(Errc::invalid_argument, "gamma must be positive");
  if (!(gamma_factor > 0.0)) fail(Errc::invalid_argument, "gamma_factor must be positive");
  if (!(tolerance > 0.0)) fail(Errc::invalid_argument, "tolerance must be positive");
  if (max_iterations == 0) fail(Errc::invalid_argument, "max_iterations must be >= 1");
}

void NoveltyModel::validate() const {
  if (feature_dim == 0) fail(Errc::model_format, "novelty model has zero feature dimension");
  if (support_vectors.size() != coefficients.size() * feature_dim) {
    fail(Errc::model_format, "support vector matrix does not match coefficient count");
  }
  if (feature_mean.size() != feature_dim || feature_std.size() != feature_dim) {
    fail(Errc::model_format, "standardization statistics do not match the feature dimension");
  }
  if (!(gamma > 0.0)) fail(Errc::model_format, "gamma must be positive");
  if (!(margin >= 0.0)) fail(Errc::model_format, "margin must be non-negative");
  if (coefficients.size() > training_rows) {
    fail(Errc::model_format, "more support vectors than training rows");
  }
}

NoveltyModel fit_novelty(const Dataset& legit, const NoveltyConfig& config) {
  config.validate();
  legit.validate();
  const std::size_t l = legit.rows();
  const std::size_t d = legit.feature_dim;
  if (l < 10) {
    fail(Errc::insufficient_data, "novelty fit needs at least 10 rows, got " + std::to_string(l));
  }
  bool identical = true;
  for (std::size_t i = 1; i < l && identical; ++i) {
    const auto a = legit.row(0);
    const auto b = legit.row(i);
    identical = std::equal(a.begin(), a.end(), b.begin());
  }
  if (identical) fail(Errc::degenerate_data, "all " + std::to_string(l) + " training rows are identical");

  NoveltyModel m;
  m.feature_dim = d;
  m.nu = config.nu;
  m.margin = config.tolerance;
  m.training_rows = l;
  m.feature_mean.assign(d, 0.0);
  m.feature_std.assign(d, 0.0);
  for (std::size_t i = 0; i < l; ++i) {
    const auto r = legit.row(i);
    for (std::size_t f = 0; f < d; ++f) m.feature_mean[f] += r[f];
  }
  for (auto& v : m.feature_mean) v /= static_cast<double>(l);
  for (std::size_t i = 0; i < l; ++i) {
    const auto r = legit.row(i);
    for (std::size_t f = 0; f < d; ++f) {
      const double dv = r[f] - m.feature_mean[f];
      m.feature_std[f] += dv * dv;
    }
  }
  for (auto& v : m.feature_std) {
    v = std::sqrt(v / static_cast<double>(l));
    if (!(v > 0.0)) v = 1.0;
  }

  // Training rows in a seeded order; the order only affects the solver path.
  std::vector<std::size_t> order(l);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(config.seed, kOrderTag));
  rng.shuffle(std::span(order));

  Eigen::MatrixXd x(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < l; ++i) {
    const auto r = legit.row(order[i]);
    for (std::size_t f = 0; f < d; ++f) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) =
          (r[f] - m.feature_mean[f]) / m.feature_std[f];
    }
  }

  if (config.gamma) {
    m.gamma = *config.gamma;
  } else {
    const double mean = x.mean();
    const double var = (x.array() - mean).square().mean();
    if (!(var > 0.0)) fail(Errc::degenerate_data, "standardized training matrix has zero variance");
    m.gamma = config.gamma_factor / (static_cast<double>(d) * var);
  }

  const Eigen::VectorXd norms = x.rowwise().squaredNorm();
  Eigen::MatrixXd q = x * x.transpose();
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    for (Eigen::Index j = 0; j < q.cols(); ++j) {
      const double dist = std::max(0.0, norms(i) + norms(j) - 2.0 * q(i, j));
      q(i, j) = i == j ? 1.0 : std::exp(-m.gamma * dist);
    }
  }

  Solver s{q, std::vector<double>(l, 0.0), std::vector<double>(l, 0.0), config.tolerance};
  const double total = config.nu * static_cast<double>(l);
  const auto n_full = static_cast<std::size_t>(total);
  for (std::size_t i = 0; i < n_full; ++i) s.alpha[i] = 1.0;
  if (n_full < l) s.alpha[n_full] = total - static_cast<double>(n_full);
  for (std::size_t i = 0; i < l; ++i) {
    if (s.alpha[i] == 0.0) continue;
    for (std::size_t t = 0; t < l; ++t) s.grad[t] += q(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) * s.alpha[i];
  }

  std::size_t iter = 0;
  std::size_t i = 0, j = 0;
  while (s.select(i, j)) {
    if (iter == config.max_iterations) {
      fail(Errc::solver, "one-class solver did not converge within " + std::to_string(iter) +
                             " iterations");
    }
    s.update(i, j);
    ++iter;
  }
  m.iterations = iter;
  m.rho = s.rho();
  for (std::size_t t = 0; t < l; ++t) {
    if (s.alpha[t] > 0.0) {
      const auto row = x.row(static_cast<Eigen::Index>(t));
      for (Eigen::Index f = 0; f < row.size(); ++f) m.support_vectors.push_back(row(f));
      m.coefficients.push_back(s.alpha[t]);
    }
  }
  return m;
}

double novelty_score(const NoveltyModel& model, std::span<const double> features) {
  if (features.size() != model.feature_dim) {
    fail(Errc::shape, "expected " + std::to_string(model.feature_dim) + " features, got " +
                          std::to_string(features.size()));
  }
  std::vector<double> z(model.feature_dim);
  for (std::size_t f = 0; f < z.size(); ++f) {
    z[f] = (features[f] - model.feature_mean[f]) / model.feature_std[f];
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < model.n_support(); ++i) {
    sum += model.coefficients[i] * std::exp(-model.gamma * sq_distance(model.support_vector(i), z));
  }
  return sum - model.rho;
}

std::vector<double> novelty_scores(const NoveltyModel& model, const Dataset& rows) {
  std::vector<double> out(rows.rows());
  parallel_for(rows.rows(), [&](std::size_t i) { out[i] = novelty_score(model, rows.row(i)); });
  return out;
}

TamperSummary detect_tampering(const NoveltyModel& model, std::span<const IQTrace> traces,
                               const FeatureConfig& feature_config) {
  TamperSummary s;
  s.verdicts.resize(traces.size());
  parallel_for(traces.size(), [&](std::size_t i) {
    const auto values = make_feature_values(traces[i].samples, traces[i].sample_rate_hz, feature_config);
    auto& v = s.verdicts[i];
    v.id = traces[i].label ? *traces[i].label : "trace" + std::to_string(i);
    v.score = novelty_score(model, values);
    v.novel = is_novel(model, v.score);
  });
  for (const auto& v : s.verdicts) (v.novel ? s.outliers : s.inliers)++;
  s.flagged_fraction =
      traces.empty() ? 0.0 : static_cast<double>(s.outliers) / static_cast<double>(traces.size());
  return s;
}

std::string format_verdicts(const TamperSummary& summary) {
  std::size_t width = 5;
  for (const auto& v : summary.verdicts) width = std::max(width, v.id.size());
  std::ostringstream os;
  auto pad = [](std::string s, std::size_t w) {
    s.resize(std::max(s.size(), w), ' ');
    return s;
  };
  os << pad("trace", width) << "  " << pad("score", 12) << "  verdict\n";
  for (const auto& v : summary.verdicts) {
    os << pad(v.id, width) << "  " << pad(text::format_fixed(v.score, 6), 12) << "  "
       << (v.novel ? "novel" : "legit") << '\n';
  }
  os << "inliers=" << summary.inliers << " outliers=" << summary.outliers
     << " flagged=" << text::format_fixed(summary.flagged_fraction, 4) << '\n';
  return os.str();
}

void save_novelty(const NoveltyModel& model, const std::filesystem::path& path) {
  model.validate();
  detail::ByteWriter w;
  w.bytes(std::string_view(kNoveltyMagic, 8));
  w.u32(kNoveltyVersion);
  w.u32(static_cast<std::uint32_t>(model.feature_dim));
  w.u32(static_cast<std::uint32_t>(model.n_support()));
  w.u32(static_cast<std::uint32_t>(model.training_rows));
  w.f64(model.gamma);
  w.f64(model.rho);
  w.f64(model.nu);
  w.f64(model.margin);
  w.f64s(model.feature_mean);
  w.f64s(model.feature_std);
  w.f64s(model.support_vectors);
  w.f64s(model.coefficients);
  text::write_file(path, w.view());
}

NoveltyModel load_novelty(const std::filesystem::path& path) {
  const std::string body = text::read_file(path);
  detail::ByteReader r(body, Errc::model_format, path.string());
  if (r.bytes(8) != std::string_view(kNoveltyMagic, 8)) {
    fail(Errc::model_format, path.string() + ": not an emsca novelty model");
  }
  const auto version = r.u32();
  if (version != kNoveltyVersion) {
    fail(Errc::model_format, path.string() + ": unsupported model version " + std::to_string(version));
  }
  NoveltyModel m;
  m.feature_dim = r.u32();
  const std::size_t n_sv = r.u32();
  m.training_rows = r.u32();
  if (m.feature_dim == 0 || m.feature_dim > (1u << 24) || n_sv > m.training_rows) {
    fail(Errc::model_format, path.string() + ": bad dimensions");
  }
  m.gamma = r.f64();
  m.rho = r.f64();
  m.nu = r.f64();
  m.margin = r.f64();
  m.feature_mean = r.f64s(m.feature_dim);
  m.feature_std = r.f64s(m.feature_dim);
  if (n_sv > r.remaining() / 8 / m.feature_dim) fail(Errc::model_format, path.string() + ": truncated");
  m.support_vectors = r.f64s(n_sv * m.feature_dim);
  m.coefficients = r.f64s(n_sv);
  r.expect_end();
  m.validate();
  return m;
}

}  // namespace emsca
