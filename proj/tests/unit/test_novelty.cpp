#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "emsca/emitter_sim.hpp"
#include "emsca/novelty.hpp"
#include "emsca/text.hpp"
#include "emsca/trace_store.hpp"
#include "helpers.hpp"

using namespace emsca;
using testing::error_code_of;

namespace {

/// Mixture of three anisotropic Gaussian clusters in `dim` dimensions.
Dataset clusters(std::size_t n, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  Dataset ds;
  ds.feature_dim = dim;
  ds.class_table = {"legit"};
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % 3;
    std::vector<double> row(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      row[j] = 4.0 * static_cast<double>(c) * (j == c % dim ? 1.0 : 0.0) + (1.0 + 0.5 * j) * rng.normal();
    }
    ds.add_row(row, 0);
  }
  return ds;
}

/// Decision value recomputed from the raw model fields in long double.
long double kernel_sum(const NoveltyModel& m, std::span<const double> x) {
  long double sum = 0.0L;
  for (std::size_t i = 0; i < m.n_support(); ++i) {
    long double d2 = 0.0L;
    for (std::size_t f = 0; f < m.feature_dim; ++f) {
      const long double z = (static_cast<long double>(x[f]) - m.feature_mean[f]) / m.feature_std[f];
      const long double diff = m.support_vectors[i * m.feature_dim + f] - z;
      d2 += diff * diff;
    }
    sum += m.coefficients[i] * std::exp(-static_cast<long double>(m.gamma) * d2);
  }
  return sum - m.rho;
}

}  // namespace

TEST_SUITE("novelty-detector") {

TEST_CASE("training outlier fraction respects nu") {
  for (double nu : {0.05, 0.1, 0.2}) {
    for (std::uint64_t seed : {1u, 2u}) {
      CAPTURE(nu);
      CAPTURE(seed);
      const Dataset ds = clusters(300, 4, seed);
      NoveltyConfig cfg;
      cfg.nu = nu;
      const NoveltyModel m = fit_novelty(ds, cfg);
      std::size_t out = 0;
      for (double s : novelty_scores(m, ds)) out += is_novel(m, s);
      CHECK(static_cast<double>(out) / 300.0 <= nu + 0.05);
      // Dual feasibility: alpha in [0, 1], sum alpha = nu * l; SV count >= nu * l.
      const double total = std::accumulate(m.coefficients.begin(), m.coefficients.end(), 0.0);
      CHECK(total == doctest::Approx(nu * 300.0).epsilon(1e-9));
      for (double a : m.coefficients) CHECK((a > 0.0 && a <= 1.0 + 1e-12));
      CHECK(static_cast<double>(m.n_support()) >= nu * 300.0 - 1e-9);
    }
  }
}

TEST_CASE("decision values equal a brute-force kernel sum") {
  const Dataset ds = clusters(200, 5, 3);
  NoveltyConfig cfg;
  cfg.gamma = 0.3;
  const NoveltyModel m = fit_novelty(ds, cfg);
  CHECK(m.gamma == 0.3);
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    const double s = novelty_score(m, ds.row(i));
    CHECK(std::abs(s - static_cast<double>(kernel_sum(m, ds.row(i)))) < 1e-9);
  }
  // Every support vector is a standardized training row.
  for (std::size_t k = 0; k < m.n_support(); ++k) {
    const auto sv = m.support_vector(k);
    bool found = false;
    for (std::size_t i = 0; i < ds.rows() && !found; ++i) {
      bool same = true;
      for (std::size_t f = 0; f < m.feature_dim && same; ++f) {
        same = std::abs((ds.row(i)[f] - m.feature_mean[f]) / m.feature_std[f] - sv[f]) < 1e-12;
      }
      found = same;
    }
    CHECK(found);
  }
}

TEST_CASE("geometry: centroid inside, far points outside, scores fall along rays") {
  const Dataset ds = clusters(240, 3, 5);
  const NoveltyModel m = fit_novelty(ds, NoveltyConfig{});
  CHECK(m.gamma == doctest::Approx(1.0 / 3.0).epsilon(0.05));

  Rng rng(6);
  Dataset tight;
  tight.feature_dim = 3;
  tight.class_table = {"x"};
  for (int i = 0; i < 100; ++i) {
    tight.add_row(std::vector<double>{5.0 + 0.1 * rng.normal(), -2.0 + 0.1 * rng.normal(), 0.1 * rng.normal()}, 0);
  }
  // At small nu the support can be a shell with a dip below rho at the centre,
  // so the centroid check uses a larger nu.
  NoveltyConfig wide;
  wide.nu = 0.3;
  const NoveltyModel t = fit_novelty(tight, wide);
  CHECK(novelty_score(t, std::vector<double>{5.0, -2.0, 0.0}) > 0.0);
  // 100x the cluster radius away from the centroid.
  CHECK(novelty_score(t, std::vector<double>{5.0 + 30.0, -2.0, 0.0}) < 0.0);

  // Moving outward along random rays from the data centre never raises the score
  // once outside the support.
  for (int r = 0; r < 20; ++r) {
    std::vector<double> dir{rng.normal(), rng.normal(), rng.normal()};
    const double norm = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
    double prev = 1e300;
    for (double dist = 8.0; dist < 60.0; dist += 2.0) {
      std::vector<double> x{4.0 + dist * dir[0] / norm, 1.5 + dist * dir[1] / norm, dist * dir[2] / norm};
      const double s = novelty_score(m, x);
      CHECK(s <= prev + 1e-12);
      prev = s;
    }
  }
}

TEST_CASE("fit is deterministic and validates its input") {
  const Dataset ds = clusters(120, 4, 8);
  NoveltyConfig cfg;
  cfg.seed = 5;
  const NoveltyModel a = fit_novelty(ds, cfg);
  const NoveltyModel b = fit_novelty(ds, cfg);
  CHECK(a.coefficients == b.coefficients);
  CHECK(a.support_vectors == b.support_vectors);
  CHECK(a.rho == b.rho);

  Dataset same;
  same.feature_dim = 2;
  same.class_table = {"x"};
  for (int i = 0; i < 20; ++i) same.add_row(std::vector<double>{1.0, 2.0}, 0);
  CHECK(error_code_of([&] { fit_novelty(same, cfg); }) == Errc::degenerate_data);

  Dataset few = clusters(9, 2, 1);
  CHECK(error_code_of([&] { fit_novelty(few, cfg); }) == Errc::insufficient_data);

  NoveltyConfig bad;
  bad.nu = 0.0;
  CHECK(error_code_of([&] { fit_novelty(ds, bad); }) == Errc::invalid_argument);
  bad.nu = 0.5;
  bad.gamma = -1.0;
  CHECK(error_code_of([&] { fit_novelty(ds, bad); }) == Errc::invalid_argument);

  NoveltyConfig capped;
  capped.max_iterations = 1;
  const std::string msg = testing::error_message_of([&] { fit_novelty(ds, capped); });
  CHECK(msg.find('1') != std::string::npos);
  CHECK(error_code_of([&] { fit_novelty(ds, capped); }) == Errc::solver);

  CHECK(error_code_of([&] { novelty_score(a, std::vector<double>(3)); }) == Errc::shape);
}

TEST_CASE("model files round-trip") {
  testing::TempDir dir("oc");
  const Dataset ds = clusters(90, 3, 9);
  const NoveltyModel m = fit_novelty(ds, NoveltyConfig{});
  save_novelty(m, dir / "m.ocs");
  const NoveltyModel back = load_novelty(dir / "m.ocs");
  CHECK(back.coefficients == m.coefficients);
  CHECK(back.support_vectors == m.support_vectors);
  CHECK(back.rho == m.rho);
  CHECK(back.gamma == m.gamma);
  for (std::size_t i = 0; i < ds.rows(); ++i) CHECK(novelty_score(back, ds.row(i)) == novelty_score(m, ds.row(i)));

  const std::string bytes = text::read_file(dir / "m.ocs");
  text::write_file(dir / "t.ocs", bytes.substr(0, bytes.size() - 1));
  CHECK(error_code_of([&] { load_novelty(dir / "t.ocs"); }) == Errc::model_format);
  text::write_file(dir / "x.ocs", "EMSCAMLP" + bytes.substr(8));
  CHECK(error_code_of([&] { load_novelty(dir / "x.ocs"); }) == Errc::model_format);
}

TEST_CASE("tamper verdicts over traces") {
  const auto p = default_profiles().low_end;
  FeatureConfig fc = program_feature_config();
  fc.n_buckets = 200;
  std::vector<FeatureVector> rows;
  for (std::uint64_t i = 0; i < 60; ++i) rows.push_back(make_features(synth_trace(p, "prog0", 0.01, 4e6, i), fc));
  NoveltyConfig cfg;
  cfg.gamma_factor = 0.1;
  const NoveltyModel m = fit_novelty(assemble_dataset(rows), cfg);

  const auto empty = detect_tampering(m, {}, fc);
  CHECK(empty.verdicts.empty());
  CHECK(empty.inliers == 0);
  CHECK(empty.outliers == 0);
  CHECK(empty.flagged_fraction == 0.0);

  std::vector<IQTrace> traces{synth_trace(p, "prog7", 0.01, 4e6, 1), synth_trace(p, "prog0", 0.01, 4e6, 1000)};
  traces[1].label.reset();
  const auto s = detect_tampering(m, traces, fc);
  REQUIRE(s.verdicts.size() == 2);
  CHECK(s.verdicts[0].id == "prog7");
  CHECK(s.verdicts[1].id == "trace1");
  CHECK(s.verdicts[0].novel);
  CHECK(s.inliers + s.outliers == 2);
  CHECK(s.flagged_fraction == doctest::Approx(static_cast<double>(s.outliers) / 2.0));
  const std::string table = format_verdicts(s);
  CHECK(table.find("prog7") != std::string::npos);
  CHECK(table.find("outliers=") != std::string::npos);
}

TEST_CASE("500 legitimate rows at nu 0.1 flag at most 15% of a legitimate hold-out") {
  const auto p = default_profiles().low_end;
  FeatureConfig fc = program_feature_config();
  fc.n_buckets = 200;
  fc.reduction = Reduction::mean;
  std::vector<FeatureVector> train_rows, held;
  for (std::size_t i = 0; i < 600; ++i) {
    auto f = make_features(synth_trace(p, "prog0", 0.01, 4e6, corpus_trace_seed(1, "prog0", i)), fc);
    (i < 500 ? train_rows : held).push_back(std::move(f));
  }
  NoveltyConfig cfg;
  cfg.nu = 0.1;
  cfg.gamma_factor = 0.1;
  const NoveltyModel m = fit_novelty(assemble_dataset(train_rows), cfg);
  std::size_t flagged = 0;
  for (const auto& f : held) flagged += is_novel(m, novelty_score(m, f.values));
  MESSAGE("hold-out flagged " << flagged << "/100");
  CHECK(flagged <= 15);
}

}  // TEST_SUITE
