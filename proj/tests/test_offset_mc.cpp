#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "tfb/bounds.hpp"
#include "tfb/offset_mc.hpp"

using namespace tfb;

namespace {

FunctionClassSample random_class(Index nf, Index n, std::uint64_t tag, double scale = 1.0) {
  Mat G = scale * sample_matrix(GaussianDist{1.0}, nf, n, RngStream{77, tag});
  return FunctionClassSample::from_matrix(std::move(G));
}

}  // namespace

TEST_CASE("offset exact hand values") {
  // single all-zero row: 0 for every beta
  const auto zero = FunctionClassSample::from_matrix(Mat::Zero(1, 5));
  for (const double beta : {0.1, 1.0, 7.0})
    CHECK(offset_complexity_exact(zero, beta).value == doctest::Approx(0.0).epsilon(1e-15));

  // single all-ones row: linear term cancels over signs, quadratic stays
  for (const Index n : {1L, 3L, 8L}) {
    const auto ones = FunctionClassSample::from_matrix(Mat::Ones(1, n));
    CHECK(offset_complexity_exact(ones, 0.7).value == doctest::Approx(-0.7).epsilon(1e-12));
  }

  // two rows {zero, ones}, n = 1, beta = 0.5: E max(0, tau - 0.5) = 0.25
  Mat G(2, 1);
  G << 0.0, 1.0;
  const auto two = FunctionClassSample::from_matrix(G);
  CHECK(offset_complexity_exact(two, 0.5).value == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("offset exact enumeration limit") {
  const auto fc = random_class(2, 21, 0);
  CHECK_THROWS_AS(offset_complexity_exact(fc, 1.0), SizeLimitError);
}

TEST_CASE("offset exact properties") {
  const auto fc = random_class(4, 8, 1);
  // nonincreasing in beta
  double prev = offset_complexity_exact(fc, 0.05).value;
  for (const double beta : {0.1, 0.5, 1.0, 2.0}) {
    const double cur = offset_complexity_exact(fc, beta).value;
    CHECK(cur <= prev + 1e-15);
    prev = cur;
  }
  // adding a row never decreases the sup
  Mat bigger(5, 8);
  bigger.topRows(4) = fc.values;
  bigger.row(4) = sample_matrix(GaussianDist{1.0}, 1, 8, RngStream{77, 99}).row(0);
  const auto fc5 = FunctionClassSample::from_matrix(bigger);
  CHECK(offset_complexity_exact(fc5, 0.8).value >=
        offset_complexity_exact(fc, 0.8).value - 1e-15);
  // zero row present => complexity >= 0
  Mat with_zero(5, 8);
  with_zero.topRows(4) = fc.values;
  with_zero.row(4).setZero();
  const auto fcz = FunctionClassSample::from_matrix(with_zero);
  CHECK(offset_complexity_exact(fcz, 0.8).value >= 0.0);
}

TEST_CASE("offset exact is worker-count independent") {
  const auto fc = random_class(3, 12, 2);
  const OffsetEstimate one = offset_complexity_exact(fc, 0.4, 1);
  const OffsetEstimate four = offset_complexity_exact(fc, 0.4, 4);
  CHECK(one.value == four.value);
}

TEST_CASE("offset MC determinism and worker independence") {
  const auto fc = random_class(4, 10, 3);
  const OffsetEstimate a = offset_complexity_mc(fc, 0.5, 2000, RngStream{5, 5}, 1);
  const OffsetEstimate b = offset_complexity_mc(fc, 0.5, 2000, RngStream{5, 5}, 4);
  CHECK(a.value == b.value);
  CHECK(a.std_error == b.std_error);
  const OffsetEstimate c = offset_complexity_mc(fc, 0.5, 2000, RngStream{5, 6}, 1);
  CHECK(a.value != c.value);
  CHECK_THROWS_AS(offset_complexity_mc(fc, 0.5, 50, RngStream{5, 5}), InvalidParameter);
}

TEST_CASE("offset MC agrees with exact enumeration") {
  for (std::uint64_t t = 0; t < 5; ++t) {
    const auto fc = random_class(5, 10, 10 + t);
    const double beta = 0.3;
    const OffsetEstimate exact = offset_complexity_exact(fc, beta);
    const OffsetEstimate mc = offset_complexity_mc(fc, beta, 100000, RngStream{6, t});
    CHECK(std::abs(mc.value - exact.value) <= 4.0 * mc.std_error);
  }
}

TEST_CASE("offset MC with the zero function present is nonnegative up to noise") {
  Mat G(4, 9);
  G.setZero();
  G.bottomRows(3) = sample_matrix(GaussianDist{1.0}, 3, 9, RngStream{78, 0});
  const auto fc = FunctionClassSample::from_matrix(G);
  const OffsetEstimate mc = offset_complexity_mc(fc, 0.6, 5000, RngStream{78, 1});
  CHECK(mc.value >= -4.0 * mc.std_error);
}

TEST_CASE("offset MC std error shrinks like 1/sqrt(draws)") {
  const auto fc = random_class(4, 12, 20);
  const OffsetEstimate small = offset_complexity_mc(fc, 0.4, 20000, RngStream{7, 0});
  const OffsetEstimate big = offset_complexity_mc(fc, 0.4, 40000, RngStream{7, 1});
  const double shrink = big.std_error / small.std_error;
  CHECK(shrink == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(0.2));
}

TEST_CASE("build_class_sample teacher row and squared-loss entries") {
  ArchSpec spec;
  spec.kind = ArchKind::SH;
  spec.T = 3;
  spec.d = 2;
  spec.k = 2;
  ParamBudget budget;
  const TransformerParams teacher =
      project_params(sample_params(spec, RngStream{80, 0}), budget, spec);
  std::vector<Mat> sample;
  for (std::uint64_t i = 0; i < 6; ++i)
    sample.push_back(sample_matrix(UniformBallDist{budget.B_X}, 3, 2, RngStream{81, i}));
  const FunctionClassSample fc = build_class_sample(
      spec, budget, Loss::squared, teacher, sample, 4, RngStream{82, 0}, 0.1, true);
  REQUIRE(fc.class_size() == 5);
  REQUIRE(fc.sample_size() == 6);
  CHECK(fc.values.row(0).cwiseAbs().maxCoeff() == 0.0);  // teacher row

  // entries equal (f_j - f*)^2, recomputed directly
  for (Index j = 0; j < 4; ++j) {
    const TransformerParams f = project_params(
        sample_params(spec, substream(RngStream{82, 0}, static_cast<std::uint64_t>(j))), budget,
        spec);
    for (Index i = 0; i < 6; ++i) {
      const double diff = forward(f, sample[static_cast<std::size_t>(i)], spec) -
                          forward(teacher, sample[static_cast<std::size_t>(i)], spec);
      CHECK(fc.values(j + 1, i) == doctest::Approx(diff * diff).epsilon(1e-12));
    }
  }
  // bounded regime: value_cap under the excess-loss cap penalty/2
  ParamBudget kb = budget;
  kb.kappa = 2.0 * (budget.B + output_bound(spec, budget));
  CHECK(fc.value_cap <= penalty_constant(spec, kb));
  CHECK_THROWS_AS(build_class_sample(spec, budget, Loss::squared, teacher, sample, 0,
                                     RngStream{82, 0}, 0.1),
                  InvalidParameter);
}

TEST_CASE("matrix_series_bounds closed form") {
  const std::vector<Mat> single = {Mat::Identity(2, 2)};
  const MatrixSeriesBounds msb = matrix_series_bounds(single);
  CHECK(msb.variance == doctest::Approx(1.0));
  CHECK(msb.mean_bound == doctest::Approx(std::sqrt(2.0 * std::log(4.0))).epsilon(1e-12));
  CHECK(msb.tail(msb.mean_bound) ==
        doctest::Approx(4.0 * std::exp(-msb.mean_bound * msb.mean_bound / 2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(matrix_series_bounds({}), InvalidParameter);
}

TEST_CASE("matrix series Monte Carlo stays under the Tropp bounds") {
  std::vector<Mat> series;
  for (std::uint64_t k = 0; k < 5; ++k)
    series.push_back(0.7 * sample_matrix(GaussianDist{1.0}, 3, 2, RngStream{90, k}));
  const MatrixSeriesBounds msb = matrix_series_bounds(series);
  const long draws = 4000;
  for (const bool rademacher : {false, true}) {
    double sum = 0.0, sumsq = 0.0;
    long tail_hits = 0;
    for (long t = 0; t < draws; ++t) {
      Rng rng(substream(RngStream{91, rademacher ? 1u : 0u}, static_cast<std::uint64_t>(t)));
      Mat Z = Mat::Zero(3, 2);
      for (const auto& B : series) {
        const double g = rademacher ? ((rng.next_u64() & 1ull) ? 1.0 : -1.0) : rng.gaussian();
        Z += g * B;
      }
      const double nrm = spectral_norm(Z);
      sum += nrm;
      sumsq += nrm * nrm;
      if (nrm >= msb.mean_bound) ++tail_hits;
    }
    const double mean = sum / draws;
    const double se = std::sqrt((sumsq / draws - mean * mean) / draws);
    CHECK(mean <= msb.mean_bound + 3.0 * se);
    const double freq = static_cast<double>(tail_hits) / draws;
    const double fse = std::sqrt(std::max(freq * (1 - freq), 1e-12) / draws);
    CHECK(freq <= msb.tail(msb.mean_bound) + 3.0 * fse);
  }
}

TEST_CASE("class sample CSV round trip") {
  const auto fc = random_class(3, 7, 30);
  const std::string path =
      (std::filesystem::temp_directory_path() / "tfb_fc_roundtrip.csv").string();
  write_class_sample_csv(fc, path);
  const FunctionClassSample back = read_class_sample_csv(path);
  CHECK(back.values == fc.values);
  CHECK(back.value_cap == fc.value_cap);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_class_sample_csv("/nonexistent/nope.csv"), IoError);
}
