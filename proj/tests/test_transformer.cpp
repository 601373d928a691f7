#include <doctest.h>

#include <cmath>

#include "tfb/transformer.hpp"

using namespace tfb;

namespace {

ArchSpec sh_spec(Index T, Index d, Index k) {
  ArchSpec s;
  s.kind = ArchKind::SH;
  s.T = T;
  s.d = d;
  s.k = k;
  return s;
}

TransformerParams scalar_params(double qk, double v, double c, double w) {
  TransformerParams p;
  p.layers = {{HeadWeights{Mat::Constant(1, 1, qk), Mat::Constant(1, 1, v),
                           Mat::Constant(1, 1, c)}}};
  p.readout = Vec::Constant(1, w);
  return p;
}

// Step-by-step long-double head output, written independently of the
// library implementation.
void forward_oracle_head(const Mat& X, const HeadWeights& h, Activation act,
                         std::vector<std::vector<long double>>& Y) {
  const Index T = X.rows(), d = X.cols(), k = h.value.cols();
  std::vector<std::vector<long double>> scores(static_cast<std::size_t>(T),
                                               std::vector<long double>(static_cast<std::size_t>(T), 0.0L));
  for (Index i = 0; i < T; ++i)
    for (Index j = 0; j < T; ++j) {
      long double acc = 0.0L;
      for (Index a = 0; a < d; ++a)
        for (Index b = 0; b < d; ++b) acc += X(i, a) * h.query_key(a, b) * X(j, b);
      scores[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = acc;
    }
  std::vector<std::vector<long double>> attn(static_cast<std::size_t>(T),
                                             std::vector<long double>(static_cast<std::size_t>(T)));
  for (Index i = 0; i < T; ++i) {
    long double denom = 0.0L;
    for (Index j = 0; j < T; ++j) denom += expl(scores[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
    for (Index j = 0; j < T; ++j)
      attn[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          expl(scores[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) / denom;
  }
  std::vector<std::vector<long double>> mid(static_cast<std::size_t>(T),
                                            std::vector<long double>(static_cast<std::size_t>(k), 0.0L));
  for (Index i = 0; i < T; ++i)
    for (Index c = 0; c < k; ++c) {
      long double acc = 0.0L;
      for (Index j = 0; j < T; ++j)
        for (Index a = 0; a < d; ++a)
          acc += attn[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] * X(j, a) * h.value(a, c);
      if (act == Activation::relu) acc = acc > 0 ? acc : 0.0L;
      else if (act == Activation::tanh) acc = tanhl(acc);
      mid[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] = acc;
    }
  Y.assign(static_cast<std::size_t>(T), std::vector<long double>(static_cast<std::size_t>(X.cols()), 0.0L));
  for (Index i = 0; i < T; ++i)
    for (Index b = 0; b < X.cols(); ++b) {
      long double acc = 0.0L;
      for (Index c = 0; c < k; ++c)
        acc += mid[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] * h.out_proj(c, b);
      Y[static_cast<std::size_t>(i)][static_cast<std::size_t>(b)] = acc;
    }
}

double forward_oracle_sh(const TransformerParams& p, const Mat& X, const ArchSpec& spec) {
  std::vector<std::vector<long double>> Y;
  forward_oracle_head(X, p.layers[0][0], spec.activation, Y);
  long double out = 0.0L;
  for (Index b = 0; b < spec.d; ++b)
    out += p.readout(b) * Y[static_cast<std::size_t>(spec.cls_index)][static_cast<std::size_t>(b)];
  return static_cast<double>(out);
}

TransformerParams random_params(const ArchSpec& spec, std::uint64_t tag) {
  return sample_params(spec, RngStream{31, tag});
}

}  // namespace

TEST_CASE("forward_single_head hand cases") {
  const ArchSpec spec = sh_spec(2, 1, 1);
  const TransformerParams p = scalar_params(0.0, 1.0, 1.0, 1.0);
  Mat X(2, 1);
  X << 1, 1;
  CHECK(forward_single_head(p, X, spec) == doctest::Approx(1.0).epsilon(1e-14));
  X << 1, 3;
  CHECK(forward_single_head(p, X, spec) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("forward_single_head matches decomposed oracle") {
  ArchSpec spec = sh_spec(3, 2, 2);
  for (std::uint64_t t = 0; t < 10; ++t) {
    const TransformerParams p = random_params(spec, t);
    const Mat X = sample_matrix(GaussianDist{1.0}, 3, 2, RngStream{32, t});
    CHECK(forward_single_head(p, X, spec) ==
          doctest::Approx(forward_oracle_sh(p, X, spec)).epsilon(1e-10));
  }
}

TEST_CASE("forward shape errors") {
  const ArchSpec spec = sh_spec(2, 1, 1);
  const TransformerParams p = scalar_params(0, 1, 1, 1);
  CHECK_THROWS_AS(forward_single_head(p, Mat::Zero(3, 1), spec), InvalidParameter);
  CHECK_THROWS_AS(forward_single_head(p, Mat::Zero(2, 2), spec), InvalidParameter);
  ArchSpec mh = spec;
  mh.kind = ArchKind::MH;
  CHECK_THROWS_AS(forward_single_head(p, Mat::Zero(2, 1), mh), InvalidParameter);
}

TEST_CASE("multi-head degenerates to single head bit-for-bit") {
  ArchSpec mh;
  mh.kind = ArchKind::MH;
  mh.T = 3;
  mh.d = 2;
  mh.k = 2;
  mh.H = 1;
  const TransformerParams p = random_params(mh, 3);
  const Mat X = sample_matrix(GaussianDist{1.0}, 3, 2, RngStream{33, 0});
  ArchSpec sh = mh;
  sh.kind = ArchKind::SH;
  sh.H = 1;
  CHECK(forward_multi_head(p, X, mh) == forward_single_head(p, X, sh));
}

TEST_CASE("multi-head with identical heads scales linearly") {
  ArchSpec mh;
  mh.kind = ArchKind::MH;
  mh.T = 3;
  mh.d = 2;
  mh.k = 2;
  mh.H = 3;
  ArchSpec sh = mh;
  sh.kind = ArchKind::SH;
  sh.H = 1;
  const TransformerParams one = random_params(sh, 4);
  TransformerParams three = one;
  three.layers[0] = {one.layers[0][0], one.layers[0][0], one.layers[0][0]};
  const Mat X = sample_matrix(GaussianDist{1.0}, 3, 2, RngStream{34, 0});
  CHECK(forward_multi_head(three, X, mh) ==
        doctest::Approx(3.0 * forward_single_head(one, X, sh)).epsilon(1e-12));
}

TEST_CASE("multi-head random instance matches oracle") {
  ArchSpec mh;
  mh.kind = ArchKind::MH;
  mh.T = 3;
  mh.d = 2;
  mh.k = 2;
  mh.H = 2;
  const TransformerParams p = random_params(mh, 5);
  const Mat X = sample_matrix(GaussianDist{1.0}, 3, 2, RngStream{35, 0});
  long double want = 0.0L;
  for (std::size_t h = 0; h < 2; ++h) {
    std::vector<std::vector<long double>> Y;
    forward_oracle_head(X, p.layers[0][h], mh.activation, Y);
    for (Index b = 0; b < mh.d; ++b)
      want += p.readout(b) * Y[static_cast<std::size_t>(mh.cls_index)][static_cast<std::size_t>(b)];
  }
  CHECK(forward_multi_head(p, X, mh) ==
        doctest::Approx(static_cast<double>(want)).epsilon(1e-10));
}

TEST_CASE("multi-layer output is capped by the readout norm") {
  ArchSpec ml;
  ml.kind = ArchKind::ML;
  ml.T = 4;
  ml.d = 3;
  ml.k = 3;
  ml.L = 2;
  for (std::uint64_t t = 0; t < 20; ++t) {
    TransformerParams p = random_params(ml, 40 + t);
    const double B_w = 1.7;
    p.readout *= B_w / p.readout.norm();
    const Mat X = 2.0 * sample_matrix(GaussianDist{1.0}, 4, 3, RngStream{36, t});
    std::vector<Mat> trace;
    const double out = forward_multi_layer(p, X, ml, &trace);
    CHECK(std::abs(out) <= B_w * (1 + 1e-12));
    REQUIRE(trace.size() == 2);
    for (const Mat& layer : trace)
      for (Index i = 0; i < layer.rows(); ++i) CHECK(layer.row(i).norm() <= 1.0 + 1e-12);
  }
}

TEST_CASE("multi-layer with inactive projections equals raw block output") {
  ArchSpec ml;
  ml.kind = ArchKind::ML;
  ml.T = 2;
  ml.d = 2;
  ml.k = 2;
  ml.L = 1;
  ml.activation = Activation::identity;
  TransformerParams p = random_params(ml, 60);
  // shrink weights until the block output rows are inside the unit ball
  for (auto& h : p.layers[0]) {
    h.value *= 0.1;
    h.out_proj *= 0.1;
  }
  const Mat X = 0.5 * sample_matrix(GaussianDist{1.0}, 2, 2, RngStream{37, 0});
  const Mat phi = head_output(X, p.layers[0][0], ml.activation);
  for (Index i = 0; i < phi.rows(); ++i) REQUIRE(phi.row(i).norm() <= 1.0);
  const double expect = p.readout.dot(phi.row(ml.cls_index));
  CHECK(forward_multi_layer(p, X, ml) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("multi-layer random instance matches decomposed oracle") {
  ArchSpec ml;
  ml.kind = ArchKind::ML;
  ml.T = 3;
  ml.d = 2;
  ml.k = 2;
  ml.L = 2;
  const TransformerParams p = random_params(ml, 61);
  const Mat X = sample_matrix(GaussianDist{1.0}, 3, 2, RngStream{38, 0});
  // oracle: long-double head output per layer, projections re-derived by hand
  Mat cur = X;
  for (std::size_t l = 0; l < 2; ++l) {
    std::vector<std::vector<long double>> Yl;
    forward_oracle_head(cur, p.layers[l][0], ml.activation, Yl);
    Mat phi(3, 2);
    for (Index i = 0; i < 3; ++i)
      for (Index j = 0; j < 2; ++j)
        phi(i, j) = static_cast<double>(Yl[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
    for (Index i = 0; i < phi.rows(); ++i) {
      const double nrm = phi.row(i).norm();
      if (nrm > 1.0 + 1e-12) phi.row(i) /= nrm;
    }
    phi = phi.cwiseMax(0.0);
    for (Index i = 0; i < phi.rows(); ++i) {
      const double nrm = phi.row(i).norm();
      if (nrm > 1.0 + 1e-12) phi.row(i) /= nrm;
    }
    cur = phi;
  }
  const double want = p.readout.dot(cur.row(ml.cls_index));
  CHECK(forward_multi_layer(p, X, ml) == doctest::Approx(want).epsilon(1e-10));
}

TEST_CASE("multi-layer requires k == d") {
  ArchSpec ml;
  ml.kind = ArchKind::ML;
  ml.T = 2;
  ml.d = 2;
  ml.k = 3;
  ml.L = 1;
  CHECK_THROWS_AS(ml.validate(), InvalidParameter);
}

TEST_CASE("activations vanish at zero") {
  for (const Activation a : {Activation::relu, Activation::tanh, Activation::identity}) {
    CHECK(apply_activation(a, Mat::Zero(2, 2)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(activation_lipschitz(a) == 1.0);
  }
}

TEST_CASE("project_params fixed point and scaling") {
  ArchSpec spec = sh_spec(2, 2, 2);
  ParamBudget budget;
  budget.budget_mode = BudgetMode::spectral;
  TransformerParams inside = random_params(spec, 70);
  // force well inside the caps
  for (auto& h : inside.layers[0]) {
    h.query_key *= 0.1 / spectral_norm(h.query_key);
    h.value *= 0.1 / spectral_norm(h.value);
    h.out_proj *= 0.1 / spectral_norm(h.out_proj);
  }
  inside.readout *= 0.1 / inside.readout.norm();
  const TransformerParams kept = project_params(inside, budget, spec);
  CHECK(kept.layers[0][0].value == inside.layers[0][0].value);
  CHECK(kept.readout == inside.readout);

  TransformerParams big = inside;
  big.layers[0][0].value *= 2.0 * budget.B_v / spectral_norm(big.layers[0][0].value);
  // spectral norm now 2 B_v; projection halves it
  const Mat before = big.layers[0][0].value;
  const TransformerParams halved = project_params(big, budget, spec);
  CHECK((halved.layers[0][0].value - 0.5 * before).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(check_budget(halved, budget, spec).pass);
}

TEST_CASE("project_params rank mode yields low rank inside the cap") {
  ArchSpec spec = sh_spec(3, 3, 3);
  ParamBudget budget;
  budget.budget_mode = BudgetMode::rank;
  budget.r_v = 1;
  budget.r_c = 2;
  budget.r_QK = 2;
  const TransformerParams p = project_params(random_params(spec, 71), budget, spec);
  Eigen::JacobiSVD<Mat> svd(p.layers[0][0].value);
  CHECK(svd.singularValues()(0) <= budget.B_v * (1 + 1e-9));
  CHECK(svd.singularValues()(1) < 1e-10);  // rank 1
  CHECK(check_budget(p, budget, spec).pass);

  ParamBudget bad = budget;
  bad.r_v = 4;  // exceeds min(d, k) = 3
  CHECK_THROWS_AS(project_params(random_params(spec, 72), bad, spec), InvalidParameter);
}

TEST_CASE("check_budget reports failures with measured values") {
  ArchSpec spec = sh_spec(2, 2, 2);
  ParamBudget budget;
  TransformerParams zero;
  zero.layers = {{HeadWeights{Mat::Zero(2, 2), Mat::Zero(2, 2), Mat::Zero(2, 2)}}};
  zero.readout = Vec::Zero(2);
  CHECK(check_budget(zero, budget, spec).pass);

  TransformerParams hot = zero;
  hot.readout = Vec::Zero(2);
  hot.readout(0) = 2.0 * budget.B_w;
  const BudgetAudit audit = check_budget(hot, budget, spec);
  CHECK_FALSE(audit.pass);
  bool found = false;
  for (const auto& c : audit.checks)
    if (c.name == "readout") {
      found = true;
      CHECK_FALSE(c.pass);
      CHECK(c.measured == doctest::Approx(2.0 * budget.B_w));
    }
  CHECK(found);
}

TEST_CASE("output magnitude bounds hold over random budget-respecting pairs") {
  ParamBudget budget;
  budget.B_v = 1.2;
  budget.B_c = 0.8;
  budget.B_QK = 1.5;
  budget.B_w = 1.1;
  budget.B_X = 2.0;
  ArchSpec sh = sh_spec(3, 2, 2);
  ArchSpec mh = sh;
  mh.kind = ArchKind::MH;
  mh.H = 3;
  ArchSpec ml;
  ml.kind = ArchKind::ML;
  ml.T = 3;
  ml.d = 2;
  ml.k = 2;
  ml.L = 2;
  for (std::uint64_t t = 0; t < 100; ++t) {
    const Mat X = sample_matrix(UniformBallDist{budget.B_X}, 3, 2, RngStream{39, t});
    const TransformerParams psh = project_params(random_params(sh, 100 + t), budget, sh);
    CHECK(std::abs(forward_single_head(psh, X, sh)) <= output_bound(sh, budget) * (1 + 1e-9));
    const TransformerParams pmh = project_params(random_params(mh, 300 + t), budget, mh);
    CHECK(std::abs(forward_multi_head(pmh, X, mh)) <= output_bound(mh, budget) * (1 + 1e-9));
    const TransformerParams pml = project_params(random_params(ml, 500 + t), budget, ml);
    CHECK(std::abs(forward_multi_layer(pml, X, ml)) <= output_bound(ml, budget) * (1 + 1e-9));
  }
}

TEST_CASE("flatten round trip") {
  ArchSpec mh;
  mh.kind = ArchKind::MH;
  mh.T = 2;
  mh.d = 2;
  mh.k = 3;
  mh.H = 2;
  const TransformerParams p = random_params(mh, 90);
  const Vec theta = flatten_params(p);
  CHECK(theta.size() == param_count(mh));
  const TransformerParams q = unflatten_params(theta, mh);
  CHECK(q.layers[0][1].value == p.layers[0][1].value);
  CHECK(q.readout == p.readout);
}
