#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "gradcheck.hpp"
#include "turbo/nn/coupling.hpp"
#include "turbo/nn/critic.hpp"
#include "turbo/nn/mlp.hpp"
#include "turbo/util/rng.hpp"

using namespace turbo;
using namespace turbo::nn;
using ad::Shape;
using turbo::testing::filled;
using turbo::testing::gradcheck;
using turbo::testing::weighted_sum;

namespace {

Tensor uniform_rows(std::size_t n, std::size_t d, double lo, double hi, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t({n, d});
  for (double& v : t.data()) v = lo + (hi - lo) * rng.uniform();
  return t;
}

Tensor eval_forward(const CouplingFlowSpec& spec, const ParamSet& p, const Tensor& z, bool inverse,
                    Tensor* log_det = nullptr) {
  Tape tape;
  const auto vars = nn::bind(tape, p, false);
  const auto out = inverse ? coupling_inverse(spec, vars, tape.constant(z)) : coupling_forward(spec, vars, tape.constant(z));
  if (log_det) *log_det = out.log_det.value();
  return out.value.value();
}

/// A flow with trained-looking, non-trivial conditioners.
ParamSet busy_flow(const CouplingFlowSpec& spec, std::uint64_t seed) {
  ParamSet p = init_flow_params(spec, seed);
  Rng rng(seed + 7);
  for (auto& t : p)
    for (double& v : t.data()) v += 0.4 * (rng.uniform() - 0.5);
  return p;
}

}  // namespace

TEST_CASE("mlp shapes, layout and closed forms") {
  const MlpSpec spec = make_mlp(3, {5, 4}, 2, Activation::Tanh);
  CHECK(spec.layers() == 3);
  const ParamSet p = init_params(spec, 1);
  REQUIRE(p.size() == 6);
  CHECK(p[0].shape() == Shape{3, 5});
  CHECK(p[1].shape() == Shape{5});
  CHECK(p[4].shape() == Shape{4, 2});
  CHECK(param_count(p) == 3 * 5 + 5 + 5 * 4 + 4 + 4 * 2 + 2);

  SUBCASE("zero parameters give zero output") {
    ParamSet z = p;
    for (auto& t : z)
      for (double& v : t.data()) v = 0.0;
    Tape tape;
    const Var y = mlp_forward(spec, nn::bind(tape, z, false), tape.constant(filled({6, 3}, -1, 1)));
    CHECK(y.value() == Tensor({6, 2}, 0.0));
  }
  SUBCASE("identity layers") {
    const MlpSpec lin = make_mlp(2, {2}, 2, Activation::Identity);
    ParamSet q = {Tensor({2, 2}, {1, 0, 0, 1}), Tensor({2}, 0.0), Tensor({2, 2}, {1, 0, 0, 1}),
                  Tensor({2}, {0.5, -0.5})};
    Tape tape;
    const Tensor x = filled({4, 2}, -1, 1);
    const Var y = mlp_forward(lin, nn::bind(tape, q, false), tape.constant(x));
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(y.value().at(i, 0) == x.at(i, 0) + 0.5);
      CHECK(y.value().at(i, 1) == x.at(i, 1) - 0.5);
    }
  }
  SUBCASE("at least one hidden layer is required") { CHECK_THROWS(make_mlp(2, {}, 2).validate()); }
  SUBCASE("input width is checked") {
    Tape tape;
    CHECK_THROWS(mlp_forward(spec, nn::bind(tape, p, false), tape.constant(Tensor({2, 4}))));
  }
}

TEST_CASE("mlp gradients match finite differences for every activation") {
  for (Activation act : {Activation::Tanh, Activation::Sigmoid, Activation::Identity}) {
    CAPTURE(activation_name(act));
    const MlpSpec spec = make_mlp(3, {4}, 2, act);
    std::vector<Tensor> inputs = init_params(spec, 3);
    inputs.push_back(filled({5, 3}, -1, 1));
    const auto r = gradcheck(
        [&](Tape& t, const std::vector<Var>& v) {
          const std::vector<Var> params(v.begin(), v.end() - 1);
          return weighted_sum(t, mlp_forward(spec, params, v.back()));
        },
        inputs);
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("initialization is deterministic and bounded") {
  const MlpSpec spec = make_mlp(4, {16}, 3);
  const ParamSet a = init_params(spec, 9), b = init_params(spec, 9), c = init_params(spec, 10);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  CHECK_FALSE(a[0] == c[0]);
  for (double v : a[0].data()) CHECK(std::abs(v) <= kInitGain / std::sqrt(4.0));
  for (double v : a[2].data()) CHECK(std::abs(v) <= kInitGain / std::sqrt(16.0));
  for (double v : a[1].data()) CHECK(v == 0.0);
  CHECK(parse_activation("relu") == Activation::Relu);
  CHECK_THROWS(parse_activation("gelu"));
}

TEST_CASE("fresh flow is the identity") {
  CouplingFlowSpec spec;
  const ParamSet p = init_flow_params(spec, 4);
  const Tensor z = uniform_rows(32, 2, -3, 3, 1);
  Tensor ld;
  CHECK(eval_forward(spec, p, z, false, &ld) == z);
  CHECK(ld == Tensor({32}, 0.0));
}

TEST_CASE("flow round trip") {
  for (std::size_t dim : {2u, 4u}) {
    CouplingFlowSpec spec;
    spec.dim = dim;
    const ParamSet p = busy_flow(spec, 11);
    const Tensor z = uniform_rows(500, dim, -5, 5, 2);
    Tensor ld_f, ld_i;
    const Tensor x = eval_forward(spec, p, z, false, &ld_f);
    const Tensor back = eval_forward(spec, p, x, true, &ld_i);
    double worst = 0.0, ld_sum = 0.0;
    for (std::size_t i = 0; i < z.numel(); ++i) worst = std::max(worst, std::abs(back[i] - z[i]));
    for (std::size_t i = 0; i < ld_f.numel(); ++i) ld_sum = std::max(ld_sum, std::abs(ld_f[i] + ld_i[i]));
    CHECK(worst < 1e-9);
    CHECK(ld_sum < 1e-9);
  }
}

TEST_CASE("flow log-determinant matches the finite-difference Jacobian") {
  CouplingFlowSpec spec;
  spec.dim = 4;
  const ParamSet p = busy_flow(spec, 13);
  const Tensor z = uniform_rows(20, 4, -2, 2, 3);
  Tensor ld;
  eval_forward(spec, p, z, false, &ld);
  const double h = 1e-6;
  for (std::size_t r = 0; r < z.dim(0); ++r) {
    Eigen::Matrix4d jac;
    for (std::size_t j = 0; j < 4; ++j) {
      Tensor up({1, 4}), down({1, 4});
      for (std::size_t k = 0; k < 4; ++k) up[k] = down[k] = z.at(r, k);
      up[j] += h;
      down[j] -= h;
      const Tensor fu = eval_forward(spec, p, up, false), fd = eval_forward(spec, p, down, false);
      for (std::size_t i = 0; i < 4; ++i) jac(i, j) = (fu[i] - fd[i]) / (2 * h);
    }
    CHECK(std::log(std::abs(jac.determinant())) == doctest::Approx(ld[r]).epsilon(1e-6));
  }
}

TEST_CASE("constant scales give a closed-form log-determinant") {
  CouplingFlowSpec spec;
  spec.dim = 4;
  spec.blocks = 3;
  ParamSet p = init_flow_params(spec, 5);
  const double c = 0.7;
  const std::size_t per = spec.tensors_per_block();
  for (std::size_t b = 0; b < spec.blocks; ++b) {
    Tensor& bias = p[b * per + per - 1];
    for (std::size_t k = 0; k < spec.dim / 2; ++k) bias[k] = std::atanh(c / spec.scale_bound);
  }
  Tensor ld;
  eval_forward(spec, p, uniform_rows(8, 4, -1, 1, 4), false, &ld);
  for (double v : ld.data()) CHECK(v == doctest::Approx(spec.blocks * (spec.dim / 2.0) * c).epsilon(1e-12));
}

TEST_CASE("flow gradients match finite differences") {
  CouplingFlowSpec spec;
  spec.hidden = {6};
  spec.blocks = 2;
  std::vector<Tensor> inputs = busy_flow(spec, 17);
  inputs.push_back(filled({4, 2}, -1, 1));
  const auto r = gradcheck(
      [&](Tape& t, const std::vector<Var>& v) {
        const std::vector<Var> params(v.begin(), v.end() - 1);
        const auto out = coupling_inverse(spec, params, v.back());
        return ad::add(weighted_sum(t, out.value), ad::sum(out.log_det));
      },
      inputs);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("flow spec validation") {
  CouplingFlowSpec spec;
  spec.dim = 3;
  CHECK_THROWS(spec.validate());
  spec.dim = 2;
  spec.scale_bound = 0.0;
  CHECK_THROWS(spec.validate());
}

TEST_CASE("critic scores") {
  CriticSpec spec{make_mlp(2, {8}, 1), CriticMode::Logistic, 0.01};
  spec.validate();
  ParamSet p = init_params(spec.net, 2);
  SUBCASE("zero weights score zero") {
    for (auto& t : p)
      for (double& v : t.data()) v = 0.0;
    Tape tape;
    CHECK(critic_forward(spec, nn::bind(tape, p, false), tape.constant(filled({5, 2}, -1, 1))).value() ==
          Tensor({5}, 0.0));
  }
  SUBCASE("sigmoid of logistic scores is a probability") {
    Tape tape;
    const Var s = ad::sigmoid(critic_forward(spec, nn::bind(tape, p, false), tape.constant(filled({50, 2}, -4, 4))));
    for (double v : s.value().data()) CHECK((v > 0.0 && v < 1.0));
  }
  SUBCASE("clipping bounds every weight") {
    clip_params(p, 0.01);
    for (const auto& t : p)
      for (double v : t.data()) CHECK(std::abs(v) <= 0.01);
  }
  SUBCASE("output width must be one") {
    CriticSpec bad{make_mlp(2, {8}, 2), CriticMode::Logistic, 0.01};
    CHECK_THROWS(bad.validate());
  }
}
