#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "argmine/error.hpp"
#include "argmine/tensor.hpp"
#include "support/gradcheck.hpp"

using namespace argmine;
using namespace argmine::nn;
using argmine::testing::probe_gradient;
using argmine::testing::random_tensor;
using argmine::testing::weighted_sum;

TEST(Tensor, FactoriesAndShape) {
  Tensor t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_DOUBLE_EQ(t.at(1, 2), 6.0);
  EXPECT_THROW(Tensor::from({2, 2}, {1, 2, 3}), ShapeMismatch);
  EXPECT_DOUBLE_EQ(Tensor::scalar(2.5).item(), 2.5);
  EXPECT_THROW(t.item(), ShapeMismatch);
}

TEST(Tensor, SigmoidOfZeroIsHalf) {
  Tensor y = sigmoid(Tensor::from({1}, {0.0}));
  EXPECT_DOUBLE_EQ(y[0], 0.5);
}

TEST(Tensor, SigmoidStaysInOpenInterval) {
  Tensor y = sigmoid(Tensor::from({4}, {-30.0, -1.0, 1.0, 30.0}));
  for (double v : y.values()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(Tensor, SoftmaxOfEqualLogitsIsUniform) {
  Tensor y = softmax(Tensor::from({3}, {0.7, 0.7, 0.7}));
  for (double v : y.values()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Tensor, SoftmaxRowsSumToOne) {
  Rng rng(3);
  Tensor y = softmax(random_tensor({20, 7}, rng, false, 40.0));
  for (std::size_t r = 0; r < 20; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < 7; ++c) s += y.at(r, c);
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(Tensor, MatmulValues) {
  Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
  Tensor b = Tensor::from({2, 1}, {5, 6});
  Tensor c = matmul(a, b);
  EXPECT_EQ(c.shape(), (Shape{2, 1}));
  EXPECT_DOUBLE_EQ(c[0], 17);
  EXPECT_DOUBLE_EQ(c[1], 39);
  Tensor v = matmul(a, Tensor::from({2}, {5, 6}));
  EXPECT_EQ(v.shape(), (Shape{2}));
  EXPECT_DOUBLE_EQ(v[1], 39);
}

TEST(Tensor, MatmulGradientMatchesFiniteDifference) {
  Rng rng(11);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({4, 2}, rng);
  auto loss = [&] { return weighted_sum(matmul(a, b), 5); };
  for (Tensor p : {a, b}) {
    const auto r = probe_gradient(loss, p, 100, rng);
    EXPECT_LT(r.max_rel, 1e-6);
  }
}

TEST(Tensor, ShapeMismatchNamesBothShapes) {
  Tensor a = Tensor::zeros({3, 4});
  Tensor b = Tensor::zeros({5, 2});
  try {
    matmul(a, b);
    FAIL() << "expected ShapeMismatch";
  } catch (const ShapeMismatch& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[3, 4]"), std::string::npos);
    EXPECT_NE(msg.find("[5, 2]"), std::string::npos);
  }
  EXPECT_THROW(add(a, Tensor::zeros({4, 3})), ShapeMismatch);
  EXPECT_THROW(concat({a, b}), ShapeMismatch);
  EXPECT_THROW(layer_norm(a, Tensor::zeros({3}), Tensor::zeros({3})), ShapeMismatch);
}

TEST(Tensor, BackwardOfSumIsOnes) {
  Tensor w = Tensor::from({2, 3}, {1, -2, 3, 0.5, 7, 8}, true);
  backward(sum(w));
  for (double g : w.grad()) EXPECT_DOUBLE_EQ(g, 1.0);
}

TEST(Tensor, BackwardRejectsNonScalar) {
  Tensor w = Tensor::zeros({2}, true);
  EXPECT_THROW(backward(scale(w, 2.0)), NonScalarLoss);
}

TEST(Tensor, DetachedTensorGetsNoGradient) {
  Tensor w = Tensor::from({3}, {1, 2, 3}, true);
  Tensor v = Tensor::from({3}, {4, 5, 6}, true);
  backward(sum(add(mul(w.detach(), v), w.detach())));
  EXPECT_FALSE(w.has_grad());
  EXPECT_DOUBLE_EQ(v.grad()[2], 3.0);
}

TEST(Tensor, GraphIsFreedAfterBackward) {
  Tensor w = Tensor::from({2}, {1, 2}, true);
  Tensor mid = scale(w, 3.0);
  Tensor loss = sum(mid);
  backward(loss);
  EXPECT_EQ(loss.impl()->node, nullptr);
  EXPECT_EQ(mid.impl()->node, nullptr);
  EXPECT_DOUBLE_EQ(w.grad()[0], 3.0);
}

TEST(Tensor, GradientsAccumulateAcrossBackwardCalls) {
  Tensor w = Tensor::from({1}, {2.0}, true);
  backward(sum(mul(w, w)));
  backward(sum(mul(w, w)));
  EXPECT_DOUBLE_EQ(w.grad()[0], 8.0);
  w.zero_grad();
  EXPECT_DOUBLE_EQ(w.grad()[0], 0.0);
}

TEST(Tensor, NoGradGuardSkipsRecording) {
  Tensor w = Tensor::from({2}, {1, 2}, true);
  {
    NoGradGuard guard;
    EXPECT_FALSE(grad_enabled());
    Tensor y = scale(w, 2.0);
    EXPECT_FALSE(y.requires_grad());
  }
  EXPECT_TRUE(grad_enabled());
  EXPECT_TRUE(scale(w, 2.0).requires_grad());
}

TEST(Tensor, DropoutIsIdentityInEvaluation) {
  Rng rng(1);
  Tensor x = random_tensor({4, 5}, rng);
  Tensor y = dropout(x, 0.4, rng, false);
  EXPECT_EQ(y.impl(), x.impl());
}

TEST(Tensor, DropoutKeepsExpectationInTraining) {
  Rng rng(2);
  Tensor x = Tensor::full({200, 50}, 1.0);
  Tensor y = dropout(x, 0.4, rng, true);
  double mean = 0.0;
  std::size_t zeros = 0;
  for (double v : y.values()) {
    mean += v;
    zeros += v == 0.0;
  }
  mean /= static_cast<double>(y.numel());
  EXPECT_NEAR(mean, 1.0, 0.03);
  EXPECT_NEAR(static_cast<double>(zeros) / static_cast<double>(y.numel()), 0.4, 0.02);
}

TEST(Tensor, MeanAlongAxes) {
  Tensor x = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor m0 = mean(x, 0);
  Tensor m1 = mean(x, 1);
  EXPECT_EQ(m0.shape(), (Shape{3}));
  EXPECT_DOUBLE_EQ(m0[2], 4.5);
  EXPECT_DOUBLE_EQ(m1[0], 2.0);
  EXPECT_DOUBLE_EQ(m1[1], 5.0);
}

TEST(Tensor, LayerNormNormalizesRows) {
  Rng rng(4);
  Tensor x = random_tensor({3, 8}, rng, false, 5.0);
  Tensor y = layer_norm(x, Tensor::full({8}, 1.0), Tensor::zeros({8}));
  for (std::size_t r = 0; r < 3; ++r) {
    double m = 0, v = 0;
    for (std::size_t c = 0; c < 8; ++c) m += y.at(r, c);
    m /= 8;
    for (std::size_t c = 0; c < 8; ++c) v += (y.at(r, c) - m) * (y.at(r, c) - m);
    EXPECT_NEAR(m, 0.0, 1e-12);
    EXPECT_NEAR(v / 8, 1.0, 1e-3);
  }
}

TEST(Tensor, EmbeddingLookupScattersGradient) {
  Tensor table = Tensor::from({3, 2}, {1, 2, 3, 4, 5, 6}, true);
  const std::vector<std::size_t> idx = {2, 0, 2};
  Tensor y = embedding_lookup(table, idx);
  EXPECT_DOUBLE_EQ(y.at(0, 1), 6.0);
  backward(sum(y));
  EXPECT_DOUBLE_EQ(table.grad()[4], 2.0);
  EXPECT_DOUBLE_EQ(table.grad()[2], 0.0);
  EXPECT_THROW(embedding_lookup(table, std::vector<std::size_t>{3}), IndexOutOfRange);
}

TEST(Tensor, NllLossClampsAndZeroesGradientBelowClamp) {
  Tensor p = Tensor::from({2, 2}, {0.0, 1.0, 0.5, 0.5}, true);
  const std::vector<std::size_t> t = {0, 1};
  Tensor l = nll_loss(p, t);
  EXPECT_NEAR(l.item(), -std::log(1e-12) - std::log(0.5), 1e-9);
  backward(l);
  EXPECT_DOUBLE_EQ(p.grad()[0], 0.0);
  EXPECT_DOUBLE_EQ(p.grad()[3], -2.0);
}

TEST(Tensor, BinaryCrossEntropyAtHalf) {
  Tensor c = Tensor::full({5}, 0.5);
  const std::vector<double> t = {1, 0, 1, 0, 0};
  EXPECT_NEAR(binary_cross_entropy(c, t).item(), 5 * std::log(2.0), 1e-12);
}

TEST(Tensor, ForwardAndBackwardAreDeterministic) {
  auto run = [] {
    Rng rng(9);
    Tensor a = random_tensor({5, 6}, rng);
    Tensor w = random_tensor({6, 6}, rng);
    Tensor y = softmax(matmul(a, w));
    Tensor l = sum(mul(y, y));
    backward(l);
    std::vector<double> out(w.grad().begin(), w.grad().end());
    out.push_back(l.item());
    return out;
  };
  EXPECT_EQ(run(), run());
}

// Randomised finite-difference checks of every differentiable op.
struct OpCase {
  const char* name;
  std::function<std::vector<Tensor>(Rng&)> inputs;
  std::function<Tensor(const std::vector<Tensor>&)> op;
};

class OpGradient : public ::testing::TestWithParam<OpCase> {};

TEST_P(OpGradient, MatchesCentralDifferences) {
  const OpCase& c = GetParam();
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Rng rng(100 + seed);
    std::vector<Tensor> in = c.inputs(rng);
    auto loss = [&] { return weighted_sum(c.op(in), 77 + seed); };
    for (Tensor& t : in) {
      if (!t.requires_grad()) continue;
      const auto r = probe_gradient(loss, t, 100, rng);
      EXPECT_LT(r.max_rel, 1e-4) << c.name << " seed " << seed;
    }
  }
}

namespace {

std::vector<Tensor> two(Rng& rng, Shape a, Shape b) { return {random_tensor(a, rng), random_tensor(b, rng)}; }

// Values pushed away from the relu kink so the difference quotient is smooth.
Tensor away_from_zero(Shape s, Rng& rng) {
  Tensor t = random_tensor(s, rng);
  for (double& v : t.mutable_values()) v = v < 0 ? v - 0.1 : v + 0.1;
  return t;
}

const OpCase kCases[] = {
    {"matmul", [](Rng& r) { return two(r, {3, 4}, {4, 2}); }, [](auto& x) { return matmul(x[0], x[1]); }},
    {"matvec", [](Rng& r) { return two(r, {3, 4}, {4}); }, [](auto& x) { return matmul(x[0], x[1]); }},
    {"matmul_nt", [](Rng& r) { return two(r, {3, 4}, {5, 4}); }, [](auto& x) { return matmul_nt(x[0], x[1]); }},
    {"add", [](Rng& r) { return two(r, {3, 4}, {3, 4}); }, [](auto& x) { return add(x[0], x[1]); }},
    {"sub", [](Rng& r) { return two(r, {3, 4}, {3, 4}); }, [](auto& x) { return sub(x[0], x[1]); }},
    {"mul", [](Rng& r) { return two(r, {3, 4}, {3, 4}); }, [](auto& x) { return mul(x[0], x[1]); }},
    {"add_bias", [](Rng& r) { return two(r, {3, 4}, {4}); }, [](auto& x) { return add_bias(x[0], x[1]); }},
    {"add_bias_scalar", [](Rng& r) { return two(r, {5}, {1}); }, [](auto& x) { return add_bias(x[0], x[1]); }},
    {"scale", [](Rng& r) { return std::vector<Tensor>{random_tensor({4, 2}, r)}; },
     [](auto& x) { return scale(x[0], -1.7); }},
    {"add_scalar", [](Rng& r) { return std::vector<Tensor>{random_tensor({4, 2}, r)}; },
     [](auto& x) { return mul(add_scalar(x[0], 0.3), x[0]); }},
    {"concat", [](Rng& r) { return two(r, {3, 2}, {3, 5}); }, [](auto& x) { return concat({x[0], x[1], x[0]}); }},
    {"slice_cols", [](Rng& r) { return std::vector<Tensor>{random_tensor({3, 6}, r)}; },
     [](auto& x) { return slice_cols(x[0], 1, 4); }},
    {"sigmoid", [](Rng& r) { return std::vector<Tensor>{random_tensor({3, 4}, r, true, 3.0)}; },
     [](auto& x) { return sigmoid(x[0]); }},
    {"tanh", [](Rng& r) { return std::vector<Tensor>{random_tensor({3, 4}, r, true, 2.0)}; },
     [](auto& x) { return nn::tanh(x[0]); }},
    {"relu", [](Rng& r) { return std::vector<Tensor>{away_from_zero({3, 4}, r)}; },
     [](auto& x) { return relu(x[0]); }},
    {"softmax", [](Rng& r) { return std::vector<Tensor>{random_tensor({4, 5}, r, true, 2.0)}; },
     [](auto& x) { return softmax(x[0]); }},
    {"layer_norm",
     [](Rng& r) {
       return std::vector<Tensor>{random_tensor({3, 6}, r, true, 2.0), random_tensor({6}, r),
                                  random_tensor({6}, r)};
     },
     [](auto& x) { return layer_norm(x[0], x[1], x[2]); }},
    {"mean0", [](Rng& r) { return std::vector<Tensor>{random_tensor({4, 3}, r)}; },
     [](auto& x) { return mean(x[0], 0); }},
    {"mean1", [](Rng& r) { return std::vector<Tensor>{random_tensor({4, 3}, r)}; },
     [](auto& x) { return mean(x[0], 1); }},
    {"reshape", [](Rng& r) { return std::vector<Tensor>{random_tensor({4, 3}, r)}; },
     [](auto& x) { return reshape(x[0], {2, 6}); }},
    {"embedding", [](Rng& r) { return std::vector<Tensor>{random_tensor({5, 3}, r)}; },
     [](auto& x) { return embedding_lookup(x[0], std::vector<std::size_t>{4, 1, 4, 0}); }},
    {"nll",
     [](Rng& r) { return std::vector<Tensor>{random_tensor({4, 3}, r, true, 2.0)}; },
     [](auto& x) { return nll_loss(softmax(x[0]), std::vector<std::size_t>{0, 2, 1, 2}); }},
    {"bce", [](Rng& r) { return std::vector<Tensor>{random_tensor({5}, r, true, 2.0)}; },
     [](auto& x) { return binary_cross_entropy(sigmoid(x[0]), std::vector<double>{1, 0, 0, 1, 1}); }},
    {"pairwise_mul_add",
     [](Rng& r) {
       return std::vector<Tensor>{random_tensor({4, 3}, r), random_tensor({4, 3}, r), random_tensor({6, 4}, r),
                                  random_tensor({4}, r)};
     },
     [](auto& x) { return pairwise_mul_add(x[0], x[1], x[2], x[3]); }},
    {"pairwise_biaffine",
     [](Rng& r) {
       return std::vector<Tensor>{random_tensor({4, 3}, r), random_tensor({4, 3}, r),
                                  random_tensor({4, 4, 4}, r), random_tensor({4}, r)};
     },
     [](auto& x) { return pairwise_biaffine(x[0], x[1], x[2], x[3]); }},
    {"gru_forward",
     [](Rng& r) {
       return std::vector<Tensor>{random_tensor({5, 3}, r), random_tensor({3, 12}, r), random_tensor({4, 12}, r),
                                  random_tensor({12}, r), random_tensor({12}, r)};
     },
     [](auto& x) { return gru_sequence(x[0], x[1], x[2], x[3], x[4], false); }},
    {"gru_reverse",
     [](Rng& r) {
       return std::vector<Tensor>{random_tensor({5, 3}, r), random_tensor({3, 12}, r), random_tensor({4, 12}, r),
                                  random_tensor({12}, r), random_tensor({12}, r)};
     },
     [](auto& x) { return gru_sequence(x[0], x[1], x[2], x[3], x[4], true); }},
};

}  // namespace

INSTANTIATE_TEST_SUITE_P(AllOps, OpGradient, ::testing::ValuesIn(kCases),
                         [](const ::testing::TestParamInfo<OpCase>& info) { return std::string(info.param.name); });

TEST(Tensor, PairwiseMulAddMatchesDirectEvaluation) {
  Rng rng(21);
  const std::size_t n = 3, d = 2;
  Tensor s = random_tensor({n, d}, rng), t = random_tensor({n, d}, rng);
  Tensor w = random_tensor({2 * d, 4}, rng), b = random_tensor({4}, rng);
  Tensor out = pairwise_mul_add(s, t, w, b);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < 4; ++k) {
        double expect = b[k];
        for (std::size_t a = 0; a < d; ++a) {
          expect += w.at(a, k) * (s.at(i, a) + t.at(j, a));
          expect += w.at(d + a, k) * (s.at(i, a) * t.at(j, a));
        }
        EXPECT_NEAR(out.at(i * n + j, k), expect, 1e-12);
      }
    }
  }
}

TEST(Tensor, GruZeroWeightsGiveZeroState) {
  Rng rng(5);
  Tensor x = random_tensor({4, 3}, rng);
  Tensor y = gru_sequence(x, Tensor::zeros({3, 6}), Tensor::zeros({2, 6}), Tensor::zeros({6}), Tensor::zeros({6}),
                          false);
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(Tensor, GruMatchesScalarRecurrence) {
  // One hidden unit, one input: compare with the textbook update.
  Tensor x = Tensor::from({3, 1}, {0.5, -1.0, 2.0});
  Tensor wx = Tensor::from({1, 3}, {0.3, -0.2, 0.7});
  Tensor wh = Tensor::from({1, 3}, {0.1, 0.4, -0.6});
  Tensor bx = Tensor::from({3}, {0.05, 0.0, -0.1});
  Tensor bh = Tensor::from({3}, {0.0, 0.2, 0.3});
  Tensor y = gru_sequence(x, wx, wh, bx, bh, false);
  auto sig = [](double a) { return 1.0 / (1.0 + std::exp(-a)); };
  double h = 0.0;
  for (std::size_t t = 0; t < 3; ++t) {
    const double r = sig(x[t] * 0.3 + 0.05 + h * 0.1 + 0.0);
    const double z = sig(x[t] * -0.2 + 0.0 + h * 0.4 + 0.2);
    const double c = std::tanh(x[t] * 0.7 - 0.1 + r * (h * -0.6 + 0.3));
    h = (1 - z) * c + z * h;
    EXPECT_NEAR(y[t], h, 1e-14);
  }
}
