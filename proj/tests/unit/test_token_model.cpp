#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "argmine/error.hpp"
#include "argmine/synth.hpp"
#include "argmine/token_model.hpp"
#include "argmine/training.hpp"
#include "support/gradcheck.hpp"

using namespace argmine;
using nn::Tensor;

namespace {

std::vector<std::string> letters(std::size_t n) {
  std::vector<std::string> t;
  for (std::size_t i = 0; i < n; ++i) t.push_back(std::string(1, static_cast<char>('a' + i)));
  return t;
}

TokenModelConfig tiny() {
  TokenModelConfig c;
  c.d = 8;
  c.heads = 2;
  c.buckets = 64;
  c.max_tokens = 12;
  c.ffn_multiplier = 2;
  return c;
}

}  // namespace

TEST(Augment, ProbabilityZeroOrEmptyIsIdentity) {
  Rng rng(1);
  const auto t = letters(10);
  for (auto kind : {AugmentKind::Mask, AugmentKind::Swap, AugmentKind::Repeat}) {
    EXPECT_EQ(augment(t, 0.0, 0.5, kind, rng), t);
    EXPECT_TRUE(augment({}, 1.0, 0.5, kind, rng).empty());
  }
}

TEST(Augment, MaskReplacesCeilRatioPositions) {
  Rng rng(2);
  for (std::size_t len : {1u, 3u, 7u, 20u}) {
    const auto t = letters(len);
    const auto m = augment(t, 1.0, 0.15, AugmentKind::Mask, rng);
    ASSERT_EQ(m.size(), len);
    const auto masked = static_cast<std::size_t>(std::count(m.begin(), m.end(), std::string(kMaskToken)));
    EXPECT_EQ(masked, static_cast<std::size_t>(std::ceil(0.15 * static_cast<double>(len))));
    for (std::size_t i = 0; i < len; ++i) {
      if (m[i] != kMaskToken) EXPECT_EQ(m[i], t[i]);
    }
  }
}

TEST(Augment, SwapPermutes) {
  Rng rng(3);
  const auto t = letters(20);
  for (int trial = 0; trial < 50; ++trial) {
    auto s = augment(t, 1.0, 0.3, AugmentKind::Swap, rng);
    ASSERT_EQ(s.size(), t.size());
    std::sort(s.begin(), s.end());
    EXPECT_EQ(s, t);
  }
  EXPECT_EQ(augment(letters(1), 1.0, 1.0, AugmentKind::Swap, rng), letters(1));
}

TEST(Augment, RepeatDuplicatesInPlace) {
  Rng rng(4);
  const auto t = letters(13);
  for (int trial = 0; trial < 50; ++trial) {
    const auto r = augment(t, 1.0, 0.25, AugmentKind::Repeat, rng);
    ASSERT_EQ(r.size(), t.size() + 4);  // ceil(0.25 * 13)
    // dropping adjacent repeats recovers the input, since letters are distinct
    std::vector<std::string> dedup;
    for (const auto& s : r) {
      if (dedup.empty() || dedup.back() != s) dedup.push_back(s);
    }
    EXPECT_EQ(dedup, t);
  }
}

TEST(Augment, ApplicationRateFollowsProbability) {
  Rng rng(5);
  int changed = 0;
  const auto t = letters(10);
  for (int i = 0; i < 4000; ++i) changed += augment(t, 0.3, 0.2, AugmentKind::Mask, rng) != t;
  EXPECT_NEAR(changed / 4000.0, 0.3, 0.03);
}

TEST(TokenModelTest, RejectsBadConfig) {
  TokenModelConfig c = tiny();
  c.heads = 3;
  EXPECT_THROW(TokenModel(c, TokenView::Char, 1), InvalidConfig);
  c = tiny();
  c.max_tokens = 0;
  EXPECT_THROW(TokenModel(c, TokenView::Word, 1), InvalidConfig);
}

TEST(TokenModelTest, TokenizeTruncatesAndMaskHasOwnRow) {
  const TokenModel m(tiny(), TokenView::Char, 1);
  const auto t = m.tokenize("一二三四五六七八九十甲乙丙丁");
  EXPECT_EQ(t.size(), 12u);
  EXPECT_EQ(t.front(), "一");
  EXPECT_EQ(m.token_index(kMaskToken), 64u);
  for (const auto& s : t) EXPECT_LT(m.token_index(s), 64u);
}

TEST(TokenModelTest, EmptyInputIsRejectedButPredictCopes) {
  const TokenModel m(tiny(), TokenView::Word, 2);
  EXPECT_THROW(m.forward({}, {}), InvalidDocument);
  const auto p = m.predict("");
  EXPECT_NEAR(p[0] + p[1] + p[2], 1.0, 1e-12);
}

TEST(TokenModelTest, ZeroHeadGivesUniform) {
  TokenModel m(tiny(), TokenView::Char, 3);
  m.zero_head();
  for (double v : m.predict("今天天气很好。")) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(TokenModelTest, ForwardIsPerceptronOverPooledVector) {
  TokenModel m(tiny(), TokenView::Char, 4);
  const auto tokens = m.tokenize("价格上涨了吗");
  const Tensor s = m.pool(tokens, {});
  ASSERT_EQ(s.shape(), (nn::Shape{1, 8}));
  auto& st = m.parameters();
  const Tensor w1 = st.get("tok.hidden.weight"), b1 = st.get("tok.hidden.bias");
  const Tensor w2 = st.get("tok.out.weight"), b2 = st.get("tok.out.bias");
  std::vector<double> h(8);
  for (std::size_t j = 0; j < 8; ++j) {
    double a = b1[j];
    for (std::size_t k = 0; k < 8; ++k) a += s[k] * w1.at(k, j);
    h[j] = std::max(a, 0.0);
  }
  std::array<double, 3> z{};
  double zmax = -1e300;
  for (std::size_t c = 0; c < 3; ++c) {
    z[c] = b2[c];
    for (std::size_t k = 0; k < 8; ++k) z[c] += h[k] * w2.at(k, c);
    zmax = std::max(zmax, z[c]);
  }
  double total = 0;
  for (double& v : z) total += (v = std::exp(v - zmax));
  const auto p = m.predict("价格上涨了吗");
  for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(p[c], z[c] / total, 1e-13);
}

TEST(TokenModelTest, PoolIsOrderSensitiveOnlyThroughPositions) {
  TokenModel m(tiny(), TokenView::Char, 5);
  // with position embeddings zeroed the encoder is permutation equivariant and
  // the token mean is invariant
  auto pos = m.parameters().get("tok.pos").mutable_values();
  std::fill(pos.begin(), pos.end(), 0.0);
  const Tensor a = m.pool({"甲", "乙", "丙"}, {});
  const Tensor b = m.pool({"丙", "甲", "乙"}, {});
  for (std::size_t k = 0; k < 8; ++k) EXPECT_NEAR(a[k], b[k], 1e-14);
}

TEST(TokenModelTest, GradientsMatchFiniteDifferences) {
  TokenModel m(tiny(), TokenView::Word, 6);
  const std::vector<std::string> tokens{"价格", "上涨", std::string(kMaskToken), "了"};
  const std::size_t label = 2;
  auto loss = [&] {
    Rng drop(9);
    return nn::nll_loss(m.forward(tokens, {&drop, 0.1}), std::span<const std::size_t>(&label, 1));
  };
  Rng rng(7);
  for (const auto& [name, p] : m.parameters().entries()) {
    const auto r = argmine::testing::probe_gradient(loss, p, 24, rng, 1e-5, 1e-6, 1e-3);
    EXPECT_TRUE(r.ok()) << name << " rel " << r.norm_rel << " abs " << r.max_abs;
  }
}

TEST(TokenModelTest, EnsembleIsArithmeticMean) {
  const auto e = ensemble({0.2, 0.3, 0.5}, {0.6, 0.1, 0.3});
  EXPECT_DOUBLE_EQ(e[0], 0.4);
  EXPECT_DOUBLE_EQ(e[1], 0.2);
  EXPECT_DOUBLE_EQ(e[2], 0.4);
}

TEST(TokenModelTest, TrainingReducesLoss) {
  GeneratorPriors pr;
  pr.signal = 1.0;
  const auto docs = generate(6, pr, 11);
  TokenModelConfig c = tiny();
  c.buckets = 256;
  c.max_tokens = 48;
  TokenModel m(c, TokenView::Char, 8);
  TrainConfig cfg;
  cfg.epochs = 12;
  cfg.lr_max = 3e-3;
  cfg.batch_size = 8;
  const auto losses = fit_token_model(m, docs, cfg);
  ASSERT_EQ(losses.size(), 12u);
  EXPECT_LT(losses.back(), 0.5 * losses.front());
  EXPECT_THROW(fit_token_model(m, std::span<const Document>{}, cfg), InvalidConfig);
}
