#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "affect/metrics.hpp"
#include "support.hpp"

using namespace affect;
using affect::test::code_of;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  std::copy(v.begin(), v.end(), out.data());
  return out;
}

// Moment-by-moment evaluation in long double.
long double ccc_oracle(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const long double n = x.size();
  long double mx = 0, my = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  long double sxy = 0, sxx = 0, syy = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  sxy /= n;
  sxx /= n;
  syy /= n;
  return 2 * sxy / (sxx + syy + (mx - my) * (mx - my));
}

}  // namespace

TEST(Ccc, Examples) {
  EXPECT_EQ(ccc(vec({-1, 0, 1}), vec({-1, 0, 1})).value, 1.0);
  EXPECT_EQ(ccc(vec({-1, 0, 1}), vec({1, 0, -1})).value, -1.0);
  const Eigen::VectorXd x = vec({0.5, 0.0, -0.5}), y = vec({0.4, 0.1, -0.3});
  EXPECT_NEAR(ccc(x, y).value, static_cast<double>(ccc_oracle(x, y)), 1e-12);
  EXPECT_NEAR(ccc(x, y).value, 0.9211, 5e-5);
}

TEST(Ccc, DegenerateConstantSeries) {
  const auto r = ccc(vec({0.3, 0.3}), vec({0.3, 0.3}));
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.value, 0.0);
  EXPECT_FALSE(ccc(vec({0.3, 0.3}), vec({0.1, 0.1})).degenerate);
  EXPECT_EQ(code_of([] { ccc(vec({1.0}), vec({1.0})); }), ErrorCode::BatchTooSmall);
  EXPECT_EQ(code_of([] { ccc(vec({1.0, 2.0}), vec({1.0})); }), ErrorCode::LengthMismatch);
}

TEST(Ccc, Properties) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index n = 2 + trial % 40;
    Eigen::VectorXd x(n), y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      x[i] = g(rng);
      y[i] = 0.5 * x[i] + g(rng);
    }
    const double c = ccc(x, y).value;
    EXPECT_NEAR(c, static_cast<double>(ccc_oracle(x, y)), 1e-12);
    EXPECT_EQ(c, ccc(y, x).value);
    EXPECT_NEAR(ccc(x, x).value, 1.0, 1e-12);
    EXPECT_LE(std::abs(c), std::abs(pearson(x, y).value) + 1e-12);
    const double shift = 0.1 + std::abs(g(rng));
    EXPECT_LT(ccc(x, Eigen::VectorXd(x.array() + shift)).value, 1.0);
  }
}

TEST(Ccc, FloatScalar) {
  Eigen::VectorXf x(3), y(3);
  x << 0.5f, 0.0f, -0.5f;
  y << 0.4f, 0.1f, -0.3f;
  EXPECT_NEAR(ccc(x, y).value, 0.92105f, 1e-4f);
}

TEST(Mse, Examples) {
  EXPECT_EQ(mse(vec({0.2, 0.4}), vec({0.2, 0.4})), 0.0);
  EXPECT_EQ(mse(vec({0, 0}), vec({1, 1})), 1.0);
  EXPECT_EQ(mse(vec({0, 1}), vec({1, 3})), 2.5);
}

TEST(Median, OddEvenEmpty) {
  const std::vector<double> odd{0.1, 0.9, 0.2}, even{0.1, 0.3};
  EXPECT_EQ(median(odd), 0.2);
  EXPECT_DOUBLE_EQ(median(even), 0.2);
  EXPECT_EQ(code_of([] { median(std::span<const double>{}); }), ErrorCode::EmptySequence);
}

TEST(F1, BinaryExamples) {
  const std::vector<int> p{1, 1, 0, 0}, t{1, 0, 0, 1};
  EXPECT_EQ(f1_binary(t, t).value, 1.0);
  EXPECT_DOUBLE_EQ(f1_binary(p, t).value, 0.5);
  const std::vector<int> zeros(4, 0);
  const auto vacuous = f1_binary(zeros, zeros);
  EXPECT_TRUE(vacuous.degenerate);
  EXPECT_EQ(vacuous.value, 1.0);
  const std::vector<int> one{1, 0, 0, 0};
  EXPECT_EQ(f1_binary(zeros, one).value, 0.0);
  EXPECT_EQ(code_of([&] { f1_binary(p, std::vector<int>{1}); }), ErrorCode::LengthMismatch);
}

TEST(F1, MacroExamples) {
  const std::vector<int> a{0, 1}, b{1, 0};
  EXPECT_EQ(macro_f1(a, a, 2), 1.0);
  EXPECT_EQ(macro_f1(a, b, 2), 0.0);
  const std::vector<int> p{0, 0, 1}, t{0, 1, 1};
  EXPECT_NEAR(macro_f1(p, t, 2), 2.0 / 3.0, 1e-15);
}

TEST(Confusion, MeanDiagonalAndUar) {
  ConfusionMatrix cm;
  cm.counts = Eigen::Matrix<long, -1, -1>::Identity(3, 3) * 4;
  EXPECT_EQ(mean_diagonal(cm), 1.0);
  cm.counts.resize(2, 2);
  cm.counts << 1, 1, 0, 3;
  EXPECT_DOUBLE_EQ(mean_diagonal(cm), 0.75);
  cm.counts << 0, 0, 0, 3;
  EXPECT_EQ(code_of([&] { mean_diagonal(cm); }), ErrorCode::EmptyRow);

  const std::vector<int> truth{0, 0, 1}, pred{0, 1, 1};
  EXPECT_DOUBLE_EQ(uar(confusion_matrix(pred, truth, 2)), 0.75);
}

TEST(Confusion, UniformRandomUarIsHalf) {
  std::mt19937_64 rng(3);
  std::bernoulli_distribution coin(0.5);
  std::vector<int> p(10000), t(10000);
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = coin(rng);
    t[i] = coin(rng);
  }
  EXPECT_NEAR(uar(confusion_matrix(p, t, 2)), 0.5, 0.05);
}

TEST(Afa, Examples) {
  const std::vector<int> p{1, 1, 0, 0}, t{1, 0, 0, 1};
  EXPECT_EQ(afa(t, t, 2), 1.0);
  EXPECT_DOUBLE_EQ(afa(p, t, 2), 0.5);
}

TEST(Metrics, PermutationInvariance) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> cls(0, 6);
  std::vector<int> p(60), t(60);
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = cls(rng);
    t[i] = i % 7;
  }
  std::vector<std::size_t> perm(p.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<int> pp(p.size()), tp(p.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    pp[i] = p[perm[i]];
    tp[i] = t[perm[i]];
  }
  EXPECT_DOUBLE_EQ(macro_f1(p, t, 7), macro_f1(pp, tp, 7));
  EXPECT_DOUBLE_EQ(accuracy(p, t), accuracy(pp, tp));
  EXPECT_DOUBLE_EQ(mean_diagonal(confusion_matrix(p, t, 7)), mean_diagonal(confusion_matrix(pp, tp, 7)));
}

TEST(ETotal, Examples) {
  EXPECT_DOUBLE_EQ(e_total_expr(1, 1), 1.0);
  EXPECT_DOUBLE_EQ(e_total_au(1, 1), 1.0);
  EXPECT_EQ(e_total_expr(0, 0), 0.0);
  EXPECT_EQ(e_total_au(0, 0), 0.0);
  EXPECT_NEAR(e_total_expr(0.6, 0.3), 0.501, 1e-15);
  EXPECT_EQ(code_of([] { e_total_expr(1.2, 0.3); }), ErrorCode::ValueOutOfRange);
}

TEST(Report, WriteReadRoundTrip) {
  MetricReport r;
  r.set("ccc_valence", 0.5);
  r.set("au_mean_f1", 1.0 / 3.0);
  std::stringstream ss;
  r.write(ss);
  EXPECT_EQ(ss.str(), "au_mean_f1 = 0.333333\nccc_valence = 0.500000\n");
  const MetricReport back = MetricReport::read(ss);
  EXPECT_DOUBLE_EQ(back.at("au_mean_f1"), 0.333333);
}
