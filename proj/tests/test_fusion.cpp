#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "affect/fusion.hpp"
#include "affect/io.hpp"
#include "affect/metrics.hpp"
#include "support.hpp"

using namespace affect;
using affect::test::code_of;

namespace {

EnsembleMember member(const std::string& id, double tv, double ta, std::vector<std::pair<double, double>> va) {
  EnsembleMember m{id, tv, ta, {}};
  int f = 0;
  for (auto [v, a] : va) m.predictions.push_back({"clip", f++, v, a});
  return m;
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  std::copy(v.begin(), v.end(), out.data());
  return out;
}

}  // namespace

TEST(DecisionFusion, Examples) {
  const std::vector<EnsembleMember> one{member("a", 0.3, 0.6, {{0.2, -0.1}, {0.4, 0.7}})};
  const auto same = decision_level_fuse(one);
  EXPECT_EQ(same[0].valence, 0.2);
  EXPECT_EQ(same[1].arousal, 0.7);

  const std::vector<EnsembleMember> two{member("a", 0.4, 0.5, {{0.2, 0.1}}), member("b", 0.6, 0.5, {{0.5, 0.3}})};
  const auto fused = decision_level_fuse(two);
  EXPECT_EQ(fused[0].valence, 0.38);
  EXPECT_DOUBLE_EQ(fused[0].arousal, 0.2);
}

TEST(DecisionFusion, Errors) {
  const std::vector<EnsembleMember> none;
  EXPECT_EQ(code_of([&] { decision_level_fuse(none); }), ErrorCode::ZeroWeightSum);
  const std::vector<EnsembleMember> zero{member("a", 0.0, 0.5, {{0.2, 0.1}})};
  EXPECT_EQ(code_of([&] { decision_level_fuse(zero); }), ErrorCode::ZeroWeightSum);
  const std::vector<EnsembleMember> negative{member("a", -0.1, 0.5, {{0.2, 0.1}}), member("b", 0.5, 0.5, {{0.2, 0.1}})};
  EXPECT_EQ(code_of([&] { decision_level_fuse(negative); }), ErrorCode::NegativeWeight);
  const std::vector<EnsembleMember> lengths{member("a", 0.5, 0.5, {{0.2, 0.1}}),
                                            member("b", 0.5, 0.5, {{0.2, 0.1}, {0.3, 0.3}})};
  EXPECT_EQ(code_of([&] { decision_level_fuse(lengths); }), ErrorCode::KeyMisalignment);
  std::vector<EnsembleMember> keys{member("a", 0.5, 0.5, {{0.2, 0.1}}), member("b", 0.5, 0.5, {{0.2, 0.1}})};
  keys[1].predictions[0].frame_index = 4;
  EXPECT_EQ(code_of([&] { decision_level_fuse(keys); }), ErrorCode::KeyMisalignment);
}

TEST(DecisionFusion, ConvexAndScaleInvariant) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1, 1), w(0.01, 1);
  std::vector<EnsembleMember> members;
  for (int m = 0; m < 4; ++m) {
    EnsembleMember e{"m" + std::to_string(m), w(rng), w(rng), {}};
    for (int f = 0; f < 250; ++f) e.predictions.push_back({"clip", f, u(rng), u(rng)});
    members.push_back(e);
  }
  const auto fused = decision_level_fuse(members);
  std::vector<EnsembleMember> scaled = members;
  for (auto& m : scaled) {
    m.val_ccc_v *= 7.5;
    m.val_ccc_a *= 7.5;
  }
  const auto fused_scaled = decision_level_fuse(scaled);
  for (std::size_t f = 0; f < fused.size(); ++f) {
    double lo = 1, hi = -1;
    for (const auto& m : members) {
      lo = std::min(lo, m.predictions[f].valence);
      hi = std::max(hi, m.predictions[f].valence);
    }
    EXPECT_GE(fused[f].valence, lo);
    EXPECT_LE(fused[f].valence, hi);
    EXPECT_NEAR(fused[f].valence, fused_scaled[f].valence, 1e-15);
  }

  const std::vector<EnsembleMember> twice{members[0], members[0]};
  const auto self = decision_level_fuse(twice);
  for (std::size_t f = 0; f < self.size(); ++f) EXPECT_DOUBLE_EQ(self[f].valence, members[0].predictions[f].valence);
}

TEST(ModelLevelFusion, Spec) {
  ModelSpec a, b;
  a.heads = {true, false, false};
  b.heads = {false, true, false};
  const ModelSpec members[] = {a, b};
  const ModelSpec fc = model_level_fuse_spec(members, FusionTrunk::Fc, 12);
  EXPECT_EQ(fc.heads, (HeadSet{true, true, false}));
  const ModelSpec rnn = model_level_fuse_spec(members, FusionTrunk::Rnn, 12);
  ModelSpec diff = rnn;
  diff.trunk = FusionTrunk::Fc;
  EXPECT_EQ(diff, fc);

  const ModelDims dims{10, 0, 0};
  EXPECT_EQ(encoder_output_width(a, dims) + encoder_output_width(b, dims), 32);
  Model m = Model::build(fc, dims, 1);
  EXPECT_EQ(m.params()[m.params().find("trunk.W")].value.rows(), 32);

  EXPECT_EQ(code_of([] { model_level_fuse_spec({}, FusionTrunk::Fc, 4); }), ErrorCode::InvalidSpec);
  EXPECT_EQ(code_of([&] { model_level_fuse_spec(members, FusionTrunk::None, 4); }), ErrorCode::InvalidSpec);
}

TEST(MedianFilter, Examples) {
  const Eigen::VectorXd x = vec({0.1, 0.9, 0.2});
  EXPECT_EQ(median_filter(x, 1), x);
  EXPECT_EQ(median_filter(x, 3), vec({0.1, 0.2, 0.2}));
  const Eigen::VectorXd c = Eigen::VectorXd::Constant(9, 0.3);
  EXPECT_EQ(median_filter(c, 5), c);
  EXPECT_EQ(code_of([&] { median_filter(x, 2); }), ErrorCode::EvenWindow);
}

TEST(MedianFilter, MatchesBruteForce) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1, 1);
  Eigen::VectorXd x(40);
  for (auto& v : x) v = u(rng);
  for (int w : {3, 5, 7}) {
    const Eigen::VectorXd y = median_filter(x, w);
    ASSERT_EQ(y.size(), x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      std::vector<double> win;
      for (int k = -w / 2; k <= w / 2; ++k) win.push_back(x[std::clamp<Eigen::Index>(i + k, 0, x.size() - 1)]);
      std::nth_element(win.begin(), win.begin() + w / 2, win.end());
      EXPECT_EQ(y[i], win[static_cast<std::size_t>(w / 2)]);
    }
  }
}

TEST(Smooth, Examples) {
  const Eigen::VectorXd x = vec({0.4, -0.2, 0.9});
  EXPECT_EQ(smooth(x, 1.0), x);
  EXPECT_EQ(smooth(Eigen::VectorXd::Constant(5, 0.7), 0.3), Eigen::VectorXd::Constant(5, 0.7));
  EXPECT_EQ(smooth(vec({0, 1}), 0.5), vec({0, 0.5}));
  EXPECT_EQ(code_of([&] { smooth(x, 0.0); }), ErrorCode::BadAlpha);
  EXPECT_EQ(code_of([&] { smooth(x, 1.5); }), ErrorCode::BadAlpha);
}

TEST(UtteranceAggregate, Examples) {
  const auto out = utterance_aggregate({{"u1", {{0.2, 0.1}}},
                                        {"u2", {{0.2, 0.0}, {0.4, 1.0}}},
                                        {"u3", {{0.1, 0.0}, {0.2, 0.0}, {0.6, 0.0}}}});
  EXPECT_EQ(out.at("u1").valence, 0.2);
  EXPECT_DOUBLE_EQ(out.at("u2").valence, 0.3);
  EXPECT_DOUBLE_EQ(out.at("u2").arousal, 0.5);
  EXPECT_DOUBLE_EQ(out.at("u3").valence, 0.3);
  EXPECT_EQ(code_of([] { utterance_aggregate({{"u", {}}}); }), ErrorCode::EmptyUtterance);
}

TEST(Postprocess, GateKeepsIdentityUnlessCccImproves) {
  const Eigen::VectorXd truth = Eigen::VectorXd::LinSpaced(50, -1, 1);
  const auto grid = default_postprocess_grid();
  EXPECT_EQ(grid.size(), 20u);
  EXPECT_EQ(choose_postprocessing(truth, truth, grid), PostprocessConfig{});

  Eigen::VectorXd spiky = truth;
  for (Eigen::Index i = 3; i < spiky.size(); i += 7) spiky[i] = -spiky[i];
  const PostprocessConfig chosen = choose_postprocessing(spiky, truth, grid);
  EXPECT_GT(chosen.median_window, 1);
  EXPECT_GT(ccc(truth, postprocess(spiky, chosen)).value, ccc(truth, spiky).value);
}

TEST(Manifest, LoadsRelativePaths) {
  const auto dir = affect::test::scratch_dir("manifest");
  PredictionRecord r;
  r.id = "clip";
  r.valence = 0.2;
  r.arousal = 0.1;
  write_predictions(dir / "a.csv", {r});
  r.valence = 0.5;
  write_predictions(dir / "b.csv", {r});
  std::ofstream(dir / "m.csv") << "member_id, ccc_v, ccc_a, path\n# comment\na, 0.4, 0.5, a.csv\nb, 0.6, 0.5, b.csv\n";
  const auto members = load_member_manifest(dir / "m.csv");
  ASSERT_EQ(members.size(), 2u);
  EXPECT_EQ(decision_level_fuse(members)[0].valence, 0.38);

  std::ofstream(dir / "bad.csv") << "a, 0.4, a.csv\n";
  EXPECT_EQ(code_of([&] { load_member_manifest(dir / "bad.csv"); }), ErrorCode::ParseError);
}
