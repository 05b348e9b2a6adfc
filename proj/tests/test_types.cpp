#include <gtest/gtest.h>

#include <set>

#include "affect/error.hpp"
#include "affect/harness.hpp"
#include "affect/types.hpp"
#include "support.hpp"

using namespace affect;
using affect::test::code_of;

namespace {

AnnotatedSample va_sample(double v, double a) {
  AnnotatedSample s;
  s.id = "s";
  s.features = Eigen::VectorXd::Zero(4);
  s.label = ValenceArousal{v, a};
  return s;
}

}  // namespace

TEST(Types, ValidateSampleExamples) {
  EXPECT_NO_THROW(validate_sample(va_sample(0.0, 0.0), 4));
  EXPECT_EQ(code_of([] { validate_sample(va_sample(1.2, 0.0), 4); }), ErrorCode::ValueOutOfRange);
  EXPECT_EQ(code_of([] { validate_sample(va_sample(0.0, 0.0), 5); }), ErrorCode::DimensionMismatch);

  AnnotatedSample s = va_sample(0, 0);
  AUVector au;
  au.values[3] = 1;
  s.label = au;
  EXPECT_EQ(code_of([&] { validate_sample(s, 4); }), ErrorCode::BadMask);
}

TEST(Types, ValidateRejectsNonFiniteVa) {
  EXPECT_EQ(code_of([] { validate_sample(va_sample(std::nan(""), 0.0), 4); }), ErrorCode::ValueOutOfRange);
}

TEST(Types, ExpressionNames) {
  EXPECT_EQ(expression_name(0), "neutral");
  EXPECT_EQ(expression_name(4), "happiness");
  EXPECT_EQ(code_of([] { expression_name(9); }), ErrorCode::UnknownClass);
  for (int k = 0; k < kNumExpressions; ++k)
    EXPECT_EQ(static_cast<int>(expression_from_name(expression_name(k))), k);
  EXPECT_EQ(code_of([] { expression_from_name("contempt"); }), ErrorCode::UnknownClass);
}

TEST(Types, AuIndexIsBijection) {
  EXPECT_EQ(au_index(1), 0);
  EXPECT_EQ(au_index(26), 16);
  EXPECT_EQ(code_of([] { au_index(3); }), ErrorCode::UnknownAU);
  std::set<int> seen;
  for (int i = 0; i < kNumAUs; ++i) {
    EXPECT_EQ(au_index(kAuIds[i]), i);
    seen.insert(kAuIds[i]);
  }
  EXPECT_EQ(seen.size(), 17u);
}

TEST(Types, AuVectorSetMarksAnnotated) {
  AUVector au;
  au.set(12, true);
  EXPECT_TRUE(au.active(12));
  EXPECT_TRUE(au.annotated(12));
  EXPECT_FALSE(au.annotated(6));
}

TEST(Types, GeneratedSamplesValidate) {
  SyntheticSpec spec;
  spec.train = {20, 20, 20};
  spec.val = {5, 5, 5};
  spec.test = {5, 5, 5};
  spec.seq_len = 3;
  spec.audio_dim = 4;
  spec.landmarks = true;
  for (const auto& s : generate_dataset(spec, 3)) EXPECT_NO_THROW(validate_sample(s, spec.feature_dim));
}
