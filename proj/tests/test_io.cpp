#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "affect/harness.hpp"
#include "affect/io.hpp"
#include "support.hpp"

using namespace affect;
using affect::test::code_of;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void expect_same_labels(const std::vector<AnnotatedSample>& a, const std::vector<AnnotatedSample>& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].id, b[i].id);
    EXPECT_EQ(a[i].split, b[i].split);
    EXPECT_EQ(a[i].sequence_id, b[i].sequence_id);
    EXPECT_EQ(a[i].utterance_id, b[i].utterance_id);
    EXPECT_EQ(a[i].frame_index, b[i].frame_index);
    EXPECT_EQ(a[i].label, b[i].label);
  }
}

SyntheticSpec small_spec() {
  SyntheticSpec s;
  s.train = {6, 6, 6};
  s.val = {2, 2, 2};
  s.test = {3, 3, 3};
  s.feature_dim = 5;
  return s;
}

}  // namespace

TEST(Io, NumberFormatting) {
  EXPECT_EQ(parse_double(format_double(0.1)), 0.1);
  EXPECT_EQ(parse_double(format_double(-1.0 / 3.0)), -1.0 / 3.0);
  EXPECT_EQ(parse_int("42"), 42);
  EXPECT_EQ(code_of([] { parse_double("1.5x"); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { parse_int(""); }), ErrorCode::ParseError);
  EXPECT_EQ(split(" a, b ,c", ','), (std::vector<std::string>{"a", "b", "c"}));
}

TEST(Io, AuPayload) {
  AUVector au;
  au.mask.fill(1);
  au.set(1, true);
  au.set(26, true);
  au.mask[3] = 0;
  EXPECT_EQ(au_payload(au), "100-0000000000001");
  EXPECT_EQ(parse_au_payload("100-0000000000001"), au);
  EXPECT_EQ(code_of([] { parse_au_payload("10"); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { parse_au_payload("10x00000000000000"); }), ErrorCode::ParseError);
}

TEST(Io, AnnotationRoundTrip) {
  SyntheticSpec spec = small_spec();
  spec.seq_len = 3;
  const auto samples = generate_dataset(spec, 4);
  std::stringstream first;
  write_annotations(first, samples);
  const std::string text = first.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "id,split,sequence_id,utterance_id,frame_index,task,payload");
  std::istringstream in(text);
  const auto back = read_annotations(in);
  expect_same_labels(samples, back);
  std::stringstream second;
  write_annotations(second, back);
  EXPECT_EQ(second.str(), text);
}

TEST(Io, AnnotationRejectsMissingHeader) {
  std::istringstream in("a,train,,,,VA,0;0\n");
  EXPECT_EQ(code_of([&] { read_annotations(in); }), ErrorCode::ParseError);
}

TEST(Io, DatasetRoundTripIsByteIdentical) {
  SyntheticSpec spec = small_spec();
  spec.audio_dim = 3;
  spec.landmarks = true;
  const auto samples = generate_dataset(spec, 5);
  const auto a = affect::test::scratch_dir("io_a"), b = affect::test::scratch_dir("io_b");
  save_dataset(a, samples);
  const auto loaded = load_dataset(a);
  expect_same_labels(samples, loaded);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    EXPECT_EQ(loaded[i].features, samples[i].features);
    EXPECT_EQ(loaded[i].audio_features, samples[i].audio_features);
    EXPECT_EQ(loaded[i].landmarks, samples[i].landmarks);
  }
  save_dataset(b, loaded);
  for (const char* f : {"annotations.csv", "features.csv", "audio.csv", "landmarks.csv"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

TEST(Io, PredictionRoundTrip) {
  PredictionRecord r;
  r.id = "x";
  r.frame_index = 3;
  r.valence = 1.0 / 7.0;
  r.arousal = std::nan("");
  r.au[4] = 0.123456789012345678;
  std::stringstream first;
  write_predictions(first, {r, r});
  std::istringstream in(first.str());
  const auto back = read_predictions(in);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].valence, r.valence);
  EXPECT_TRUE(std::isnan(back[0].arousal));
  EXPECT_EQ(back[0].au, r.au);
  EXPECT_EQ(back[0].expr, r.expr);
  std::stringstream second;
  write_predictions(second, back);
  EXPECT_EQ(second.str(), first.str());
}

TEST(Io, LoadDatasetNeedsFeatures) {
  const auto dir = affect::test::scratch_dir("io_missing");
  const auto samples = generate_dataset(small_spec(), 5);
  save_dataset(dir, samples);
  std::ofstream(dir / "features.csv") << "id,f0,f1,f2,f3,f4\n";
  EXPECT_EQ(code_of([&] { load_dataset(dir); }), ErrorCode::ParseError);
}
