#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "ksptrack/ksptrack.hpp"

using namespace ksptrack;

TEST(Config, Defaults) {
  const Config c;
  EXPECT_EQ(c.n_superpixels_per_frame, 520);
  EXPECT_EQ(c.n_trees, 500);
  EXPECT_DOUBLE_EQ(c.tau_rho, 0.5);
  EXPECT_DOUBLE_EQ(c.tau_u, 0.75);
  EXPECT_DOUBLE_EQ(c.tau_trans, 0.9);
  EXPECT_EQ(c.lfda_knn, 5);
  EXPECT_EQ(c.lfda_dims, 7);
  EXPECT_DOUBLE_EQ(c.radius, 0.05);
  EXPECT_DOUBLE_EQ(c.sigma_g, 0.3);
}

TEST(Config, EmptyFileGivesDefaults) {
  const auto path = std::filesystem::temp_directory_path() / "ksptrack_empty.cfg";
  std::ofstream(path).close();
  EXPECT_EQ(load_config(path.string()), Config{});
}

TEST(Config, ExplicitDefaultIsIdentity) { EXPECT_EQ(parse_config("tau_rho=0.5"), Config{}); }

TEST(Config, CommentsAndWhitespace) {
  const auto c = parse_config("# header\n  n_trees = 7   # trailing\n\nradius=0.25\n");
  EXPECT_EQ(c.n_trees, 7);
  EXPECT_DOUBLE_EQ(c.radius, 0.25);
}

TEST(Config, RangeErrorNamesKey) {
  try {
    parse_config("tau_rho=1.5");
    FAIL() << "expected a range error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("tau_rho"), std::string::npos) << e.what();
  }
}

TEST(Config, ParseErrorsCarryLineNumber) {
  try {
    parse_config("n_trees = 3\nnot a pair\n");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_config("bogus = 1"), ValidationError);
  EXPECT_THROW(parse_config("n_trees = 3.5"), ValidationError);
  EXPECT_THROW(parse_config("n_trees = 0"), ValidationError);
}

TEST(Config, RoundTripIsByteIdentical) {
  Config c;
  c.radius = 0.123456789012345;
  c.rng_seed = 0xFFFFFFFFFFFFFFFFULL;
  c.tau_u = 0.1;
  const auto once = serialize_config(c);
  const auto parsed = parse_config(once);
  EXPECT_EQ(parsed, c);
  EXPECT_EQ(serialize_config(parsed), once);
}

TEST(Rng, SameSeedAndStreamRepeat) {
  auto a = seeded_rng(42, 0), b = seeded_rng(42, 0);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
}

TEST(Rng, StreamsDiffer) {
  auto a = seeded_rng(42, 0), b = seeded_rng(42, 1);
  int same = 0;
  for (int i = 0; i < 100; ++i) same += a() == b();
  EXPECT_EQ(same, 0);
}

TEST(Rng, FixedOutputAcrossPlatforms) {
  // mt19937_64 is fully specified; the seeding hash is ours
  auto r = seeded_rng(0, 0);
  const auto first = r();
  auto again = seeded_rng(0, 0);
  EXPECT_EQ(first, again());
  EXPECT_EQ(Rng(5489u)(), 14514284786278117030ULL);
}

TEST(Rng, UniformIndexStaysInRange) {
  auto r = seeded_rng(1, 2);
  std::vector<int> hist(7, 0);
  for (int i = 0; i < 7000; ++i) ++hist[uniform_index(r, 7)];
  for (int h : hist) EXPECT_GT(h, 800);
  EXPECT_EQ(uniform_index(r, 1), 0u);
}

TEST(ImageSequence, RejectsBadInput) {
  EXPECT_THROW(ImageSequence(2, 2, 1, {{0, 0, 0, 0}}), ValidationError);
  EXPECT_THROW(ImageSequence(2, 2, 1, {{0, 0, 0, 0}, {0, 0, 0}}), ValidationError);
  EXPECT_THROW(ImageSequence(2, 2, 1, {{0, 0, 0, 0}, {0, 0, 0, 1.5f}}), ValidationError);
  EXPECT_THROW(ImageSequence(2, 2, 2, {{0, 0, 0, 0, 0, 0, 0, 0}, {0, 0, 0, 0, 0, 0, 0, 0}}), ValidationError);
}

TEST(PointAnnotations, BoundsCheck) {
  PointAnnotations p(2);
  p.add(0, {3.9, 0});
  EXPECT_NO_THROW(p.check_bounds(4, 4));
  p.add(1, {4.0, 0});
  EXPECT_THROW(p.check_bounds(4, 4), ValidationError);
}

TEST(Segmentation, MaskFollowsPositiveSet) {
  auto sp = SuperpixelMap::from_labels(2, 2, {{0, 0, 1, 1}, {0, 1, 0, 1}});
  Segmentation seg{{0, 1, 1, 0}};
  EXPECT_EQ(render_mask(sp, seg, 0), (std::vector<std::uint8_t>{0, 0, 1, 1}));
  EXPECT_EQ(render_mask(sp, seg, 1), (std::vector<std::uint8_t>{1, 0, 1, 0}));
}
