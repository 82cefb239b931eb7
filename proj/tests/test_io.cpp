#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ksptrack/ksptrack.hpp"

using namespace ksptrack;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("ksptrack_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ImageSequence ramp_sequence(int w, int h, int channels, std::size_t frames) {
  std::vector<std::vector<float>> data;
  for (std::size_t t = 0; t < frames; ++t) {
    auto& f = data.emplace_back(static_cast<std::size_t>(w) * h * channels);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<float>((i * 7 + t * 31) % 256) / 255.0f;
  }
  return ImageSequence(w, h, channels, std::move(data));
}

MaskSequence rect_masks(std::size_t frames, int w, int h, int x0, int x1) {
  MaskSequence m(frames, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h, 0));
  for (auto& f : m)
    for (int y = 0; y < h; ++y)
      for (int x = x0; x < x1; ++x) f[static_cast<std::size_t>(y) * w + x] = 1;
  return m;
}

std::vector<std::vector<float>> frames_of(const ImageSequence& seq) {
  std::vector<std::vector<float>> out;
  for (std::size_t t = 0; t < seq.frame_count(); ++t) out.push_back(seq.frame(t));
  return out;
}

}  // namespace

TEST(LoadSequence, PngDirectoryRoundTrip) {
  const auto dir = scratch("png");
  for (int channels : {1, 3}) {
    const auto seq = ramp_sequence(9, 5, channels, 4);
    const auto sub = dir / std::to_string(channels);
    write_sequence_png(sub.string(), seq);
    const auto back = load_sequence(sub.string());
    ASSERT_EQ(back.frame_count(), 4u);
    EXPECT_EQ(back.channels(), channels);
    for (std::size_t t = 0; t < 4; ++t) EXPECT_EQ(back.frame(t), seq.frame(t));
  }
}

TEST(LoadSequence, FramesSortedByNumberNotName) {
  const auto dir = scratch("order");
  const auto seq = ramp_sequence(4, 4, 1, 3);
  // 9 < 10 < 11 numerically, but "10" < "11" < "9" lexically
  const int idx[] = {9, 10, 11};
  for (int t = 0; t < 3; ++t)
    write_png((dir / ("f" + std::to_string(idx[t]) + ".png")).string(), 4, 4, 1, to_bytes(seq.frame(t)));
  const auto back = load_sequence(dir.string());
  for (std::size_t t = 0; t < 3; ++t) EXPECT_EQ(back.frame(t), seq.frame(t));
}

TEST(LoadSequence, IndexGapNamesMissingFrame) {
  const auto dir = scratch("gap");
  write_sequence_png(dir.string(), ramp_sequence(4, 4, 1, 4));
  fs::remove(dir / "frame_0002.png");
  try {
    load_sequence(dir.string());
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("missing frame index 2"), std::string::npos) << e.what();
  }
}

TEST(LoadSequence, DimensionMismatchRejected) {
  const auto dir = scratch("dims");
  write_png((dir / "a_0.png").string(), 4, 4, 1, std::vector<std::uint8_t>(16, 0));
  write_png((dir / "a_1.png").string(), 5, 4, 1, std::vector<std::uint8_t>(20, 0));
  try {
    load_sequence(dir.string());
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("5x4"), std::string::npos) << e.what();
  }
}

TEST(LoadSequence, MultiImagePnmContainer) {
  const auto dir = scratch("pnm");
  const auto seq = ramp_sequence(6, 3, 3, 3);
  {
    std::ofstream os(dir / "clip.ppm", std::ios::binary);
    for (std::size_t t = 0; t < 3; ++t) write_pnm(os, Frame{6, 3, 3, seq.frame(t)});
  }
  const auto back = load_sequence((dir / "clip.ppm").string());
  ASSERT_EQ(back.frame_count(), 3u);
  for (std::size_t t = 0; t < 3; ++t) EXPECT_EQ(back.frame(t), seq.frame(t));

  // 16-bit samples, big-endian
  {
    std::ofstream os(dir / "deep.pgm", std::ios::binary);
    os << "P5 2 1 65535\n";
    const unsigned char raster[] = {0xFF, 0xFF, 0x80, 0x00};
    os.write(reinterpret_cast<const char*>(raster), 4);
  }
  const auto deep = read_pnm((dir / "deep.pgm").string());
  EXPECT_FLOAT_EQ(deep[0].data[0], 1.0f);
  EXPECT_FLOAT_EQ(deep[0].data[1], 32768.0f / 65535.0f);

  {
    std::ofstream os(dir / "short.pgm", std::ios::binary);
    os << "P5 4 4 255\n" << "abc";
  }
  EXPECT_THROW(read_pnm((dir / "short.pgm").string()), ValidationError);
  EXPECT_THROW(load_sequence((dir / "absent").string()), ValidationError);
}

TEST(Annotations, ParseExamples) {
  const auto p = parse_annotations("0,10,20\n", 3, 64, 64);
  ASSERT_EQ(p.in_frame(0).size(), 1u);
  EXPECT_EQ(p.in_frame(0)[0], (Point{10, 20}));
  EXPECT_EQ(p.total(), 1u);

  const auto dup = parse_annotations("frame,x,y\n1,3,4\n1,5.5,6.25\n", 3, 64, 64);
  ASSERT_EQ(dup.in_frame(1).size(), 2u);
  EXPECT_EQ(dup.in_frame(1)[1], (Point{5.5, 6.25}));
  EXPECT_TRUE(dup.in_frame(0).empty());

  const auto crlf = parse_annotations("\r\n 2 , 1 , 2 \r\n\n", 3, 64, 64);
  EXPECT_EQ(crlf.in_frame(2).front(), (Point{1, 2}));
}

TEST(Annotations, ErrorsCarryRowNumbers) {
  auto message = [](std::string_view text) {
    try {
      parse_annotations(text, 4, 64, 64);
    } catch (const ValidationError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(message("0,-1,5").find("row 1"), std::string::npos);
  EXPECT_NE(message("frame,x,y\n0,1,1\n0,64,1").find("row 3"), std::string::npos);
  EXPECT_NE(message("0,1,1\n9,1,1").find("frame 9"), std::string::npos);
  EXPECT_NE(message("0,1\n").find("row 1"), std::string::npos);
  EXPECT_NE(message("0,1,1\n0,a,1\n").find("row 2"), std::string::npos);
}

TEST(Annotations, WriteThenLoad) {
  PointAnnotations p(3);
  p.add(0, {1.5, 2.25});
  p.add(2, {7, 8});
  p.add(2, {9, 0});
  const auto dir = scratch("ann");
  {
    std::ofstream os(dir / "p.csv");
    write_annotations(os, p);
  }
  const auto back = load_annotations((dir / "p.csv").string(), 3, 16, 16);
  for (std::size_t t = 0; t < 3; ++t) EXPECT_EQ(back.in_frame(t), p.in_frame(t));
  EXPECT_THROW(load_annotations((dir / "none.csv").string(), 3, 16, 16), ValidationError);
}

TEST(Metrics, Examples) {
  const auto gt = rect_masks(3, 8, 4, 2, 4);
  const auto perfect = compute_metrics(gt, gt);
  EXPECT_DOUBLE_EQ(perfect.pooled.f1, 1.0);

  const MaskSequence empty(3, std::vector<std::uint8_t>(32, 0));
  const auto none = compute_metrics(empty, gt);
  EXPECT_DOUBLE_EQ(none.pooled.precision, 0.0);
  EXPECT_DOUBLE_EQ(none.pooled.recall, 0.0);
  EXPECT_DOUBLE_EQ(none.pooled.f1, 0.0);

  // gt columns 2..3 plus equal-area false positives in columns 4..5
  const auto over = compute_metrics(rect_masks(3, 8, 4, 2, 6), gt);
  EXPECT_DOUBLE_EQ(over.pooled.precision, 0.5);
  EXPECT_DOUBLE_EQ(over.pooled.recall, 1.0);
  EXPECT_NEAR(over.pooled.f1, 2.0 / 3.0, 1e-15);
  EXPECT_EQ(over.counts.tp, 24u);
  EXPECT_EQ(over.counts.fp, 24u);
  EXPECT_EQ(over.counts.fn, 0u);
}

TEST(Metrics, PooledAndPermutationInvariant) {
  auto rng = seeded_rng(3, 3);
  MaskSequence pred(5), gt(5);
  for (std::size_t t = 0; t < 5; ++t)
    for (int i = 0; i < 50; ++i) {
      pred[t].push_back(uniform01(rng) < 0.3 ? 1 : 0);
      gt[t].push_back(uniform01(rng) < 0.2 * (t + 1) ? 1 : 0);
    }
  const auto r = compute_metrics(pred, gt);
  Counts sum;
  for (const auto& c : r.frame_counts) sum += c;
  EXPECT_EQ(sum.tp, r.counts.tp);
  EXPECT_EQ(sum.fp, r.counts.fp);
  const auto& s = r.pooled;
  EXPECT_NEAR(s.f1, 2 * s.precision * s.recall / (s.precision + s.recall), 1e-15);
  std::vector<std::size_t> order{3, 0, 4, 1, 2};
  MaskSequence p2, g2;
  for (auto t : order) {
    p2.push_back(pred[t]);
    g2.push_back(gt[t]);
  }
  const auto r2 = compute_metrics(p2, g2);
  EXPECT_EQ(r2.counts.tp, r.counts.tp);
  EXPECT_DOUBLE_EQ(r2.pooled.f1, r.pooled.f1);
}

TEST(Metrics, PrCurveMatchesDirectThresholding) {
  auto rng = seeded_rng(4, 4);
  MaskSequence pred(2), gt(2);
  std::vector<std::vector<double>> scores(2);
  for (std::size_t t = 0; t < 2; ++t)
    for (int i = 0; i < 400; ++i) {
      const bool g = uniform01(rng) < 0.4;
      gt[t].push_back(g);
      pred[t].push_back(0);
      // includes exact grid values k/255
      const double s = i % 5 == 0 ? std::floor(uniform01(rng) * 256) / 255.0 : std::clamp(uniform01(rng) * 0.6 + (g ? 0.4 : 0.0), 0.0, 1.0);
      scores[t].push_back(s);
    }
  const auto r = compute_metrics(pred, gt, &scores);
  ASSERT_EQ(r.pr_curve.size(), 256u);
  for (int i = 0; i < 256; i += 15) {
    const double thr = i / 255.0;
    Counts c;
    for (std::size_t t = 0; t < 2; ++t)
      for (std::size_t k = 0; k < gt[t].size(); ++k) {
        const bool p = scores[t][k] >= thr, g = gt[t][k] != 0;
        c.tp += p && g;
        c.fp += p && !g;
        c.fn += !p && g;
      }
    const auto want = scores_from(c);
    EXPECT_DOUBLE_EQ(r.pr_curve[i].threshold, thr);
    EXPECT_DOUBLE_EQ(r.pr_curve[i].scores.precision, want.precision) << i;
    EXPECT_DOUBLE_EQ(r.pr_curve[i].scores.recall, want.recall) << i;
  }
  for (const auto& p : r.pr_curve) EXPECT_LE(p.scores.f1, r.best.scores.f1);
  EXPECT_DOUBLE_EQ(r.pr_curve.front().scores.recall, 1.0);
}

TEST(Metrics, MismatchesRejected) {
  const auto gt = rect_masks(2, 4, 4, 0, 1);
  EXPECT_THROW(compute_metrics(rect_masks(3, 4, 4, 0, 1), gt), ValidationError);
  EXPECT_THROW(compute_metrics(rect_masks(2, 5, 4, 0, 1), gt), ValidationError);
}

TEST(Metrics, CsvHasFrameRowsAndTotal) {
  const auto gt = rect_masks(2, 4, 4, 0, 2);
  std::ostringstream os;
  write_metrics_csv(os, compute_metrics(gt, gt));
  EXPECT_EQ(os.str(), "frame,tp,fp,fn,precision,recall,f1\n0,8,0,0,1,1,1\n1,8,0,0,1,1,1\nall,16,0,0,1,1,1\n");
}

TEST(Synth, MovingSquareTranslatesOnePixel) {
  SynthSpec s;
  const auto seq = synth_sequence(s);
  ASSERT_EQ(seq.sequence.frame_count(), 40u);
  EXPECT_EQ(seq.sequence.width(), 64);
  auto first_column = [&](std::size_t t) {
    for (int x = 0; x < 64; ++x)
      for (int y = 0; y < 64; ++y)
        if (seq.ground_truth[t][static_cast<std::size_t>(y) * 64 + x]) return x;
    return -1;
  };
  for (std::size_t t = 0; t < 40; ++t) {
    EXPECT_EQ(std::count(seq.ground_truth[t].begin(), seq.ground_truth[t].end(), 1), 256);
    if (t > 0) EXPECT_EQ(first_column(t), first_column(t - 1) + 1);
    ASSERT_EQ(seq.points.in_frame(t).size(), 1u);
    const auto p = seq.points.in_frame(t)[0];
    EXPECT_TRUE(seq.ground_truth[t][static_cast<std::size_t>(p.y) * 64 + static_cast<std::size_t>(p.x)]);
  }
  for (const auto& f : frames_of(seq.sequence))
    for (float v : f) EXPECT_EQ(v, std::round(v * 255.0f) / 255.0f);
}

TEST(Synth, GrowingDiscMatchesAnalyticMasks) {
  SynthSpec s;
  s.scenario = "growing-disc";
  const auto seq = synth_sequence(s);
  double prev_r = 0;
  for (int t = 0; t < s.frames; ++t) {
    const double r = growing_disc_radius(t, s.frames, 64, 64);
    if (t <= (s.frames - 1) / 2) EXPECT_GE(r, prev_r);
    prev_r = r;
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) {
        const double dx = x + 0.5 - 32.0, dy = y + 0.5 - 32.0;
        EXPECT_EQ(seq.ground_truth[t][static_cast<std::size_t>(y) * 64 + x] != 0, dx * dx + dy * dy <= r * r);
      }
  }
  EXPECT_DOUBLE_EQ(growing_disc_radius(0, 40, 64, 64), 4.0);
  EXPECT_NEAR(growing_disc_radius(0, 3, 64, 64) + 0.14 * 64, growing_disc_radius(1, 3, 64, 64), 1e-12);
}

TEST(Synth, OutlierAndMissingCounts) {
  for (const auto& scenario : synth_scenarios()) {
    SynthSpec s;
    s.scenario = scenario;
    s.outlier_fraction = 0.4;
    const auto seq = synth_sequence(s);
    std::size_t annotated = 0;
    for (std::size_t t = 0; t < seq.points.frame_count(); ++t) annotated += !seq.points.in_frame(t).empty();
    EXPECT_EQ(seq.relocated.size(), static_cast<std::size_t>(std::ceil(0.4 * annotated))) << scenario;
    for (auto t : seq.relocated) {
      const auto p = seq.points.in_frame(t).front();
      EXPECT_FALSE(seq.ground_truth[t][static_cast<std::size_t>(p.y) * 64 + static_cast<std::size_t>(p.x)]);
    }
  }
  SynthSpec m;
  m.missing_fraction = 0.4;
  const auto dropped = synth_sequence(m);
  EXPECT_EQ(dropped.dropped.size(), 16u);
  EXPECT_EQ(dropped.points.total(), 24u);
  for (auto t : dropped.dropped) EXPECT_TRUE(dropped.points.in_frame(t).empty());
}

TEST(Synth, LateSquareAndBranchingBlob) {
  SynthSpec s;
  s.scenario = "late-square";
  const auto late = synth_sequence(s);
  for (std::size_t t = 0; t < 20; ++t) {
    EXPECT_TRUE(late.points.in_frame(t).empty());
    EXPECT_EQ(std::count(late.ground_truth[t].begin(), late.ground_truth[t].end(), 1), 0);
  }
  s.scenario = "branching-blob";
  const auto blob = synth_sequence(s);
  // one component at the start, two at the end (checked on the centre column)
  auto runs = [&](std::size_t t) {
    int n = 0;
    bool prev = false;
    for (int y = 0; y < 64; ++y) {
      const bool in = blob.ground_truth[t][static_cast<std::size_t>(y) * 64 + 32] != 0;
      n += in && !prev;
      prev = in;
    }
    return n;
  };
  EXPECT_EQ(runs(0), 1);
  EXPECT_EQ(runs(39), 2);
}

TEST(Synth, DeterministicAndValidated) {
  SynthSpec s;
  s.outlier_fraction = 0.2;
  const auto a = synth_sequence(s), b = synth_sequence(s);
  EXPECT_EQ(frames_of(a.sequence), frames_of(b.sequence));
  EXPECT_EQ(a.relocated, b.relocated);
  s.seed = 8;
  EXPECT_NE(frames_of(synth_sequence(s).sequence), frames_of(a.sequence));
  s.scenario = "spiral";
  try {
    synth_sequence(s);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("growing-disc"), std::string::npos);
  }
  EXPECT_THROW(parse_outlier_mode("far"), ValidationError);
}

TEST(Overlay, EmptySegmentationIsGrayImage) {
  const auto seq = ramp_sequence(5, 4, 1, 2);
  const MaskSequence none(2, std::vector<std::uint8_t>(20, 0));
  const auto img = render_overlay(seq, none);
  const auto bytes = to_bytes(seq.frame(1));
  for (std::size_t i = 0; i < 20; ++i)
    for (int c = 0; c < 3; ++c) EXPECT_EQ(img[1][i * 3 + c], bytes[i]);
}

TEST(Overlay, ContourMatchesBoundaryTrace) {
  // ground truth: a plus-shaped blob touching the right border
  const int W = 9, H = 7;
  MaskSequence gt(1, std::vector<std::uint8_t>(W * H, 0));
  auto set = [&](int x, int y) { gt[0][y * W + x] = 1; };
  for (int x = 2; x < W; ++x)
    for (int y = 2; y < 5; ++y) set(x, y);
  for (int y = 0; y < H; ++y) set(4, y);
  // boundary = mask minus its erosion by the 4-cross, with zero padding
  std::vector<int> padded((W + 2) * (H + 2), 0);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) padded[(y + 1) * (W + 2) + x + 1] = gt[0][y * W + x];
  std::vector<std::uint8_t> want(W * H, 0);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const int c = (y + 1) * (W + 2) + x + 1;
      const int eroded = padded[c] & padded[c - 1] & padded[c + 1] & padded[c - W - 2] & padded[c + W + 2];
      want[y * W + x] = padded[c] && !eroded;
    }
  EXPECT_EQ(mask_boundary(gt[0], W, H), want);

  gt.push_back(gt[0]);
  const ImageSequence seq(W, H, 1, {std::vector<float>(W * H, 0.4f), std::vector<float>(W * H, 0.4f)});
  const MaskSequence pred(2, std::vector<std::uint8_t>(W * H, 1));
  const auto img = render_overlay(seq, pred, &gt);
  for (int i = 0; i < W * H; ++i) {
    if (want[i]) {
      EXPECT_EQ(img[0][i * 3 + 0], 0);
      EXPECT_EQ(img[0][i * 3 + 1], 255);
    } else {
      EXPECT_EQ(img[0][i * 3 + 0], std::lround((0.5 * 0.4 + 0.5) * 255));
      EXPECT_EQ(img[0][i * 3 + 1], std::lround(0.5 * 0.4 * 255));
    }
  }
  EXPECT_EQ(render_overlay(seq, pred, &gt), img);
  EXPECT_THROW(render_overlay(seq, MaskSequence(3, pred[0])), ValidationError);
}

TEST(MaskPng, WritesZeroAnd255) {
  const auto dir = scratch("mask");
  const auto masks = rect_masks(2, 6, 3, 1, 3);
  write_masks_png(dir.string(), 6, 3, masks);
  const auto f = read_png((dir / "mask_0001.png").string());
  EXPECT_EQ(f.channels, 1);
  for (std::size_t i = 0; i < f.data.size(); ++i) EXPECT_EQ(f.data[i], masks[1][i] ? 1.0f : 0.0f);
  int w = 0, h = 0;
  EXPECT_EQ(load_masks(dir.string(), w, h), masks);
  EXPECT_EQ(w, 6);
  EXPECT_EQ(h, 3);
}
