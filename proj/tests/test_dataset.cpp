//! Sequence manifest parsing, mask image coding, the on-disk sequence
//! reader, and the synthetic scene generator feeding it.

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "panfuse/dataset.hpp"
#include "panfuse/synthetic.hpp"

using namespace panfuse;
namespace fs = std::filesystem;

namespace {

// Self-cleaning unique scratch directory under the system temp root.
struct ScratchDir {
  fs::path path;

  ScratchDir() {
    static std::mt19937_64 rng(std::random_device{}());
    path = fs::temp_directory_path() /
           ("panfuse_test_" + std::to_string(rng()));
    fs::create_directories(path);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
};

const std::string kBaseManifest =
    "width=64\n"
    "height=48\n"
    "fx=60\n"
    "fy=60\n"
    "cx=31.5\n"
    "cy=23.5\n"
    "depth_scale=1000\n"
    "frames=2\n"
    "class.1=box:thing\n"
    "class.2=floor:stuff\n"
    "instance.7=1\n"
    "instance.3=2\n";

SequenceManifest parse_string(const std::string& text) {
  std::istringstream in(text);
  return parse_manifest(in);
}

SyntheticSceneSpec small_plane_spec() {
  SyntheticSceneSpec spec;
  spec.kind = SceneKind::plane;
  spec.frames = 3;
  spec.width = 64;
  spec.height = 48;
  spec.fx = spec.fy = 60.0;
  spec.cx = 31.5;
  spec.cy = 23.5;
  return spec;
}

}  // namespace

TEST_CASE("manifest parsing accepts the documented key set") {
  const SequenceManifest m = parse_string(kBaseManifest);
  CHECK(m.intrinsics.width == 64);
  CHECK(m.intrinsics.height == 48);
  CHECK(m.intrinsics.fx == 60.0);
  CHECK(m.intrinsics.cx == 31.5);
  CHECK(m.intrinsics.depth_scale == 1000.0);
  CHECK(m.frame_count == 2);
  REQUIRE(m.classes.size() == 2);
  CHECK(m.classes.at(1).name == "box");
  CHECK(m.classes.at(1).is_thing);
  CHECK(m.classes.at(2).name == "floor");
  CHECK_FALSE(m.classes.at(2).is_thing);
  CHECK(m.instance_classes.at(7) == 1);

  SECTION("thing instances keep their id, stuff collapses to 0") {
    CHECK(m.label_for_instance(7) == PanopticLabel{1, 7});
    CHECK(m.label_for_instance(3) == PanopticLabel{2, 0});
    CHECK_THROWS_WITH(m.label_for_instance(99),
                      Catch::Matchers::ContainsSubstring("unknown instance"));
  }

  SECTION("comments and spacing around separators are tolerated") {
    const SequenceManifest m2 = parse_string(
        "# leading comment\n\n  width = 64 \nheight=48\nfx=60\nfy=60\n"
        "cx=31.5\ncy=23.5\ndepth_scale=1000\nframes=2\n");
    CHECK(m2.intrinsics.width == 64);
    CHECK(m2.frame_count == 2);
  }
}

TEST_CASE("manifest parsing rejects malformed input") {
  const auto expect_error = [](std::string text, const std::string& needle) {
    std::istringstream in(text);
    CHECK_THROWS_WITH(parse_manifest(in), Catch::Matchers::ContainsSubstring(needle));
  };

  expect_error(kBaseManifest + "bogus=1\n", "unknown key");
  expect_error(kBaseManifest + "width=64\n", "duplicate key");
  expect_error("width=64\nheight=48\nfx=60\nfy=60\ncx=31.5\ncy=23.5\nframes=2\n",
               "missing key 'depth_scale'");
  expect_error(kBaseManifest + "orphan line\n", "not key=value");
  expect_error(kBaseManifest + "class.5=chair\n", "name:thing|stuff");
  expect_error(kBaseManifest + "class.5=chair:liquid\n", "neither thing nor stuff");
  expect_error(kBaseManifest + "class.1=again:thing\n", "duplicate class id");
  expect_error(kBaseManifest + "instance.0=1\n", "out of range");
  expect_error(kBaseManifest + "instance.70000=1\n", "out of range");
  expect_error(kBaseManifest + "instance.7=1\n", "duplicate instance");
  expect_error(kBaseManifest + "instance.9=55\n", "unknown class");

  std::string bad_fx = kBaseManifest;
  bad_fx.replace(bad_fx.find("fx=60"), 5, "fx=abc");
  expect_error(bad_fx, "bad numeric value");

  std::string bad_frames = kBaseManifest;
  bad_frames.replace(bad_frames.find("frames=2"), 8, "frames=0");
  expect_error(bad_frames, "frames must be positive");
}

TEST_CASE("manifest write/load round-trip preserves every field") {
  ScratchDir dir;
  const SequenceManifest m = parse_string(kBaseManifest);
  const fs::path path = dir.path / "manifest.txt";
  write_manifest(path, m);
  const SequenceManifest back = load_manifest(path);

  CHECK(back.intrinsics.width == m.intrinsics.width);
  CHECK(back.intrinsics.fx == m.intrinsics.fx);
  CHECK(back.intrinsics.cx == m.intrinsics.cx);
  CHECK(back.intrinsics.depth_scale == m.intrinsics.depth_scale);
  CHECK(back.frame_count == m.frame_count);
  REQUIRE(back.classes.size() == m.classes.size());
  for (const auto& [id, def] : m.classes) {
    CHECK(back.classes.at(id).name == def.name);
    CHECK(back.classes.at(id).is_thing == def.is_thing);
  }
  CHECK(back.instance_classes == m.instance_classes);

  CHECK_THROWS_WITH(load_manifest(dir.path / "missing.txt"),
                    Catch::Matchers::ContainsSubstring("cannot open"));
}

TEST_CASE("frame file names are zero-padded to six digits") {
  CHECK(frame_file_name(0, "png") == "000000.png");
  CHECK(frame_file_name(123, "txt") == "000123.txt");
  CHECK(frame_file_name(999999, "png") == "999999.png");
  CHECK_THROWS_AS(frame_file_name(-1, "png"), std::invalid_argument);
}

TEST_CASE("mask image coding round-trips instances") {
  const SequenceManifest m = parse_string(kBaseManifest);

  Image<std::uint16_t> ids(4, 3, 0);
  ids(0, 0) = 7;
  ids(1, 0) = 7;
  ids(2, 1) = 3;
  ids(3, 2) = 3;

  SECTION("decode splits by id, ascending, with panoptic labels") {
    const auto masks = decode_mask_image(ids, m);
    REQUIRE(masks.size() == 2);
    CHECK(masks[0].label == PanopticLabel{2, 0});  // stuff id 3 first
    CHECK(masks[0].set_count() == 2);
    CHECK(masks[0].bitmap(2, 1) == 1);
    CHECK(masks[1].label == PanopticLabel{1, 7});
    CHECK(masks[1].set_count() == 2);
    CHECK(masks[1].bitmap(0, 0) == 1);
    CHECK(masks[1].bitmap(1, 0) == 1);
  }

  SECTION("decode rejects ids missing from the manifest") {
    ids(0, 2) = 99;
    CHECK_THROWS_WITH(decode_mask_image(ids, m),
                      Catch::Matchers::ContainsSubstring("unknown instance"));
  }

  SECTION("encode inverts decode when instances are disjoint") {
    Image<std::uint8_t> a(4, 3, 0), b(4, 3, 0);
    a.data()[0] = a.data()[1] = 1;
    b.data()[6] = b.data()[11] = 1;
    const auto encoded = encode_mask_image(4, 3, {{7, &a}, {3, &b}});
    CHECK(encoded == ids);
  }

  SECTION("overlapping layers resolve to the later entry") {
    Image<std::uint8_t> a(2, 1, 1), b(2, 1, 0);
    b(0, 0) = 1;
    const auto encoded = encode_mask_image(2, 1, {{7, &a}, {3, &b}});
    CHECK(encoded(0, 0) == 3);
    CHECK(encoded(1, 0) == 7);
  }

  SECTION("encode rejects reserved id 0 and size mismatches") {
    Image<std::uint8_t> a(2, 1, 1);
    CHECK_THROWS_AS(encode_mask_image(2, 1, {{0, &a}}), std::invalid_argument);
    CHECK_THROWS_AS(encode_mask_image(4, 3, {{7, &a}}), std::invalid_argument);
  }
}

TEST_CASE("synthetic plane sequence reads back frame by frame") {
  ScratchDir dir;
  const SyntheticSceneSpec spec = small_plane_spec();
  const SyntheticSequence seq = render_synthetic_sequence(spec);
  write_synthetic_sequence(dir.path, seq);

  SequenceReader reader(dir.path);
  CHECK(reader.frame_count() == 3);
  CHECK(reader.has_gt_masks());

  for (int i = 0; i < 3; ++i) {
    const LabeledRgbdFrame frame = reader.load_frame(i);
    CHECK(frame.pose.is_rigid());
    // Pose text files are written with enough digits to round-trip.
    CHECK((frame.pose.matrix() - seq.frames[i].pose.matrix()).cwiseAbs().maxCoeff() <
          1e-12);
    CHECK(frame.depth == seq.frames[i].depth);  // quantized in memory too
    REQUIRE(frame.masks.size() == 1);
    CHECK(frame.masks[0].label == PanopticLabel{1, 1});
    REQUIRE(frame.rgb.has_value());
    CHECK(*frame.rgb == seq.frames[i].rgb);
  }

  SECTION("depth decoding divides by the manifest scale") {
    Image<std::uint16_t> raw(2, 1, 0);
    raw(0, 0) = 5000;
    const DepthMap depth = reader.decode_depth(raw);
    CHECK(depth(0, 0) == Catch::Approx(5.0));
    CHECK(depth(1, 0) == 0.0);
  }

  SECTION("frame indices are range-checked") {
    CHECK_THROWS_AS(reader.load_frame(-1), std::out_of_range);
    CHECK_THROWS_AS(reader.load_frame(3), std::out_of_range);
  }

  SECTION("a truncated depth file is reported with its frame") {
    std::ofstream(dir.path / "depth" / "000001.png", std::ios::binary) << "nope";
    CHECK_THROWS_WITH(reader.load_frame(1),
                      Catch::Matchers::ContainsSubstring("frame 1"));
  }
}

TEST_CASE("clean plane renders match the analytic surface") {
  const SyntheticSceneSpec spec = small_plane_spec();
  const SyntheticSequence seq = render_synthetic_sequence(spec);
  const double half_quantum = 0.5 / spec.depth_scale;

  for (const RenderedFrame& frame : seq.frames) {
    const Eigen::Vector3d eye = frame.pose.translation;
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        // Plane z=2 hit along the unnormalized ray: the parameter equals
        // projective depth because the camera-frame direction has z = 1.
        const Eigen::Vector3d dir_cam((x - spec.cx) / spec.fx,
                                      (y - spec.cy) / spec.fy, 1.0);
        const Eigen::Vector3d dir = frame.pose.rotation * dir_cam;
        REQUIRE(dir.z() > 0.0);
        const double s = (2.0 - eye.z()) / dir.z();
        CHECK(frame.depth(x, y) == Catch::Approx(s).margin(half_quantum + 1e-9));
        CHECK(frame.gt_mask(x, y) == 1);
      }
    }
  }
}

TEST_CASE("rendering is deterministic in the seed") {
  SyntheticSceneSpec spec = small_plane_spec();
  spec.depth_sigma = 0.005;
  spec.hole_prob = 0.03;
  spec.leak_prob = 0.3;
  const SyntheticSequence a = render_synthetic_sequence(spec);
  const SyntheticSequence b = render_synthetic_sequence(spec);
  REQUIRE(a.frames.size() == b.frames.size());
  for (std::size_t i = 0; i < a.frames.size(); ++i) {
    CHECK(a.frames[i].depth == b.frames[i].depth);
    CHECK(a.frames[i].input_mask == b.frames[i].input_mask);
    CHECK(a.frames[i].gt_mask == b.frames[i].gt_mask);
  }

  spec.seed += 1;
  const SyntheticSequence c = render_synthetic_sequence(spec);
  CHECK_FALSE(a.frames[0].depth == c.frames[0].depth);
}

TEST_CASE("hole probability matches the dropped-pixel rate") {
  SyntheticSceneSpec spec = small_plane_spec();
  spec.width = 160;
  spec.height = 120;
  spec.frames = 3;
  spec.hole_prob = 0.05;
  const SyntheticSequence seq = render_synthetic_sequence(spec);

  std::size_t holes = 0, total = 0;
  for (const RenderedFrame& frame : seq.frames) {
    for (double d : frame.depth.data()) {
      ++total;
      holes += (d == 0.0);
    }
  }
  // 57600 trials at p=0.05: +-0.5% is a >5 sigma band.
  const double rate = double(holes) / double(total);
  CHECK(rate > 0.045);
  CHECK(rate < 0.055);
}

TEST_CASE("mask leakage grows with the leak probability") {
  SyntheticSceneSpec spec;
  spec.kind = SceneKind::boxes_room;
  spec.frames = 2;
  spec.width = 160;
  spec.height = 120;
  spec.fx = spec.fy = 130.0;
  spec.cx = 79.5;
  spec.cy = 59.5;

  const auto leaked_pixels = [&](double leak_prob) {
    SyntheticSceneSpec s = spec;
    s.leak_prob = leak_prob;
    const SyntheticSequence seq = render_synthetic_sequence(s);
    std::size_t leaked = 0;
    for (const RenderedFrame& frame : seq.frames) {
      const auto& in = frame.input_mask.data();
      const auto& gt = frame.gt_mask.data();
      for (std::size_t p = 0; p < in.size(); ++p) leaked += (in[p] != gt[p]);
    }
    return leaked;
  };

  const std::size_t none = leaked_pixels(0.0);
  const std::size_t low = leaked_pixels(0.2);
  const std::size_t high = leaked_pixels(0.6);
  CHECK(none == 0);
  CHECK(low > 0);
  CHECK(low < high);
}

TEST_CASE("refined mask write-back clears only dropped thing pixels") {
  ScratchDir dir;
  Image<std::uint16_t> original(4, 2, 0);
  original(0, 0) = 7;
  original(1, 0) = 7;
  original(2, 0) = 3;  // stuff pixels stay
  original(3, 1) = 9;  // unrelated instance stays

  InstanceMask refined;
  refined.label = {1, 7};
  refined.bitmap = Image<std::uint8_t>(4, 2, 0);
  refined.bitmap(0, 0) = 1;  // (1,0) was dropped by refinement

  InstanceMask stuff;
  stuff.label = {2, 0};
  stuff.bitmap = Image<std::uint8_t>(4, 2, 0);  // empty bitmap must not clear

  const fs::path path = dir.path / "refined.png";
  write_refined_mask_image(path, original, {refined, stuff});

  const Image<std::uint16_t> back = read_png_gray16(path);
  CHECK(back(0, 0) == 7);
  CHECK(back(1, 0) == 0);  // cleared
  CHECK(back(2, 0) == 3);
  CHECK(back(3, 1) == 9);

  SECTION("mismatched refined mask size is rejected") {
    InstanceMask bad;
    bad.label = {1, 7};
    bad.bitmap = Image<std::uint8_t>(2, 2, 1);
    CHECK_THROWS_AS(write_refined_mask_image(path, original, {bad}),
                    std::invalid_argument);
  }
}

TEST_CASE("in-memory labeled frames match the decoded wire format") {
  SyntheticSceneSpec spec;
  spec.kind = SceneKind::boxes_room;
  spec.frames = 2;
  spec.width = 160;
  spec.height = 120;
  spec.fx = spec.fy = 130.0;
  spec.cx = 79.5;
  spec.cy = 59.5;
  spec.leak_prob = 0.4;

  const SyntheticSequence seq = render_synthetic_sequence(spec);
  const LabeledRgbdFrame frame = to_labeled_frame(seq, 0);
  const auto expected = decode_mask_image(seq.frames[0].input_mask, seq.manifest);
  REQUIRE(frame.masks.size() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(frame.masks[i].label == expected[i].label);
    CHECK(frame.masks[i].bitmap == expected[i].bitmap);
  }
  CHECK(frame.depth == seq.frames[0].depth);
  CHECK_NOTHROW(frame.validate());
}
