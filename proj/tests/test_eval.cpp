//! Instance IOU, greedy class-gated matching, sequence aggregation, and the
//! refinement comparison report.

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "panfuse/eval.hpp"

using namespace panfuse;
namespace fs = std::filesystem;

namespace {

// 1 x n strip mask with the given pixel indices set.
Image<std::uint8_t> strip(int n, const std::vector<int>& set_pixels) {
  Image<std::uint8_t> img(n, 1, 0);
  for (int p : set_pixels) img(p, 0) = 1;
  return img;
}

InstanceMask strip_mask(int n, const std::vector<int>& set_pixels,
                        PanopticLabel label) {
  return {strip(n, set_pixels), label};
}

}  // namespace

TEST_CASE("instance_iou computes exact overlap fractions") {
  CHECK(instance_iou(strip(4, {0, 1}), strip(4, {0, 1})) == 1.0);
  CHECK(instance_iou(strip(4, {0, 1}), strip(4, {2, 3})) == 0.0);
  CHECK(instance_iou(strip(4, {0, 1}), strip(4, {1, 2})) == Catch::Approx(1.0 / 3.0));
  CHECK(instance_iou(strip(4, {0, 1, 2, 3}), strip(4, {0, 1})) == 0.5);

  SECTION("empty against empty is undefined") {
    CHECK_FALSE(instance_iou(strip(4, {}), strip(4, {})).has_value());
  }

  SECTION("empty against non-empty is zero") {
    CHECK(instance_iou(strip(4, {}), strip(4, {1})) == 0.0);
  }

  SECTION("symmetry") {
    const auto ab = instance_iou(strip(8, {0, 1, 2}), strip(8, {2, 3}));
    const auto ba = instance_iou(strip(8, {2, 3}), strip(8, {0, 1, 2}));
    CHECK(ab == ba);
  }

  SECTION("size mismatch throws") {
    CHECK_THROWS_AS(instance_iou(strip(4, {0}), strip(5, {0})),
                    std::invalid_argument);
  }
}

TEST_CASE("match_instances pairs the globally best IOU first") {
  const PanopticLabel box1{2, 1}, box2{2, 2}, chair{3, 1};

  SECTION("one clean overlap matches") {
    const auto matches = match_instances({strip_mask(4, {0, 1}, box1)},
                                         {strip_mask(4, {1, 2}, box1)});
    REQUIRE(matches.size() == 1);
    CHECK(matches[0].pred_index == 0);
    CHECK(matches[0].gt_index == 0);
    CHECK(matches[0].iou == Catch::Approx(1.0 / 3.0));
  }

  SECTION("matching is gated on the class id") {
    const auto matches = match_instances({strip_mask(4, {0, 1}, chair)},
                                         {strip_mask(4, {0, 1}, box1)});
    CHECK(matches.empty());
  }

  SECTION("disjoint masks never match") {
    const auto matches = match_instances({strip_mask(4, {0}, box1)},
                                         {strip_mask(4, {3}, box1)});
    CHECK(matches.empty());
  }

  SECTION("greedy consumption: best pair first, remainder next") {
    // pred 0 covers gt 0 at 2/3 and gt 1 at 1/3; pred 1 covers gt 1 at 1/2.
    const std::vector<InstanceMask> preds = {strip_mask(4, {0, 1, 2}, box1),
                                             strip_mask(4, {2, 3}, box2)};
    const std::vector<InstanceMask> gts = {strip_mask(4, {0, 1}, box1),
                                           strip_mask(4, {2}, box2)};
    const auto matches = match_instances(preds, gts);
    REQUIRE(matches.size() == 2);
    CHECK(matches[0].pred_index == 0);
    CHECK(matches[0].gt_index == 0);
    CHECK(matches[0].iou == Catch::Approx(2.0 / 3.0));
    CHECK(matches[1].pred_index == 1);
    CHECK(matches[1].gt_index == 1);
    CHECK(matches[1].iou == Catch::Approx(0.5));
  }

  SECTION("equal IOUs break toward the lower gt index") {
    const std::vector<InstanceMask> preds = {strip_mask(4, {0, 1}, box1)};
    const std::vector<InstanceMask> gts = {strip_mask(4, {0}, box1),
                                           strip_mask(4, {1}, box1)};
    const auto matches = match_instances(preds, gts);
    REQUIRE(matches.size() == 1);
    CHECK(matches[0].gt_index == 0);
  }

  SECTION("equal IOUs and gt break toward the lower pred index") {
    const std::vector<InstanceMask> preds = {strip_mask(4, {0}, box1),
                                             strip_mask(4, {1}, box1)};
    const std::vector<InstanceMask> gts = {strip_mask(4, {0, 1}, box1)};
    const auto matches = match_instances(preds, gts);
    REQUIRE(matches.size() == 1);
    CHECK(matches[0].pred_index == 0);
  }

  SECTION("each mask is used at most once") {
    const std::vector<InstanceMask> preds = {strip_mask(6, {0, 1, 2, 3}, box1)};
    const std::vector<InstanceMask> gts = {strip_mask(6, {0, 1}, box1),
                                           strip_mask(6, {2, 3}, box1)};
    CHECK(match_instances(preds, gts).size() == 1);
  }
}

TEST_CASE("dataset_mask_iou averages matched IOU over gt instances") {
  const PanopticLabel box1{2, 1}, box2{2, 2};
  const std::vector<InstanceMask> gts = {strip_mask(8, {0, 1, 2, 3}, box1),
                                         strip_mask(8, {5, 6}, box2)};

  SECTION("perfect predictions score 100") {
    const IouReport r = dataset_mask_iou("exact", {gts}, {gts});
    CHECK(r.variant == "exact");
    CHECK(r.gt_instances == 2);
    CHECK(r.matched == 2);
    CHECK(r.unmatched() == 0);
    CHECK(r.mean_percent == Catch::Approx(100.0));
    REQUIRE(r.per_frame_instance_iou.size() == 1);
    CHECK(r.per_frame_instance_iou[0] == std::vector<double>{1.0, 1.0});
  }

  SECTION("unmatched ground truth contributes zero") {
    const std::vector<InstanceMask> preds = {strip_mask(8, {0, 1, 2, 3}, box1)};
    const IouReport r = dataset_mask_iou("partial", {preds}, {gts});
    CHECK(r.gt_instances == 2);
    CHECK(r.matched == 1);
    CHECK(r.unmatched() == 1);
    CHECK(r.mean_percent == Catch::Approx(50.0));
  }

  SECTION("empty predictions score zero") {
    const IouReport r = dataset_mask_iou("none", {{}}, {gts});
    CHECK(r.matched == 0);
    CHECK(r.mean_percent == 0.0);
  }

  SECTION("pixel-free ground truths are excluded from the mean") {
    std::vector<InstanceMask> with_empty = gts;
    with_empty.push_back(strip_mask(8, {}, box1));
    const IouReport r = dataset_mask_iou("exact", {gts}, {with_empty});
    CHECK(r.gt_instances == 2);  // the empty gt does not count
    CHECK(r.mean_percent == Catch::Approx(100.0));
  }

  SECTION("a sequence with no gt pixels cannot be scored") {
    CHECK_THROWS_WITH(
        dataset_mask_iou("none", {{}}, {{}}),
        Catch::Matchers::ContainsSubstring("no ground-truth instances"));
  }

  SECTION("frame count mismatch throws") {
    CHECK_THROWS_AS(dataset_mask_iou("bad", {gts, gts}, {gts}),
                    std::invalid_argument);
  }

  SECTION("frame order does not change the aggregate") {
    const std::vector<InstanceMask> degraded = {strip_mask(8, {0, 1, 2}, box1),
                                                strip_mask(8, {5}, box2)};
    const IouReport fwd = dataset_mask_iou("v", {gts, degraded}, {gts, gts});
    const IouReport rev = dataset_mask_iou("v", {degraded, gts}, {gts, gts});
    CHECK(fwd.mean_percent == Catch::Approx(rev.mean_percent));
    CHECK(fwd.matched == rev.matched);
  }

  SECTION("the mean degrades monotonically with overlap") {
    const auto score = [&](const std::vector<int>& pixels) {
      const std::vector<InstanceMask> preds = {strip_mask(8, pixels, box1)};
      const std::vector<InstanceMask> gt = {strip_mask(8, {0, 1, 2, 3}, box1)};
      return dataset_mask_iou("v", {preds}, {gt}).mean_percent;
    };
    const double exact = score({0, 1, 2, 3});
    const double drifted = score({0, 1, 2, 4});  // 3/5
    const double half = score({0, 1});           // 1/2
    CHECK(exact == Catch::Approx(100.0));
    CHECK(exact > drifted);
    CHECK(drifted > half);
    CHECK(half == Catch::Approx(50.0));
  }
}

TEST_CASE("refinement report rows carry deltas against the previous row") {
  IouReport unrefined;
  unrefined.variant = "unrefined";
  unrefined.mean_percent = 82.5;
  IouReport refined;
  refined.variant = "refined";
  refined.mean_percent = 90.125;

  const auto rows = make_refinement_report({unrefined, refined});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].variant == "unrefined");
  CHECK_FALSE(rows[0].change.has_value());
  CHECK(rows[1].change == Catch::Approx(7.625));

  SECTION("change column formatting") {
    CHECK(detail::format_change(std::nullopt) == "-");
    CHECK(detail::format_change(7.625) == "+7.6250");
    CHECK(detail::format_change(-1.25) == "-1.2500");
    CHECK(detail::format_change(0.0) == "+0.0000");
  }

  SECTION("table layout is stable") {
    const std::string expected =
        "variant        mask_iou      change\n"
        "unrefined       82.5000           -\n"
        "refined         90.1250     +7.6250\n";
    CHECK(format_report_table(rows) == expected);
  }

  SECTION("csv mirrors the table") {
    const fs::path path = fs::temp_directory_path() / "panfuse_test_report.csv";
    write_report_csv(path, rows);
    std::ifstream in(path, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    CHECK(buf.str() ==
          "variant,mask_iou_percent,change\n"
          "unrefined,82.5000,\n"
          "refined,90.1250,+7.6250\n");
    fs::remove(path);
  }
}
