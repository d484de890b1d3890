#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "panfuse/mask.hpp"

namespace panfuse {

/// Intersection over union of two binary masks. Empty against empty has no
/// defined value and returns nullopt; callers aggregating IOUs skip it.
inline std::optional<double> instance_iou(const Image<std::uint8_t>& a,
                                          const Image<std::uint8_t>& b) {
  if (!a.same_size(b)) throw std::invalid_argument("instance_iou: size mismatch");
  std::size_t inter = 0, uni = 0;
  for (std::size_t p = 0; p < a.data().size(); ++p) {
    const bool in_a = a.data()[p] != 0, in_b = b.data()[p] != 0;
    inter += in_a && in_b;
    uni += in_a || in_b;
  }
  if (uni == 0) return std::nullopt;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

struct InstanceMatch {
  std::size_t pred_index = 0;
  std::size_t gt_index = 0;
  double iou = 0.0;
};

/// Greedy class-gated matching: repeatedly pair the globally highest-IOU
/// (pred, gt) pair with equal class id and IOU > 0, each mask used at most
/// once. Ties break toward the lowest gt index, then lowest pred index.
inline std::vector<InstanceMatch> match_instances(
    const std::vector<InstanceMask>& preds, const std::vector<InstanceMask>& gts) {
  std::vector<InstanceMatch> candidates;
  for (std::size_t g = 0; g < gts.size(); ++g) {
    for (std::size_t p = 0; p < preds.size(); ++p) {
      if (preds[p].label.class_id != gts[g].label.class_id) continue;
      const auto iou = instance_iou(preds[p].bitmap, gts[g].bitmap);
      if (iou && *iou > 0.0) candidates.push_back({p, g, *iou});
    }
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const InstanceMatch& a, const InstanceMatch& b) {
              if (a.iou != b.iou) return a.iou > b.iou;
              if (a.gt_index != b.gt_index) return a.gt_index < b.gt_index;
              return a.pred_index < b.pred_index;
            });

  std::vector<bool> pred_used(preds.size(), false), gt_used(gts.size(), false);
  std::vector<InstanceMatch> matches;
  for (const InstanceMatch& c : candidates) {
    if (pred_used[c.pred_index] || gt_used[c.gt_index]) continue;
    pred_used[c.pred_index] = true;
    gt_used[c.gt_index] = true;
    matches.push_back(c);
  }
  return matches;
}

/// Instance-mean mask IOU over a sequence: every ground-truth instance
/// contributes its matched IOU, or zero when unmatched.
struct IouReport {
  std::string variant;
  std::vector<std::vector<double>> per_frame_instance_iou;  // [frame][gt index]
  std::size_t gt_instances = 0;
  std::size_t matched = 0;
  double mean_percent = 0.0;

  std::size_t unmatched() const { return gt_instances - matched; }
};

inline IouReport dataset_mask_iou(
    std::string variant, const std::vector<std::vector<InstanceMask>>& preds_by_frame,
    const std::vector<std::vector<InstanceMask>>& gts_by_frame) {
  if (preds_by_frame.size() != gts_by_frame.size())
    throw std::invalid_argument("dataset_mask_iou: frame count mismatch");

  IouReport report;
  report.variant = std::move(variant);
  double iou_sum = 0.0;
  for (std::size_t f = 0; f < gts_by_frame.size(); ++f) {
    const auto& gts = gts_by_frame[f];
    const auto matches = match_instances(preds_by_frame[f], gts);
    std::vector<double> frame_ious(gts.size(), 0.0);
    for (const InstanceMatch& m : matches) {
      frame_ious[m.gt_index] = m.iou;
      ++report.matched;
    }
    // Ground truths with no pixels are excluded from the aggregate rather
    // than scored; they cannot match anything.
    for (std::size_t g = 0; g < gts.size(); ++g)
      if (!gts[g].empty()) ++report.gt_instances;
    for (const double v : frame_ious) iou_sum += v;
    report.per_frame_instance_iou.push_back(std::move(frame_ious));
  }
  if (report.gt_instances == 0)
    throw std::runtime_error("dataset_mask_iou: no ground-truth instances");
  report.mean_percent = 100.0 * iou_sum / static_cast<double>(report.gt_instances);
  return report;
}

struct ReportRow {
  std::string variant;
  double mask_iou_percent = 0.0;
  std::optional<double> change;  // vs previous row
};

inline std::vector<ReportRow> make_refinement_report(
    const std::vector<IouReport>& variants) {
  std::vector<ReportRow> rows;
  for (const IouReport& r : variants) {
    ReportRow row;
    row.variant = r.variant;
    row.mask_iou_percent = r.mean_percent;
    if (!rows.empty()) row.change = r.mean_percent - rows.back().mask_iou_percent;
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace detail {

inline std::string format_change(const std::optional<double>& change) {
  if (!change) return "-";
  std::ostringstream out;
  out << std::showpos << std::fixed << std::setprecision(4) << *change;
  return out.str();
}

}  // namespace detail

inline std::string format_report_table(const std::vector<ReportRow>& rows) {
  std::size_t name_width = std::string("variant").size();
  for (const ReportRow& r : rows) name_width = std::max(name_width, r.variant.size());

  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(name_width + 2)) << "variant"
      << std::right << std::setw(12) << "mask_iou" << std::setw(12) << "change"
      << "\n";
  for (const ReportRow& r : rows) {
    std::ostringstream iou;
    iou << std::fixed << std::setprecision(4) << r.mask_iou_percent;
    out << std::left << std::setw(static_cast<int>(name_width + 2)) << r.variant
        << std::right << std::setw(12) << iou.str() << std::setw(12)
        << detail::format_change(r.change) << "\n";
  }
  return out.str();
}

inline void write_report_csv(const std::filesystem::path& path,
                             const std::vector<ReportRow>& rows) {
  std::ostringstream out;
  out << "variant,mask_iou_percent,change\n";
  for (const ReportRow& r : rows) {
    out << r.variant << "," << std::fixed << std::setprecision(4)
        << r.mask_iou_percent << ",";
    if (r.change) out << detail::format_change(r.change);
    out << "\n";
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot write report " + path.string());
  file << out.str();
}

}  // namespace panfuse
