#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <tuple>
#include <vector>

#include "cobra/detection.hpp"

namespace cobra {

/// Per-image detection lists keyed by image id. Predictions carry
/// confidences; ground truth confidences are ignored.
struct DetectionSet {
  std::map<int, std::vector<BoundingBox>> images;

  std::size_t total_boxes() const {
    std::size_t n = 0;
    for (const auto& [id, boxes] : images) n += boxes.size();
    return n;
  }
};

using GroundTruthSet = DetectionSet;
using PredictionSet = DetectionSet;

struct ClassMetrics {
  int tp = 0;
  int fp = 0;
  int fn = 0;
  int gt_count = 0;
  double precision = 0.0;
  std::optional<double> recall;  // absent when the class has no ground truth
  std::optional<double> ap;
};

struct MetricsReport {
  double iou_threshold = 0.5;
  std::map<ObjectClass, ClassMetrics> per_class;
  double map = 0.0;  // mean AP over classes with ground truth
};

/// Intersection over union; 0 for disjoint boxes.
inline double iou(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.u_max, b.u_max) - std::max(a.u_min, b.u_min);
  const double ih = std::min(a.v_max, b.v_max) - std::max(a.v_min, b.v_min);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

namespace detail {

inline std::tuple<double, double, double, double> box_key(const BoundingBox& b) {
  return {b.u_min, b.v_min, b.u_max, b.v_max};
}

struct PredRef {
  int image_id;
  const BoundingBox* box;
};

/// Confidence descending; ties by image id, then lexicographic coordinates.
inline bool pred_order(const PredRef& a, const PredRef& b) {
  if (a.box->confidence != b.box->confidence) {
    return a.box->confidence > b.box->confidence;
  }
  if (a.image_id != b.image_id) return a.image_id < b.image_id;
  return box_key(*a.box) < box_key(*b.box);
}

}  // namespace detail

/// Greedy confidence-descending matching at the IoU threshold (each ground
/// truth matched at most once), dataset-level precision/recall, and
/// 101-point interpolated AP per class. mAP averages over classes that have
/// ground truth; a class without ground truth reports an absent recall/AP.
inline MetricsReport compute_metrics(const GroundTruthSet& gt,
                                     const PredictionSet& pred,
                                     double iou_threshold = 0.5) {
  MetricsReport report;
  report.iou_threshold = iou_threshold;

  for (ObjectClass cls : {ObjectClass::Box, ObjectClass::DockingModule}) {
    int gt_count = 0;
    for (const auto& [id, boxes] : gt.images) {
      for (const auto& b : boxes) gt_count += b.class_id == cls;
    }
    std::vector<detail::PredRef> preds;
    for (const auto& [id, boxes] : pred.images) {
      for (const auto& b : boxes) {
        if (b.class_id == cls) preds.push_back({id, &b});
      }
    }
    if (gt_count == 0 && preds.empty()) continue;
    std::sort(preds.begin(), preds.end(), detail::pred_order);

    std::map<int, std::vector<bool>> matched;  // image id -> per-gt-box flag
    for (const auto& [id, boxes] : gt.images) {
      matched[id].assign(boxes.size(), false);
    }

    ClassMetrics cm;
    cm.gt_count = gt_count;
    std::vector<std::pair<double, double>> pr;  // (recall, precision) per pred
    for (const auto& p : preds) {
      const BoundingBox* best_gt = nullptr;
      int best_index = -1;
      double best_iou = 0.0;
      const auto it = gt.images.find(p.image_id);
      if (it != gt.images.end()) {
        for (int gi = 0; gi < static_cast<int>(it->second.size()); ++gi) {
          const auto& g = it->second[gi];
          if (g.class_id != cls || matched[p.image_id][gi]) continue;
          const double v = iou(*p.box, g);
          const bool better =
              v > best_iou ||
              (v == best_iou && best_gt &&
               detail::box_key(g) < detail::box_key(*best_gt));
          if (better) {
            best_iou = v;
            best_gt = &g;
            best_index = gi;
          }
        }
      }
      if (best_gt && best_iou >= iou_threshold) {
        matched[p.image_id][best_index] = true;
        ++cm.tp;
      } else {
        ++cm.fp;
      }
      if (gt_count > 0) {
        pr.emplace_back(double(cm.tp) / gt_count,
                        double(cm.tp) / double(cm.tp + cm.fp));
      }
    }
    cm.fn = gt_count - cm.tp;
    cm.precision = preds.empty() ? 0.0 : double(cm.tp) / double(cm.tp + cm.fp);
    if (gt_count > 0) {
      cm.recall = double(cm.tp) / gt_count;
      // 101-point interpolation: mean over r in {0, 0.01, ..., 1} of the best
      // precision at recall >= r.
      double sum = 0.0;
      for (int ri = 0; ri <= 100; ++ri) {
        const double r = ri / 100.0;
        double best_p = 0.0;
        for (const auto& [rec, prec] : pr) {
          if (rec >= r) best_p = std::max(best_p, prec);
        }
        sum += best_p;
      }
      cm.ap = sum / 101.0;
    }
    report.per_class[cls] = cm;
  }

  double ap_sum = 0.0;
  int ap_classes = 0;
  for (const auto& [cls, cm] : report.per_class) {
    if (cm.ap) {
      ap_sum += *cm.ap;
      ++ap_classes;
    }
  }
  report.map = ap_classes > 0 ? ap_sum / ap_classes : 0.0;
  return report;
}

}  // namespace cobra
