#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "cobra/metrics.hpp"

using namespace cobra;
using Catch::Approx;

namespace {

BoundingBox box(double u0, double v0, double u1, double v1,
                ObjectClass cls = ObjectClass::Box, double conf = 1.0) {
  return {u0, v0, u1, v1, cls, conf};
}

// --- Exhaustive oracle ------------------------------------------------------
// Re-derives the greedy matching with selection scans instead of sorting and
// an interval-overlap IoU, then the same 101-point AP rule.

double overlap(double lo1, double hi1, double lo2, double hi2) {
  return std::max(0.0, std::min(hi1, hi2) - std::max(lo1, lo2));
}

double oracle_iou(const BoundingBox& a, const BoundingBox& b) {
  const double inter = overlap(a.u_min, a.u_max, b.u_min, b.u_max) *
                       overlap(a.v_min, a.v_max, b.v_min, b.v_max);
  if (inter <= 0.0) return 0.0;
  const double area_a = (a.u_max - a.u_min) * (a.v_max - a.v_min);
  const double area_b = (b.u_max - b.u_min) * (b.v_max - b.v_min);
  return inter / (area_a + area_b - inter);
}

struct OracleClassResult {
  int tp = 0, fp = 0, gt_count = 0;
  double precision = 0.0;
  std::optional<double> recall, ap;
};

OracleClassResult oracle_metrics(const GroundTruthSet& gt,
                                 const PredictionSet& pred, ObjectClass cls,
                                 double thr) {
  struct P {
    int image;
    BoundingBox box;
    bool used = false;
  };
  std::vector<P> preds;
  for (const auto& [id, boxes] : pred.images) {
    for (const auto& b : boxes) {
      if (b.class_id == cls) preds.push_back({id, b});
    }
  }
  struct G {
    int image;
    BoundingBox box;
    bool matched = false;
  };
  std::vector<G> gts;
  for (const auto& [id, boxes] : gt.images) {
    for (const auto& b : boxes) {
      if (b.class_id == cls) gts.push_back({id, b});
    }
  }

  OracleClassResult out;
  out.gt_count = static_cast<int>(gts.size());
  std::vector<std::pair<double, double>> pr;
  for (std::size_t step = 0; step < preds.size(); ++step) {
    // Selection scan for the next prediction in greedy order.
    P* next = nullptr;
    for (auto& p : preds) {
      if (p.used) continue;
      if (!next) {
        next = &p;
        continue;
      }
      const auto key = [](const P& q) {
        return std::tuple{-q.box.confidence, q.image,         q.box.u_min,
                          q.box.v_min,       q.box.u_max,     q.box.v_max};
      };
      if (key(p) < key(*next)) next = &p;
    }
    next->used = true;

    G* best = nullptr;
    double best_v = 0.0;
    for (auto& g : gts) {
      if (g.matched || g.image != next->image) continue;
      const double v = oracle_iou(next->box, g.box);
      const auto gkey = [](const G& q) {
        return std::tuple{q.box.u_min, q.box.v_min, q.box.u_max, q.box.v_max};
      };
      if (v > best_v || (v == best_v && best && gkey(g) < gkey(*best))) {
        best_v = v;
        best = &g;
      }
    }
    if (best && best_v >= thr) {
      best->matched = true;
      ++out.tp;
    } else {
      ++out.fp;
    }
    if (out.gt_count > 0) {
      pr.emplace_back(double(out.tp) / out.gt_count,
                      double(out.tp) / double(out.tp + out.fp));
    }
  }
  out.precision = preds.empty() ? 0.0 : double(out.tp) / preds.size();
  if (out.gt_count > 0) {
    out.recall = double(out.tp) / out.gt_count;
    double sum = 0.0;
    for (int ri = 0; ri <= 100; ++ri) {
      const double r = ri / 100.0;
      double best_p = 0.0;
      for (const auto& [rec, prec] : pr) {
        if (rec >= r) best_p = std::max(best_p, prec);
      }
      sum += best_p;
    }
    out.ap = sum / 101.0;
  }
  return out;
}

DetectionSet random_set(std::mt19937_64& rng, int images, int max_boxes,
                        bool confidences) {
  std::uniform_real_distribution<double> du(0.0, 600.0);
  std::uniform_real_distribution<double> ds(5.0, 80.0);
  std::uniform_real_distribution<double> dc(0.05, 1.0);
  std::uniform_int_distribution<int> dn(0, max_boxes);
  std::uniform_int_distribution<int> dcls(0, 1);
  DetectionSet set;
  for (int id = 0; id < images; ++id) {
    auto& boxes = set.images[id];
    const int n = dn(rng);
    for (int b = 0; b < n; ++b) {
      const double u0 = du(rng), v0 = du(rng);
      boxes.push_back(box(u0, v0, u0 + ds(rng), v0 + ds(rng),
                          static_cast<ObjectClass>(dcls(rng)),
                          confidences ? dc(rng) : 1.0));
    }
  }
  return set;
}

}  // namespace

TEST_CASE("iou") {
  SECTION("identical boxes") {
    CHECK(iou(box(0, 0, 2, 2), box(0, 0, 2, 2)) == 1.0);
  }
  SECTION("disjoint boxes") {
    CHECK(iou(box(0, 0, 1, 1), box(5, 5, 6, 6)) == 0.0);
  }
  SECTION("hand-computed overlap") {
    CHECK(iou(box(0, 0, 2, 2), box(1, 1, 3, 3)) == Approx(1.0 / 7.0).margin(1e-15));
  }
  SECTION("symmetric and reflexive on random boxes") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> d(0.0, 100.0);
    for (int i = 0; i < 100; ++i) {
      const auto a = box(d(rng), d(rng), 101 + d(rng), 101 + d(rng));
      const auto b = box(d(rng), d(rng), 101 + d(rng), 101 + d(rng));
      CHECK(iou(a, b) == iou(b, a));
      CHECK(iou(a, a) == 1.0);
      CHECK(iou(a, b) >= 0.0);
      CHECK(iou(a, b) <= 1.0);
    }
  }
}

TEST_CASE("compute_metrics fixtures") {
  SECTION("single exact match") {
    GroundTruthSet gt;
    gt.images[0] = {box(10, 10, 50, 50)};
    PredictionSet pred;
    pred.images[0] = {box(10, 10, 50, 50, ObjectClass::Box, 0.9)};
    const auto report = compute_metrics(gt, pred, 0.5);
    const auto& cm = report.per_class.at(ObjectClass::Box);
    CHECK(cm.precision == 1.0);
    CHECK(cm.recall.value() == 1.0);
    CHECK(cm.ap.value() == 1.0);
    CHECK(report.map == 1.0);
  }

  SECTION("10 ground truths, 8 matches, 2 false positives") {
    GroundTruthSet gt;
    PredictionSet pred;
    for (int img = 0; img < 2; ++img) {
      for (int i = 0; i < 5; ++i) {
        gt.images[img].push_back(box(100.0 * i, 0, 100.0 * i + 50, 50));
      }
    }
    // Match 4 of 5 per image, plus one disjoint false positive each.
    for (int img = 0; img < 2; ++img) {
      for (int i = 0; i < 4; ++i) {
        pred.images[img].push_back(
            box(100.0 * i, 0, 100.0 * i + 50, 50, ObjectClass::Box, 0.7));
      }
      pred.images[img].push_back(
          box(0, 300, 50, 350, ObjectClass::Box, 0.7));
    }
    const auto report = compute_metrics(gt, pred, 0.5);
    const auto& cm = report.per_class.at(ObjectClass::Box);
    CHECK(cm.tp == 8);
    CHECK(cm.fp == 2);
    CHECK(cm.fn == 2);
    CHECK(cm.precision == Approx(0.8).margin(1e-15));
    CHECK(cm.recall.value() == Approx(0.8).margin(1e-15));
  }

  SECTION("class without ground truth reports absent recall and is excluded from mAP") {
    GroundTruthSet gt;
    gt.images[0] = {box(10, 10, 50, 50, ObjectClass::Box)};
    PredictionSet pred;
    pred.images[0] = {box(10, 10, 50, 50, ObjectClass::Box, 0.9),
                      box(60, 60, 90, 90, ObjectClass::DockingModule, 0.8)};
    const auto report = compute_metrics(gt, pred, 0.5);
    const auto& dm = report.per_class.at(ObjectClass::DockingModule);
    CHECK_FALSE(dm.recall.has_value());
    CHECK_FALSE(dm.ap.has_value());
    CHECK(dm.fp == 1);
    CHECK(report.map == 1.0);  // box class only
  }
}

TEST_CASE("compute_metrics equals the exhaustive oracle on random sets") {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 60; ++trial) {
    const auto gt = random_set(rng, 4, 6, false);
    auto pred = random_set(rng, 4, 6, true);
    // Also inject near-duplicates of some ground truths so matches occur.
    std::uniform_real_distribution<double> jitter(-4.0, 4.0);
    for (const auto& [id, boxes] : gt.images) {
      for (const auto& b : boxes) {
        if ((rng() & 1) == 0) continue;
        auto p = b;
        p.u_min += jitter(rng);
        p.v_max += jitter(rng);
        p.confidence = 0.05 + 0.9 * std::uniform_real_distribution<double>()(rng);
        pred.images[id].push_back(p);
      }
    }
    const auto report = compute_metrics(gt, pred, 0.5);
    for (ObjectClass cls : {ObjectClass::Box, ObjectClass::DockingModule}) {
      const auto expect = oracle_metrics(gt, pred, cls, 0.5);
      if (!report.per_class.count(cls)) {
        CHECK(expect.gt_count == 0);
        continue;
      }
      const auto& cm = report.per_class.at(cls);
      CHECK(cm.tp == expect.tp);
      CHECK(cm.fp == expect.fp);
      CHECK(cm.precision == expect.precision);
      CHECK(cm.recall.has_value() == expect.recall.has_value());
      if (cm.recall) CHECK(*cm.recall == *expect.recall);
      if (cm.ap) CHECK(*cm.ap == *expect.ap);
    }
  }
}

TEST_CASE("compute_metrics is permutation invariant") {
  std::mt19937_64 rng(131);
  const auto gt = random_set(rng, 3, 5, false);
  auto pred = random_set(rng, 3, 5, true);
  for (auto& [id, boxes] : pred.images) {
    for (auto& b : boxes) b.confidence = 0.5;  // force tie-breaking
  }
  const auto base = compute_metrics(gt, pred, 0.4);

  PredictionSet shuffled;
  for (auto it = pred.images.rbegin(); it != pred.images.rend(); ++it) {
    auto boxes = it->second;
    std::shuffle(boxes.begin(), boxes.end(), rng);
    shuffled.images[it->first] = boxes;
  }
  const auto again = compute_metrics(gt, shuffled, 0.4);
  for (const auto& [cls, cm] : base.per_class) {
    const auto& other = again.per_class.at(cls);
    CHECK(cm.tp == other.tp);
    CHECK(cm.fp == other.fp);
    CHECK(cm.precision == other.precision);
    if (cm.ap) CHECK(*cm.ap == *other.ap);
  }
  CHECK(base.map == again.map);
}
