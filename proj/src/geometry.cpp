#include "gvr/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace gvr {

BBox::BBox(double x1, double y1, double x2, double y2, CornerPolicy policy) {
  if (!std::isfinite(x1) || !std::isfinite(y1) || !std::isfinite(x2) ||
      !std::isfinite(y2)) {
    throw std::invalid_argument("BBox: non-finite coordinate");
  }
  if (policy == CornerPolicy::kStrict) {
    if (x1 > x2 || y1 > y2) {
      throw std::invalid_argument("BBox: inverted corners");
    }
    if (x1 < 0 || y1 < 0) {
      throw std::invalid_argument("BBox: negative coordinate");
    }
  }
  x1_ = std::min(x1, x2);
  x2_ = std::max(x1, x2);
  y1_ = std::min(y1, y2);
  y2_ = std::max(y1, y2);
}

BBox BBox::scaled(double c) const {
  return BBox(x1_ * c, y1_ * c, x2_ * c, y2_ * c);
}

std::string to_string(const BBox& b) {
  std::ostringstream os;
  os << '[' << b.x1() << ',' << b.y1() << ',' << b.x2() << ',' << b.y2()
     << ']';
  return os.str();
}

namespace {

double intersection_area(const BBox& a, const BBox& b) {
  const double w = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
  const double h = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
  if (w <= 0 || h <= 0) return 0.0;
  return w * h;
}

// Symmetric in (a, b) so that f(a,b) == f(b,a) bit for bit.
struct Overlap {
  double inter;
  double uni;
};

Overlap overlap(const BBox& a, const BBox& b) {
  const double inter = intersection_area(a, b);
  return {inter, (a.area() + b.area()) - inter};
}

}  // namespace

double iou(const BBox& a, const BBox& b) {
  const auto [inter, uni] = overlap(a, b);
  if (uni <= 0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double giou(const BBox& a, const BBox& b) {
  const double hull_w = std::max(a.x2(), b.x2()) - std::min(a.x1(), b.x1());
  const double hull_h = std::max(a.y2(), b.y2()) - std::min(a.y1(), b.y1());
  const double hull = hull_w * hull_h;
  if (hull <= 0) return 0.0;
  const auto [inter, uni] = overlap(a, b);
  const double iou_ab = uni > 0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
  const double excess = std::max(0.0, hull - uni) / hull;
  return std::clamp(iou_ab - excess, -1.0, 1.0);
}

double normalized_l1(const BBox& p, const BBox& g, const ImageDims& dims) {
  const double sum = std::abs(p.x1() - g.x1()) + std::abs(p.y1() - g.y1()) +
                     std::abs(p.x2() - g.x2()) + std::abs(p.y2() - g.y2());
  return sum / (2.0 * std::hypot(dims.height, dims.width));
}

ImageDims derive_dims(std::span<const BBox> gt, std::span<const BBox> pred) {
  const auto source = gt.empty() ? pred : gt;
  if (source.empty()) return {};
  double w = source.front().x2();
  double h = source.front().y2();
  for (const auto& b : source) {
    w = std::max(w, b.x2());
    h = std::max(h, b.y2());
  }
  return {h > 0 ? h : 1.0, w > 0 ? w : 1.0};
}

}  // namespace gvr
