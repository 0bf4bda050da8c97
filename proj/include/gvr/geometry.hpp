#pragma once

#include <span>
#include <string>

namespace gvr {

enum class CornerPolicy {
  kCanonicalize,  // swap inverted corners
  kStrict,        // reject inverted corners and negative coordinates
};

// Axis-aligned rectangle in absolute XYXY pixel coordinates.
// Always canonical after construction: x1 <= x2, y1 <= y2.
class BBox {
 public:
  BBox() = default;
  // Throws std::invalid_argument on non-finite coordinates, or on
  // inverted/negative coordinates under CornerPolicy::kStrict.
  BBox(double x1, double y1, double x2, double y2,
       CornerPolicy policy = CornerPolicy::kCanonicalize);

  double x1() const { return x1_; }
  double y1() const { return y1_; }
  double x2() const { return x2_; }
  double y2() const { return y2_; }
  double width() const { return x2_ - x1_; }
  double height() const { return y2_ - y1_; }
  double area() const { return width() * height(); }

  BBox scaled(double c) const;

  friend bool operator==(const BBox&, const BBox&) = default;

 private:
  double x1_ = 0.0;
  double y1_ = 0.0;
  double x2_ = 0.0;
  double y2_ = 0.0;
};

std::string to_string(const BBox& b);

struct ImageDims {
  double height = 1.0;
  double width = 1.0;

  friend bool operator==(const ImageDims&, const ImageDims&) = default;
};

double iou(const BBox& a, const BBox& b);

// IoU minus the fraction of the enclosing hull not covered by the union.
// Returns 0 when the hull has zero area.
double giou(const BBox& a, const BBox& b);

// Sum of absolute coordinate differences over 2*sqrt(H^2 + W^2). Unclamped.
double normalized_l1(const BBox& pred, const BBox& gt, const ImageDims& dims);

// W = max x2, H = max y2 over the ground truth if non-empty, else over the
// predictions. Falls back to 1 for any extent that is not positive.
ImageDims derive_dims(std::span<const BBox> gt, std::span<const BBox> pred);

}  // namespace gvr
