#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "gvr/geometry.hpp"

namespace gvr {

// Structured view of one model completion.
struct ParsedCompletion {
  std::vector<BBox> boxes;
  std::vector<std::string> labels;  // parallel to boxes, "" when absent
  std::vector<std::string> tags_found;
  std::size_t completion_len = 0;  // whitespace-delimited tokens
  bool parse_ok = false;
};

// One ground-truth sample as stored in a records file.
struct GroundingRecord {
  std::string id;
  std::optional<ImageDims> image_dims;
  std::vector<BBox> gt_boxes;
  std::vector<std::string> gt_labels;  // parallel to gt_boxes
  std::optional<std::string> prompt;
  std::optional<std::string> completion;
  std::optional<std::size_t> token_len;
};

}  // namespace gvr
