#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "gvr/config_error.hpp"
#include "gvr/geometry.hpp"
#include "gvr/records.hpp"

namespace gvr {

struct RewardConfig {
  // Hungarian cost weights.
  double match_w_l1 = 5.0;
  double match_w_giou = 2.0;
  // Per-pair score weights.
  double score_w_l1 = 5.0;
  double score_w_giou = 2.0;
  double lambda_fn = 0.0;
  double lambda_fp = 0.0;
  std::optional<ImageDims> explicit_dims;
  // Use GroundingRecord::image_dims (when present) instead of deriving dims
  // from box extents. explicit_dims takes precedence over both.
  bool use_record_dims = false;

  double w_label = 1.0;
  double w_bbox = 1.0;
  double w_tag = 1.0;
  std::size_t overlong_max_len = 1024;
  std::size_t overlong_buffer = 256;

  // Throws ConfigError.
  void validate() const;
};

nlohmann::json to_json(const RewardConfig& cfg);
// Missing keys keep their defaults; unknown keys and bad values throw
// ConfigError naming the key.
RewardConfig reward_config_from_json(const nlohmann::json& doc);

struct MatchDetail {
  std::size_t pred_index = 0;
  std::size_t gt_index = 0;
  double l1 = 0.0;
  double giou = 0.0;
  double score = 0.0;
};

struct RewardBreakdown {
  std::vector<MatchDetail> matches;
  std::size_t unmatched_gt = 0;
  std::size_t unmatched_pred = 0;
  double base = 0.0;
  double penalty = 0.0;
  double final = 0.0;
  ImageDims dims;
  bool matching_failed = false;
};

double clip01(double v);

double pair_score(double l1, double giou, const RewardConfig& cfg);

RewardBreakdown bbox_reward(std::span<const BBox> pred, std::span<const BBox> gt,
                            const RewardConfig& cfg);

double label_accuracy_reward(const ParsedCompletion& parsed,
                             std::span<const std::string> gt_labels,
                             std::span<const MatchDetail> matches);

// Occurrences of <think>, </think>, <answer>, </answer> in textual order,
// duplicates included.
std::vector<std::string> find_tags(std::string_view text);

// Quarter credit for each of the four tags that occurs exactly once and after
// the previously credited tag.
double tag_count_reward(std::span<const std::string> tags_in_order);
double tag_count_reward(std::string_view text);

double soft_overlong_penalty(std::size_t completion_len, const RewardConfig& cfg);

struct CompositeReward {
  RewardBreakdown bbox;
  double label = 0.0;
  double tag = 0.0;
  double overlong = 0.0;
  double total = 0.0;
};

// Completion length comes from record.token_len when set, otherwise from
// parsed.completion_len.
CompositeReward composite_reward(const ParsedCompletion& parsed,
                                 const GroundingRecord& record,
                                 const RewardConfig& cfg);

// Lowercased, whitespace-trimmed label used for label comparison.
std::string normalize_label(std::string_view label);

}  // namespace gvr
