#include "gvr/reward.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>

#include "gvr/assignment.hpp"

namespace gvr {

namespace {

void require_weight(double v, const char* field) {
  if (!std::isfinite(v) || v < 0) {
    throw ConfigError(field, "must be a finite value >= 0");
  }
}

double read_number(const nlohmann::json& v, const std::string& field) {
  if (!v.is_number()) throw ConfigError(field, "expected a number");
  return v.get<double>();
}

std::size_t read_count(const nlohmann::json& v, const std::string& field) {
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError(field, "expected a nonnegative integer");
  }
  return v.get<std::size_t>();
}

}  // namespace

void RewardConfig::validate() const {
  require_weight(match_w_l1, "match_w_l1");
  require_weight(match_w_giou, "match_w_giou");
  require_weight(score_w_l1, "score_w_l1");
  require_weight(score_w_giou, "score_w_giou");
  require_weight(lambda_fn, "lambda_fn");
  require_weight(lambda_fp, "lambda_fp");
  require_weight(w_label, "w_label");
  require_weight(w_bbox, "w_bbox");
  require_weight(w_tag, "w_tag");
  if (score_w_l1 + score_w_giou <= 0) {
    throw ConfigError("score_w_l1", "score_w_l1 + score_w_giou must be > 0");
  }
  if (w_label + w_bbox + w_tag <= 0) {
    throw ConfigError("w_bbox", "w_label + w_bbox + w_tag must be > 0");
  }
  if (overlong_buffer > overlong_max_len) {
    throw ConfigError("overlong_buffer", "must not exceed overlong_max_len");
  }
  if (explicit_dims && !(explicit_dims->height > 0 && explicit_dims->width > 0 &&
                         std::isfinite(explicit_dims->height) &&
                         std::isfinite(explicit_dims->width))) {
    throw ConfigError("explicit_dims", "height and width must be positive");
  }
}

nlohmann::json to_json(const RewardConfig& cfg) {
  nlohmann::json j;
  j["match_w_l1"] = cfg.match_w_l1;
  j["match_w_giou"] = cfg.match_w_giou;
  j["score_w_l1"] = cfg.score_w_l1;
  j["score_w_giou"] = cfg.score_w_giou;
  j["lambda_fn"] = cfg.lambda_fn;
  j["lambda_fp"] = cfg.lambda_fp;
  if (cfg.explicit_dims) {
    j["explicit_dims"] = {cfg.explicit_dims->height, cfg.explicit_dims->width};
  } else {
    j["explicit_dims"] = nullptr;
  }
  j["use_record_dims"] = cfg.use_record_dims;
  j["w_label"] = cfg.w_label;
  j["w_bbox"] = cfg.w_bbox;
  j["w_tag"] = cfg.w_tag;
  j["overlong_max_len"] = cfg.overlong_max_len;
  j["overlong_buffer"] = cfg.overlong_buffer;
  return j;
}

RewardConfig reward_config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("<root>", "expected a JSON object");
  RewardConfig cfg;
  for (const auto& [key, v] : doc.items()) {
    if (key == "match_w_l1") cfg.match_w_l1 = read_number(v, key);
    else if (key == "match_w_giou") cfg.match_w_giou = read_number(v, key);
    else if (key == "score_w_l1") cfg.score_w_l1 = read_number(v, key);
    else if (key == "score_w_giou") cfg.score_w_giou = read_number(v, key);
    else if (key == "lambda_fn") cfg.lambda_fn = read_number(v, key);
    else if (key == "lambda_fp") cfg.lambda_fp = read_number(v, key);
    else if (key == "w_label") cfg.w_label = read_number(v, key);
    else if (key == "w_bbox") cfg.w_bbox = read_number(v, key);
    else if (key == "w_tag") cfg.w_tag = read_number(v, key);
    else if (key == "overlong_max_len") cfg.overlong_max_len = read_count(v, key);
    else if (key == "overlong_buffer") cfg.overlong_buffer = read_count(v, key);
    else if (key == "use_record_dims") {
      if (!v.is_boolean()) throw ConfigError(key, "expected a boolean");
      cfg.use_record_dims = v.get<bool>();
    } else if (key == "explicit_dims") {
      if (v.is_null()) {
        cfg.explicit_dims.reset();
      } else if (v.is_array() && v.size() == 2 && v[0].is_number() &&
                 v[1].is_number()) {
        cfg.explicit_dims = ImageDims{v[0].get<double>(), v[1].get<double>()};
      } else {
        throw ConfigError(key, "expected [height, width] or null");
      }
    } else {
      throw ConfigError(key, "unknown field");
    }
  }
  cfg.validate();
  return cfg;
}

double clip01(double v) { return std::clamp(v, 0.0, 1.0); }

double pair_score(double l1, double giou, const RewardConfig& cfg) {
  const double l1_term = 1.0 - clip01(l1);
  const double giou_term = (giou + 1.0) / 2.0;
  return clip01((cfg.score_w_l1 * l1_term + cfg.score_w_giou * giou_term) /
                (cfg.score_w_l1 + cfg.score_w_giou));
}

RewardBreakdown bbox_reward(std::span<const BBox> pred, std::span<const BBox> gt,
                            const RewardConfig& cfg) {
  RewardBreakdown out;
  const std::size_t num_pred = pred.size();
  const std::size_t num_gt = gt.size();
  out.dims = cfg.explicit_dims ? *cfg.explicit_dims : derive_dims(gt, pred);
  out.unmatched_gt = num_gt;
  out.unmatched_pred = num_pred;

  if (num_gt == 0) {
    out.base = 0.5;
    out.final = 0.5;
    return out;
  }

  if (num_pred > 0) {
    CostMatrix cost(num_pred, num_gt);
    std::vector<double> l1(num_pred * num_gt), gi(num_pred * num_gt);
    for (std::size_t i = 0; i < num_pred; ++i) {
      for (std::size_t j = 0; j < num_gt; ++j) {
        const std::size_t k = i * num_gt + j;
        l1[k] = normalized_l1(pred[i], gt[j], out.dims);
        gi[k] = giou(pred[i], gt[j]);
        cost(i, j) = cfg.match_w_l1 * l1[k] + cfg.match_w_giou * (1.0 - gi[k]);
      }
    }
    const Assignment assignment = hungarian(cost);
    if (assignment.pairs.empty()) {
      out.matching_failed = true;
    } else {
      double sum = 0.0;
      for (const auto& [i, j] : assignment.pairs) {
        const std::size_t k = i * num_gt + j;
        const double s = pair_score(l1[k], gi[k], cfg);
        out.matches.push_back({i, j, l1[k], gi[k], s});
        sum += s;
      }
      out.base = sum / static_cast<double>(num_gt);
    }
  }

  const std::size_t m = out.matches.size();
  out.unmatched_gt = num_gt - m;
  out.unmatched_pred = num_pred - m;
  out.penalty = (cfg.lambda_fn * static_cast<double>(out.unmatched_gt) +
                 cfg.lambda_fp * static_cast<double>(out.unmatched_pred)) /
                static_cast<double>(std::max<std::size_t>(1, num_gt));
  out.final = clip01(out.base - out.penalty);
  return out;
}

std::string normalize_label(std::string_view label) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!label.empty() && is_space(label.front())) label.remove_prefix(1);
  while (!label.empty() && is_space(label.back())) label.remove_suffix(1);
  std::string out(label);
  for (auto& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

double label_accuracy_reward(const ParsedCompletion& parsed,
                             std::span<const std::string> gt_labels,
                             std::span<const MatchDetail> matches) {
  if (matches.empty()) return gt_labels.empty() ? 1.0 : 0.0;
  std::size_t agree = 0;
  for (const auto& m : matches) {
    const std::string_view p =
        m.pred_index < parsed.labels.size() ? parsed.labels[m.pred_index] : "";
    const std::string_view g =
        m.gt_index < gt_labels.size() ? gt_labels[m.gt_index] : "";
    if (normalize_label(p) == normalize_label(g)) ++agree;
  }
  return static_cast<double>(agree) / static_cast<double>(matches.size());
}

namespace {
constexpr std::array<std::string_view, 4> kTags = {"<think>", "</think>",
                                                   "<answer>", "</answer>"};
}

std::vector<std::string> find_tags(std::string_view text) {
  std::vector<std::string> out;
  for (std::size_t pos = text.find('<'); pos != std::string_view::npos;
       pos = text.find('<', pos + 1)) {
    for (const auto tag : kTags) {
      if (text.substr(pos, tag.size()) == tag) {
        out.emplace_back(tag);
        break;
      }
    }
  }
  return out;
}

double tag_count_reward(std::span<const std::string> tags_in_order) {
  int credited = 0;
  std::ptrdiff_t last_pos = -1;
  for (const auto tag : kTags) {
    const auto count = std::count(tags_in_order.begin(), tags_in_order.end(), tag);
    if (count != 1) continue;
    const auto pos = std::find(tags_in_order.begin(), tags_in_order.end(), tag) -
                     tags_in_order.begin();
    if (pos > last_pos) {
      ++credited;
      last_pos = pos;
    }
  }
  return credited / 4.0;
}

double tag_count_reward(std::string_view text) {
  const auto tags = find_tags(text);
  return tag_count_reward(std::span<const std::string>(tags));
}

double soft_overlong_penalty(std::size_t len, const RewardConfig& cfg) {
  const std::size_t max_len = cfg.overlong_max_len;
  const std::size_t safe_len = max_len - std::min(cfg.overlong_buffer, max_len);
  if (len <= safe_len) return 0.0;
  if (len > max_len) return -1.0;
  return (static_cast<double>(safe_len) - static_cast<double>(len)) /
         static_cast<double>(cfg.overlong_buffer);
}

CompositeReward composite_reward(const ParsedCompletion& parsed,
                                 const GroundingRecord& record,
                                 const RewardConfig& cfg) {
  RewardConfig effective = cfg;
  if (!effective.explicit_dims && effective.use_record_dims && record.image_dims) {
    effective.explicit_dims = record.image_dims;
  }
  CompositeReward out;
  const std::span<const BBox> pred =
      parsed.parse_ok ? std::span<const BBox>(parsed.boxes) : std::span<const BBox>();
  out.bbox = bbox_reward(pred, record.gt_boxes, effective);
  out.label = label_accuracy_reward(parsed, record.gt_labels, out.bbox.matches);
  out.tag = tag_count_reward(std::span<const std::string>(parsed.tags_found));
  out.overlong = soft_overlong_penalty(
      record.token_len.value_or(parsed.completion_len), cfg);
  const double weight_sum = cfg.w_label + cfg.w_bbox + cfg.w_tag;
  const double mean =
      (cfg.w_label * out.label + cfg.w_bbox * out.bbox.final + cfg.w_tag * out.tag) /
      weight_sum;
  out.total = clip01(mean + out.overlong);
  return out;
}

}  // namespace gvr
