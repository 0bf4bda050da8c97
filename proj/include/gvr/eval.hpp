#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "gvr/geometry.hpp"
#include "gvr/records.hpp"

namespace gvr {

// IoU-maximizing one-to-one match, summed IoU over max(P, G, 1).
// Both empty scores 1.
double sample_iou_score(std::span<const BBox> pred, std::span<const BBox> gt);

enum class SampleStatus { kOk, kParseFailure, kMissingCompletion };

struct SampleScore {
  std::string id;
  double iou = 0.0;
  SampleStatus status = SampleStatus::kOk;
};

struct EvalReport {
  std::string dataset;
  std::vector<SampleScore> samples;
  std::size_t parse_failures = 0;
  std::size_t missing = 0;

  // Arithmetic mean of sample scores in percent; nullopt for an empty run.
  std::optional<double> mean_iou_percent() const;
};

// Completion lookup: a record's own `completion` field wins, then the map.
// Missing completions and parse failures score 0.
EvalReport evaluate(std::span<const GroundingRecord> records,
                    const std::map<std::string, std::string>& completions,
                    std::string dataset = "dataset");

nlohmann::json to_json(const EvalReport& report);
// Plain-text table, mean in percent with one decimal.
std::string format_table(std::span<const EvalReport> reports);

}  // namespace gvr
