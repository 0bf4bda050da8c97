#include "gvr/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "gvr/assignment.hpp"
#include "gvr/grounding_io.hpp"

namespace gvr {

namespace {
constexpr const char* kProtocol =
    "per-sample score = sum of IoU over a one-to-one IoU-maximizing match "
    "divided by max(#pred, #gt); parse failures and missing completions score 0";
}

double sample_iou_score(std::span<const BBox> pred, std::span<const BBox> gt) {
  if (gt.empty() && pred.empty()) return 1.0;
  if (gt.empty() || pred.empty()) return 0.0;
  CostMatrix cost(pred.size(), gt.size());
  std::vector<double> ious(pred.size() * gt.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (std::size_t j = 0; j < gt.size(); ++j) {
      ious[i * gt.size() + j] = iou(pred[i], gt[j]);
      cost(i, j) = 1.0 - ious[i * gt.size() + j];
    }
  }
  double sum = 0.0;
  for (const auto& [i, j] : hungarian(cost).pairs) sum += ious[i * gt.size() + j];
  return std::clamp(sum / static_cast<double>(std::max(pred.size(), gt.size())), 0.0, 1.0);
}

std::optional<double> EvalReport::mean_iou_percent() const {
  if (samples.empty()) return std::nullopt;
  double sum = 0.0;
  for (const auto& s : samples) sum += s.iou;
  return 100.0 * sum / static_cast<double>(samples.size());
}

EvalReport evaluate(std::span<const GroundingRecord> records,
                    const std::map<std::string, std::string>& completions,
                    std::string dataset) {
  EvalReport report;
  report.dataset = std::move(dataset);
  for (const auto& rec : records) {
    SampleScore score{rec.id, 0.0, SampleStatus::kOk};
    const std::string* text = nullptr;
    if (rec.completion) {
      text = &*rec.completion;
    } else if (auto it = completions.find(rec.id); it != completions.end()) {
      text = &it->second;
    }
    if (text == nullptr) {
      score.status = SampleStatus::kMissingCompletion;
      ++report.missing;
    } else {
      const ParsedCompletion parsed = parse_completion(*text);
      if (!parsed.parse_ok) {
        score.status = SampleStatus::kParseFailure;
        ++report.parse_failures;
      } else {
        score.iou = sample_iou_score(parsed.boxes, rec.gt_boxes);
      }
    }
    report.samples.push_back(std::move(score));
  }
  return report;
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : report.samples) {
    const char* status = s.status == SampleStatus::kOk ? "ok"
                         : s.status == SampleStatus::kParseFailure ? "parse_failure"
                                                                   : "missing";
    samples.push_back({{"id", s.id}, {"iou", s.iou}, {"status", status}});
  }
  nlohmann::json j;
  j["protocol"] = kProtocol;
  j["dataset"] = report.dataset;
  j["samples"] = report.samples.size();
  j["parse_failures"] = report.parse_failures;
  j["missing"] = report.missing;
  if (const auto mean = report.mean_iou_percent()) j["mean_iou_percent"] = *mean;
  j["per_sample"] = std::move(samples);
  return j;
}

std::string format_table(std::span<const EvalReport> reports) {
  std::ostringstream os;
  os << "# " << kProtocol << '\n';
  char line[256];
  std::snprintf(line, sizeof line, "%-24s %8s %8s %8s %10s\n", "dataset", "samples",
                "parse_f", "missing", "IoU(%)");
  os << line;
  for (const auto& r : reports) {
    const auto mean = r.mean_iou_percent();
    char value[32] = "-";
    if (mean) std::snprintf(value, sizeof value, "%.1f", *mean);
    std::snprintf(line, sizeof line, "%-24s %8zu %8zu %8zu %10s\n", r.dataset.c_str(),
                  r.samples.size(), r.parse_failures, r.missing, value);
    os << line;
  }
  return os.str();
}

}  // namespace gvr
