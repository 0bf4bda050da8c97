// Thin extension module. Structured values cross the boundary as JSON text;
// the gvr package wraps them into dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <array>
#include <string>
#include <vector>

#include "gvr/eval.hpp"
#include "gvr/grounding_io.hpp"
#include "gvr/reward.hpp"
#include "gvr/rl_core.hpp"

namespace py = pybind11;

namespace {

using Coords = std::vector<std::array<double, 4>>;

std::vector<gvr::BBox> boxes(const Coords& in) {
  std::vector<gvr::BBox> out;
  out.reserve(in.size());
  for (const auto& c : in) out.emplace_back(c[0], c[1], c[2], c[3]);
  return out;
}

gvr::RewardConfig reward_config(const std::string& text) {
  return text.empty() ? gvr::RewardConfig{}
                      : gvr::reward_config_from_json(nlohmann::json::parse(text));
}

std::string parse(const std::string& text) {
  const auto p = gvr::parse_completion(text);
  nlohmann::json j;
  j["parse_ok"] = p.parse_ok;
  j["boxes"] = nlohmann::json::array();
  for (const auto& b : p.boxes) j["boxes"].push_back({b.x1(), b.y1(), b.x2(), b.y2()});
  j["labels"] = p.labels;
  j["tags_found"] = p.tags_found;
  j["completion_len"] = p.completion_len;
  return j.dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  py::register_exception<gvr::ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("iou", [](const std::array<double, 4>& a, const std::array<double, 4>& b) {
    return gvr::iou({a[0], a[1], a[2], a[3]}, {b[0], b[1], b[2], b[3]});
  });
  m.def("giou", [](const std::array<double, 4>& a, const std::array<double, 4>& b) {
    return gvr::giou({a[0], a[1], a[2], a[3]}, {b[0], b[1], b[2], b[3]});
  });
  m.def("bbox_reward_json", [](const Coords& pred, const Coords& gt, const std::string& cfg) {
    const auto p = boxes(pred), g = boxes(gt);
    return gvr::to_json(gvr::bbox_reward(p, g, reward_config(cfg))).dump();
  });
  m.def("parse_completion_json", &parse);
  m.def("serialize_completion", [](const std::string& text) {
    return gvr::serialize_predictions(gvr::parse_completion(text));
  });
  m.def("sample_iou_score", [](const Coords& pred, const Coords& gt) {
    const auto p = boxes(pred), g = boxes(gt);
    return gvr::sample_iou_score(p, g);
  });
  m.def("grpo_objective_json", [](const std::string& rollout, const std::string& cfg) {
    const auto rec = gvr::rollout_from_json(nlohmann::json::parse(rollout));
    const auto c = cfg.empty() ? gvr::GRPOConfig{}
                               : gvr::grpo_config_from_json(nlohmann::json::parse(cfg));
    return gvr::to_json(rec.id, gvr::grpo_objective(rec.group, c)).dump();
  });
}
