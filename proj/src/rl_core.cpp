#include "gvr/rl_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "gvr/reward.hpp"

namespace gvr {

namespace {

std::string shape_error(const char* what, std::size_t i, std::size_t got,
                        std::size_t want) {
  return std::string(what) + " length " + std::to_string(got) + " at response " +
         std::to_string(i) + " differs from new_lp length " + std::to_string(want);
}

std::size_t count_masked(const std::vector<std::uint8_t>& mask) {
  return static_cast<std::size_t>(
      std::count_if(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; }));
}

}  // namespace

void RolloutGroup::validate() const {
  const std::size_t g = rewards.size();
  if (g == 0) throw std::invalid_argument("rollout group is empty");
  if (new_lp.size() != g || old_lp.size() != g || masks.size() != g ||
      (ref_lp && ref_lp->size() != g)) {
    throw std::invalid_argument("rollout group: per-response arrays must have " +
                                std::to_string(g) + " entries");
  }
  for (std::size_t i = 0; i < g; ++i) {
    if (!std::isfinite(rewards[i])) throw std::invalid_argument("rollout group: non-finite reward");
    const std::size_t n = new_lp[i].size();
    if (old_lp[i].size() != n) throw std::invalid_argument(shape_error("old_lp", i, old_lp[i].size(), n));
    if (masks[i].size() != n) throw std::invalid_argument(shape_error("mask", i, masks[i].size(), n));
    if (ref_lp && (*ref_lp)[i].size() != n) {
      throw std::invalid_argument(shape_error("ref_lp", i, (*ref_lp)[i].size(), n));
    }
  }
}

void GRPOConfig::validate() const {
  if (!(eps_low >= 0 && eps_low < 1)) throw ConfigError("eps_low", "must be in [0, 1)");
  if (!(eps_high >= eps_low) || !std::isfinite(eps_high)) {
    throw ConfigError("eps_high", "must be >= eps_low");
  }
  if (!(kl_coeff >= 0) || !std::isfinite(kl_coeff)) throw ConfigError("kl_coeff", "must be >= 0");
  if (!(advantage_epsilon >= 0) || !std::isfinite(advantage_epsilon)) {
    throw ConfigError("advantage_epsilon", "must be >= 0");
  }
}

nlohmann::json to_json(const GRPOConfig& cfg) {
  return {{"eps_low", cfg.eps_low},
          {"eps_high", cfg.eps_high},
          {"kl_coeff", cfg.kl_coeff},
          {"advantage_epsilon", cfg.advantage_epsilon},
          {"length_weighted", cfg.length_weighted}};
}

GRPOConfig grpo_config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("<root>", "expected a JSON object");
  GRPOConfig cfg;
  for (const auto& [key, v] : doc.items()) {
    double* target = nullptr;
    if (key == "eps_low") target = &cfg.eps_low;
    else if (key == "eps_high") target = &cfg.eps_high;
    else if (key == "kl_coeff") target = &cfg.kl_coeff;
    else if (key == "advantage_epsilon") target = &cfg.advantage_epsilon;
    else if (key == "length_weighted") {
      if (!v.is_boolean()) throw ConfigError(key, "expected a boolean");
      cfg.length_weighted = v.get<bool>();
      continue;
    } else {
      throw ConfigError(key, "unknown field");
    }
    if (!v.is_number()) throw ConfigError(key, "expected a number");
    *target = v.get<double>();
  }
  cfg.validate();
  return cfg;
}

std::vector<double> group_advantages(std::span<const double> rewards,
                                     const GRPOConfig& cfg) {
  std::vector<double> out(rewards.size(), 0.0);
  if (rewards.empty()) return out;
  if (std::all_of(rewards.begin(), rewards.end(),
                  [&](double r) { return r == rewards.front(); })) {
    return out;
  }
  const double n = static_cast<double>(rewards.size());
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  double var = 0.0;
  for (const double r : rewards) var += (r - mean) * (r - mean);
  const double denom = std::sqrt(var / n) + cfg.advantage_epsilon;
  for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / denom;
  return out;
}

std::vector<double> token_ratios(std::span<const double> new_lp,
                                 std::span<const double> old_lp) {
  if (new_lp.size() != old_lp.size()) {
    throw std::invalid_argument("token_ratios: new_lp length " +
                                std::to_string(new_lp.size()) + " != old_lp length " +
                                std::to_string(old_lp.size()));
  }
  std::vector<double> out(new_lp.size());
  for (std::size_t t = 0; t < new_lp.size(); ++t) out[t] = std::exp(new_lp[t] - old_lp[t]);
  return out;
}

double clipped_surrogate(double ratio, double advantage, const GRPOConfig& cfg) {
  const double clipped = std::clamp(ratio, 1.0 - cfg.eps_low, 1.0 + cfg.eps_high);
  return std::min(ratio * advantage, clipped * advantage);
}

namespace {

struct Normalizer {
  std::vector<double> response_weight;  // multiplier on each token value
};

// Token value weights: 1/sum|o| (pooled) or |o_i|/sum|o| (length weighted).
Normalizer make_normalizer(const RolloutGroup& group, const GRPOConfig& cfg) {
  std::size_t total = 0;
  std::vector<std::size_t> lens;
  for (const auto& m : group.masks) {
    lens.push_back(count_masked(m));
    total += lens.back();
  }
  if (total == 0) throw std::invalid_argument("grpo_objective: no masked-in tokens");
  Normalizer n;
  for (const std::size_t len : lens) {
    n.response_weight.push_back((cfg.length_weighted ? static_cast<double>(len) : 1.0) /
                                static_cast<double>(total));
  }
  return n;
}

}  // namespace

LossReport grpo_objective(const RolloutGroup& group, const GRPOConfig& cfg) {
  group.validate();
  const Normalizer norm = make_normalizer(group, cfg);
  LossReport report;
  report.advantages = group_advantages(group.rewards, cfg);

  std::size_t masked = 0;
  std::size_t clipped = 0;
  double kl_sum = 0.0;
  for (std::size_t i = 0; i < group.size(); ++i) {
    const auto ratios = token_ratios(group.new_lp[i], group.old_lp[i]);
    const double adv = report.advantages[i];
    auto& values = report.token_values.emplace_back(ratios.size(), 0.0);
    for (std::size_t t = 0; t < ratios.size(); ++t) {
      if (!group.masks[i][t]) continue;
      ++masked;
      values[t] = clipped_surrogate(ratios[t], adv, cfg);
      if (values[t] < ratios[t] * adv) ++clipped;
      report.objective += norm.response_weight[i] * values[t];
      if (group.ref_lp) {
        const double d = (*group.ref_lp)[i][t] - group.new_lp[i][t];
        kl_sum += std::exp(d) - d - 1.0;
      }
    }
  }
  report.clip_fraction = static_cast<double>(clipped) / static_cast<double>(masked);
  if (group.ref_lp) {
    report.mean_kl = kl_sum / static_cast<double>(masked);
    report.objective -= cfg.kl_coeff * report.mean_kl;
  }
  return report;
}

std::vector<std::vector<double>> grpo_objective_grad(const RolloutGroup& group,
                                                     const GRPOConfig& cfg) {
  group.validate();
  const Normalizer norm = make_normalizer(group, cfg);
  const auto adv = group_advantages(group.rewards, cfg);
  std::size_t masked = 0;
  for (const auto& m : group.masks) masked += count_masked(m);

  std::vector<std::vector<double>> grad;
  for (std::size_t i = 0; i < group.size(); ++i) {
    const auto ratios = token_ratios(group.new_lp[i], group.old_lp[i]);
    auto& g = grad.emplace_back(ratios.size(), 0.0);
    for (std::size_t t = 0; t < ratios.size(); ++t) {
      if (!group.masks[i][t]) continue;
      const double r = ratios[t];
      const double clipped = std::clamp(r, 1.0 - cfg.eps_low, 1.0 + cfg.eps_high);
      // d(r*A)/d new_lp = r*A; the clipped branch is flat outside the band.
      if (!(clipped * adv[i] < r * adv[i])) g[t] = norm.response_weight[i] * r * adv[i];
      if (group.ref_lp) {
        const double d = (*group.ref_lp)[i][t] - group.new_lp[i][t];
        g[t] -= cfg.kl_coeff * (1.0 - std::exp(d)) / static_cast<double>(masked);
      }
    }
  }
  return grad;
}

double kl_estimate(std::span<const double> new_lp, std::span<const double> ref_lp) {
  if (new_lp.size() != ref_lp.size()) {
    throw std::invalid_argument("kl_estimate: new_lp length " +
                                std::to_string(new_lp.size()) + " != ref_lp length " +
                                std::to_string(ref_lp.size()));
  }
  if (new_lp.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t t = 0; t < new_lp.size(); ++t) {
    const double d = ref_lp[t] - new_lp[t];
    sum += std::max(0.0, std::exp(d) - d - 1.0);
  }
  return sum / static_cast<double>(new_lp.size());
}

double sft_nll(std::span<const double> target_lp, std::span<const std::uint8_t> mask) {
  if (target_lp.size() != mask.size()) {
    throw std::invalid_argument("sft_nll: target length " +
                                std::to_string(target_lp.size()) + " != mask length " +
                                std::to_string(mask.size()));
  }
  double nll = 0.0;
  std::size_t used = 0;
  for (std::size_t t = 0; t < target_lp.size(); ++t) {
    if (!mask[t]) continue;
    nll -= target_lp[t];
    ++used;
  }
  if (used == 0) throw std::invalid_argument("sft_nll: no masked-in tokens");
  return nll;
}

namespace {

std::vector<std::vector<double>> read_matrix(const nlohmann::json& j, const char* field) {
  if (!j.is_array()) throw std::invalid_argument(std::string(field) + ": expected an array of arrays");
  std::vector<std::vector<double>> out;
  for (const auto& row : j) {
    if (!row.is_array()) throw std::invalid_argument(std::string(field) + ": expected an array of arrays");
    auto& r = out.emplace_back();
    for (const auto& v : row) {
      if (!v.is_number()) throw std::invalid_argument(std::string(field) + ": non-numeric entry");
      r.push_back(v.get<double>());
    }
  }
  return out;
}

}  // namespace

RolloutRecord rollout_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("rollout is not a JSON object");
  RolloutRecord rec;
  if (auto it = j.find("id"); it != j.end()) {
    if (it->is_string()) rec.id = it->get<std::string>();
    else if (it->is_number_integer()) rec.id = std::to_string(it->get<long long>());
    else throw std::invalid_argument("id: expected a string");
  }
  for (const char* field : {"rewards", "new_lp", "old_lp"}) {
    if (!j.contains(field)) throw std::invalid_argument(std::string(field) + ": missing");
  }
  const auto& rewards = j.at("rewards");
  if (!rewards.is_array()) throw std::invalid_argument("rewards: expected an array");
  for (const auto& v : rewards) {
    if (!v.is_number()) throw std::invalid_argument("rewards: non-numeric entry");
    rec.group.rewards.push_back(v.get<double>());
  }
  rec.group.new_lp = read_matrix(j.at("new_lp"), "new_lp");
  rec.group.old_lp = read_matrix(j.at("old_lp"), "old_lp");
  if (auto it = j.find("ref_lp"); it != j.end() && !it->is_null()) {
    rec.group.ref_lp = read_matrix(*it, "ref_lp");
  }
  if (auto it = j.find("masks"); it != j.end()) {
    for (const auto& row : read_matrix(*it, "masks")) {
      auto& m = rec.group.masks.emplace_back();
      for (const double v : row) m.push_back(v != 0.0 ? 1 : 0);
    }
  } else {
    for (const auto& row : rec.group.new_lp) rec.group.masks.emplace_back(row.size(), 1);
  }
  rec.group.validate();
  return rec;
}

nlohmann::json to_json(const RolloutRecord& r) {
  nlohmann::json j;
  j["id"] = r.id;
  j["rewards"] = r.group.rewards;
  j["new_lp"] = r.group.new_lp;
  j["old_lp"] = r.group.old_lp;
  if (r.group.ref_lp) j["ref_lp"] = *r.group.ref_lp;
  nlohmann::json masks = nlohmann::json::array();
  for (const auto& m : r.group.masks) {
    nlohmann::json row = nlohmann::json::array();
    for (const auto v : m) row.push_back(static_cast<int>(v));
    masks.push_back(std::move(row));
  }
  j["masks"] = std::move(masks);
  return j;
}

nlohmann::json to_json(const std::string& id, const LossReport& report) {
  return {{"id", id},
          {"objective", report.objective},
          {"mean_kl", report.mean_kl},
          {"clip_fraction", report.clip_fraction},
          {"advantages", report.advantages},
          {"token_values", report.token_values}};
}

}  // namespace gvr
