#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "gvr/config_error.hpp"

namespace gvr {

// G sampled responses for one prompt. Per-response sequences share a length.
struct RolloutGroup {
  std::vector<std::vector<double>> new_lp;
  std::vector<std::vector<double>> old_lp;
  std::optional<std::vector<std::vector<double>>> ref_lp;
  std::vector<std::vector<std::uint8_t>> masks;  // 1 = completion token
  std::vector<double> rewards;

  std::size_t size() const { return rewards.size(); }
  // Throws std::invalid_argument on shape mismatches or non-finite rewards.
  void validate() const;
};

struct GRPOConfig {
  double eps_low = 0.15;
  double eps_high = 0.25;
  double kl_coeff = 0.0;
  double advantage_epsilon = 1e-8;
  // Weight each response's token sum by its length, as the objective is
  // literally typeset; off gives the pooled token-level mean.
  bool length_weighted = false;

  void validate() const;
};

nlohmann::json to_json(const GRPOConfig& cfg);
// Throws ConfigError naming the offending key.
GRPOConfig grpo_config_from_json(const nlohmann::json& doc);

struct LossReport {
  double objective = 0.0;
  std::vector<double> advantages;
  std::vector<std::vector<double>> token_values;  // 0 at masked-out tokens
  double mean_kl = 0.0;
  double clip_fraction = 0.0;
};

// (R_i - mean) / (population std + eps); all-equal rewards give zeros.
std::vector<double> group_advantages(std::span<const double> rewards,
                                     const GRPOConfig& cfg);

std::vector<double> token_ratios(std::span<const double> new_lp,
                                 std::span<const double> old_lp);

// min(r * A, clip(r, 1 - eps_low, 1 + eps_high) * A)
double clipped_surrogate(double ratio, double advantage, const GRPOConfig& cfg);

LossReport grpo_objective(const RolloutGroup& group, const GRPOConfig& cfg);

// d objective / d new_lp, same shape as group.new_lp. Where the clipped branch
// is strictly active the token contributes no gradient.
std::vector<std::vector<double>> grpo_objective_grad(const RolloutGroup& group,
                                                     const GRPOConfig& cfg);

// Mean over tokens of exp(ref - new) - (ref - new) - 1.
double kl_estimate(std::span<const double> new_lp, std::span<const double> ref_lp);

// -sum of log-probs over masked-in tokens.
double sft_nll(std::span<const double> target_lp, std::span<const std::uint8_t> mask);

// One line of a rollout dump: id, rewards, new_lp, old_lp, ref_lp?, masks.
struct RolloutRecord {
  std::string id;
  RolloutGroup group;
};

RolloutRecord rollout_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RolloutRecord& r);
nlohmann::json to_json(const std::string& id, const LossReport& report);

}  // namespace gvr
