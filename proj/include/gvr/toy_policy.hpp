#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

#include "json.hpp"

#include "gvr/geometry.hpp"
#include "gvr/reward.hpp"
#include "gvr/rl_core.hpp"

namespace gvr {

// Four independent categorical distributions, one per box coordinate, over
// `bins` evenly spaced bin centers on [0, canvas].
class ToyPolicy {
 public:
  static constexpr std::size_t kTokens = 4;

  ToyPolicy(std::size_t bins = 20, double canvas = 100.0);

  std::size_t bins() const { return bins_; }
  double canvas() const { return canvas_; }
  double bin_value(std::size_t k) const;

  std::vector<double>& logits(std::size_t token) { return logits_[token]; }
  const std::vector<double>& logits(std::size_t token) const { return logits_[token]; }

  std::vector<double> probabilities(std::size_t token) const;
  double log_prob(std::size_t token, std::size_t bin) const;
  // Canonical box built from the argmax bin of every coordinate.
  BBox mode_box() const;

 private:
  std::size_t bins_;
  double canvas_;
  std::array<std::vector<double>, kTokens> logits_;
};

using BinTuple = std::array<std::size_t, ToyPolicy::kTokens>;

struct DemoConfig {
  std::size_t group_size = 8;
  std::size_t steps = 200;
  double learning_rate = 2.0;
  std::uint64_t seed = 0;
  std::size_t bins = 20;
  double canvas = 100.0;
  // Gradient steps taken on each sampled group; the first one always runs at
  // ratio 1, later ones can hit the clip band.
  std::size_t updates_per_group = 1;
  BBox target{2.5, 2.5, 12.5, 12.5};
  RewardConfig reward;
  GRPOConfig grpo;

  void validate() const;
};

nlohmann::json to_json(const DemoConfig& cfg);
// Keys: group_size, steps, learning_rate, seed, bins, canvas,
// updates_per_group, target ([x1,y1,x2,y2]). Throws ConfigError.
void apply_demo_json(const nlohmann::json& doc, DemoConfig& cfg);

struct SampledGroup {
  std::vector<BinTuple> bins;
  std::vector<BBox> boxes;
  RolloutGroup group;  // 4-token responses; rewards zero until scored
};

SampledGroup sample_group(const ToyPolicy& policy, const DemoConfig& cfg,
                          std::mt19937_64& rng);

// Token-level surrogate of the current policy against a sampled group whose
// rewards and old_lp are fixed.
double toy_surrogate(const ToyPolicy& policy, const SampledGroup& sample,
                     const GRPOConfig& cfg);
// Gradient of toy_surrogate with respect to the logits, [token][bin].
std::array<std::vector<double>, ToyPolicy::kTokens> toy_surrogate_grad(
    const ToyPolicy& policy, const SampledGroup& sample, const GRPOConfig& cfg);

struct StepStats {
  double mean_reward = 0.0;
  double mean_abs_advantage = 0.0;
  double clip_fraction = 0.0;
};

StepStats demo_step(ToyPolicy& policy, const DemoConfig& cfg, std::mt19937_64& rng);

struct DemoTrace {
  std::vector<double> mean_reward;
  std::vector<double> mean_abs_advantage;
  std::vector<double> clip_fraction;
  BBox final_mode_box;
};

DemoTrace run_demo(const DemoConfig& cfg);

// Columns: step (1-based), mean_reward, clip_fraction.
void write_trace_csv(const DemoTrace& trace, std::ostream& out);

}  // namespace gvr
