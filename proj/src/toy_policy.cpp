#include "gvr/toy_policy.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace gvr {

ToyPolicy::ToyPolicy(std::size_t bins, double canvas) : bins_(bins), canvas_(canvas) {
  if (bins == 0) throw std::invalid_argument("ToyPolicy: bins must be >= 1");
  if (!(canvas > 0)) throw std::invalid_argument("ToyPolicy: canvas must be > 0");
  for (auto& l : logits_) l.assign(bins, 0.0);
}

double ToyPolicy::bin_value(std::size_t k) const {
  return (static_cast<double>(k) + 0.5) * canvas_ / static_cast<double>(bins_);
}

std::vector<double> ToyPolicy::probabilities(std::size_t token) const {
  const auto& l = logits_[token];
  const double mx = *std::max_element(l.begin(), l.end());
  std::vector<double> p(l.size());
  double z = 0.0;
  for (std::size_t k = 0; k < l.size(); ++k) z += (p[k] = std::exp(l[k] - mx));
  for (auto& v : p) v /= z;
  return p;
}

double ToyPolicy::log_prob(std::size_t token, std::size_t bin) const {
  const auto& l = logits_[token];
  const double mx = *std::max_element(l.begin(), l.end());
  double z = 0.0;
  for (const double v : l) z += std::exp(v - mx);
  return l[bin] - mx - std::log(z);
}

BBox ToyPolicy::mode_box() const {
  std::array<double, kTokens> v{};
  for (std::size_t t = 0; t < kTokens; ++t) {
    const auto& l = logits_[t];
    v[t] = bin_value(static_cast<std::size_t>(std::max_element(l.begin(), l.end()) - l.begin()));
  }
  return BBox(v[0], v[1], v[2], v[3]);
}

void DemoConfig::validate() const {
  if (group_size < 1) throw ConfigError("group_size", "must be >= 1");
  if (bins < 1) throw ConfigError("bins", "must be >= 1");
  if (!(canvas > 0)) throw ConfigError("canvas", "must be > 0");
  if (!(learning_rate >= 0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate", "must be >= 0");
  }
  reward.validate();
  grpo.validate();
}

nlohmann::json to_json(const DemoConfig& cfg) {
  return {{"group_size", cfg.group_size},
          {"steps", cfg.steps},
          {"learning_rate", cfg.learning_rate},
          {"seed", cfg.seed},
          {"bins", cfg.bins},
          {"canvas", cfg.canvas},
          {"updates_per_group", cfg.updates_per_group},
          {"target", {cfg.target.x1(), cfg.target.y1(), cfg.target.x2(), cfg.target.y2()}}};
}

void apply_demo_json(const nlohmann::json& doc, DemoConfig& cfg) {
  if (!doc.is_object()) throw ConfigError("demo", "expected a JSON object");
  auto count = [](const nlohmann::json& v, const std::string& key) {
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      throw ConfigError(key, "expected a nonnegative integer");
    }
    return v.get<std::uint64_t>();
  };
  for (const auto& [key, v] : doc.items()) {
    if (key == "group_size") cfg.group_size = count(v, key);
    else if (key == "steps") cfg.steps = count(v, key);
    else if (key == "seed") cfg.seed = count(v, key);
    else if (key == "bins") cfg.bins = count(v, key);
    else if (key == "updates_per_group") cfg.updates_per_group = count(v, key);
    else if (key == "learning_rate" || key == "canvas") {
      if (!v.is_number()) throw ConfigError(key, "expected a number");
      (key == "canvas" ? cfg.canvas : cfg.learning_rate) = v.get<double>();
    } else if (key == "target") {
      if (!v.is_array() || v.size() != 4 ||
          !std::all_of(v.begin(), v.end(), [](const auto& x) { return x.is_number(); })) {
        throw ConfigError(key, "expected [x1, y1, x2, y2]");
      }
      cfg.target = BBox(v[0].get<double>(), v[1].get<double>(), v[2].get<double>(),
                        v[3].get<double>());
    } else {
      throw ConfigError(key, "unknown field");
    }
  }
  cfg.validate();
}

namespace {

// Inverse-CDF draw with a 53-bit uniform, independent of <random>
// distribution implementations.
std::size_t draw(const std::vector<double>& p, std::mt19937_64& rng) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  double acc = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    acc += p[k];
    if (u < acc) return k;
  }
  return p.size() - 1;
}

// Rebuilds new_lp for the sampled bins under the given policy.
RolloutGroup with_current_logprobs(const ToyPolicy& policy, const SampledGroup& sample) {
  RolloutGroup g = sample.group;
  for (std::size_t i = 0; i < sample.bins.size(); ++i) {
    for (std::size_t t = 0; t < ToyPolicy::kTokens; ++t) {
      g.new_lp[i][t] = policy.log_prob(t, sample.bins[i][t]);
    }
  }
  return g;
}

}  // namespace

SampledGroup sample_group(const ToyPolicy& policy, const DemoConfig& cfg,
                          std::mt19937_64& rng) {
  SampledGroup out;
  std::array<std::vector<double>, ToyPolicy::kTokens> probs;
  for (std::size_t t = 0; t < ToyPolicy::kTokens; ++t) probs[t] = policy.probabilities(t);
  for (std::size_t i = 0; i < cfg.group_size; ++i) {
    BinTuple bins{};
    std::vector<double> lp(ToyPolicy::kTokens);
    for (std::size_t t = 0; t < ToyPolicy::kTokens; ++t) {
      bins[t] = draw(probs[t], rng);
      lp[t] = policy.log_prob(t, bins[t]);
    }
    out.bins.push_back(bins);
    out.boxes.emplace_back(policy.bin_value(bins[0]), policy.bin_value(bins[1]),
                           policy.bin_value(bins[2]), policy.bin_value(bins[3]));
    out.group.new_lp.push_back(lp);
    out.group.old_lp.push_back(lp);
    out.group.masks.emplace_back(ToyPolicy::kTokens, 1);
  }
  out.group.rewards.assign(cfg.group_size, 0.0);
  return out;
}

double toy_surrogate(const ToyPolicy& policy, const SampledGroup& sample,
                     const GRPOConfig& cfg) {
  return grpo_objective(with_current_logprobs(policy, sample), cfg).objective;
}

std::array<std::vector<double>, ToyPolicy::kTokens> toy_surrogate_grad(
    const ToyPolicy& policy, const SampledGroup& sample, const GRPOConfig& cfg) {
  const auto dlp = grpo_objective_grad(with_current_logprobs(policy, sample), cfg);
  std::array<std::vector<double>, ToyPolicy::kTokens> grad;
  for (std::size_t t = 0; t < ToyPolicy::kTokens; ++t) {
    const auto p = policy.probabilities(t);
    grad[t].assign(policy.bins(), 0.0);
    for (std::size_t i = 0; i < sample.bins.size(); ++i) {
      const double g = dlp[i][t];
      if (g == 0.0) continue;
      // d log softmax(l)[b] / d l[k] = [k == b] - p[k]
      for (std::size_t k = 0; k < policy.bins(); ++k) grad[t][k] -= g * p[k];
      grad[t][sample.bins[i][t]] += g;
    }
  }
  return grad;
}

StepStats demo_step(ToyPolicy& policy, const DemoConfig& cfg, std::mt19937_64& rng) {
  SampledGroup sample = sample_group(policy, cfg, rng);
  const std::vector<BBox> gt{cfg.target};
  StepStats stats;
  for (std::size_t i = 0; i < sample.boxes.size(); ++i) {
    sample.group.rewards[i] =
        bbox_reward(std::span<const BBox>(&sample.boxes[i], 1), gt, cfg.reward).final;
    stats.mean_reward += sample.group.rewards[i];
  }
  stats.mean_reward /= static_cast<double>(sample.boxes.size());
  for (const double a : group_advantages(sample.group.rewards, cfg.grpo)) {
    stats.mean_abs_advantage += std::abs(a);
  }
  stats.mean_abs_advantage /= static_cast<double>(sample.boxes.size());

  for (std::size_t u = 0; u < cfg.updates_per_group; ++u) {
    stats.clip_fraction =
        grpo_objective(with_current_logprobs(policy, sample), cfg.grpo).clip_fraction;
    const auto grad = toy_surrogate_grad(policy, sample, cfg.grpo);
    for (std::size_t t = 0; t < ToyPolicy::kTokens; ++t) {
      for (std::size_t k = 0; k < policy.bins(); ++k) {
        policy.logits(t)[k] += cfg.learning_rate * grad[t][k];
      }
    }
  }
  return stats;
}

DemoTrace run_demo(const DemoConfig& cfg) {
  cfg.validate();
  ToyPolicy policy(cfg.bins, cfg.canvas);
  std::mt19937_64 rng(cfg.seed);
  DemoTrace trace;
  for (std::size_t s = 0; s < cfg.steps; ++s) {
    const StepStats st = demo_step(policy, cfg, rng);
    trace.mean_reward.push_back(st.mean_reward);
    trace.mean_abs_advantage.push_back(st.mean_abs_advantage);
    trace.clip_fraction.push_back(st.clip_fraction);
  }
  trace.final_mode_box = policy.mode_box();
  return trace;
}

void write_trace_csv(const DemoTrace& trace, std::ostream& out) {
  out << "step,mean_reward,clip_fraction\n";
  const auto old_precision = out.precision(17);
  for (std::size_t s = 0; s < trace.mean_reward.size(); ++s) {
    out << (s + 1) << ',' << trace.mean_reward[s] << ',' << trace.clip_fraction[s] << '\n';
  }
  out.precision(old_precision);
}

}  // namespace gvr
