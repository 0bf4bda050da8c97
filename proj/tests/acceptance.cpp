// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "gvr/assignment.hpp"
#include "gvr/cli.hpp"
#include "gvr/eval.hpp"
#include "gvr/grounding_io.hpp"
#include "gvr/reward.hpp"
#include "gvr/rl_core.hpp"
#include "gvr/toy_policy.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using gvr::BBox;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void criterion(const std::string& name, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!o.pass) ++failures;
  std::printf("[%s] %s: %s (%.2fs)\n", o.pass ? "PASS" : "FAIL", name.c_str(),
              o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

std::vector<BBox> to_bboxes(const std::vector<oracle::Box>& v) {
  std::vector<BBox> out;
  for (const auto& b : v) out.emplace_back(b[0], b[1], b[2], b[3]);
  return out;
}

Outcome edge_cases() {
  const gvr::RewardConfig cfg;
  const std::vector<BBox> gt{{0, 0, 10, 10}};
  const std::vector<BBox> pred{{0, 0, 5, 5}};
  const double no_gt = gvr::bbox_reward(pred, {}, cfg).final;
  const double no_pred = gvr::bbox_reward({}, gt, cfg).final;
  const double perfect = gvr::bbox_reward(gt, gt, cfg).final;
  return {no_gt == 0.5 && no_pred == 0.0 && perfect == 1.0,
          fmt("G=0 -> %.17g, P=0 -> %.17g, perfect -> %.17g", no_gt, no_pred, perfect)};
}

Outcome worked_value() {
  const std::vector<BBox> pred{{5, 5, 15, 15}};
  const std::vector<BBox> gt{{0, 0, 10, 10}};
  const auto r = gvr::bbox_reward(pred, gt, gvr::RewardConfig{});
  const auto& m = r.matches.at(0);
  const bool ok = std::abs(r.final - 0.34073) <= 1e-5 && std::abs(m.l1 - 0.70711) <= 1e-5 &&
                  std::abs(m.giou + 0.079365) <= 1e-6;
  return {ok, fmt("L1 %.6f, GIoU %.6f, final %.6f (want 0.34073 +- 1e-5)", m.l1, m.giou, r.final)};
}

Outcome hungarian_oracle() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> small(1, 6), large(1, 8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t r = small(rng), c = large(rng);
    if (trial % 2) std::swap(r, c);
    std::vector<std::vector<double>> rows(r, std::vector<double>(c));
    for (auto& row : rows) for (auto& v : row) v = u(rng);
    const auto a = gvr::hungarian(gvr::CostMatrix::from_rows(rows));
    if (a.pairs.size() != std::min(r, c)) return {false, "wrong matching size"};
    worst = std::max(worst, std::abs(a.total_cost - oracle::min_assignment_cost(rows)));
  }
  return {worst <= 1e-12, fmt("1000 matrices, max |hungarian - brute force| = %.3g (tol 1e-12)", worst)};
}

Outcome reward_fuzz() {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<std::size_t> count8(0, 8), count5(0, 5);
  std::uniform_real_distribution<double> lam(0.0, 0.5), scale(0.1, 10.0), unit(0.0, 1.0);
  double worst_perm = 0, worst_scale = 0, worst_oracle = 0;
  int out_of_range = 0, oracle_cases = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const bool small = trial % 2 == 0;
    const std::size_t np = small ? count5(rng) : count8(rng);
    const std::size_t ng = small ? count5(rng) : count8(rng);
    std::vector<oracle::Box> rp, rg;
    for (std::size_t i = 0; i < np; ++i) rp.push_back(oracle::random_box(rng));
    for (std::size_t j = 0; j < ng; ++j) rg.push_back(oracle::random_box(rng));
    gvr::RewardConfig cfg;
    if (unit(rng) < 0.5) {
      cfg.lambda_fn = lam(rng);
      cfg.lambda_fp = lam(rng);
    }
    const auto pred = to_bboxes(rp), gt = to_bboxes(rg);
    const double r = gvr::bbox_reward(pred, gt, cfg).final;
    if (!(r >= 0.0 && r <= 1.0)) ++out_of_range;

    auto sp = pred, sg = gt;
    std::shuffle(sp.begin(), sp.end(), rng);
    std::shuffle(sg.begin(), sg.end(), rng);
    worst_perm = std::max(worst_perm, std::abs(gvr::bbox_reward(sp, sg, cfg).final - r));

    const double c = scale(rng);
    std::vector<BBox> cp, cg;
    for (const auto& b : pred) cp.push_back(b.scaled(c));
    for (const auto& b : gt) cg.push_back(b.scaled(c));
    worst_scale = std::max(worst_scale, std::abs(gvr::bbox_reward(cp, cg, cfg).final - r));

    if (np <= 5 && ng <= 5) {
      ++oracle_cases;
      worst_oracle = std::max(
          worst_oracle, std::abs(oracle::bbox_reward(rp, rg, {cfg.lambda_fn, cfg.lambda_fp}) - r));
    }
  }
  const bool ok = out_of_range == 0 && worst_perm <= 1e-12 && worst_scale <= 1e-9 &&
                  worst_oracle <= 1e-9;
  std::ostringstream os;
  os << "10000 instances, out of [0,1]: " << out_of_range << ", permutation "
     << worst_perm << " (tol 1e-12), scale " << worst_scale << " (tol 1e-9), oracle "
     << worst_oracle << " over " << oracle_cases << " cases (tol 1e-9)";
  return {ok, os.str()};
}

Outcome grpo_kernel() {
  const gvr::GRPOConfig cfg;
  bool ok = true;
  std::ostringstream os;

  const auto a = gvr::group_advantages(std::vector<double>{1, 0, 1, 0}, cfg);
  for (std::size_t i = 0; i < 4; ++i) ok &= std::abs(a[i] - (i % 2 ? -1.0 : 1.0)) <= 1e-7;
  ok &= gvr::group_advantages(std::vector<double>{0.5, 0.5, 0.5}, cfg) ==
        std::vector<double>{0, 0, 0};
  ok &= gvr::group_advantages(std::vector<double>{1.0}, cfg) == std::vector<double>{0.0};
  os << "advantage examples " << (ok ? "ok" : "FAILED");

  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 0.4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t tokens = 0, mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    gvr::RolloutGroup g;
    for (int i = 0; i < 8; ++i) {
      std::vector<double> nl, ol;
      for (int t = 0; t < 6; ++t) {
        ol.push_back(-3 * u(rng));
        nl.push_back(ol.back() + n(rng));
      }
      g.new_lp.push_back(nl);
      g.old_lp.push_back(ol);
      g.masks.emplace_back(6, 1);
      g.rewards.push_back(u(rng));
    }
    const auto rep = gvr::grpo_objective(g, cfg);
    for (int i = 0; i < 8; ++i) {
      for (int t = 0; t < 6; ++t) {
        const double r = std::exp(g.new_lp[i][t] - g.old_lp[i][t]);
        const double adv = rep.advantages[i];
        ++tokens;
        if (rep.token_values[i][t] != std::min(r * adv, std::clamp(r, 0.85, 1.25) * adv)) {
          ++mismatches;
        }
      }
    }
  }
  ok &= mismatches == 0;
  os << ", clip identity " << mismatches << "/" << tokens << " mismatches";

  gvr::DemoConfig demo;
  double worst = 0.0;
  int instances = 0;
  while (instances < 100) {
    gvr::ToyPolicy policy(demo.bins, demo.canvas);
    for (std::size_t t = 0; t < 4; ++t) for (auto& l : policy.logits(t)) l = 2 * n(rng);
    auto sample = gvr::sample_group(policy, demo, rng);
    for (auto& r : sample.group.rewards) r = u(rng);
    for (std::size_t t = 0; t < 4; ++t) for (auto& l : policy.logits(t)) l += 0.5 * n(rng);
    // Finite differences are meaningless across the kinks of the clipped
    // surrogate; such instances are redrawn.
    double gap = 1.0;
    for (std::size_t i = 0; i < sample.bins.size(); ++i) {
      for (std::size_t t = 0; t < 4; ++t) {
        const double r =
            std::exp(policy.log_prob(t, sample.bins[i][t]) - sample.group.old_lp[i][t]);
        gap = std::min({gap, std::abs(r - 0.85), std::abs(r - 1.25)});
      }
    }
    if (gap < 1e-3) continue;
    ++instances;
    const auto grad = gvr::toy_surrogate_grad(policy, sample, demo.grpo);
    double diff = 0.0, scale = 0.0;
    for (std::size_t t = 0; t < 4; ++t) {
      for (std::size_t k = 0; k < policy.bins(); ++k) {
        const double saved = policy.logits(t)[k];
        const double fd = oracle::central_difference(
            [&](double h) {
              policy.logits(t)[k] = saved + h;
              return gvr::toy_surrogate(policy, sample, demo.grpo);
            },
            1e-5);
        policy.logits(t)[k] = saved;
        diff = std::max(diff, std::abs(fd - grad[t][k]));
        scale = std::max(scale, std::abs(grad[t][k]));
      }
    }
    worst = std::max(worst, scale > 0 ? diff / scale : diff);
  }
  ok &= worst < 1e-4;
  os << ", gradient vs finite differences max rel err " << worst << " over 100 instances (tol 1e-4)";
  return {ok, os.str()};
}

Outcome toy_demo() {
  const auto start = std::chrono::steady_clock::now();
  int good = 0;
  std::ostringstream os;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    gvr::DemoConfig cfg;
    cfg.seed = seed;
    const auto trace = gvr::run_demo(cfg);
    const double first = trace.mean_reward.front();
    const double last = trace.mean_reward.back();
    if (first < 0.1 && last > 0.4) ++good;
    os << (seed ? "; " : "") << "seed " << seed << ": " << fmt("%.3f -> %.3f", first, last);
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  os << "; " << good << "/5 seeds rise from < 0.1 to > 0.4 (need 4), "
     << fmt("%.2fs wall (limit 120s)", secs);
  return {good >= 4 && secs < 120.0, os.str()};
}

Outcome parser_fuzz() {
  std::mt19937_64 rng(404);
  const std::string seed_text =
      "<think>the opacity sits in the left lower lobe</think><answer>[{\"bbox_2d\":[5,5,15,15],"
      "\"label\":\"lesion\"},{\"box\":[120.5,33,80,90.25],\"label\":\"nodule\"}]</answer>\n"
      "```json\n[{\"bbox_2d\":[0,0,1,1]}]\n```";
  const std::string alphabet = "[]{}\",:0123456789.-+eE bboxlabel_2d<>/answerthink`\n\\u";
  std::uniform_int_distribution<int> byte(0, 255);
  int ok_count = 0, violations = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    std::string text;
    switch (trial % 4) {
      case 0:
        for (std::size_t i = 0, len = rng() % 300; i < len; ++i) text.push_back(static_cast<char>(byte(rng)));
        break;
      case 1:
        text = seed_text.substr(0, rng() % (seed_text.size() + 1));
        break;
      case 2:
        text = seed_text;
        for (int k = 0; k < 3; ++k) text[rng() % text.size()] = alphabet[rng() % alphabet.size()];
        break;
      default:
        for (std::size_t i = 0, len = rng() % 150; i < len; ++i) text.push_back(alphabet[rng() % alphabet.size()]);
    }
    const gvr::ParsedCompletion p = gvr::parse_completion(text);
    if (p.labels.size() != p.boxes.size()) ++violations;
    if (!p.parse_ok) {
      if (!p.boxes.empty()) ++violations;
      continue;
    }
    ++ok_count;
    const std::string once = gvr::serialize_predictions(p);
    const gvr::ParsedCompletion again = gvr::parse_completion(once);
    if (!again.parse_ok || again.boxes != p.boxes || again.labels != p.labels ||
        gvr::serialize_predictions(again) != once) {
      ++violations;
    }
  }
  std::ostringstream os;
  os << "10000 inputs, no crash, " << ok_count << " parsed, " << violations << " violations";
  return {violations == 0, os.str()};
}

Outcome eval_harness() {
  std::vector<gvr::GroundingRecord> recs(3);
  recs[0].id = "perfect";
  recs[0].gt_boxes = {{0, 0, 10, 10}};
  recs[0].completion = R"([{"bbox_2d":[0,0,10,10]}])";
  recs[1].id = "shifted";
  recs[1].gt_boxes = {{0, 0, 10, 10}};
  recs[1].completion = R"([{"bbox_2d":[5,5,15,15]}])";
  recs[2].id = "missed";
  recs[2].gt_boxes = {{0, 0, 10, 10}, {50, 50, 60, 60}};
  recs[2].completion = R"([{"bbox_2d":[0,0,10,10]}])";
  const auto report = gvr::evaluate(recs, {});
  const double mean = report.mean_iou_percent().value_or(-1);
  return {std::abs(mean - 54.76) <= 0.01, fmt("mean IoU %.4f%% (want 54.76 +- 0.01)", mean)};
}

Outcome cli_determinism(const fs::path& dir) {
  fs::create_directories(dir);
  const fs::path records = dir / "fixture_1000.jsonl";
  {
    std::mt19937_64 rng(9);
    std::ofstream out(records, std::ios::binary);
    for (int i = 0; i < 1000; ++i) {
      gvr::GroundingRecord rec;
      rec.id = "rec-" + std::to_string(i);
      const std::size_t ng = rng() % 4;
      for (std::size_t j = 0; j < ng; ++j) {
        const auto b = oracle::random_box(rng, 500.0);
        rec.gt_boxes.emplace_back(b[0], b[1], b[2], b[3]);
        rec.gt_labels.push_back(j % 2 ? "nodule" : "lesion");
      }
      gvr::ParsedCompletion pc;
      pc.parse_ok = true;
      const std::size_t np = rng() % 5;
      for (std::size_t j = 0; j < np; ++j) {
        const auto b = oracle::random_box(rng, 500.0);
        pc.boxes.emplace_back(b[0], b[1], b[2], b[3]);
        pc.labels.push_back(j % 3 ? "lesion" : "Nodule");
      }
      std::string text = "<think>step " + std::to_string(i) + "</think><answer>" +
                         gvr::serialize_predictions(pc) + "</answer>";
      if (i % 50 == 0) text = "no grounding today";
      rec.completion = text;
      out << gvr::to_json(rec).dump() << '\n';
    }
  }
  const unsigned max_threads = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::string> thread_args{"1", "0", std::to_string(max_threads), "64", "0"};
  std::vector<std::string> outputs;
  for (std::size_t k = 0; k < thread_args.size(); ++k) {
    const fs::path out = dir / ("rewards_" + std::to_string(k) + ".jsonl");
    std::ostringstream o, e;
    const int code = gvr::run_cli({"gvr", "score", "--records", records.string(), "--out",
                                   out.string(), "--threads", thread_args[k]},
                                  o, e);
    if (code != 0) return {false, "score exited " + std::to_string(code) + ": " + e.str()};
    std::ifstream in(out, std::ios::binary);
    outputs.emplace_back(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  const bool same = std::all_of(outputs.begin(), outputs.end(),
                                [&](const std::string& s) { return s == outputs.front(); });
  const auto lines = std::count(outputs.front().begin(), outputs.front().end(), '\n');
  std::ostringstream os;
  os << thread_args.size() << " runs (threads 1, all=" << max_threads << ", 64), "
     << lines - 1 << " record lines + header, byte-identical: " << (same ? "yes" : "no");
  return {same && lines == 1001, os.str()};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path dir = argc > 1 ? fs::path(argv[1]) / "acceptance_work"
                                : fs::temp_directory_path() / "gvr_acceptance";
  criterion("edge cases (G=0, P=0, perfect)", edge_cases);
  criterion("worked reward value", worked_value);
  criterion("hungarian vs brute force", hungarian_oracle);
  criterion("reward property fuzz", reward_fuzz);
  criterion("GRPO kernel", grpo_kernel);
  criterion("toy GRPO demo", toy_demo);
  criterion("parser robustness", parser_fuzz);
  criterion("eval harness", eval_harness);
  criterion("CLI determinism", [&] { return cli_determinism(dir); });
  std::printf("%s: %d criteria failed\n", failures ? "FAILED" : "OK", failures);
  return failures ? 1 : 0;
}
