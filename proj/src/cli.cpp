#include "gvr/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "gvr/eval.hpp"
#include "gvr/grounding_io.hpp"
#include "gvr/reward.hpp"
#include "gvr/rl_core.hpp"
#include "gvr/toy_policy.hpp"

namespace gvr {

namespace {

using nlohmann::json;

// Data problems that end the run with kExitDataError.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::string config_path;
  std::size_t threads = 0;
  std::string on_error = "skip";
};

struct RewardFlags {
  std::optional<double> lambda_fn;
  std::optional<double> lambda_fp;
  std::optional<std::vector<double>> dims;
};

struct GrpoFlags {
  std::optional<double> eps_low;
  std::optional<double> eps_high;
  std::optional<double> kl_coeff;
  bool length_weighted = false;
};

json read_config_file(const CommonOptions& common) {
  std::string path = common.config_path;
  if (path.empty()) {
    if (const char* env = std::getenv(kConfigEnvVar)) path = env;
  }
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file: " + path);
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw DataError("config file is not a JSON object: " + path);
  }
  for (const auto& [key, v] : doc.items()) {
    if (key != "reward" && key != "grpo" && key != "demo") {
      throw ConfigError(key, "unknown config section");
    }
  }
  return doc;
}

RewardConfig resolve_reward(const json& doc, const RewardFlags& flags) {
  RewardConfig cfg =
      doc.contains("reward") ? reward_config_from_json(doc["reward"]) : RewardConfig{};
  if (flags.lambda_fn) cfg.lambda_fn = *flags.lambda_fn;
  if (flags.lambda_fp) cfg.lambda_fp = *flags.lambda_fp;
  if (flags.dims) cfg.explicit_dims = ImageDims{(*flags.dims)[0], (*flags.dims)[1]};
  cfg.validate();
  return cfg;
}

GRPOConfig resolve_grpo(const json& doc, const GrpoFlags& flags) {
  GRPOConfig cfg = doc.contains("grpo") ? grpo_config_from_json(doc["grpo"]) : GRPOConfig{};
  if (flags.eps_low) cfg.eps_low = *flags.eps_low;
  if (flags.eps_high) cfg.eps_high = *flags.eps_high;
  if (flags.kl_coeff) cfg.kl_coeff = *flags.kl_coeff;
  if (flags.length_weighted) cfg.length_weighted = true;
  cfg.validate();
  return cfg;
}

ErrorMode error_mode(const CommonOptions& common) {
  return common.on_error == "abort" ? ErrorMode::kAbort : ErrorMode::kSkip;
}

std::size_t thread_count(const CommonOptions& common) {
  if (common.threads > 0) return common.threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs fn(i) for i in [0, n) on up to `threads` workers. Results are written
// by index, so output order never depends on scheduling.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& fn) {
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < threads; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : workers) t.join();
}

void report_diagnostics(const std::vector<Diagnostic>& diags, const std::string& path,
                        std::ostream& err) {
  for (const auto& d : diags) err << path << ": line " << d.line << ": " << d.message << '\n';
}

LoadedRecords read_records(const std::string& path, const CommonOptions& common,
                           std::ostream& err) {
  try {
    LoadedRecords loaded = load_records(path, error_mode(common));
    report_diagnostics(loaded.diagnostics, path, err);
    return loaded;
  } catch (const RecordError& e) {
    throw DataError(path + ": " + e.what());
  } catch (const std::runtime_error& e) {
    throw DataError(e.what());
  }
}

// JSONL of {"id": ..., "completion": ...}.
std::map<std::string, std::string> read_completions(const std::string& path,
                                                    const CommonOptions& common,
                                                    std::ostream& err) {
  std::map<std::string, std::string> out;
  if (path.empty()) return out;
  std::ifstream in(path);
  if (!in) throw DataError("cannot open completions file: " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (count_whitespace_tokens(line) == 0) continue;
    const json j = json::parse(line, nullptr, false);
    if (!j.is_discarded() && j.is_object() && j.contains("id") &&
        j.contains("completion") && j["completion"].is_string() &&
        (j["id"].is_string() || j["id"].is_number_integer())) {
      const std::string id =
          j["id"].is_string() ? j["id"].get<std::string>() : std::to_string(j["id"].get<long long>());
      out[id] = j["completion"].get<std::string>();
      continue;
    }
    const std::string msg = path + ": line " + std::to_string(line_no) +
                            ": expected {\"id\": ..., \"completion\": \"...\"}";
    if (error_mode(common) == ErrorMode::kAbort) throw DataError(msg);
    err << msg << '\n';
  }
  return out;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open output file: " + path);
  return out;
}

const std::string* completion_for(const GroundingRecord& rec,
                                  const std::map<std::string, std::string>& completions) {
  if (rec.completion) return &*rec.completion;
  if (auto it = completions.find(rec.id); it != completions.end()) return &it->second;
  return nullptr;
}

int cmd_score(const CommonOptions& common, const RewardFlags& flags,
              const std::string& records_path, const std::string& completions_path,
              const std::string& out_path, std::ostream& err) {
  const RewardConfig cfg = resolve_reward(read_config_file(common), flags);
  const LoadedRecords loaded = read_records(records_path, common, err);
  const auto completions = read_completions(completions_path, common, err);

  const auto& records = loaded.records;
  for (const auto& rec : records) {
    if (completion_for(rec, completions) == nullptr) {
      const std::string msg = "record " + rec.id + ": no completion, scored as empty";
      if (error_mode(common) == ErrorMode::kAbort) throw DataError(msg);
      err << msg << '\n';
    }
  }

  std::vector<std::string> lines(records.size());
  parallel_for(records.size(), thread_count(common), [&](std::size_t i) {
    const std::string* text = completion_for(records[i], completions);
    const ParsedCompletion parsed = parse_completion(text ? *text : std::string_view());
    lines[i] = reward_line(records[i].id, parsed, composite_reward(parsed, records[i], cfg)).dump();
  });

  std::ofstream out = open_output(out_path);
  out << json{{"header", {{"command", "score"}, {"reward_config", to_json(cfg)}}}}.dump() << '\n';
  for (const auto& l : lines) out << l << '\n';
  return kExitOk;
}

int cmd_score_loss(const CommonOptions& common, const GrpoFlags& flags,
                   const std::string& rollouts_path, const std::string& out_path,
                   std::ostream& err) {
  const GRPOConfig cfg = resolve_grpo(read_config_file(common), flags);
  std::ifstream in(rollouts_path);
  if (!in) throw DataError("cannot open rollouts file: " + rollouts_path);

  std::vector<RolloutRecord> rollouts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (count_whitespace_tokens(line) == 0) continue;
    try {
      RolloutRecord rec = rollout_from_json(json::parse(line));
      // Surfaces the zero-token contract violation at read time.
      (void)grpo_objective(rec.group, cfg);
      rollouts.push_back(std::move(rec));
    } catch (const std::exception& e) {
      const std::string msg =
          rollouts_path + ": line " + std::to_string(line_no) + ": " + e.what();
      if (error_mode(common) == ErrorMode::kAbort) throw DataError(msg);
      err << msg << '\n';
    }
  }

  std::vector<std::string> lines(rollouts.size());
  parallel_for(rollouts.size(), thread_count(common), [&](std::size_t i) {
    lines[i] = to_json(rollouts[i].id, grpo_objective(rollouts[i].group, cfg)).dump();
  });
  std::ofstream out = open_output(out_path);
  out << json{{"header", {{"command", "score-loss"}, {"grpo_config", to_json(cfg)}}}}.dump()
      << '\n';
  for (const auto& l : lines) out << l << '\n';
  return kExitOk;
}

int cmd_eval(const CommonOptions& common, const std::string& records_path,
             const std::string& completions_path, const std::string& out_path,
             const std::string& name, std::ostream& out, std::ostream& err) {
  const LoadedRecords loaded = read_records(records_path, common, err);
  const auto completions = read_completions(completions_path, common, err);
  const EvalReport report = evaluate(loaded.records, completions, name);
  for (const auto& s : report.samples) {
    if (s.status == SampleStatus::kMissingCompletion) {
      err << "record " << s.id << ": no completion, scored 0\n";
    }
  }
  if (!out_path.empty()) {
    std::ofstream file = open_output(out_path);
    file << to_json(report).dump(2) << '\n';
  }
  out << format_table(std::span<const EvalReport>(&report, 1));
  return kExitOk;
}

int cmd_match(const CommonOptions& common, const RewardFlags& flags,
              const std::string& records_path, const std::string& completions_path,
              const std::string& id, std::ostream& out, std::ostream& err) {
  const RewardConfig cfg = resolve_reward(read_config_file(common), flags);
  const LoadedRecords loaded = read_records(records_path, common, err);
  if (loaded.records.empty()) throw DataError("no records in " + records_path);
  const auto completions = read_completions(completions_path, common, err);

  const GroundingRecord* rec = &loaded.records.front();
  if (!id.empty()) {
    auto it = std::find_if(loaded.records.begin(), loaded.records.end(),
                           [&](const GroundingRecord& r) { return r.id == id; });
    if (it == loaded.records.end()) throw DataError("record id not found: " + id);
    rec = &*it;
  }
  const std::string* text = completion_for(*rec, completions);
  const ParsedCompletion parsed = parse_completion(text ? *text : std::string_view());
  const CompositeReward reward = composite_reward(parsed, *rec, cfg);

  char line[256];
  out << "record " << rec->id << ": " << parsed.boxes.size() << " predicted, "
      << rec->gt_boxes.size() << " ground truth"
      << (parsed.parse_ok ? "" : " (completion did not parse)") << '\n';
  std::snprintf(line, sizeof line, "%6s %6s %10s %10s %10s  %s\n", "pred", "gt", "l1",
                "giou", "score", "pred_box -> gt_box");
  out << line;
  for (const auto& m : reward.bbox.matches) {
    std::snprintf(line, sizeof line, "%6zu %6zu %10.6f %10.6f %10.6f  ", m.pred_index,
                  m.gt_index, m.l1, m.giou, m.score);
    out << line << to_string(parsed.boxes[m.pred_index]) << " -> "
        << to_string(rec->gt_boxes[m.gt_index]) << '\n';
  }
  std::snprintf(line, sizeof line,
                "unmatched gt %zu, unmatched pred %zu, base %.6f, penalty %.6f, bbox %.6f\n",
                reward.bbox.unmatched_gt, reward.bbox.unmatched_pred, reward.bbox.base,
                reward.bbox.penalty, reward.bbox.final);
  out << line;
  std::snprintf(line, sizeof line, "label %.6f, tag %.6f, overlong %.6f, total %.6f\n",
                reward.label, reward.tag, reward.overlong, reward.total);
  out << line;
  return kExitOk;
}

struct DemoFlags {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> steps;
  std::optional<std::size_t> group_size;
  std::optional<double> learning_rate;
  std::string trace_path;
};

int cmd_demo(const CommonOptions& common, const RewardFlags& rflags,
             const GrpoFlags& gflags, const DemoFlags& flags, std::ostream& out) {
  const json doc = read_config_file(common);
  DemoConfig cfg;
  cfg.reward = resolve_reward(doc, rflags);
  cfg.grpo = resolve_grpo(doc, gflags);
  if (doc.contains("demo")) apply_demo_json(doc["demo"], cfg);
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.steps) cfg.steps = *flags.steps;
  if (flags.group_size) cfg.group_size = *flags.group_size;
  if (flags.learning_rate) cfg.learning_rate = *flags.learning_rate;
  cfg.validate();

  const DemoTrace trace = run_demo(cfg);
  if (!flags.trace_path.empty()) {
    std::ofstream file = open_output(flags.trace_path);
    write_trace_csv(trace, file);
  }
  char line[160];
  if (!trace.mean_reward.empty()) {
    std::snprintf(line, sizeof line, "steps %zu, first mean reward %.4f, last mean reward %.4f\n",
                  trace.mean_reward.size(), trace.mean_reward.front(),
                  trace.mean_reward.back());
    out << line;
  } else {
    out << "steps 0\n";
  }
  out << "mode box " << to_string(trace.final_mode_box) << ", target "
      << to_string(cfg.target) << '\n';
  return kExitOk;
}

void add_reward_flags(CLI::App* cmd, RewardFlags& flags) {
  cmd->add_option("--lambda-fn", flags.lambda_fn, "false-negative penalty coefficient");
  cmd->add_option("--lambda-fp", flags.lambda_fp, "false-positive penalty coefficient");
  cmd->add_option("--dims", flags.dims, "explicit image dims H W for L1 normalization")
      ->expected(2);
}

void add_grpo_flags(CLI::App* cmd, GrpoFlags& flags) {
  cmd->add_option("--eps-low", flags.eps_low, "lower clip epsilon");
  cmd->add_option("--eps-high", flags.eps_high, "upper clip epsilon");
  cmd->add_option("--kl-coeff", flags.kl_coeff, "KL penalty coefficient");
  cmd->add_flag("--length-weighted", flags.length_weighted,
                "weight each response by its token count");
}

void add_common(CLI::App* cmd, CommonOptions& common) {
  cmd->add_option("--config", common.config_path,
                  std::string("JSON config file (default: $") + kConfigEnvVar + ")");
  cmd->add_option("--threads", common.threads, "worker threads (0 = all cores)");
  cmd->add_option("--on-error", common.on_error, "malformed input lines: skip or abort")
      ->check(CLI::IsMember({"skip", "abort"}));
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Verifiable grounding rewards, GRPO loss kernel and grounding evaluation"};
  app.require_subcommand(1);

  CommonOptions common;
  RewardFlags rflags;
  GrpoFlags gflags;
  DemoFlags dflags;
  std::string records, completions, out_path, rollouts, name = "dataset", id;

  auto* score = app.add_subcommand("score", "score completions in a records file");
  add_common(score, common);
  add_reward_flags(score, rflags);
  score->add_option("--records", records, "records JSONL")->required();
  score->add_option("--completions", completions, "completions JSONL keyed by id");
  score->add_option("--out", out_path, "rewards JSONL output")->required();

  auto* loss = app.add_subcommand("score-loss", "evaluate the GRPO objective on rollout dumps");
  add_common(loss, common);
  add_grpo_flags(loss, gflags);
  loss->add_option("--rollouts", rollouts, "rollout dump JSONL")->required();
  loss->add_option("--out", out_path, "loss report JSONL output")->required();

  auto* eval = app.add_subcommand("eval", "grounding IoU evaluation");
  add_common(eval, common);
  eval->add_option("--records", records, "records JSONL")->required();
  eval->add_option("--completions", completions, "completions JSONL keyed by id");
  eval->add_option("--out", out_path, "JSON report output");
  eval->add_option("--name", name, "dataset name for the table");

  auto* match = app.add_subcommand("match", "print the matching for one record");
  add_common(match, common);
  add_reward_flags(match, rflags);
  match->add_option("--records", records, "records JSONL")->required();
  match->add_option("--completions", completions, "completions JSONL keyed by id");
  match->add_option("--id", id, "record id (default: first record)");

  auto* demo = app.add_subcommand("demo", "toy GRPO optimization of a box policy");
  add_common(demo, common);
  add_reward_flags(demo, rflags);
  add_grpo_flags(demo, gflags);
  demo->add_option("--seed", dflags.seed, "random seed");
  demo->add_option("--steps", dflags.steps, "optimization steps");
  demo->add_option("--group-size", dflags.group_size, "samples per group");
  demo->add_option("--lr", dflags.learning_rate, "learning rate");
  demo->add_option("--trace", dflags.trace_path, "CSV trace output");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (score->parsed()) {
      return cmd_score(common, rflags, records, completions, out_path, err);
    }
    if (loss->parsed()) return cmd_score_loss(common, gflags, rollouts, out_path, err);
    if (eval->parsed()) {
      return cmd_eval(common, records, completions, out_path, name, out, err);
    }
    if (match->parsed()) return cmd_match(common, rflags, records, completions, id, out, err);
    return cmd_demo(common, rflags, gflags, dflags, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitDataError;
  }
}

}  // namespace gvr
