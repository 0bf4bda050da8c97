#pragma once

#include <cstddef>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "gvr/records.hpp"
#include "gvr/reward.hpp"

namespace gvr {

// Extracts the last well-formed JSON array of box objects from a completion.
// Search order: <answer> blocks, then ``` fenced blocks, then the whole text;
// the first region holding a valid array wins, and within it the last array.
// Each object needs "bbox_2d" (or "box") with four numbers; "label" is an
// optional string. Never throws; failures come back with parse_ok = false.
ParsedCompletion parse_completion(std::string_view text);

std::size_t count_whitespace_tokens(std::string_view text);

// Canonical form: [{"bbox_2d":[x1,y1,x2,y2],"label":"..."}, ...] with
// integral coordinates printed as integers. Throws std::invalid_argument when
// parsed.parse_ok is false.
std::string serialize_predictions(const ParsedCompletion& parsed);

class RecordError : public std::runtime_error {
 public:
  RecordError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Throws std::invalid_argument describing the first bad field.
GroundingRecord record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GroundingRecord& rec);

struct Diagnostic {
  std::size_t line = 0;
  std::string message;
};

enum class ErrorMode { kSkip, kAbort };

// Streams GroundingRecords from a JSONL file, one object per line. Blank lines
// are ignored. In kSkip mode malformed lines are recorded in diagnostics();
// in kAbort mode next() throws RecordError.
class RecordReader {
 public:
  // Throws std::runtime_error when the file cannot be opened.
  explicit RecordReader(const std::string& path, ErrorMode mode = ErrorMode::kSkip);

  std::optional<GroundingRecord> next();
  const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

 private:
  std::ifstream in_;
  ErrorMode mode_;
  std::size_t line_no_ = 0;
  std::vector<Diagnostic> diagnostics_;
};

struct LoadedRecords {
  std::vector<GroundingRecord> records;
  std::vector<Diagnostic> diagnostics;
};

LoadedRecords load_records(const std::string& path, ErrorMode mode = ErrorMode::kSkip);

nlohmann::json to_json(const MatchDetail& m);
nlohmann::json to_json(const RewardBreakdown& b);
// One line of the rewards output file.
nlohmann::json reward_line(const std::string& id, const ParsedCompletion& parsed,
                           const CompositeReward& reward);

}  // namespace gvr
