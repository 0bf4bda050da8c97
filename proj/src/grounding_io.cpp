#include "gvr/grounding_io.hpp"

#include <cctype>
#include <cmath>
#include <limits>

namespace gvr {

namespace {

using nlohmann::json;

// Index one past the bracket closing the array opened at text[start], or npos
// if the array is unterminated. String literals are skipped.
std::size_t match_array_end(std::string_view text, std::size_t start) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = start; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (c == '\\') ++i;
      else if (c == '"') in_string = false;
      continue;
    }
    switch (c) {
      case '"': in_string = true; break;
      case '[': case '{': ++depth; break;
      case ']': case '}':
        if (--depth == 0) return c == ']' ? i + 1 : std::string_view::npos;
        break;
      default: break;
    }
  }
  return std::string_view::npos;
}

struct BoxItem {
  BBox box;
  std::string label;
};

std::optional<std::vector<BoxItem>> read_box_array(const json& arr) {
  if (!arr.is_array()) return std::nullopt;
  std::vector<BoxItem> items;
  for (const auto& obj : arr) {
    if (!obj.is_object()) return std::nullopt;
    auto it = obj.find("bbox_2d");
    if (it == obj.end()) it = obj.find("box");
    if (it == obj.end() || !it->is_array() || it->size() != 4) return std::nullopt;
    double v[4];
    for (int k = 0; k < 4; ++k) {
      if (!(*it)[k].is_number()) return std::nullopt;
      v[k] = (*it)[k].get<double>();
      if (!std::isfinite(v[k])) return std::nullopt;
    }
    std::string label;
    if (auto lit = obj.find("label"); lit != obj.end()) {
      if (!lit->is_string()) return std::nullopt;
      label = lit->get<std::string>();
    }
    items.push_back({BBox(v[0], v[1], v[2], v[3]), std::move(label)});
  }
  return items;
}

std::optional<std::vector<BoxItem>> last_box_array(std::string_view region) {
  std::optional<std::vector<BoxItem>> found;
  std::size_t pos = 0;
  while ((pos = region.find('[', pos)) != std::string_view::npos) {
    const std::size_t end = match_array_end(region, pos);
    if (end != std::string_view::npos) {
      const json parsed = json::parse(region.substr(pos, end - pos), nullptr,
                                      /*allow_exceptions=*/false);
      if (!parsed.is_discarded()) {
        if (auto items = read_box_array(parsed)) {
          found = std::move(items);
          pos = end;
          continue;
        }
      }
    }
    ++pos;
  }
  return found;
}

// Bodies between open/close markers, in order. An unclosed final block runs
// to the end of the text.
std::vector<std::string_view> delimited_blocks(std::string_view text,
                                               std::string_view open,
                                               std::string_view close) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while ((pos = text.find(open, pos)) != std::string_view::npos) {
    const std::size_t body = pos + open.size();
    const std::size_t end = text.find(close, body);
    if (end == std::string_view::npos) {
      out.push_back(text.substr(body));
      break;
    }
    out.push_back(text.substr(body, end - body));
    pos = end + close.size();
  }
  return out;
}

std::optional<std::vector<BoxItem>> last_in_blocks(
    const std::vector<std::string_view>& blocks) {
  for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) {
    if (auto items = last_box_array(*it)) return items;
  }
  return std::nullopt;
}

json number_json(double v) {
  constexpr double kIntLimit = 9007199254740992.0;  // 2^53
  if (std::trunc(v) == v && std::abs(v) < kIntLimit) {
    return json(static_cast<long long>(v));
  }
  return json(v);
}

}  // namespace

std::size_t count_whitespace_tokens(std::string_view text) {
  std::size_t count = 0;
  bool in_token = false;
  for (const char c : text) {
    const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!space && !in_token) ++count;
    in_token = !space;
  }
  return count;
}

ParsedCompletion parse_completion(std::string_view text) {
  ParsedCompletion out;
  out.tags_found = find_tags(text);
  out.completion_len = count_whitespace_tokens(text);

  std::optional<std::vector<BoxItem>> items =
      last_in_blocks(delimited_blocks(text, "<answer>", "</answer>"));
  if (!items) {
    // Fence bodies; the info string ("json") is not valid JSON and is skipped
    // by the array scan.
    items = last_in_blocks(delimited_blocks(text, "```", "```"));
  }
  if (!items) items = last_box_array(text);
  if (!items) return out;

  out.parse_ok = true;
  for (auto& item : *items) {
    out.boxes.push_back(item.box);
    out.labels.push_back(std::move(item.label));
  }
  return out;
}

std::string serialize_predictions(const ParsedCompletion& parsed) {
  if (!parsed.parse_ok) {
    throw std::invalid_argument("serialize_predictions: completion did not parse");
  }
  json arr = json::array();
  for (std::size_t i = 0; i < parsed.boxes.size(); ++i) {
    const BBox& b = parsed.boxes[i];
    json obj;
    obj["bbox_2d"] = {number_json(b.x1()), number_json(b.y1()),
                      number_json(b.x2()), number_json(b.y2())};
    obj["label"] = i < parsed.labels.size() ? parsed.labels[i] : std::string();
    arr.push_back(std::move(obj));
  }
  return arr.dump();
}

namespace {

BBox box_from_json(const json& v, const std::string& field) {
  if (!v.is_array() || v.size() != 4) {
    throw std::invalid_argument(field + ": expected [x1,y1,x2,y2]");
  }
  double c[4];
  for (int k = 0; k < 4; ++k) {
    if (!v[k].is_number()) throw std::invalid_argument(field + ": non-numeric coordinate");
    c[k] = v[k].get<double>();
  }
  return BBox(c[0], c[1], c[2], c[3]);
}

}  // namespace

GroundingRecord record_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("record is not a JSON object");
  GroundingRecord rec;
  const auto id = j.find("id");
  if (id == j.end()) throw std::invalid_argument("id: missing");
  if (id->is_string()) rec.id = id->get<std::string>();
  else if (id->is_number_integer()) rec.id = std::to_string(id->get<long long>());
  else throw std::invalid_argument("id: expected a string");

  if (auto it = j.find("image_dims"); it != j.end() && !it->is_null()) {
    if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number() ||
        !(*it)[1].is_number() || (*it)[0].get<double>() <= 0 ||
        (*it)[1].get<double>() <= 0) {
      throw std::invalid_argument("image_dims: expected positive [H, W]");
    }
    rec.image_dims = ImageDims{(*it)[0].get<double>(), (*it)[1].get<double>()};
  }
  if (auto it = j.find("gt_boxes"); it != j.end()) {
    if (!it->is_array()) throw std::invalid_argument("gt_boxes: expected an array");
    for (std::size_t k = 0; k < it->size(); ++k) {
      rec.gt_boxes.push_back(
          box_from_json((*it)[k], "gt_boxes[" + std::to_string(k) + "]"));
    }
  }
  if (auto it = j.find("gt_labels"); it != j.end()) {
    if (!it->is_array()) throw std::invalid_argument("gt_labels: expected an array");
    for (const auto& l : *it) {
      if (!l.is_string()) throw std::invalid_argument("gt_labels: expected strings");
      rec.gt_labels.push_back(l.get<std::string>());
    }
    if (rec.gt_labels.size() != rec.gt_boxes.size()) {
      throw std::invalid_argument("gt_labels: length differs from gt_boxes");
    }
  } else {
    rec.gt_labels.assign(rec.gt_boxes.size(), std::string());
  }
  if (auto it = j.find("prompt"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw std::invalid_argument("prompt: expected a string");
    rec.prompt = it->get<std::string>();
  }
  if (auto it = j.find("completion"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw std::invalid_argument("completion: expected a string");
    rec.completion = it->get<std::string>();
  }
  if (auto it = j.find("token_len"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer() || it->get<long long>() < 0) {
      throw std::invalid_argument("token_len: expected a nonnegative integer");
    }
    rec.token_len = it->get<std::size_t>();
  }
  return rec;
}

json to_json(const GroundingRecord& rec) {
  json j;
  j["id"] = rec.id;
  if (rec.image_dims) j["image_dims"] = {rec.image_dims->height, rec.image_dims->width};
  j["gt_boxes"] = json::array();
  for (const auto& b : rec.gt_boxes) {
    j["gt_boxes"].push_back({number_json(b.x1()), number_json(b.y1()),
                             number_json(b.x2()), number_json(b.y2())});
  }
  j["gt_labels"] = rec.gt_labels;
  if (rec.prompt) j["prompt"] = *rec.prompt;
  if (rec.completion) j["completion"] = *rec.completion;
  if (rec.token_len) j["token_len"] = *rec.token_len;
  return j;
}

RecordReader::RecordReader(const std::string& path, ErrorMode mode)
    : in_(path), mode_(mode) {
  if (!in_) throw std::runtime_error("cannot open records file: " + path);
}

std::optional<GroundingRecord> RecordReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    if (count_whitespace_tokens(line) == 0) continue;
    try {
      const json j = json::parse(line);
      return record_from_json(j);
    } catch (const std::exception& e) {
      if (mode_ == ErrorMode::kAbort) throw RecordError(line_no_, e.what());
      diagnostics_.push_back({line_no_, e.what()});
    }
  }
  return std::nullopt;
}

LoadedRecords load_records(const std::string& path, ErrorMode mode) {
  RecordReader reader(path, mode);
  LoadedRecords out;
  while (auto rec = reader.next()) out.records.push_back(std::move(*rec));
  out.diagnostics = reader.diagnostics();
  return out;
}

json to_json(const MatchDetail& m) {
  return {{"pred_index", m.pred_index},
          {"gt_index", m.gt_index},
          {"l1", m.l1},
          {"giou", m.giou},
          {"score", m.score}};
}

json to_json(const RewardBreakdown& b) {
  json matches = json::array();
  for (const auto& m : b.matches) matches.push_back(to_json(m));
  return {{"final", b.final},
          {"base", b.base},
          {"penalty", b.penalty},
          {"unmatched_gt", b.unmatched_gt},
          {"unmatched_pred", b.unmatched_pred},
          {"matching_failed", b.matching_failed},
          {"dims", {b.dims.height, b.dims.width}},
          {"matches", std::move(matches)}};
}

json reward_line(const std::string& id, const ParsedCompletion& parsed,
                 const CompositeReward& reward) {
  json j = to_json(reward.bbox);
  j["id"] = id;
  j["parse_ok"] = parsed.parse_ok;
  j["rewards"] = {{"label", reward.label},
                  {"bbox", reward.bbox.final},
                  {"tag", reward.tag},
                  {"overlong", reward.overlong},
                  {"total", reward.total}};
  return j;
}

}  // namespace gvr
