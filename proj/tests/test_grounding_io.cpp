#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "doctest.h"
#include "gvr/grounding_io.hpp"

using gvr::BBox;
using gvr::parse_completion;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& body) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream(path) << body;
  return path;
}

}  // namespace

TEST_CASE("parse answer-tag completion") {
  const auto p = parse_completion(
      "<think>looking at the left lobe</think><answer>[{\"bbox_2d\":[5,5,15,15],"
      "\"label\":\"lesion\"}]</answer>");
  REQUIRE(p.parse_ok);
  REQUIRE(p.boxes.size() == 1);
  CHECK(p.boxes[0] == BBox(5, 5, 15, 15));
  CHECK(p.labels[0] == "lesion");
  CHECK(p.tags_found == std::vector<std::string>{"<think>", "</think>", "<answer>", "</answer>"});
}

TEST_CASE("parse fenced block without label") {
  const auto p = parse_completion("```json\n[{\"bbox_2d\":[0,0,10,10]}]\n```");
  REQUIRE(p.parse_ok);
  REQUIRE(p.boxes.size() == 1);
  CHECK(p.boxes[0] == BBox(0, 0, 10, 10));
  CHECK(p.labels[0].empty());
}

TEST_CASE("parse failure") {
  const auto p = parse_completion("The lesion is in the upper lobe.");
  CHECK_FALSE(p.parse_ok);
  CHECK(p.boxes.empty());
  CHECK(p.completion_len == 7);
}

TEST_CASE("last array wins and answer block has priority") {
  const auto p = parse_completion(
      "draft [{\"bbox_2d\":[1,1,2,2]}] then [{\"box\":[3,3,4,4],\"label\":\"b\"}]");
  REQUIRE(p.parse_ok);
  CHECK(p.boxes[0] == BBox(3, 3, 4, 4));
  CHECK(p.labels[0] == "b");

  const auto q = parse_completion(
      "<answer>[{\"bbox_2d\":[1,1,2,2]}]</answer> trailing [{\"bbox_2d\":[7,7,8,8]}]");
  CHECK(q.boxes[0] == BBox(1, 1, 2, 2));

  // An answer block with no usable array falls back to the whole text.
  const auto r = parse_completion("[{\"bbox_2d\":[9,9,10,10]}] <answer>none</answer>");
  REQUIRE(r.parse_ok);
  CHECK(r.boxes[0] == BBox(9, 9, 10, 10));
}

TEST_CASE("invalid arrays are rejected") {
  CHECK_FALSE(parse_completion("[1, 2, 3]").parse_ok);
  CHECK_FALSE(parse_completion("[{\"bbox_2d\":[1,2,3]}]").parse_ok);
  CHECK_FALSE(parse_completion("[{\"bbox_2d\":[1,2,3,\"x\"]}]").parse_ok);
  CHECK_FALSE(parse_completion("[{\"bbox_2d\":[1,2,3,4],\"label\":5}]").parse_ok);
  CHECK_FALSE(parse_completion("[{\"bbox_2d\":[1,2,3,4]}").parse_ok);
  CHECK_FALSE(parse_completion("[{\"bbox_2d\":[1,2,3,1e999]}]").parse_ok);
}

TEST_CASE("swapped corners are canonicalized") {
  const auto p = parse_completion("[{\"bbox_2d\":[15,20,5,2]}]");
  REQUIRE(p.parse_ok);
  CHECK(p.boxes[0] == BBox(5, 2, 15, 20));
  CHECK(p.boxes[0].area() == 180.0);
}

TEST_CASE("serialize_predictions") {
  gvr::ParsedCompletion p;
  p.parse_ok = true;
  p.boxes = {{0, 0, 10, 10}};
  p.labels = {"cell"};
  CHECK(gvr::serialize_predictions(p) == "[{\"bbox_2d\":[0,0,10,10],\"label\":\"cell\"}]");

  gvr::ParsedCompletion empty;
  empty.parse_ok = true;
  CHECK(gvr::serialize_predictions(empty) == "[]");
  CHECK(parse_completion("[]").parse_ok);

  p.boxes = {{0.25, 1.0 / 3.0, 10, 10}, {3, 4, 5.5, 6}};
  p.labels = {"a \"quoted\" label", ""};
  const auto back = parse_completion(gvr::serialize_predictions(p));
  REQUIRE(back.parse_ok);
  CHECK(back.boxes == p.boxes);
  CHECK(back.labels == p.labels);

  gvr::ParsedCompletion failed;
  CHECK_THROWS_AS(gvr::serialize_predictions(failed), std::invalid_argument);
}

TEST_CASE("parser fuzz: never throws, round trip is idempotent") {
  std::mt19937_64 rng(99);
  const std::string seed_text =
      "<think>a</think><answer>[{\"bbox_2d\":[5,5,15,15],\"label\":\"x\"},"
      "{\"box\":[1.5,2,3,4]}]</answer>```json\n[{\"bbox_2d\":[0,0,1,1]}]```";
  const std::string alphabet = "[]{}\",:0123456789.-e bbox_2dlabel<>/answerthink`\n\\";
  std::uniform_int_distribution<int> byte(0, 255);
  for (int trial = 0; trial < 3000; ++trial) {
    std::string text;
    switch (trial % 3) {
      case 0: {
        const std::size_t len = rng() % 200;
        for (std::size_t i = 0; i < len; ++i) text.push_back(static_cast<char>(byte(rng)));
        break;
      }
      case 1: text = seed_text.substr(0, rng() % (seed_text.size() + 1)); break;
      default: {
        const std::size_t len = rng() % 120;
        for (std::size_t i = 0; i < len; ++i) text.push_back(alphabet[rng() % alphabet.size()]);
      }
    }
    gvr::ParsedCompletion p;
    REQUIRE_NOTHROW(p = parse_completion(text));
    REQUIRE(p.labels.size() == p.boxes.size());
    if (!p.parse_ok) {
      REQUIRE(p.boxes.empty());
      continue;
    }
    const std::string once = gvr::serialize_predictions(p);
    REQUIRE(gvr::serialize_predictions(parse_completion(once)) == once);
  }
}

TEST_CASE("record json") {
  const auto rec = gvr::record_from_json(nlohmann::json::parse(
      R"({"id":"a","image_dims":[480,640],"gt_boxes":[[1,2,3,4]],"gt_labels":["x"],"token_len":12})"));
  CHECK(rec.id == "a");
  CHECK(rec.image_dims == gvr::ImageDims{480, 640});
  CHECK(rec.gt_boxes[0] == BBox(1, 2, 3, 4));
  CHECK(rec.token_len == 12u);
  const auto again = gvr::record_from_json(gvr::to_json(rec));
  CHECK(again.gt_boxes == rec.gt_boxes);
  CHECK(again.gt_labels == rec.gt_labels);

  const auto unlabeled = gvr::record_from_json(nlohmann::json::parse(R"({"id":1,"gt_boxes":[[0,0,1,1]]})"));
  CHECK(unlabeled.id == "1");
  CHECK(unlabeled.gt_labels == std::vector<std::string>{""});

  CHECK_THROWS(gvr::record_from_json(nlohmann::json::parse(R"({"gt_boxes":[]})")));
  CHECK_THROWS(gvr::record_from_json(
      nlohmann::json::parse(R"({"id":"a","gt_boxes":[[0,0,1,1]],"gt_labels":[]})")));
  CHECK_THROWS(gvr::record_from_json(nlohmann::json::parse(R"({"id":"a","gt_boxes":[[0,0,1]]})")));
}

TEST_CASE("load_records") {
  const auto good = write_temp("gvr_good.jsonl",
                               "{\"id\":\"a\",\"gt_boxes\":[[0,0,1,1]]}\n"
                               "{\"id\":\"b\",\"gt_boxes\":[]}\n"
                               "{\"id\":\"c\",\"gt_boxes\":[[1,1,2,2]],\"gt_labels\":[\"x\"]}\n");
  auto loaded = gvr::load_records(good.string());
  CHECK(loaded.records.size() == 3);
  CHECK(loaded.diagnostics.empty());

  const auto bad = write_temp("gvr_bad.jsonl",
                              "{\"id\":\"a\",\"gt_boxes\":[[0,0,1,1]]}\n"
                              "{\"id\":\"b\",\"gt_boxes\":[[0,0,1\n"
                              "{\"id\":\"c\",\"gt_boxes\":[]}\n");
  loaded = gvr::load_records(bad.string(), gvr::ErrorMode::kSkip);
  CHECK(loaded.records.size() == 2);
  REQUIRE(loaded.diagnostics.size() == 1);
  CHECK(loaded.diagnostics[0].line == 2);

  try {
    gvr::load_records(bad.string(), gvr::ErrorMode::kAbort);
    FAIL("expected RecordError");
  } catch (const gvr::RecordError& e) {
    CHECK(e.line() == 2);
  }

  const auto empty = write_temp("gvr_empty.jsonl", "");
  CHECK(gvr::load_records(empty.string()).records.empty());

  CHECK_THROWS_AS(gvr::load_records("/nonexistent/records.jsonl"), std::runtime_error);

  gvr::RecordReader reader(good.string());
  CHECK(reader.next()->id == "a");
  CHECK(reader.next()->id == "b");
  CHECK(reader.next()->id == "c");
  CHECK_FALSE(reader.next().has_value());
}
