// tests/wfsa-test.cc

// Copyright 2024-2026  Chainforge Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <sstream>

#include "chainforge/wfsa.h"
#include "doctest.h"
#include "testing-util.h"

namespace chainforge {
namespace {

using testing::Accepts;

// Two states, one final; accepts pdf sequences 0 (1)* .
Wfsa SmallGraph() {
  Wfsa g;
  g.num_states = 2;
  g.start = 0;
  g.num_pdfs = 2;
  g.arcs = {{0, 1, 0, std::log(0.5)}, {1, 1, 1, std::log(0.25)}};
  g.final_logw = {kLogZero, std::log(0.75)};
  return g;
}

TEST_SUITE("wfsa") {

TEST_CASE("validate accepts a well-formed graph") {
  CHECK(ValidateWfsa(SmallGraph()).ok());
  CHECK_NOTHROW(ValidateWfsaOrThrow(SmallGraph(), "test"));
}

TEST_CASE("validate flags out-of-range endpoints and pdfs") {
  Wfsa g = SmallGraph();
  g.arcs.push_back({0, 5, 0, 0.0});
  g.arcs.push_back({0, 1, 7, 0.0});
  WfsaCheckReport report = ValidateWfsa(g);
  REQUIRE_FALSE(report.ok());
  bool endpoint = false, pdf = false;
  for (const std::string &v : report.violations) {
    if (v.find("arc 2 endpoint out of range") != std::string::npos)
      endpoint = true;
    if (v.find("arc 3 pdf 7 out of range") != std::string::npos) pdf = true;
  }
  CHECK(endpoint);
  CHECK(pdf);
}

TEST_CASE("validate flags a graph without final states") {
  Wfsa g = SmallGraph();
  g.final_logw[1] = kLogZero;
  WfsaCheckReport report = ValidateWfsa(g);
  REQUIRE_FALSE(report.ok());
  bool found = false;
  for (const std::string &v : report.violations)
    if (v == "no final state") found = true;
  CHECK(found);
  CHECK_THROWS_AS(ValidateWfsaOrThrow(g, "ctx"), std::invalid_argument);
}

TEST_CASE("validate flags unreachable and non-co-reachable states") {
  Wfsa g = SmallGraph();
  g.num_states = 4;
  g.final_logw.resize(4, kLogZero);
  g.arcs.push_back({3, 3, 0, 0.0});  // 3 unreachable, 2 and 3 dead ends
  WfsaCheckReport report = ValidateWfsa(g);
  bool unreachable = false, dead = false;
  for (const std::string &v : report.violations) {
    if (v == "state 3 not reachable") unreachable = true;
    if (v == "state 2 not co-reachable") dead = true;
  }
  CHECK(unreachable);
  CHECK(dead);
}

TEST_CASE("validate flags a bad start state") {
  Wfsa g = SmallGraph();
  g.start = 9;
  bool found = false;
  for (const std::string &v : ValidateWfsa(g).violations)
    if (v.find("start state 9 out of range") != std::string::npos)
      found = true;
  CHECK(found);
}

TEST_CASE("text round-trip preserves the graph exactly") {
  Rng rng(42);
  for (int i = 0; i < 20; i++) {
    Wfsa g = testing::RandomWfsa(6, 3, 4, &rng);
    std::stringstream ss;
    WriteWfsaText(g, ss);
    Wfsa back = ReadWfsaText(ss);
    CHECK(g == back);
  }
}

TEST_CASE("text round-trip preserves arc labels") {
  Wfsa g = SmallGraph();
  std::vector<int32> labels = {2, 0};
  std::stringstream ss;
  WriteWfsaText(g, ss, &labels);
  std::vector<int32> back_labels;
  Wfsa back = ReadWfsaText(ss, &back_labels);
  CHECK(g == back);
  CHECK(labels == back_labels);
}

TEST_CASE("file round-trip") {
  std::string path = testing::TempPath("graph.wfsa");
  Wfsa g = SmallGraph();
  WriteWfsaFile(g, path);
  CHECK(g == ReadWfsaFile(path));
}

TEST_CASE("reader rejects malformed input") {
  auto read = [](const std::string &text) {
    std::stringstream ss(text);
    return ReadWfsaText(ss);
  };
  CHECK_THROWS_WITH_AS(read(""), doctest::Contains("missing header"),
                       std::runtime_error);
  CHECK_THROWS_AS(read("wfsa 2 0\n.\n"), std::runtime_error);
  CHECK_THROWS_AS(read("nope 2 0 2\n.\n"), std::runtime_error);
  CHECK_THROWS_AS(read("wfsa 2 0 2\na 0 1 0\n.\n"), std::runtime_error);
  // Missing "." terminator.
  CHECK_THROWS_AS(read("wfsa 2 0 2\nf 1 -1.0\n"), std::runtime_error);
}

TEST_CASE("weights survive the round-trip bitwise") {
  Wfsa g = SmallGraph();
  g.arcs[0].log_weight = -0.12345678901234567;
  g.final_logw[1] = -3.0000000000000004;
  std::stringstream ss;
  WriteWfsaText(g, ss);
  Wfsa back = ReadWfsaText(ss);
  CHECK(back.arcs[0].log_weight == g.arcs[0].log_weight);
  CHECK(back.final_logw[1] == g.final_logw[1]);
}

TEST_CASE("acceptance helper agrees with the graph's language") {
  Wfsa g = SmallGraph();
  CHECK(Accepts(g, {0}));
  CHECK(Accepts(g, {0, 1}));
  CHECK(Accepts(g, {0, 1, 1}));
  CHECK_FALSE(Accepts(g, {1}));
  CHECK_FALSE(Accepts(g, {0, 0}));
  auto seqs = testing::AcceptedSequences(g, 2);
  REQUIRE(seqs.size() == 1);
  CHECK(seqs[0] == std::vector<int32>{0, 1});
}

}  // TEST_SUITE

}  // namespace
}  // namespace chainforge
