// tests/num-graph-test.cc

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

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "chainforge/den-graph.h"
#include "chainforge/num-graph.h"
#include "chainforge/phone-lm.h"
#include "chainforge/wfsa.h"
#include "doctest.h"
#include "testing-util.h"

namespace chainforge {
namespace {

using testing::TwoPhoneLm;

// Every pdf sequence of length `frames` realizing `transcript` with each
// phone's run length inside its window: the oracle for what the numerator
// graph must accept.
void ExpandRunLengths(const std::vector<int32> &transcript,
                      const std::vector<DurationRange> &windows, size_t pos,
                      int32 frames_left, std::vector<int32> *prefix,
                      std::vector<std::vector<int32>> *out) {
  if (pos == transcript.size()) {
    if (frames_left == 0) out->push_back(*prefix);
    return;
  }
  for (int32 d = windows[pos].min_dur;
       d <= std::min(windows[pos].max_dur, frames_left); d++) {
    prefix->insert(prefix->end(), d, transcript[pos]);
    ExpandRunLengths(transcript, windows, pos + 1, frames_left - d, prefix,
                     out);
    prefix->resize(prefix->size() - d);
  }
}

std::vector<std::vector<int32>> Realizations(
    const std::vector<int32> &transcript,
    const std::vector<DurationRange> &windows, int32 frames) {
  std::vector<std::vector<int32>> out;
  std::vector<int32> prefix;
  ExpandRunLengths(transcript, windows, 0, frames, &prefix, &out);
  // Repeated phones realize the same pdf string through different run-length
  // splits; the graph-side enumeration reports each string once.
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

TEST_SUITE("num-graph") {

TEST_CASE("unconstrained graph matches the hand construction") {
  PhoneLm lm = TwoPhoneLm();
  std::vector<int32> transcript = {0, 1, 0};
  Wfsa g = BuildNumeratorGraph(transcript, lm, 5);
  CHECK(g.num_states == 4);
  CHECK(g.start == 3);
  CHECK(g.num_pdfs == 2);
  CHECK(ValidateWfsa(g).ok());
  REQUIRE(g.arcs.size() == 6);

  const double stay = std::log(0.4), leave = std::log(1.0 - 0.4);
  for (const WfsaArc &a : g.arcs) {
    if (a.src == 3) {
      CHECK(a.dst == 0);
      CHECK(a.pdf == 0);
      CHECK(a.log_weight == doctest::Approx(std::log(0.6)).epsilon(1e-12));
    } else if (a.src == a.dst) {
      CHECK(a.pdf == transcript[a.src]);
      CHECK(a.log_weight == doctest::Approx(stay).epsilon(1e-12));
    } else {
      CHECK(a.dst == a.src + 1);
      CHECK(a.pdf == transcript[a.dst]);
      double bigram = a.src == 0 ? std::log(0.7) : std::log(0.5);
      CHECK(a.log_weight == doctest::Approx(leave + bigram).epsilon(1e-12));
    }
  }
  CHECK(g.final_logw[0] == kLogZero);
  CHECK(g.final_logw[1] == kLogZero);
  CHECK(g.final_logw[2] ==
        doctest::Approx(leave + std::log(0.3)).epsilon(1e-12));
  CHECK(g.final_logw[3] == kLogZero);
}

TEST_CASE("accepts exactly the run-length realizations of the transcript") {
  Rng rng(7);
  for (int32 trial = 0; trial < 12; trial++) {
    PhoneLm lm = testing::RandomPhoneLm(3, &rng);
    int32 len = 1 + rng.UniformInt(3);
    std::vector<int32> transcript = testing::RandomTranscript(len, 3, &rng);
    int32 frames = len + rng.UniformInt(4);
    Wfsa g = BuildNumeratorGraph(transcript, lm, frames);
    std::vector<DurationRange> unconstrained(len,
                                             DurationRange{1, frames});
    CHECK(testing::AcceptedSequences(g, frames) ==
          Realizations(transcript, unconstrained, frames));
  }
}

TEST_CASE("numerator arc weights are denominator arc weights") {
  // Each accepted path must score identically under the denominator, so
  // self-loops, advances, the entry arc and the final weight all reuse the
  // denominator values for the phones involved.
  Rng rng(8);
  PhoneLm lm = testing::RandomPhoneLm(3, &rng);
  Wfsa den = BuildDenominatorGraph(lm);
  std::vector<int32> transcript = {2, 0, 0, 1};
  Wfsa num = BuildNumeratorGraph(transcript, lm, 9);

  auto den_weight = [&](int32 src_phone, int32 dst_phone,
                        bool self_loop) -> double {
    const double stay = std::log(lm.self_loop_prob);
    for (const WfsaArc &a : den.arcs) {
      if (a.src != src_phone || a.dst != dst_phone) continue;
      // A self-bigram cross arc and the self-loop share (src, dst, pdf);
      // only the weight tells them apart.
      bool matches_stay = std::abs(a.log_weight - stay) < 1e-12;
      if (src_phone == dst_phone && self_loop != matches_stay) continue;
      return a.log_weight;
    }
    REQUIRE(false);
    return 0.0;
  };

  for (const WfsaArc &a : num.arcs) {
    if (a.src == num.start) {
      CHECK(a.log_weight == doctest::Approx(lm.bigram_logp(
                                lm.Boundary(), transcript[0]))
                                .epsilon(1e-12));
    } else if (a.src == a.dst) {
      CHECK(a.log_weight ==
            doctest::Approx(den_weight(transcript[a.src], transcript[a.src],
                                       /*self_loop=*/true))
                .epsilon(1e-12));
    } else {
      CHECK(a.log_weight ==
            doctest::Approx(den_weight(transcript[a.src], transcript[a.dst],
                                       /*self_loop=*/false))
                .epsilon(1e-12));
    }
  }
  CHECK(num.final_logw[transcript.size() - 1] ==
        doctest::Approx(den.final_logw[transcript.back()]).epsilon(1e-12));
}

TEST_CASE("duration windows bound the accepted run lengths") {
  PhoneLm lm = TwoPhoneLm();
  std::vector<int32> transcript = {0, 1};
  std::vector<DurationRange> windows = {{2, 3}, {2, 3}};
  for (int32 frames = 4; frames <= 6; frames++) {
    Wfsa g = BuildNumeratorGraph(transcript, lm, frames,
                                 std::optional(windows));
    CHECK(ValidateWfsa(g).ok());
    CHECK(testing::AcceptedSequences(g, frames) ==
          Realizations(transcript, windows, frames));
  }
}

TEST_CASE("single duration window broadcasts to every phone") {
  PhoneLm lm = TwoPhoneLm();
  std::vector<int32> transcript = {0, 1};
  Wfsa broadcast = BuildNumeratorGraph(
      transcript, lm, 5, std::optional(std::vector<DurationRange>{{2, 3}}));
  Wfsa explicit_windows = BuildNumeratorGraph(
      transcript, lm, 5,
      std::optional(std::vector<DurationRange>{{2, 3}, {2, 3}}));
  CHECK(broadcast == explicit_windows);
}

TEST_CASE("infeasible supervision is rejected with a reason") {
  PhoneLm lm = TwoPhoneLm();
  auto message = [&](const std::vector<int32> &transcript, int32 frames,
                     std::optional<std::vector<DurationRange>> durations =
                         std::nullopt) {
    return testing::ThrownMessage(
        [&] { BuildNumeratorGraph(transcript, lm, frames, durations); });
  };

  CHECK(message({}, 5).find("infeasible supervision: empty transcript") !=
        std::string::npos);
  CHECK(message({0, 1, 0}, 2).find("transcript length 3 exceeds frame "
                                   "budget 2") != std::string::npos);
  CHECK(message({0, 1}, 3, std::vector<DurationRange>{{2, 3}})
            .find("minimum durations need 4 frames, budget is 3") !=
        std::string::npos);
  CHECK(message({0, 1}, 7, std::vector<DurationRange>{{2, 3}})
            .find("maximum durations allow only 6 frames, budget is 7") !=
        std::string::npos);
  // begin->1 carries mass in TwoPhoneLm, so block it.
  PhoneLm no_start = lm;
  no_start.bigram_logp(2, 0) = 0.0;  // log 1
  no_start.bigram_logp(2, 1) = kLogZero;
  CHECK(testing::ThrownMessage([&] {
          BuildNumeratorGraph({1, 0}, no_start, 4);
        }).find("transcript cannot start with phone 1") != std::string::npos);
  CHECK(message({0, 0}, 4).find("bigram forbids 0->0") != std::string::npos);
  // 1->end carries mass in TwoPhoneLm; reroute it to make 1 a dead end.
  PhoneLm no_end = lm;
  no_end.bigram_logp(1, 0) = std::log(0.5);
  no_end.bigram_logp(1, 1) = std::log(0.5);
  no_end.bigram_logp(1, 2) = kLogZero;
  CHECK(testing::ThrownMessage([&] {
          BuildNumeratorGraph({0, 1}, no_end, 4);
        }).find("transcript cannot end with phone 1") != std::string::npos);
}

TEST_CASE("malformed arguments are rejected") {
  PhoneLm lm = TwoPhoneLm();
  CHECK(testing::ThrownMessage([&] {
          BuildNumeratorGraph({0, 5}, lm, 4);
        }).find("transcript phone 5 out of range") != std::string::npos);
  CHECK(testing::ThrownMessage([&] {
          BuildNumeratorGraph({0, 1}, lm, 4,
                              std::vector<DurationRange>{{0, 2}});
        }).find("bad duration range") != std::string::npos);
  CHECK(testing::ThrownMessage([&] {
          BuildNumeratorGraph({0, 1}, lm, 4,
                              std::vector<DurationRange>{{3, 2}});
        }).find("bad duration range") != std::string::npos);
  CHECK(testing::ThrownMessage([&] {
          BuildNumeratorGraph({0, 1, 0}, lm, 6,
                              std::vector<DurationRange>{{1, 2}, {1, 2}});
        }).find("durations must have one entry per phone") !=
        std::string::npos);
}

}  // TEST_SUITE

}  // namespace
}  // namespace chainforge
