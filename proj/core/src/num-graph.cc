// core/src/num-graph.cc

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

#include "chainforge/num-graph.h"

#include <cmath>
#include <numeric>
#include <string>

namespace chainforge {

static void Infeasible(const std::string &why) {
  throw std::invalid_argument("infeasible supervision: " + why);
}

Wfsa BuildNumeratorGraph(
    const std::vector<int32> &transcript, const PhoneLm &lm, int32 num_frames,
    const std::optional<std::vector<DurationRange>> &durations) {
  const int32 K = int32(transcript.size());
  const int32 begin = lm.Boundary(), end = lm.Boundary();
  if (K == 0) Infeasible("empty transcript");
  for (int32 t : transcript)
    if (t < 0 || t >= lm.num_phones)
      throw std::invalid_argument("transcript phone " + std::to_string(t) +
                                  " out of range");

  std::vector<DurationRange> dur;
  if (durations.has_value()) {
    if (durations->size() == 1) {
      dur.assign(K, (*durations)[0]);
    } else if (int32(durations->size()) == K) {
      dur = *durations;
    } else {
      throw std::invalid_argument(
          "durations must have one entry per phone, or exactly one entry");
    }
    int64 min_total = 0, max_total = 0;
    for (const DurationRange &d : dur) {
      if (d.min_dur < 1 || d.max_dur < d.min_dur)
        throw std::invalid_argument("bad duration range");
      min_total += d.min_dur;
      max_total += d.max_dur;
    }
    if (min_total > num_frames)
      Infeasible("minimum durations need " + std::to_string(min_total) +
                 " frames, budget is " + std::to_string(num_frames));
    if (max_total < num_frames)
      Infeasible("maximum durations allow only " + std::to_string(max_total) +
                 " frames, budget is " + std::to_string(num_frames));
  } else if (K > num_frames) {
    Infeasible("transcript length " + std::to_string(K) +
               " exceeds frame budget " + std::to_string(num_frames));
  }

  const double log_stay = std::log(lm.self_loop_prob);
  const double log_leave = std::log(1.0 - lm.self_loop_prob);

  // Weight lookups shared with the denominator construction; a zero bigram
  // entry on a required transition makes the transcript unrealizable.
  auto enter_w = [&](int32 phone) {
    double b = lm.bigram_logp(begin, phone);
    if (b == kLogZero)
      Infeasible("transcript cannot start with phone " +
                 std::to_string(phone));
    return b;
  };
  auto advance_w = [&](int32 from, int32 to) {
    double b = lm.bigram_logp(from, to);
    if (b == kLogZero)
      Infeasible("bigram forbids " + std::to_string(from) + "->" +
                 std::to_string(to));
    return log_leave + b;
  };
  auto final_w = [&](int32 phone) {
    double b = lm.bigram_logp(phone, end);
    if (b == kLogZero)
      Infeasible("transcript cannot end with phone " + std::to_string(phone));
    return log_leave + b;
  };

  Wfsa g;
  g.num_pdfs = lm.num_phones;

  if (!durations.has_value()) {
    // States 0..K-1 are transcript positions; state K is the start.
    g.num_states = K + 1;
    g.start = K;
    g.final_logw.assign(g.num_states, kLogZero);
    g.arcs.push_back({g.start, 0, transcript[0], enter_w(transcript[0])});
    for (int32 i = 0; i < K; i++) {
      g.arcs.push_back({i, i, transcript[i], log_stay});
      if (i + 1 < K)
        g.arcs.push_back({i, i + 1, transcript[i + 1],
                          advance_w(transcript[i], transcript[i + 1])});
    }
    g.final_logw[K - 1] = final_w(transcript[K - 1]);
  } else {
    // Position i unrolled into states (i, d), d = 1..max_dur(i), where d
    // counts frames of phone i consumed so far.
    std::vector<int32> base(K + 1, 0);  // state id of (i, 1)
    for (int32 i = 0; i < K; i++) base[i + 1] = base[i] + dur[i].max_dur;
    g.num_states = base[K] + 1;
    g.start = base[K];
    g.final_logw.assign(g.num_states, kLogZero);

    g.arcs.push_back({g.start, base[0], transcript[0], enter_w(transcript[0])});
    for (int32 i = 0; i < K; i++) {
      for (int32 d = 1; d <= dur[i].max_dur; d++) {
        int32 s = base[i] + (d - 1);
        if (d < dur[i].max_dur)
          g.arcs.push_back({s, s + 1, transcript[i], log_stay});
        if (d >= dur[i].min_dur) {
          if (i + 1 < K)
            g.arcs.push_back({s, base[i + 1], transcript[i + 1],
                              advance_w(transcript[i], transcript[i + 1])});
          else
            g.final_logw[s] = final_w(transcript[i]);
        }
      }
    }
  }

  ValidateWfsaOrThrow(g, "BuildNumeratorGraph");
  return g;
}

}  // namespace chainforge
