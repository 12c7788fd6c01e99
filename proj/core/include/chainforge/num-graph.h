// chainforge/num-graph.h

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

#ifndef CHAINFORGE_NUM_GRAPH_H_
#define CHAINFORGE_NUM_GRAPH_H_

#include <optional>
#include <vector>

#include "chainforge/phone-lm.h"
#include "chainforge/wfsa.h"

namespace chainforge {

// Inclusive duration bounds, in frames, for one phone of a transcript.
struct DurationRange {
  int32 min_dur = 1;
  int32 max_dur = 1;
};

// Numerator (supervision) graph: a left-to-right chain over the transcript
// whose arcs reuse the denominator weights, so every accepted path is also
// a denominator path with identical per-arc weights.
//
// Unconstrained (no `durations`): one emitting state per transcript
// position with a self-loop (log self_loop_prob) and an advance arc
// (log(1-self_loop_prob) + bigram), entered from a start state whose arc
// carries the begin-symbol mass.  Accepts exactly the pdf sequences that
// realize the transcript, with any length >= len(transcript).
//
// Constrained: position i is unrolled into max_dur(i) duration states;
// advancing (or finishing) is only possible once min_dur(i) frames of the
// phone have been consumed.  `durations` must have one entry per transcript
// position, or a single entry applied to all.
//
// num_frames is the frame budget the supervision must fit; infeasible
// transcripts (too long for the budget, duration windows that cannot sum to
// it, or bigram holes on required transitions) raise
// std::invalid_argument("infeasible supervision: ...").
Wfsa BuildNumeratorGraph(
    const std::vector<int32> &transcript, const PhoneLm &lm, int32 num_frames,
    const std::optional<std::vector<DurationRange>> &durations = std::nullopt);

}  // namespace chainforge

#endif  // CHAINFORGE_NUM_GRAPH_H_
