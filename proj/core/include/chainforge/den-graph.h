// chainforge/den-graph.h

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

#ifndef CHAINFORGE_DEN_GRAPH_H_
#define CHAINFORGE_DEN_GRAPH_H_

#include "chainforge/phone-lm.h"
#include "chainforge/wfsa.h"

namespace chainforge {

// Phone-loop denominator graph for the bigram LM.
//
// One emitting state per phone p (state id == pdf id == p), carrying a
// self-loop of weight log(self_loop_prob), cross arcs p->q of weight
// log(1-self_loop_prob) + bigram_logp[p][q] (omitted when the bigram entry
// is zero), and final weight log(1-self_loop_prob) + bigram_logp[p][end].
// A conceptual non-emitting start would need epsilon arcs, which this
// acceptor forbids; instead the begin-symbol bigram mass sits on the arcs
// of a dedicated entry state (index num_phones, the graph's start), each of
// which consumes the first frame while entering phone q.  Every state's
// outgoing mass (arcs plus final) sums to one.
Wfsa BuildDenominatorGraph(const PhoneLm &lm);

// Stationary distribution over states: 100 power-iteration steps of the
// row-normalized transition-probability matrix, starting from uniform, the
// iterate renormalized to sum one after each step.  Used as the leaky-HMM
// leak distribution.
LeakyInit StationaryDistribution(const Wfsa &g);

}  // namespace chainforge

#endif  // CHAINFORGE_DEN_GRAPH_H_
