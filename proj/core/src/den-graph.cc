// core/src/den-graph.cc

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

#include "chainforge/den-graph.h"

#include <cmath>

namespace chainforge {

Wfsa BuildDenominatorGraph(const PhoneLm &lm) {
  ValidatePhoneLm(lm);
  const int32 P = lm.num_phones, begin = lm.Boundary(), end = lm.Boundary();

  // A phone whose row carries no mass at all can neither continue nor end;
  // ValidatePhoneLm already rejects such rows, but keep the check explicit
  // for callers constructing models by hand.
  for (int32 p = 0; p < P; p++) {
    bool alive = false;
    for (int32 q = 0; q <= P; q++)
      if (lm.bigram_logp(p, q) != kLogZero) alive = true;
    if (!alive)
      throw std::invalid_argument("dead phone state " + std::to_string(p));
  }

  Wfsa g;
  g.num_states = P + 1;  // phones 0..P-1, entry state P
  g.start = P;
  g.num_pdfs = P;
  g.final_logw.assign(g.num_states, kLogZero);

  const double log_stay = std::log(lm.self_loop_prob);
  const double log_leave = std::log(1.0 - lm.self_loop_prob);

  for (int32 q = 0; q < P; q++) {
    double b = lm.bigram_logp(begin, q);
    if (b != kLogZero) g.arcs.push_back({g.start, q, q, b});
  }
  for (int32 p = 0; p < P; p++) {
    g.arcs.push_back({p, p, p, log_stay});
    for (int32 q = 0; q < P; q++) {
      double b = lm.bigram_logp(p, q);
      if (b != kLogZero) g.arcs.push_back({p, q, q, log_leave + b});
    }
    double e = lm.bigram_logp(p, end);
    if (e != kLogZero) g.final_logw[p] = log_leave + e;
  }

  ValidateWfsaOrThrow(g, "BuildDenominatorGraph");
  return g;
}

LeakyInit StationaryDistribution(const Wfsa &g) {
  ValidateWfsaOrThrow(g, "StationaryDistribution");
  const int32 S = g.num_states;
  constexpr int32 kNumIters = 100;

  // Row-normalized transition probabilities (final mass excluded; rows
  // without arcs stay zero and simply lose their mass, restored by the
  // per-step renormalization).
  std::vector<double> row_sum(S, 0.0);
  for (const WfsaArc &a : g.arcs) row_sum[a.src] += std::exp(a.log_weight);

  std::vector<double> cur(S, 1.0 / S), next(S);
  for (int32 iter = 0; iter < kNumIters; iter++) {
    std::fill(next.begin(), next.end(), 0.0);
    for (const WfsaArc &a : g.arcs)
      if (row_sum[a.src] > 0.0)
        next[a.dst] += cur[a.src] * std::exp(a.log_weight) / row_sum[a.src];
    double total = 0.0;
    for (double v : next) total += v;
    if (total <= 0.0) break;  // all mass absorbed; keep the last iterate
    for (int32 s = 0; s < S; s++) cur[s] = next[s] / total;
  }
  return LeakyInit{cur};
}

}  // namespace chainforge
