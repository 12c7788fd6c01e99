// chainforge/wfsa.h

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

#ifndef CHAINFORGE_WFSA_H_
#define CHAINFORGE_WFSA_H_

#include <iosfwd>
#include <string>
#include <vector>

#include "chainforge/common.h"

namespace chainforge {

// One arc of a weighted finite-state acceptor over pdf-ids.  Every arc
// consumes exactly one frame and scores pdf-id `pdf` on it; there is no
// epsilon.  Weights are natural-log probabilities.
struct WfsaArc {
  int32 src = 0;
  int32 dst = 0;
  int32 pdf = 0;
  double log_weight = 0.0;

  bool operator==(const WfsaArc &) const = default;
};

// Epsilon-free weighted acceptor with a single start state.  final_logw[s]
// is the log weight for ending a path at s; kLogZero marks a non-final
// state.  A path of T arcs from `start` to a final state accepts one
// length-T pdf sequence.
struct Wfsa {
  int32 num_states = 0;
  int32 start = 0;
  int32 num_pdfs = 0;
  std::vector<WfsaArc> arcs;
  std::vector<double> final_logw;  // size num_states

  bool operator==(const Wfsa &) const = default;
};

// Structural check result; `violations` lists one human-readable line per
// defect (out-of-range endpoints or pdfs, no final state, unreachable or
// non-coaccessible states), each naming the offending state/arc index.
struct WfsaCheckReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

WfsaCheckReport ValidateWfsa(const Wfsa &g);

// Throws std::invalid_argument with the first few violations if invalid.
void ValidateWfsaOrThrow(const Wfsa &g, const std::string &context);

// Text form:
//   wfsa <num_states> <start> <num_pdfs>
//   a <src> <dst> <pdf> <log_weight>     (one line per arc)
//   f <state> <log_weight>               (one line per final state)
//   .
// Weights are printed with 17 significant digits so doubles round-trip.
// The arc line accepts an optional sixth field (an output label) so that
// decoding graphs share this format; the plain reader rejects it unless
// `arc_labels` is non-null.
void WriteWfsaText(const Wfsa &g, std::ostream &os,
                   const std::vector<int32> *arc_labels = nullptr);
Wfsa ReadWfsaText(std::istream &is, std::vector<int32> *arc_labels = nullptr);

void WriteWfsaFile(const Wfsa &g, const std::string &path,
                   const std::vector<int32> *arc_labels = nullptr);
Wfsa ReadWfsaFile(const std::string &path,
                  std::vector<int32> *arc_labels = nullptr);

// Indexes arcs by source state; `row(s)` yields indices into g.arcs in
// ascending order.  Used by the forward-backward and Viterbi sweeps.
struct ArcIndex {
  explicit ArcIndex(const Wfsa &g);
  const std::vector<int32> &Row(int32 state) const { return rows_[state]; }

 private:
  std::vector<std::vector<int32>> rows_;
};

}  // namespace chainforge

#endif  // CHAINFORGE_WFSA_H_
