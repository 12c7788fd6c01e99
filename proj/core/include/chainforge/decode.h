// core/include/chainforge/decode.h

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

#ifndef CHAINFORGE_DECODE_H_
#define CHAINFORGE_DECODE_H_

#include <string>
#include <utility>
#include <vector>

#include "chainforge/common.h"
#include "chainforge/matrix.h"
#include "chainforge/nnet.h"
#include "chainforge/phone-lm.h"
#include "chainforge/wfsa.h"

namespace chainforge {

// A Wfsa whose arcs additionally carry an output word id (0 = none), plus
// the id -> string table.  Serialized as the Wfsa text form with the word id
// as a sixth arc field, followed by a `words` section listing the table.
struct DecodeGraph {
  Wfsa graph;
  std::vector<int32> arc_words;         // parallel to graph.arcs
  std::vector<std::string> word_table;  // index 0 reserved for "<eps>"

  bool operator==(const DecodeGraph &) const = default;
};

void ValidateDecodeGraphOrThrow(const DecodeGraph &g);

// Denominator-graph topology with one word per phone: arcs that enter phone
// q from a different state emit word q+1, self-loops emit nothing.
// phone_words[q] names phone q's word; the table gets "<eps>" at index 0.
DecodeGraph BuildDecodeGraph(const PhoneLm &lm,
                             const std::vector<std::string> &phone_words);

void WriteDecodeGraphText(const DecodeGraph &g, std::ostream &os);
DecodeGraph ReadDecodeGraphText(std::istream &is);
void WriteDecodeGraphFile(const DecodeGraph &g, const std::string &path);
DecodeGraph ReadDecodeGraphFile(const std::string &path);

// Word-id -> word-string table file, one `<word> <id>` line per word.
// Ids must be positive (0 stays "<eps>"); gaps are not allowed.
std::vector<std::string> ReadWordTableFile(const std::string &path);
void WriteWordTableFile(const std::vector<std::string> &table,
                        const std::string &path);

struct ViterbiResult {
  std::vector<int32> word_ids;      // non-zero ids along the best path
  std::vector<std::string> words;   // looked up in the table
  double log_score = kLogZero;
};

// Exact best-path search: maximizes sum of arc log_weight +
// acoustic_scale*o(t,pdf) over length-T paths, plus the final weight.
// Ties broken toward the smallest (source state, arc index).  Throws
// EmptyCompositionError when no path of length T is accepted.
ViterbiResult Viterbi(const DecodeGraph &g, const MatD &loglikes,
                      double acoustic_scale = 1.0);

// Eval-mode forward pass producing one output row per subsampled frame.
// subsample_factor must be a multiple of the model's internal stride
// product; the remaining factor is applied by striding the output rows.
Mat EmitLoglikes(const Network &net, const Mat &feats,
                 int32 subsample_factor);

struct WerResult {
  int32 substitutions = 0;
  int32 deletions = 0;
  int32 insertions = 0;
  int32 ref_len = 0;
  int32 NumErrors() const { return substitutions + deletions + insertions; }
  double Percent() const { return 100.0 * NumErrors() / ref_len; }
};

// Levenshtein alignment with unit costs; ambiguous tracebacks prefer
// substitution/match over deletion over insertion.
WerResult ComputeWer(const std::vector<std::string> &ref,
                     const std::vector<std::string> &hyp);

// Reads "<key> <word> <word> ..." lines (e.g. ref.txt / hyp.txt).
std::vector<std::pair<std::string, std::vector<std::string>>>
ReadTranscriptLines(const std::string &path);

}  // namespace chainforge

#endif  // CHAINFORGE_DECODE_H_
