// core/include/chainforge/egs.h

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

#ifndef CHAINFORGE_EGS_H_
#define CHAINFORGE_EGS_H_

#include <iosfwd>
#include <string>
#include <vector>

#include "chainforge/common.h"
#include "chainforge/matrix.h"
#include "chainforge/phone-lm.h"
#include "chainforge/wfsa.h"

namespace chainforge {

// One training example: a fixed-width feature window (with model context
// padding) plus its chunk-level numerator supervision.
struct EgsChunk {
  std::string key;   // "<utterance>-<chunk index>"
  Mat input;         // (chunk_width + left + right) x feat_dim
  Wfsa supervision;  // numerator graph over output_frames frames
  int32 chunk_width = 0;
  int32 output_frames = 0;  // ceil(chunk_width / subsample_factor)

  bool operator==(const EgsChunk &) const = default;
};

struct EgsOptions {
  int32 chunk_width = 140;
  int32 subsample_factor = 3;
  int32 left_context = 0;
  int32 right_context = 0;
};

// Splits one utterance into chunks of chunk_width frames starting at
// 0, w, 2w, ...; a final partial window is shifted left so every frame is
// covered (the shifted chunk overlaps its predecessor).  Context frames
// beyond the utterance edges replicate the edge frame.  Each chunk's
// supervision is the numerator graph of the transcript span overlapping the
// chunk, with the transcript spread uniformly over the utterance.
//
// Throws "utterance too short" when the utterance has fewer than chunk_width
// frames, and "infeasible supervision" when a chunk's transcript span cannot
// fit its output_frames budget.
std::vector<EgsChunk> MakeEgs(const std::string &utt_key, const Mat &feats,
                              const std::vector<int32> &transcript,
                              const PhoneLm &lm, const EgsOptions &opts);

// Seeded Fisher-Yates permutation of [0, num_egs) followed by round-robin
// assignment to num_jobs lists (job j takes permuted positions j, j+J, ...).
std::vector<std::vector<int32>> ShardAndShuffleIndices(int32 num_egs,
                                                       int32 num_jobs,
                                                       uint64 seed);

std::vector<std::vector<EgsChunk>> ShardAndShuffle(
    const std::vector<EgsChunk> &egs, int32 num_jobs, uint64 seed);

// Serialized form: per chunk, the line
//   <key> EGS001 <chunk_width> <output_frames>
// followed by the input matrix in the binary archive value layout, then the
// supervision in Wfsa text form.
void WriteEgsArk(const std::vector<EgsChunk> &egs, std::ostream &os);
std::vector<EgsChunk> ReadEgsArk(std::istream &is);

void WriteEgsFile(const std::vector<EgsChunk> &egs, const std::string &path);
std::vector<EgsChunk> ReadEgsFile(const std::string &path);

}  // namespace chainforge

#endif  // CHAINFORGE_EGS_H_
