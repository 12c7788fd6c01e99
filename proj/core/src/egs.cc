// core/src/egs.cc

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

#include "chainforge/egs.h"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

#include "chainforge/ark-io.h"
#include "chainforge/num-graph.h"

namespace chainforge {

namespace {

int32 Clamp(int32 v, int32 lo, int32 hi) {
  return std::max(lo, std::min(v, hi));
}

}  // namespace

std::vector<EgsChunk> MakeEgs(const std::string &utt_key, const Mat &feats,
                              const std::vector<int32> &transcript,
                              const PhoneLm &lm, const EgsOptions &opts) {
  const int32 n = feats.NumRows(), w = opts.chunk_width;
  if (w < 1 || opts.subsample_factor < 1 || opts.left_context < 0 ||
      opts.right_context < 0)
    throw std::invalid_argument("bad egs options");
  if (transcript.empty())
    throw std::invalid_argument("empty transcript for utterance " + utt_key);
  if (n < w)
    throw std::runtime_error("utterance too short: " + utt_key + " has " +
                             std::to_string(n) + " frames < chunk width " +
                             std::to_string(w));
  const int64 K = int64(transcript.size());
  if (K > n)
    throw std::runtime_error("infeasible supervision: utterance " + utt_key +
                             " has more phones than frames");

  // Chunk starts: multiples of w, plus a left-shifted final chunk when the
  // tail is partial.
  std::vector<int32> starts;
  for (int32 s = 0; s + w <= n; s += w) starts.push_back(s);
  if (starts.back() + w < n) starts.push_back(n - w);

  // The transcript is spread uniformly: phone k covers frames
  // [floor(k n / K), floor((k+1) n / K)).
  auto phone_begin = [n, K](int64 k) { return int32(k * n / K); };

  const int32 output_frames =
      (w + opts.subsample_factor - 1) / opts.subsample_factor;
  std::vector<EgsChunk> egs;
  for (size_t ci = 0; ci < starts.size(); ci++) {
    const int32 s = starts[ci];
    EgsChunk chunk;
    chunk.key = utt_key + "-" + std::to_string(ci);
    chunk.chunk_width = w;
    chunk.output_frames = output_frames;

    chunk.input.Resize(w + opts.left_context + opts.right_context,
                       feats.NumCols());
    for (int32 r = 0; r < chunk.input.NumRows(); r++) {
      int32 src = Clamp(s - opts.left_context + r, 0, n - 1);
      std::memcpy(chunk.input.RowData(r), feats.RowData(src),
                  size_t(feats.NumCols()) * sizeof(float));
    }

    // Transcript span: phones whose interval intersects [s, s+w).
    int64 k_lo = 0;
    while (k_lo + 1 < K && phone_begin(k_lo + 1) <= s) k_lo++;
    int64 k_hi = k_lo;
    while (k_hi + 1 < K && phone_begin(k_hi + 1) < s + w) k_hi++;
    std::vector<int32> span(transcript.begin() + k_lo,
                            transcript.begin() + k_hi + 1);
    if (int32(span.size()) > output_frames)
      throw std::runtime_error(
          "infeasible supervision: chunk " + chunk.key + " spans " +
          std::to_string(span.size()) + " phones > " +
          std::to_string(output_frames) + " output frames");
    chunk.supervision = BuildNumeratorGraph(span, lm, output_frames);
    egs.push_back(std::move(chunk));
  }
  return egs;
}

std::vector<std::vector<int32>> ShardAndShuffleIndices(int32 num_egs,
                                                       int32 num_jobs,
                                                       uint64 seed) {
  if (num_egs < 0 || num_jobs < 1)
    throw std::invalid_argument("bad shard arguments");
  std::vector<int32> perm(num_egs);
  for (int32 i = 0; i < num_egs; i++) perm[i] = i;
  Rng rng(seed);
  for (int32 i = num_egs - 1; i > 0; i--)
    std::swap(perm[i], perm[rng.UniformInt(i + 1)]);
  std::vector<std::vector<int32>> shards(num_jobs);
  for (int32 i = 0; i < num_egs; i++)
    shards[i % num_jobs].push_back(perm[i]);
  return shards;
}

std::vector<std::vector<EgsChunk>> ShardAndShuffle(
    const std::vector<EgsChunk> &egs, int32 num_jobs, uint64 seed) {
  std::vector<std::vector<int32>> idx =
      ShardAndShuffleIndices(int32(egs.size()), num_jobs, seed);
  std::vector<std::vector<EgsChunk>> shards(idx.size());
  for (size_t j = 0; j < idx.size(); j++)
    for (int32 i : idx[j]) shards[j].push_back(egs[i]);
  return shards;
}

void WriteEgsArk(const std::vector<EgsChunk> &egs, std::ostream &os) {
  for (const EgsChunk &chunk : egs) {
    if (chunk.key.empty() ||
        chunk.key.find_first_of(" \t\n") != std::string::npos)
      throw std::invalid_argument("bad egs key '" + chunk.key + "'");
    os << chunk.key << " EGS001 " << chunk.chunk_width << ' '
       << chunk.output_frames << '\n';
    WriteMatrixValue(chunk.input, os);
    WriteWfsaText(chunk.supervision, os);
  }
  if (!os) throw std::runtime_error("egs write failed");
}

std::vector<EgsChunk> ReadEgsArk(std::istream &is) {
  std::vector<EgsChunk> egs;
  std::string header;
  while (std::getline(is, header)) {
    if (header.empty()) continue;
    std::istringstream hs(header);
    EgsChunk chunk;
    std::string magic;
    if (!(hs >> chunk.key >> magic >> chunk.chunk_width >>
          chunk.output_frames) ||
        magic != "EGS001")
      throw std::runtime_error("bad egs record header '" + header + "'");
    chunk.input = ReadMatrixValue(is, int64(is.tellg()));
    chunk.supervision = ReadWfsaText(is);
    egs.push_back(std::move(chunk));
  }
  return egs;
}

void WriteEgsFile(const std::vector<EgsChunk> &egs, const std::string &path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  WriteEgsArk(egs, os);
}

std::vector<EgsChunk> ReadEgsFile(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  return ReadEgsArk(is);
}

}  // namespace chainforge
