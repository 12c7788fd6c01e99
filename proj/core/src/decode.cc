// core/src/decode.cc

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

#include "chainforge/decode.h"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "chainforge/den-graph.h"

namespace chainforge {

void ValidateDecodeGraphOrThrow(const DecodeGraph &g) {
  ValidateWfsaOrThrow(g.graph, "decode graph");
  if (g.arc_words.size() != g.graph.arcs.size())
    throw std::invalid_argument("decode graph: arc_words size mismatch");
  for (int32 w : g.arc_words)
    if (w < 0 || size_t(w) >= g.word_table.size())
      throw std::invalid_argument("decode graph: word id " +
                                  std::to_string(w) + " outside table");
  for (size_t i = 1; i < g.word_table.size(); i++) {
    const std::string &w = g.word_table[i];
    if (w.empty() || w.find_first_of(" \t\n") != std::string::npos)
      throw std::invalid_argument("decode graph: bad word '" + w + "'");
  }
}

DecodeGraph BuildDecodeGraph(const PhoneLm &lm,
                             const std::vector<std::string> &phone_words) {
  if (int32(phone_words.size()) != lm.num_phones)
    throw std::invalid_argument("need one word per phone");
  DecodeGraph g;
  g.graph = BuildDenominatorGraph(lm);
  g.arc_words.reserve(g.graph.arcs.size());
  // Every arc emits its destination phone's pdf; entering a phone from a
  // different state starts a new word occurrence, self-loops continue it.
  for (const WfsaArc &a : g.graph.arcs)
    g.arc_words.push_back(a.src != a.dst ? a.pdf + 1 : 0);
  g.word_table.push_back("<eps>");
  for (const std::string &w : phone_words) g.word_table.push_back(w);
  ValidateDecodeGraphOrThrow(g);
  return g;
}

void WriteDecodeGraphText(const DecodeGraph &g, std::ostream &os) {
  WriteWfsaText(g.graph, os, &g.arc_words);
  os << "words " << g.word_table.size() << '\n';
  for (size_t i = 0; i < g.word_table.size(); i++)
    os << g.word_table[i] << ' ' << i << '\n';
  os << ".\n";
}

DecodeGraph ReadDecodeGraphText(std::istream &is) {
  DecodeGraph g;
  g.graph = ReadWfsaText(is, &g.arc_words);
  std::string line;
  if (!std::getline(is, line))
    throw std::runtime_error("decode graph: missing words section");
  size_t count = 0;
  {
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag >> count) || tag != "words")
      throw std::runtime_error("decode graph: expected 'words <count>', got '" +
                               line + "'");
  }
  g.word_table.assign(count, "");
  for (size_t i = 0; i < count; i++) {
    if (!std::getline(is, line))
      throw std::runtime_error("decode graph: truncated word table");
    std::istringstream ss(line);
    std::string word;
    int64 id = -1;
    if (!(ss >> word >> id) || id < 0 || size_t(id) >= count)
      throw std::runtime_error("decode graph: bad word table line '" + line +
                               "'");
    if (!g.word_table[id].empty())
      throw std::runtime_error("decode graph: duplicate word id " +
                               std::to_string(id));
    g.word_table[id] = word;
  }
  if (!std::getline(is, line) || line != ".")
    throw std::runtime_error("decode graph: missing word table terminator");
  ValidateDecodeGraphOrThrow(g);
  return g;
}

void WriteDecodeGraphFile(const DecodeGraph &g, const std::string &path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  WriteDecodeGraphText(g, os);
  if (!os) throw std::runtime_error("write failed: " + path);
}

DecodeGraph ReadDecodeGraphFile(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  return ReadDecodeGraphText(is);
}

std::vector<std::string> ReadWordTableFile(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  std::vector<std::pair<std::string, int64>> entries;
  std::string line;
  int64 max_id = 0, line_no = 0;
  while (std::getline(is, line)) {
    line_no++;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string word;
    int64 id = 0;
    if (!(ss >> word >> id) || id <= 0)
      throw std::runtime_error("bad word table line " +
                               std::to_string(line_no) + ": '" + line + "'");
    entries.emplace_back(word, id);
    max_id = std::max(max_id, id);
  }
  std::vector<std::string> table(size_t(max_id) + 1, "");
  table[0] = "<eps>";
  for (const auto &[word, id] : entries) {
    if (!table[id].empty())
      throw std::runtime_error("duplicate word id " + std::to_string(id) +
                               " in " + path);
    table[id] = word;
  }
  for (size_t i = 1; i < table.size(); i++)
    if (table[i].empty())
      throw std::runtime_error("word table has a gap at id " +
                               std::to_string(i));
  return table;
}

void WriteWordTableFile(const std::vector<std::string> &table,
                        const std::string &path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  for (size_t i = 1; i < table.size(); i++)
    os << table[i] << ' ' << i << '\n';
  if (!os) throw std::runtime_error("write failed: " + path);
}

ViterbiResult Viterbi(const DecodeGraph &dg, const MatD &loglikes,
                      double acoustic_scale) {
  ValidateDecodeGraphOrThrow(dg);
  const Wfsa &g = dg.graph;
  if (loglikes.NumCols() != g.num_pdfs)
    throw std::invalid_argument("loglikes have " +
                                std::to_string(loglikes.NumCols()) +
                                " columns, graph expects " +
                                std::to_string(g.num_pdfs));
  const int32 T = loglikes.NumRows(), S = g.num_states;
  ArcIndex index(g);

  std::vector<double> delta(S, kLogZero), next(S);
  delta[g.start] = 0.0;
  // bp[t][s]: index of the arc that won state s at frame t.
  std::vector<std::vector<int32>> bp(T, std::vector<int32>(S, -1));
  for (int32 t = 0; t < T; t++) {
    std::fill(next.begin(), next.end(), kLogZero);
    for (int32 src = 0; src < S; src++) {
      if (delta[src] == kLogZero) continue;
      for (int32 ai : index.Row(src)) {
        const WfsaArc &a = g.arcs[ai];
        double score =
            delta[src] + a.log_weight + acoustic_scale * loglikes(t, a.pdf);
        // Strictly-greater keeps the smallest (source state, arc index)
        // among ties, given the ascending sweep order.
        if (score > next[a.dst]) {
          next[a.dst] = score;
          bp[t][a.dst] = ai;
        }
      }
    }
    delta.swap(next);
  }

  int32 best_state = -1;
  double best = kLogZero;
  for (int32 s = 0; s < S; s++) {
    if (delta[s] == kLogZero || g.final_logw[s] == kLogZero) continue;
    double score = delta[s] + g.final_logw[s];
    if (score > best) {
      best = score;
      best_state = s;
    }
  }
  if (best_state < 0)
    throw EmptyCompositionError(
        "empty composition: no accepted path of length " + std::to_string(T));

  std::vector<int32> arc_seq(T);
  for (int32 t = T - 1, s = best_state; t >= 0; t--) {
    arc_seq[t] = bp[t][s];
    s = g.arcs[arc_seq[t]].src;
  }
  ViterbiResult result;
  result.log_score = best;
  for (int32 ai : arc_seq) {
    int32 wid = dg.arc_words[ai];
    if (wid == 0) continue;
    result.word_ids.push_back(wid);
    result.words.push_back(dg.word_table[wid]);
  }
  return result;
}

Mat EmitLoglikes(const Network &net, const Mat &feats,
                 int32 subsample_factor) {
  if (subsample_factor < 1)
    throw std::invalid_argument("subsample factor must be >= 1");
  const int32 internal = StrideProduct(net.layers);
  if (subsample_factor % internal != 0)
    throw std::invalid_argument(
        "subsample factor " + std::to_string(subsample_factor) +
        " is not a multiple of the model's stride product " +
        std::to_string(internal));
  Mat out = Forward(net, feats);
  const int32 remaining = subsample_factor / internal;
  if (remaining == 1) return out;
  Mat strided((out.NumRows() + remaining - 1) / remaining, out.NumCols());
  for (int32 j = 0; j < strided.NumRows(); j++)
    for (int32 c = 0; c < out.NumCols(); c++)
      strided(j, c) = out(j * remaining, c);
  return strided;
}

WerResult ComputeWer(const std::vector<std::string> &ref,
                     const std::vector<std::string> &hyp) {
  if (ref.empty())
    throw std::invalid_argument("WER needs a non-empty reference");
  const size_t R = ref.size(), H = hyp.size();
  // d[i][j]: edit distance between ref[0..i) and hyp[0..j).
  std::vector<std::vector<int32>> d(R + 1, std::vector<int32>(H + 1, 0));
  for (size_t i = 0; i <= R; i++) d[i][0] = int32(i);
  for (size_t j = 0; j <= H; j++) d[0][j] = int32(j);
  for (size_t i = 1; i <= R; i++)
    for (size_t j = 1; j <= H; j++)
      d[i][j] = std::min({d[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1] ? 1 : 0),
                          d[i - 1][j] + 1, d[i][j - 1] + 1});

  WerResult result;
  result.ref_len = int32(R);
  size_t i = R, j = H;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 &&
        d[i][j] == d[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1] ? 1 : 0)) {
      if (ref[i - 1] != hyp[j - 1]) result.substitutions++;
      i--;
      j--;
    } else if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
      result.deletions++;
      i--;
    } else {
      result.insertions++;
      j--;
    }
  }
  return result;
}

std::vector<std::pair<std::string, std::vector<std::string>>>
ReadTranscriptLines(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  std::vector<std::pair<std::string, std::vector<std::string>>> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string key, word;
    if (!(ss >> key))
      continue;
    std::vector<std::string> words;
    while (ss >> word) words.push_back(word);
    out.emplace_back(key, std::move(words));
  }
  return out;
}

}  // namespace chainforge
