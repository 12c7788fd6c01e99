// tests/decode-test.cc

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

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "chainforge/decode.h"
#include "chainforge/den-graph.h"
#include "doctest.h"
#include "testing-util.h"

namespace chainforge {
namespace {

using testing::RandomPhoneLm;
using testing::TempPath;
using testing::ThrownMessage;
using testing::TwoPhoneLm;

// Exhaustive best path: tries every length-T arc sequence from the start
// state.  Scores are unique with probability one for random loglikes, so no
// tie-breaking is needed here.
void BestPathRec(const DecodeGraph &g, const MatD &loglikes, double scale,
                 int32 t, int32 state, double score,
                 std::vector<int32> *words, double *best,
                 std::vector<int32> *best_words) {
  if (t == loglikes.NumRows()) {
    if (g.graph.final_logw[state] == kLogZero) return;
    if (score + g.graph.final_logw[state] > *best) {
      *best = score + g.graph.final_logw[state];
      *best_words = *words;
    }
    return;
  }
  for (size_t ai = 0; ai < g.graph.arcs.size(); ai++) {
    const WfsaArc &a = g.graph.arcs[ai];
    if (a.src != state) continue;
    if (g.arc_words[ai] != 0) words->push_back(g.arc_words[ai]);
    BestPathRec(g, loglikes, scale, t + 1, a.dst,
                score + a.log_weight + scale * loglikes(t, a.pdf), words,
                best, best_words);
    if (g.arc_words[ai] != 0) words->pop_back();
  }
}

std::pair<double, std::vector<int32>> BestPath(const DecodeGraph &g,
                                               const MatD &loglikes,
                                               double scale) {
  double best = kLogZero;
  std::vector<int32> words, best_words;
  BestPathRec(g, loglikes, scale, 0, g.graph.start, 0.0, &words, &best,
              &best_words);
  return {best, best_words};
}

TEST_SUITE("decode") {

TEST_CASE("the decode graph words every state-changing arc") {
  DecodeGraph g = BuildDecodeGraph(TwoPhoneLm(), {"alpha", "beta"});
  CHECK(g.word_table ==
        std::vector<std::string>{"<eps>", "alpha", "beta"});
  REQUIRE(g.arc_words.size() == g.graph.arcs.size());
  for (size_t i = 0; i < g.graph.arcs.size(); i++) {
    const WfsaArc &a = g.graph.arcs[i];
    CHECK(g.arc_words[i] == (a.src != a.dst ? a.pdf + 1 : 0));
  }
  CHECK(ThrownMessage([&] { BuildDecodeGraph(TwoPhoneLm(), {"solo"}); })
            .find("need one word per phone") != std::string::npos);
}

TEST_CASE("viterbi finds the exhaustive best path") {
  Rng rng(71);
  for (int trial = 0; trial < 12; trial++) {
    PhoneLm lm = RandomPhoneLm(2 + int32(rng.UniformInt(2)), &rng);
    std::vector<std::string> names;
    for (int32 q = 0; q < lm.num_phones; q++)
      names.push_back("w" + std::to_string(q));
    DecodeGraph g = BuildDecodeGraph(lm, names);
    int32 T = 2 + int32(rng.UniformInt(3));
    MatD loglikes(T, lm.num_phones);
    testing::FillGaussian(&loglikes, &rng);
    for (double scale : {1.0, 0.3}) {
      auto [want_score, want_words] = BestPath(g, loglikes, scale);
      ViterbiResult got = Viterbi(g, loglikes, scale);
      CHECK(got.log_score ==
            doctest::Approx(want_score).epsilon(1e-12));
      CHECK(got.word_ids == want_words);
      REQUIRE(got.words.size() == got.word_ids.size());
      for (size_t i = 0; i < got.words.size(); i++)
        CHECK(got.words[i] == g.word_table[got.word_ids[i]]);
    }
  }
}

TEST_CASE("a zero acoustic scale decodes on graph weights alone") {
  Rng rng(72);
  PhoneLm lm = RandomPhoneLm(3, &rng);
  std::vector<std::string> names = {"a", "b", "c"};
  DecodeGraph g = BuildDecodeGraph(lm, names);
  MatD loglikes(4, 3);
  testing::FillGaussian(&loglikes, &rng);
  MatD zeros(4, 3);
  ViterbiResult got = Viterbi(g, loglikes, 0.0);
  ViterbiResult want = Viterbi(g, zeros, 1.0);
  CHECK(got.word_ids == want.word_ids);
  CHECK(got.log_score == doctest::Approx(want.log_score).epsilon(1e-12));
}

TEST_CASE("exact ties go to the earliest arc") {
  DecodeGraph g;
  g.graph.num_states = 3;
  g.graph.start = 0;
  g.graph.num_pdfs = 1;
  g.graph.arcs = {{0, 1, 0, std::log(0.5)}, {0, 2, 0, std::log(0.5)}};
  g.graph.final_logw = {kLogZero, 0.0, 0.0};
  g.arc_words = {1, 2};
  g.word_table = {"<eps>", "first", "second"};
  MatD loglikes(1, 1);

  ViterbiResult r = Viterbi(g, loglikes);
  CHECK(r.words == std::vector<std::string>{"first"});

  // Nudging the later arc above the tie flips the winner.
  g.graph.arcs[1].log_weight += 1e-6;
  r = Viterbi(g, loglikes);
  CHECK(r.words == std::vector<std::string>{"second"});
}

TEST_CASE("viterbi rejects impossible lengths and bad shapes") {
  DecodeGraph g;
  g.graph.num_states = 2;
  g.graph.start = 0;
  g.graph.num_pdfs = 1;
  g.graph.arcs = {{0, 1, 0, 0.0}};
  g.graph.final_logw = {kLogZero, 0.0};
  g.arc_words = {1};
  g.word_table = {"<eps>", "only"};

  CHECK(Viterbi(g, MatD(1, 1)).words == std::vector<std::string>{"only"});
  std::string msg = ThrownMessage([&] { Viterbi(g, MatD(2, 1)); });
  CHECK(msg.find("empty composition: no accepted path of length 2") !=
        std::string::npos);
  CHECK_THROWS_AS(Viterbi(g, MatD(2, 1)), EmptyCompositionError);
  CHECK(ThrownMessage([&] { Viterbi(g, MatD(1, 3)); })
            .find("loglikes have 3 columns, graph expects 1") !=
        std::string::npos);

  DecodeGraph bad = g;
  bad.arc_words = {7};
  CHECK(ThrownMessage([&] { Viterbi(bad, MatD(1, 1)); })
            .find("word id 7 outside table") != std::string::npos);
  bad = g;
  bad.arc_words = {1, 1};
  CHECK(ThrownMessage([&] { Viterbi(bad, MatD(1, 1)); })
            .find("arc_words size mismatch") != std::string::npos);
}

TEST_CASE("emitted loglikes honor model stride and extra striding") {
  // An identity affine net passes features through.
  Network id = InitNetwork({ParseLayerSpec("affine 2 2")}, 1);
  id.params[0].w.Resize(2, 2);
  id.params[0].w(0, 0) = 1.0f;
  id.params[0].w(1, 1) = 1.0f;
  id.params[0].b.Resize(1, 2);
  Mat feats = Mat(9, 2);
  Rng rng(73);
  testing::FillGaussian(&feats, &rng);

  Mat out = EmitLoglikes(id, feats, 1);
  CHECK(out == feats);
  out = EmitLoglikes(id, feats, 3);  // stride applied by the caller side
  REQUIRE(out.NumRows() == 3);
  for (int32 j = 0; j < 3; j++)
    for (int32 c = 0; c < 2; c++) CHECK(out(j, c) == feats(3 * j, c));

  // A net with an internal stride divides the requested factor.
  Network sub = InitNetwork({ParseLayerSpec("subsample 2 2")}, 1);
  out = EmitLoglikes(sub, feats, 2);
  REQUIRE(out.NumRows() == 5);
  for (int32 j = 0; j < 5; j++)
    for (int32 c = 0; c < 2; c++) CHECK(out(j, c) == feats(2 * j, c));
  out = EmitLoglikes(sub, feats, 4);
  REQUIRE(out.NumRows() == 3);
  for (int32 j = 0; j < 3; j++)
    for (int32 c = 0; c < 2; c++) CHECK(out(j, c) == feats(4 * j, c));

  CHECK(ThrownMessage([&] { EmitLoglikes(sub, feats, 3); })
            .find("subsample factor 3 is not a multiple of the model's "
                  "stride product 2") != std::string::npos);
  CHECK(ThrownMessage([&] { EmitLoglikes(sub, feats, 0); })
            .find("subsample factor must be >= 1") != std::string::npos);
}

TEST_CASE("word error rates count each edit type") {
  auto wer = [](const std::vector<std::string> &ref,
                const std::vector<std::string> &hyp) {
    return ComputeWer(ref, hyp);
  };
  WerResult r = wer({"a", "b", "c"}, {"a", "b", "c"});
  CHECK(r.NumErrors() == 0);
  CHECK(r.Percent() == 0.0);
  CHECK(r.ref_len == 3);

  r = wer({"a", "b", "c"}, {"a", "x", "c"});
  CHECK(r.substitutions == 1);
  CHECK(r.deletions == 0);
  CHECK(r.insertions == 0);

  r = wer({"a", "b", "c"}, {"a", "c"});
  CHECK(r.deletions == 1);
  CHECK(r.NumErrors() == 1);

  r = wer({"a", "c"}, {"a", "b", "c"});
  CHECK(r.insertions == 1);

  // One word against a different word is a substitution, not del+ins.
  r = wer({"a"}, {"b"});
  CHECK(r.substitutions == 1);
  CHECK(r.NumErrors() == 1);

  r = wer({"x", "y", "z", "w"}, {"x", "q", "w"});
  CHECK(r.NumErrors() == 2);
  CHECK(r.Percent() == 50.0);

  // Error rates can exceed 100%.
  r = wer({"a"}, {"b", "c", "d"});
  CHECK(r.NumErrors() == 3);
  CHECK(r.Percent() == 300.0);

  CHECK(ThrownMessage([&] { ComputeWer({}, {"a"}); })
            .find("WER needs a non-empty reference") != std::string::npos);
}

TEST_CASE("decode graphs round-trip through their text form") {
  DecodeGraph g = BuildDecodeGraph(TwoPhoneLm(), {"alpha", "beta"});
  std::string path = TempPath("decode.fst");
  WriteDecodeGraphFile(g, path);
  CHECK(ReadDecodeGraphFile(path) == g);
  std::remove(path.c_str());

  std::ostringstream os;
  WriteDecodeGraphText(g, os);
  std::string text = os.str();

  // Duplicate word table entry.
  std::string dup = text;
  size_t pos = dup.find("beta 2");
  REQUIRE(pos != std::string::npos);
  dup.replace(pos, 6, "beta 1");
  std::istringstream is(dup);
  CHECK(ThrownMessage([&] { ReadDecodeGraphText(is); })
            .find("duplicate word id 1") != std::string::npos);

  // Missing terminator.
  std::string cut = text.substr(0, text.size() - 2);
  std::istringstream is2(cut);
  CHECK(ThrownMessage([&] { ReadDecodeGraphText(is2); })
            .find("missing word table terminator") != std::string::npos);

  CHECK(ThrownMessage([&] { ReadDecodeGraphFile(TempPath("absent.fst")); })
            .find("cannot open") != std::string::npos);
}

TEST_CASE("word tables round-trip and reject malformed files") {
  std::string path = TempPath("words.txt");
  WriteWordTableFile({"<eps>", "hello", "world"}, path);
  std::ifstream is(path);
  std::stringstream buf;
  buf << is.rdbuf();
  CHECK(buf.str() == "hello 1\nworld 2\n");
  CHECK(ReadWordTableFile(path) ==
        std::vector<std::string>{"<eps>", "hello", "world"});
  std::remove(path.c_str());

  auto write = [&](const std::string &text) {
    std::ofstream os(path);
    os << text;
  };
  write("a 1\nb 3\n");
  CHECK(ThrownMessage([&] { ReadWordTableFile(path); })
            .find("word table has a gap at id 2") != std::string::npos);
  write("a 1\nb 1\n");
  CHECK(ThrownMessage([&] { ReadWordTableFile(path); })
            .find("duplicate word id 1") != std::string::npos);
  write("a 0\n");
  CHECK(ThrownMessage([&] { ReadWordTableFile(path); })
            .find("bad word table line 1: 'a 0'") != std::string::npos);
  std::remove(path.c_str());
}

TEST_CASE("transcript files parse keys and word sequences") {
  std::string path = TempPath("ref.txt");
  std::ofstream os(path);
  os << "u1 hello world\n";
  os << "u2\n";
  os << "\n";
  os << "u3 one\n";
  os.close();
  auto lines = ReadTranscriptLines(path);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0].first == "u1");
  CHECK(lines[0].second == std::vector<std::string>{"hello", "world"});
  CHECK(lines[1].first == "u2");
  CHECK(lines[1].second.empty());
  CHECK(lines[2].second == std::vector<std::string>{"one"});
  std::remove(path.c_str());
  CHECK(ThrownMessage([&] { ReadTranscriptLines(TempPath("absent.txt")); })
            .find("cannot open") != std::string::npos);
}

}  // TEST_SUITE

}  // namespace
}  // namespace chainforge
