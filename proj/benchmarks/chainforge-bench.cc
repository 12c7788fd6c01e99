// benchmarks/chainforge-bench.cc

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

// Microbenchmarks for the hot paths of one training iteration: the
// denominator forward-backward, the full chain loss, network forward plus
// backward, the natural-gradient preconditioner, archive IO and Viterbi
// decoding.  Sizes mirror the toy recipe scaled up to a ten-phone model.

#include <benchmark/benchmark.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "chainforge/ark-io.h"
#include "chainforge/chain-loss.h"
#include "chainforge/common.h"
#include "chainforge/decode.h"
#include "chainforge/den-graph.h"
#include "chainforge/matrix.h"
#include "chainforge/ngsgd.h"
#include "chainforge/nnet.h"
#include "chainforge/num-graph.h"
#include "chainforge/phone-lm.h"

namespace chainforge {
namespace {

// Uniform bigram model over `num_phones` phones.
PhoneLm UniformPhoneLm(int32 num_phones) {
  PhoneLm lm;
  lm.num_phones = num_phones;
  lm.self_loop_prob = 0.5;
  lm.bigram_logp.Resize(num_phones + 1, num_phones + 1);
  for (int32 p = 0; p <= num_phones; p++)
    for (int32 q = 0; q <= num_phones; q++) {
      if (p == num_phones && q == num_phones) {
        lm.bigram_logp(p, q) = kLogZero;  // begin -> end is disallowed
      } else if (p == num_phones) {
        lm.bigram_logp(p, q) = -std::log(double(num_phones));
      } else {
        lm.bigram_logp(p, q) = -std::log(double(num_phones) + 1.0);
      }
    }
  return lm;
}

MatD GaussianLoglikes(int32 frames, int32 num_pdfs, uint64 seed) {
  Rng rng(seed);
  MatD m(frames, num_pdfs);
  for (int32 t = 0; t < frames; t++)
    for (int32 p = 0; p < num_pdfs; p++) m(t, p) = rng.Gaussian();
  return m;
}

Mat GaussianMat(int32 rows, int32 cols, uint64 seed) {
  Rng rng(seed);
  Mat m(rows, cols);
  for (size_t i = 0; i < m.NumElements(); i++)
    m.Data()[i] = float(rng.Gaussian());
  return m;
}

constexpr int32 kPhones = 10;
constexpr int32 kFrames = 150;

std::vector<int32> BenchTranscript() {
  // ~15 frames per phone over the budget, no immediate repeats.
  std::vector<int32> transcript;
  for (int32 i = 0; i < 10; i++) transcript.push_back((i * 3) % kPhones);
  return transcript;
}

void BM_DenForwardBackward(benchmark::State &state) {
  PhoneLm lm = UniformPhoneLm(kPhones);
  Wfsa den = BuildDenominatorGraph(lm);
  LeakyInit pi = StationaryDistribution(den);
  MatD loglikes = GaussianLoglikes(kFrames, kPhones, 1);
  for (auto _ : state) {
    FbResult fb = ForwardBackward(den, loglikes, 0.1, pi);
    benchmark::DoNotOptimize(fb.logprob);
  }
}
BENCHMARK(BM_DenForwardBackward);

void BM_ChainLoss(benchmark::State &state) {
  PhoneLm lm = UniformPhoneLm(kPhones);
  Wfsa den = BuildDenominatorGraph(lm);
  LeakyInit pi = StationaryDistribution(den);
  Wfsa num = BuildNumeratorGraph(BenchTranscript(), lm, kFrames);
  MatD loglikes = GaussianLoglikes(kFrames, kPhones, 2);
  ChainOptions opts;
  for (auto _ : state) {
    ChainLossOutput out = ChainLoss(num, den, pi, loglikes, opts);
    benchmark::DoNotOptimize(out.objf_mmi);
  }
}
BENCHMARK(BM_ChainLoss);

std::vector<LayerSpec> BenchStack() {
  std::vector<LayerSpec> specs;
  for (const char *line :
       {"tdnn 40 64 -1,0,1", "relu 64", "batchnorm 64",
        "tdnnf 64 64 16 -1,0,1", "relu 64", "batchnorm 64", "subsample 64 3",
        "tdnnf 64 64 16 -1,0,1", "relu 64", "batchnorm 64", "affine 64 10"})
    specs.push_back(ParseLayerSpec(line));
  return specs;
}

void BM_NnetForwardBackward(benchmark::State &state) {
  Network net = InitNetwork(BenchStack(), 3);
  Mat feats = GaussianMat(kFrames + net.left_context + net.right_context, 40,
                          4);
  Mat out_grad;
  {
    FwdTrace trace = ForwardTrain(&net, feats);
    out_grad = GaussianMat(trace.out.NumRows(), trace.out.NumCols(), 5);
  }
  for (auto _ : state) {
    FwdTrace trace = ForwardTrain(&net, feats);
    Gradients grads = Backward(net, trace, out_grad);
    benchmark::DoNotOptimize(grads.input_grad.Data());
  }
}
BENCHMARK(BM_NnetForwardBackward);

void BM_EmitLoglikes(benchmark::State &state) {
  Network net = InitNetwork(BenchStack(), 6);
  Mat feats = GaussianMat(kFrames + net.left_context + net.right_context, 40,
                          7);
  for (auto _ : state) {
    Mat out = EmitLoglikes(net, feats, 3);
    benchmark::DoNotOptimize(out.Data());
  }
}
BENCHMARK(BM_EmitLoglikes);

void BM_NgPrecondition(benchmark::State &state) {
  NgState base;
  Mat x = GaussianMat(512, 64, 8);
  for (auto _ : state) {
    state.PauseTiming();
    NgState ng = base;
    Mat batch = x;
    state.ResumeTiming();
    benchmark::DoNotOptimize(NgPrecondition(&ng, &batch));
  }
}
BENCHMARK(BM_NgPrecondition);

void BM_ArkRoundTrip(benchmark::State &state) {
  std::vector<ArkRecord> records(100);
  for (int i = 0; i < 100; i++) {
    records[i].key = "utt" + std::to_string(i);
    records[i].value = GaussianMat(200, 40, 100 + uint64(i));
  }
  for (auto _ : state) {
    std::ostringstream os;
    WriteMatrixArk(records, os);
    std::istringstream is(os.str());
    std::vector<ArkRecord> back = ReadMatrixArk(is);
    benchmark::DoNotOptimize(back.size());
  }
}
BENCHMARK(BM_ArkRoundTrip);

void BM_Viterbi(benchmark::State &state) {
  PhoneLm lm = UniformPhoneLm(kPhones);
  std::vector<std::string> words;
  for (int32 p = 0; p < kPhones; p++) words.push_back("p" + std::to_string(p));
  DecodeGraph graph = BuildDecodeGraph(lm, words);
  MatD loglikes = GaussianLoglikes(kFrames, kPhones, 9);
  for (auto _ : state) {
    ViterbiResult best = Viterbi(graph, loglikes);
    benchmark::DoNotOptimize(best.log_score);
  }
}
BENCHMARK(BM_Viterbi);

}  // namespace
}  // namespace chainforge

BENCHMARK_MAIN();
