// core/include/chainforge/toy-corpus.h

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

#ifndef CHAINFORGE_TOY_CORPUS_H_
#define CHAINFORGE_TOY_CORPUS_H_

#include <string>
#include <vector>

#include "chainforge/common.h"
#include "chainforge/matrix.h"
#include "chainforge/phone-lm.h"

namespace chainforge {

// Synthetic corpus: utterances are phone sequences without immediate
// repeats, each phone lasting a uniform number of frames; frame features are
// mu * onehot(phone) + Gaussian(0, sigma) noise per dimension, so feat_dim =
// num_phones and the Bayes-optimal frame classifier is nearly perfect at
// mu/sigma = 4.
struct ToyCorpusOptions {
  int32 num_phones = 3;
  int32 num_train = 200;
  int32 num_test = 50;
  double mu = 4.0;
  double sigma = 1.0;
  int32 min_phone_frames = 9;
  int32 max_phone_frames = 21;
  int32 min_utt_frames = 160;  // a new phone starts until this is reached
  int32 max_utt_frames = 220;  // sampled per-utterance target length
  double end_prob = 0.1;       // phone LM: P(end | phone)
  double self_loop_prob = 0.5;
  uint64 seed = 0;
};

struct ToyUtterance {
  std::string key;
  Mat feats;
  std::vector<int32> transcript;  // phone ids
};

struct ToyCorpus {
  PhoneLm lm;
  std::vector<std::string> phone_words;  // "p0", "p1", ...
  std::vector<ToyUtterance> train;
  std::vector<ToyUtterance> test;
};

ToyCorpus GenerateToyCorpus(const ToyCorpusOptions &opts);

// Writes the corpus under `dir`:
//   train.ark/.scp, test.ark/.scp   features
//   train.txt, test.txt             "<key> <phone id>..." transcripts
//   ref.txt                         test references as word strings
//   words.txt                       "<word> <id>" table (ids from 1)
//   lm.txt                          the phone LM
// The directory must already exist.
void WriteToyCorpus(const ToyCorpus &corpus, const std::string &dir);

// Reads "<key> <int>..." transcript lines.
std::vector<std::pair<std::string, std::vector<int32>>> ReadTranscriptFile(
    const std::string &path);

}  // namespace chainforge

#endif  // CHAINFORGE_TOY_CORPUS_H_
