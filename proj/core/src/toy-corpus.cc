// core/src/toy-corpus.cc

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

#include "chainforge/toy-corpus.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "chainforge/ark-io.h"

namespace chainforge {

namespace {

PhoneLm MakeToyLm(const ToyCorpusOptions &opts) {
  const int32 P = opts.num_phones;
  PhoneLm lm;
  lm.num_phones = P;
  lm.self_loop_prob = opts.self_loop_prob;
  lm.bigram_logp.Resize(P + 1, P + 1);
  const double cross = P > 1 ? std::log((1.0 - opts.end_prob) / (P - 1))
                             : kLogZero;
  for (int32 p = 0; p < P; p++) {
    for (int32 q = 0; q < P; q++)
      lm.bigram_logp(p, q) = p == q ? kLogZero : cross;
    lm.bigram_logp(p, P) = std::log(opts.end_prob);  // phone -> end
    lm.bigram_logp(P, p) = std::log(1.0 / P);        // begin -> phone
  }
  lm.bigram_logp(P, P) = kLogZero;
  ValidatePhoneLm(lm);
  return lm;
}

ToyUtterance SampleUtterance(const ToyCorpusOptions &opts,
                             const std::string &key, Rng *rng) {
  ToyUtterance utt;
  utt.key = key;
  const int32 target =
      opts.min_utt_frames +
      int32(rng->UniformInt(opts.max_utt_frames - opts.min_utt_frames + 1));
  std::vector<int32> frame_phone;
  int32 prev = -1;
  while (int32(frame_phone.size()) < target) {
    int32 phone = int32(rng->UniformInt(opts.num_phones));
    if (opts.num_phones > 1)
      while (phone == prev) phone = int32(rng->UniformInt(opts.num_phones));
    int32 dur = opts.min_phone_frames +
                int32(rng->UniformInt(opts.max_phone_frames -
                                      opts.min_phone_frames + 1));
    utt.transcript.push_back(phone);
    frame_phone.insert(frame_phone.end(), dur, phone);
    prev = phone;
  }
  const int32 n = int32(frame_phone.size());
  utt.feats.Resize(n, opts.num_phones);
  for (int32 t = 0; t < n; t++)
    for (int32 c = 0; c < opts.num_phones; c++)
      utt.feats(t, c) = float((c == frame_phone[t] ? opts.mu : 0.0) +
                              opts.sigma * rng->Gaussian());
  return utt;
}

std::string Key(const char *prefix, int32 i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s-%04d", prefix, i);
  return buf;
}

void WriteFeats(const std::vector<ToyUtterance> &utts, const std::string &dir,
                const std::string &stem) {
  std::vector<ArkRecord> records;
  for (const ToyUtterance &utt : utts)
    records.push_back(ArkRecord{utt.key, utt.feats});
  WriteArkWithScp(records, dir + "/" + stem + ".ark",
                  dir + "/" + stem + ".scp");
}

void WriteTranscripts(const std::vector<ToyUtterance> &utts,
                      const std::string &path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  for (const ToyUtterance &utt : utts) {
    os << utt.key;
    for (int32 p : utt.transcript) os << ' ' << p;
    os << '\n';
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

}  // namespace

ToyCorpus GenerateToyCorpus(const ToyCorpusOptions &opts) {
  if (opts.num_phones < 1 || opts.num_train < 0 || opts.num_test < 0 ||
      opts.min_phone_frames < 1 ||
      opts.max_phone_frames < opts.min_phone_frames ||
      opts.min_utt_frames < 1 || opts.max_utt_frames < opts.min_utt_frames ||
      !(opts.mu > 0.0) || !(opts.sigma >= 0.0) ||
      !(opts.end_prob > 0.0 && opts.end_prob < 1.0))
    throw std::invalid_argument("bad toy corpus options");
  ToyCorpus corpus;
  corpus.lm = MakeToyLm(opts);
  for (int32 q = 0; q < opts.num_phones; q++)
    corpus.phone_words.push_back("p" + std::to_string(q));
  Rng rng(opts.seed);
  for (int32 i = 0; i < opts.num_train; i++)
    corpus.train.push_back(SampleUtterance(opts, Key("train", i), &rng));
  for (int32 i = 0; i < opts.num_test; i++)
    corpus.test.push_back(SampleUtterance(opts, Key("test", i), &rng));
  return corpus;
}

void WriteToyCorpus(const ToyCorpus &corpus, const std::string &dir) {
  WriteFeats(corpus.train, dir, "train");
  WriteFeats(corpus.test, dir, "test");
  WriteTranscripts(corpus.train, dir + "/train.txt");
  WriteTranscripts(corpus.test, dir + "/test.txt");

  std::ofstream ref(dir + "/ref.txt");
  if (!ref) throw std::runtime_error("cannot open for writing: ref.txt");
  for (const ToyUtterance &utt : corpus.test) {
    ref << utt.key;
    for (int32 p : utt.transcript) ref << ' ' << corpus.phone_words[p];
    ref << '\n';
  }

  std::ofstream words(dir + "/words.txt");
  if (!words) throw std::runtime_error("cannot open for writing: words.txt");
  for (size_t q = 0; q < corpus.phone_words.size(); q++)
    words << corpus.phone_words[q] << ' ' << q + 1 << '\n';

  WritePhoneLmFile(corpus.lm, dir + "/lm.txt");
}

std::vector<std::pair<std::string, std::vector<int32>>> ReadTranscriptFile(
    const std::string &path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  std::vector<std::pair<std::string, std::vector<int32>>> out;
  std::string line;
  int64 line_no = 0;
  while (std::getline(is, line)) {
    line_no++;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string key;
    if (!(ss >> key)) continue;
    std::vector<int32> phones;
    int64 p = 0;
    while (ss >> p) phones.push_back(int32(p));
    if (!ss.eof())
      throw std::runtime_error("bad transcript line " +
                               std::to_string(line_no) + " in " + path);
    out.emplace_back(key, std::move(phones));
  }
  return out;
}

}  // namespace chainforge
