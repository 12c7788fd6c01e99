// chainforge/phone-lm.h

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

#ifndef CHAINFORGE_PHONE_LM_H_
#define CHAINFORGE_PHONE_LM_H_

#include <iosfwd>
#include <string>
#include <vector>

#include "chainforge/matrix.h"

namespace chainforge {

// Bigram phone language model plus a shared HMM self-loop probability.
//
// bigram_logp is (P+1) x (P+1) in natural log; index P is the boundary
// symbol, serving as "begin" when used as a row and "end" when used as a
// column.  Row p (a phone) sums to one over {phones, end}; the boundary row
// sums to one over phones (begin->end is disallowed, so [P][P] stays
// kLogZero).
struct PhoneLm {
  int32 num_phones = 0;
  MatD bigram_logp;        // (num_phones+1) x (num_phones+1)
  double self_loop_prob = 0.5;

  int32 Boundary() const { return num_phones; }
};

// Leak distribution for the leaky-HMM computation: pi[s] >= 0, sum == 1.
struct LeakyInit {
  std::vector<double> pi;
};

// Throws std::invalid_argument on malformed models: self_loop_prob outside
// (0,1), rows of exp(bigram_logp) not summing to 1 +/- 1e-8 over valid
// successors, or begin->end mass.
void ValidatePhoneLm(const PhoneLm &lm);

// Text form:
//   phonelm <num_phones> <self_loop_prob>
//   <one row of bigram_logp per line, "-inf" for zero-probability entries>
void WritePhoneLmText(const PhoneLm &lm, std::ostream &os);
PhoneLm ReadPhoneLmText(std::istream &is);
void WritePhoneLmFile(const PhoneLm &lm, const std::string &path);
PhoneLm ReadPhoneLmFile(const std::string &path);

}  // namespace chainforge

#endif  // CHAINFORGE_PHONE_LM_H_
