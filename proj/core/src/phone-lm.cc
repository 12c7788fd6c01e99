// core/src/phone-lm.cc

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

#include "chainforge/phone-lm.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace chainforge {

void ValidatePhoneLm(const PhoneLm &lm) {
  auto fail = [](const std::string &what) {
    throw std::invalid_argument("invalid phone lm: " + what);
  };
  if (lm.num_phones <= 0) fail("num_phones must be positive");
  int32 n = lm.num_phones + 1;
  if (lm.bigram_logp.NumRows() != n || lm.bigram_logp.NumCols() != n)
    fail("bigram matrix must be (num_phones+1) square");
  if (!(lm.self_loop_prob > 0.0 && lm.self_loop_prob < 1.0))
    fail("self_loop_prob must lie strictly inside (0,1)");
  if (lm.bigram_logp(lm.Boundary(), lm.Boundary()) != kLogZero)
    fail("begin->end transition must have zero probability");
  for (int32 p = 0; p < n; p++) {
    double sum = 0.0;
    // The boundary row distributes over phones only; phone rows over
    // phones plus end.
    int32 cols = (p == lm.Boundary()) ? lm.num_phones : n;
    for (int32 q = 0; q < cols; q++) {
      double w = lm.bigram_logp(p, q);
      if (w != kLogZero && !std::isfinite(w))
        fail("non-finite bigram entry at row " + std::to_string(p));
      if (w != kLogZero) sum += std::exp(w);
    }
    if (std::abs(sum - 1.0) > 1e-8)
      fail("row " + std::to_string(p) + " of exp(bigram_logp) sums to " +
           std::to_string(sum) + ", expected 1");
  }
}

void WritePhoneLmText(const PhoneLm &lm, std::ostream &os) {
  char buf[64];
  os << "phonelm " << lm.num_phones << ' ';
  std::snprintf(buf, sizeof(buf), "%.17g", lm.self_loop_prob);
  os << buf << '\n';
  int32 n = lm.num_phones + 1;
  for (int32 p = 0; p < n; p++) {
    for (int32 q = 0; q < n; q++) {
      double w = lm.bigram_logp(p, q);
      if (q > 0) os << ' ';
      if (w == kLogZero) {
        os << "-inf";
      } else {
        std::snprintf(buf, sizeof(buf), "%.17g", w);
        os << buf;
      }
    }
    os << '\n';
  }
}

PhoneLm ReadPhoneLmText(std::istream &is) {
  auto fail = [](const std::string &what) {
    throw std::runtime_error("phone lm parse error: " + what);
  };
  PhoneLm lm;
  std::string tag;
  if (!(is >> tag >> lm.num_phones >> lm.self_loop_prob) || tag != "phonelm")
    fail("expected 'phonelm <num_phones> <self_loop_prob>' header");
  if (lm.num_phones <= 0) fail("num_phones must be positive");
  int32 n = lm.num_phones + 1;
  lm.bigram_logp.Resize(n, n);
  for (int32 p = 0; p < n; p++) {
    for (int32 q = 0; q < n; q++) {
      std::string tok;
      if (!(is >> tok)) fail("truncated bigram matrix");
      if (tok == "-inf") {
        lm.bigram_logp(p, q) = kLogZero;
      } else {
        try {
          size_t used = 0;
          lm.bigram_logp(p, q) = std::stod(tok, &used);
          if (used != tok.size()) fail("bad bigram entry '" + tok + "'");
        } catch (const std::logic_error &) {
          fail("bad bigram entry '" + tok + "'");
        }
      }
    }
  }
  return lm;
}

void WritePhoneLmFile(const PhoneLm &lm, const std::string &path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  WritePhoneLmText(lm, os);
  if (!os) throw std::runtime_error("write failed: " + path);
}

PhoneLm ReadPhoneLmFile(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  return ReadPhoneLmText(is);
}

}  // namespace chainforge
