// chainforge/chain-loss.h

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

#ifndef CHAINFORGE_CHAIN_LOSS_H_
#define CHAINFORGE_CHAIN_LOSS_H_

#include <optional>

#include "chainforge/matrix.h"
#include "chainforge/phone-lm.h"
#include "chainforge/wfsa.h"

namespace chainforge {

// Options for the sequence-discriminative (MMI) objective.
struct ChainOptions {
  double leaky_hmm_coefficient = 0.1;  // applied to the denominator only
  double xent_regularize = 0.1;
  double l2_regularize = 5e-5;
};

// Output of one forward-backward pass over an acceptor.
//
// logprob is the log of the total weight of all length-T paths, including
// per-frame log-likelihoods and the final weight.  occupancies is T x P;
// row t holds the posterior mass each pdf receives on frame t and sums to
// one.  per_frame_lognorm holds the log of the per-frame rescaling constant
// c_t, so logprob == sum_t per_frame_lognorm[t] + log(final mass).
struct FbResult {
  double logprob = 0.0;
  MatD occupancies;
  std::vector<double> per_frame_lognorm;
};

// Forward-backward over `graph` with per-frame log-likelihoods `loglikes`
// (T x num_pdfs).  Probabilities are propagated in linear space and divided
// by their sum after every frame (the sums' logs accumulate into logprob),
// rather than running the recursion in log space.
//
// alpha recursion: alpha_0(start) = 1; before frame t the leaky variant
// redistributes mass, alpha~_t(s) = alpha_t(s) + lambda * pi(s) *
// sum_s' alpha_t(s'); then alpha_{t+1}(dst) += alpha~_t(src) *
// exp(log_weight) * exp(loglikes(t, pdf)) over arcs.  The leak is a
// non-emitting transition: it consumes no frame and scores no pdf.  beta is
// the exact transpose of the same recursion, and
//
//   occupancies(t, p) = sum over arcs a with pdf(a)=p of
//       alpha~_t(src) * w(a) * exp(loglikes(t, p)) * beta_{t+1}(dst),
//
// normalized by the frame-local total.
//
// Throws EmptyCompositionError if no length-T path survives.
FbResult ForwardBackward(const Wfsa &graph, const MatD &loglikes);
FbResult ForwardBackward(const Wfsa &graph, const MatD &loglikes,
                         double leaky_coefficient, const LeakyInit &pi);

// Oracle: enumerates every length-T arc sequence from the start state to a
// final state and log-sums their scores.  Returns kLogZero when no path
// exists (the "empty composition" condition).  Intended for tests; refuses
// graphs with more than 8 states or more than 8 frames ("oracle size
// limit").
double BruteForceLogprob(const Wfsa &graph, const MatD &loglikes);

// LF-MMI objective and gradient.
//
//   objf_mmi = (logprob_num - logprob_den) / T
//   grad     = (occ_num - occ_den) / T              (d objf / d loglikes)
//   objf_l2  = -(l2/2T) * sum o^2, contributing -(l2/T) * o to grad
//   objf_xent = (1/T) * sum_t,p occ_num(t,p) * log_softmax(xent_out)(t,p)
//
// The cross-entropy head is optional; its gradient is returned separately
// in xent_grad, pre-scaled by xent_regularize so the caller can add it to
// the head's output derivative as-is.  The leak (opts.leaky_hmm_coefficient
// with distribution pi) applies to the denominator pass only.
struct ChainLossOutput {
  double objf_mmi = 0.0;
  double objf_xent = 0.0;
  double objf_l2 = 0.0;
  MatD grad;
  std::optional<MatD> xent_grad;
};

ChainLossOutput ChainLoss(const Wfsa &num, const Wfsa &den,
                          const LeakyInit &pi, const MatD &loglikes,
                          const ChainOptions &opts,
                          const MatD *xent_out = nullptr);

// Central finite differences of (objf_mmi + objf_l2) against the analytic
// gradient, elementwise over loglikes; returns the maximum relative error
// |a - n| / max(|a|, |n|, 1e-8).
double GradCheckChain(const Wfsa &num, const Wfsa &den, const LeakyInit &pi,
                      const MatD &loglikes, const ChainOptions &opts,
                      double eps);

}  // namespace chainforge

#endif  // CHAINFORGE_CHAIN_LOSS_H_
