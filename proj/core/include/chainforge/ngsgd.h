// core/include/chainforge/ngsgd.h

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

#ifndef CHAINFORGE_NGSGD_H_
#define CHAINFORGE_NGSGD_H_

#include "chainforge/common.h"
#include "chainforge/matrix.h"

namespace chainforge {

// Online natural-gradient preconditioner state for one side (input or
// output) of one affine transform.  The covariance is a smoothed running
// estimate of X^T X / N over the minibatches seen so far; `Precondition`
// multiplies a minibatch by the inverse of the identity-smoothed estimate
// and rescales so the Frobenius norm is unchanged.
//
// This is the exact dense form of the preconditioner: layer dimensions stay
// small enough here that a full solve is cheaper than maintaining a low-rank
// factorization of the same fixed point.
struct NgState {
  int32 dim = 0;  // set on first use
  MatD cov;       // dim x dim running covariance, starts at zero
  double num_samples_history = 2000.0;
  double alpha = 4.0;
  int64 frames_seen = 0;
};

// Updates the covariance with the rows of *x and preconditions *x in place:
//   S' = rho S + (1 - rho) (X^T X)/N,   rho = max(0, 1 - N/history)
//   T  = (S' + alpha (trace(S')/dim) I)^{-1}
//   X  <- gamma X T,   gamma = ||X||_F / ||X T||_F
// Returns gamma.  A zero X is returned unchanged (gamma 1) and does not
// touch the state.
double NgPrecondition(NgState *state, Mat *x);

// One natural-gradient update of an affine transform.  `in_values` holds the
// forward-pass inputs with a trailing all-ones bias column when `b` is
// non-null (so it has w->NumCols()+1 columns), or the plain inputs when the
// transform has no bias (b == nullptr, e.g. a factorized-layer bottleneck).
// `out_derivs` holds the loss derivatives w.r.t. the transform outputs.
// Applies  delta[W | b] = -lr (B_hat^T A_hat) / N  where A_hat, B_hat are
// the two preconditioned matrices and N the number of rows.
void NgAffineUpdate(const Mat &in_values, const Mat &out_derivs, double lr,
                    NgState *in_state, NgState *out_state, Mat *w, Mat *b);

// Exponentially decaying learning-rate schedule.
struct LrSchedule {
  double lr_initial = 1e-3;
  double lr_final = 1e-5;
  int32 total_iters = 1;
};

void ValidateLrSchedule(const LrSchedule &s);

// lr_initial * (lr_final/lr_initial)^(iter/total_iters); log-linear in iter.
double LrAt(const LrSchedule &s, int32 iter);

// Plain SGD: param -= lr * grad.
void SgdStep(Mat *param, const Mat &grad, double lr);

// Adam with standard defaults (beta1 0.9, beta2 0.999, eps 1e-8) and bias
// correction.  One state per parameter tensor.
struct AdamState {
  MatD m, v;  // first/second moments, lazily sized to the parameter
  int64 step = 0;
};

void AdamStep(AdamState *state, Mat *param, const Mat &grad, double lr);

}  // namespace chainforge

#endif  // CHAINFORGE_NGSGD_H_
