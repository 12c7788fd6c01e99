// core/src/ngsgd.cc

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

#include "chainforge/ngsgd.h"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace chainforge {

namespace {

using EMatD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                            Eigen::RowMajor>;
using EMatF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic,
                            Eigen::RowMajor>;

Eigen::Map<EMatD> Emd(MatD &m) {
  return Eigen::Map<EMatD>(m.Data(), m.NumRows(), m.NumCols());
}
Eigen::Map<const EMatF> Emf(const Mat &m) {
  return Eigen::Map<const EMatF>(m.Data(), m.NumRows(), m.NumCols());
}

}  // namespace

double NgPrecondition(NgState *state, Mat *x) {
  if (state->alpha <= 0.0)
    throw std::invalid_argument("NgState alpha must be positive");
  const int32 N = x->NumRows(), D = x->NumCols();
  if (N < 1 || D < 1)
    throw std::invalid_argument("NgPrecondition needs a non-empty matrix");
  if (state->dim == 0) {
    state->dim = D;
    state->cov.Resize(D, D);
  }
  if (state->dim != D)
    throw std::invalid_argument("NgPrecondition: dim changed from " +
                                std::to_string(state->dim) + " to " +
                                std::to_string(D));

  EMatD X = Emf(*x).cast<double>();
  const double in_norm2 = X.squaredNorm();
  if (in_norm2 == 0.0) return 1.0;  // nothing to precondition, keep state

  const double rho =
      std::max(0.0, 1.0 - double(N) / state->num_samples_history);
  Eigen::Map<EMatD> S = Emd(state->cov);
  S = rho * S + ((1.0 - rho) / N) * (X.transpose() * X);
  state->frames_seen += N;

  // T = (S + alpha tr(S)/D I)^{-1}; symmetric positive definite because
  // tr(S) > 0 whenever X != 0, so a Cholesky solve applies.
  EMatD M = S;
  M.diagonal().array() += state->alpha * S.trace() / D;
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("NgPrecondition: covariance solve failed");
  // X T computed as (T X^T)^T since T is symmetric.
  EMatD xhat = llt.solve(X.transpose()).transpose();
  const double out_norm2 = xhat.squaredNorm();
  if (out_norm2 <= 0.0) return 1.0;
  const double gamma = std::sqrt(in_norm2 / out_norm2);
  Eigen::Map<EMatF>(x->Data(), N, D) = (gamma * xhat).cast<float>();
  return gamma;
}

void NgAffineUpdate(const Mat &in_values, const Mat &out_derivs, double lr,
                    NgState *in_state, NgState *out_state, Mat *w, Mat *b) {
  const int32 N = in_values.NumRows();
  if (out_derivs.NumRows() != N)
    throw std::invalid_argument("NgAffineUpdate: row count mismatch");
  const int32 in_cols = b != nullptr ? w->NumCols() + 1 : w->NumCols();
  if (in_values.NumCols() != in_cols || out_derivs.NumCols() != w->NumRows())
    throw std::invalid_argument("NgAffineUpdate: shape mismatch");
  if (b != nullptr && (b->NumRows() != 1 || b->NumCols() != w->NumRows()))
    throw std::invalid_argument("NgAffineUpdate: bad bias shape");

  Mat a_hat = in_values;
  Mat b_hat = out_derivs;
  NgPrecondition(in_state, &a_hat);
  NgPrecondition(out_state, &b_hat);

  EMatD delta =
      (-lr / N) * (Emf(b_hat).cast<double>().transpose() *
                   Emf(a_hat).cast<double>());
  for (int32 r = 0; r < w->NumRows(); r++) {
    for (int32 c = 0; c < w->NumCols(); c++)
      (*w)(r, c) = float((*w)(r, c) + delta(r, c));
    if (b != nullptr) (*b)(0, r) = float((*b)(0, r) + delta(r, w->NumCols()));
  }
}

void ValidateLrSchedule(const LrSchedule &s) {
  if (!(s.lr_initial > 0.0) || !(s.lr_final > 0.0))
    throw std::invalid_argument("learning rates must be positive");
  if (s.lr_final > s.lr_initial)
    throw std::invalid_argument("lr_final must not exceed lr_initial");
  if (s.total_iters < 1)
    throw std::invalid_argument("total_iters must be >= 1");
}

double LrAt(const LrSchedule &s, int32 iter) {
  ValidateLrSchedule(s);
  if (iter < 0 || iter > s.total_iters)
    throw std::invalid_argument("LrAt: iter out of range");
  return s.lr_initial *
         std::pow(s.lr_final / s.lr_initial, double(iter) / s.total_iters);
}

void SgdStep(Mat *param, const Mat &grad, double lr) {
  if (!param->SameDim(grad))
    throw std::invalid_argument("SgdStep: shape mismatch");
  for (size_t i = 0; i < param->NumElements(); i++)
    param->Data()[i] = float(param->Data()[i] - lr * grad.Data()[i]);
}

void AdamStep(AdamState *state, Mat *param, const Mat &grad, double lr) {
  if (!param->SameDim(grad))
    throw std::invalid_argument("AdamStep: shape mismatch");
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  if (state->m.Empty()) {
    state->m.Resize(param->NumRows(), param->NumCols());
    state->v.Resize(param->NumRows(), param->NumCols());
  }
  if (state->m.NumRows() != param->NumRows() ||
      state->m.NumCols() != param->NumCols())
    throw std::invalid_argument("AdamStep: state shape mismatch");
  state->step++;
  const double c1 = 1.0 - std::pow(kBeta1, double(state->step));
  const double c2 = 1.0 - std::pow(kBeta2, double(state->step));
  for (size_t i = 0; i < param->NumElements(); i++) {
    double g = grad.Data()[i];
    double m = state->m.Data()[i] = kBeta1 * state->m.Data()[i] +
                                    (1.0 - kBeta1) * g;
    double v = state->v.Data()[i] = kBeta2 * state->v.Data()[i] +
                                    (1.0 - kBeta2) * g * g;
    param->Data()[i] = float(param->Data()[i] -
                             lr * (m / c1) / (std::sqrt(v / c2) + kEps));
  }
}

}  // namespace chainforge
