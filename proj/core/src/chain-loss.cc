// core/src/chain-loss.cc

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

#include "chainforge/chain-loss.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

namespace chainforge {

// Shared forward-backward body.  pi == nullptr disables the leak entirely
// (lambda == 0 behaves identically).
static FbResult ForwardBackwardImpl(const Wfsa &g, const MatD &o,
                                    double lambda,
                                    const std::vector<double> *pi) {
  const int32 T = o.NumRows(), S = g.num_states, P = g.num_pdfs;
  if (o.NumCols() != P)
    throw std::invalid_argument(
        "ForwardBackward: loglikes have " + std::to_string(o.NumCols()) +
        " columns, graph has " + std::to_string(P) + " pdfs");
  if (pi != nullptr && int32(pi->size()) != S)
    throw std::invalid_argument("ForwardBackward: pi size mismatch");
  const bool leaky = (pi != nullptr && lambda > 0.0);

  const size_t A = g.arcs.size();
  std::vector<double> wexp(A);
  for (size_t a = 0; a < A; a++) wexp[a] = std::exp(g.arcs[a].log_weight);

  // alpha rows are kept for the occupancy sweep; each row past t=0 sums to
  // one by construction.
  MatD alpha(T + 1, S);
  alpha(0, g.start) = 1.0;
  std::vector<double> c_meas(T), shift(T), lognorm(T);
  std::vector<double> atilde(S), eo(P);

  auto load_frame = [&](int32 t) {
    // Frame scores are shifted by their max before exponentiation so that
    // arbitrarily large log-likelihoods cannot overflow; the shift is
    // restored inside lognorm.
    double m = o(t, 0);
    for (int32 p = 1; p < P; p++) m = std::max(m, o(t, p));
    for (int32 p = 0; p < P; p++) eo[p] = std::exp(o(t, p) - m);
    return m;
  };
  auto load_atilde = [&](int32 t) {
    const double *at = alpha.RowData(t);
    if (leaky) {
      double asum = 0.0;
      for (int32 s = 0; s < S; s++) asum += at[s];
      for (int32 s = 0; s < S; s++)
        atilde[s] = at[s] + lambda * (*pi)[s] * asum;
    } else {
      std::copy(at, at + S, atilde.begin());
    }
  };

  for (int32 t = 0; t < T; t++) {
    shift[t] = load_frame(t);
    load_atilde(t);
    double *an = alpha.RowData(t + 1);
    for (size_t a = 0; a < A; a++) {
      const WfsaArc &arc = g.arcs[a];
      an[arc.dst] += atilde[arc.src] * wexp[a] * eo[arc.pdf];
    }
    double c = 0.0;
    for (int32 s = 0; s < S; s++) c += an[s];
    if (!(c > 0.0) || !std::isfinite(c))
      throw EmptyCompositionError(
          "empty composition: no surviving path at frame " +
          std::to_string(t));
    for (int32 s = 0; s < S; s++) an[s] /= c;
    c_meas[t] = c;
    lognorm[t] = std::log(c) + shift[t];
  }

  double fdot = 0.0;
  for (int32 s = 0; s < S; s++)
    if (g.final_logw[s] != kLogZero)
      fdot += alpha(T, s) * std::exp(g.final_logw[s]);
  if (!(fdot > 0.0) || !std::isfinite(fdot))
    throw EmptyCompositionError(
        "empty composition: no path reaches a final state");

  FbResult result;
  result.per_frame_lognorm = lognorm;
  result.logprob = std::log(fdot);
  for (int32 t = 0; t < T; t++) result.logprob += lognorm[t];

  // Backward sweep, the exact transpose of the forward recursion including
  // the leak; occupancies fall out frame by frame.
  result.occupancies.Resize(T, P);
  std::vector<double> beta_next(S), u(S);
  for (int32 s = 0; s < S; s++)
    beta_next[s] =
        g.final_logw[s] == kLogZero ? 0.0 : std::exp(g.final_logw[s]) / fdot;

  for (int32 t = T - 1; t >= 0; t--) {
    load_frame(t);  // recompute eo with the stored shift's frame
    load_atilde(t);
    std::fill(u.begin(), u.end(), 0.0);
    double *occ = result.occupancies.RowData(t);
    for (size_t a = 0; a < A; a++) {
      const WfsaArc &arc = g.arcs[a];
      double flow = wexp[a] * eo[arc.pdf] * beta_next[arc.dst];
      u[arc.src] += flow;
      occ[arc.pdf] += atilde[arc.src] * flow;
    }
    double occ_sum = 0.0;
    for (int32 p = 0; p < P; p++) occ_sum += occ[p];
    if (occ_sum > 0.0)
      for (int32 p = 0; p < P; p++) occ[p] /= occ_sum;
    if (leaky) {
      double leak_in = 0.0;
      for (int32 s = 0; s < S; s++) leak_in += (*pi)[s] * u[s];
      for (int32 s = 0; s < S; s++)
        beta_next[s] = (u[s] + lambda * leak_in) / c_meas[t];
    } else {
      for (int32 s = 0; s < S; s++) beta_next[s] = u[s] / c_meas[t];
    }
  }
  return result;
}

FbResult ForwardBackward(const Wfsa &graph, const MatD &loglikes) {
  return ForwardBackwardImpl(graph, loglikes, 0.0, nullptr);
}

FbResult ForwardBackward(const Wfsa &graph, const MatD &loglikes,
                         double leaky_coefficient, const LeakyInit &pi) {
  if (leaky_coefficient < 0.0)
    throw std::invalid_argument("negative leaky coefficient");
  if (leaky_coefficient == 0.0)
    return ForwardBackwardImpl(graph, loglikes, 0.0, nullptr);
  return ForwardBackwardImpl(graph, loglikes, leaky_coefficient, &pi.pi);
}

double BruteForceLogprob(const Wfsa &graph, const MatD &loglikes) {
  if (graph.num_states > 8 || loglikes.NumRows() > 8)
    throw std::invalid_argument("oracle size limit: at most 8 states and 8 frames");
  if (loglikes.NumCols() != graph.num_pdfs)
    throw std::invalid_argument("BruteForceLogprob: pdf count mismatch");
  const int32 T = loglikes.NumRows();
  ArcIndex index(graph);
  double total = kLogZero;
  std::function<void(int32, int32, double)> visit = [&](int32 s, int32 t,
                                                        double acc) {
    if (t == T) {
      if (graph.final_logw[s] != kLogZero)
        total = LogAdd(total, acc + graph.final_logw[s]);
      return;
    }
    for (int32 ai : index.Row(s)) {
      const WfsaArc &a = graph.arcs[ai];
      visit(a.dst, t + 1, acc + a.log_weight + loglikes(t, a.pdf));
    }
  };
  visit(graph.start, 0, 0.0);
  return total;
}

ChainLossOutput ChainLoss(const Wfsa &num, const Wfsa &den,
                          const LeakyInit &pi, const MatD &loglikes,
                          const ChainOptions &opts, const MatD *xent_out) {
  const int32 T = loglikes.NumRows(), P = loglikes.NumCols();
  if (T <= 0) throw std::invalid_argument("ChainLoss: no frames");
  if (num.num_pdfs != den.num_pdfs)
    throw std::invalid_argument("ChainLoss: numerator/denominator pdf counts differ");

  FbResult num_fb, den_fb;
  try {
    num_fb = ForwardBackward(num, loglikes);
  } catch (const EmptyCompositionError &e) {
    throw EmptyCompositionError(std::string("numerator graph: ") + e.what());
  }
  try {
    den_fb = ForwardBackward(den, loglikes, opts.leaky_hmm_coefficient, pi);
  } catch (const EmptyCompositionError &e) {
    throw EmptyCompositionError(std::string("denominator graph: ") + e.what());
  }

  ChainLossOutput out;
  out.objf_mmi = (num_fb.logprob - den_fb.logprob) / T;
  out.grad.Resize(T, P);
  for (int32 t = 0; t < T; t++)
    for (int32 p = 0; p < P; p++)
      out.grad(t, p) =
          (num_fb.occupancies(t, p) - den_fb.occupancies(t, p)) / T;

  if (opts.l2_regularize != 0.0) {
    double sumsq = 0.0;
    for (int32 t = 0; t < T; t++)
      for (int32 p = 0; p < P; p++) sumsq += loglikes(t, p) * loglikes(t, p);
    out.objf_l2 = -(opts.l2_regularize / (2.0 * T)) * sumsq;
    const double scale = opts.l2_regularize / T;
    for (int32 t = 0; t < T; t++)
      for (int32 p = 0; p < P; p++) out.grad(t, p) -= scale * loglikes(t, p);
  }

  if (xent_out != nullptr) {
    if (xent_out->NumRows() != T || xent_out->NumCols() != P)
      throw std::invalid_argument("ChainLoss: xent head dims mismatch");
    out.xent_grad.emplace(T, P);
    const double xscale = opts.xent_regularize / T;
    for (int32 t = 0; t < T; t++) {
      // Row-wise log-softmax in double; the numerator occupancies act as
      // soft targets.
      double m = (*xent_out)(t, 0);
      for (int32 p = 1; p < P; p++) m = std::max(m, (*xent_out)(t, p));
      double z = 0.0;
      for (int32 p = 0; p < P; p++) z += std::exp((*xent_out)(t, p) - m);
      double logz = m + std::log(z);
      for (int32 p = 0; p < P; p++) {
        double lsm = (*xent_out)(t, p) - logz;
        out.objf_xent += num_fb.occupancies(t, p) * lsm / T;
        (*out.xent_grad)(t, p) =
            xscale * (num_fb.occupancies(t, p) - std::exp(lsm));
      }
    }
  }
  return out;
}

double GradCheckChain(const Wfsa &num, const Wfsa &den, const LeakyInit &pi,
                      const MatD &loglikes, const ChainOptions &opts,
                      double eps) {
  ChainLossOutput base = ChainLoss(num, den, pi, loglikes, opts);
  auto objf = [&](const MatD &x) {
    ChainLossOutput r = ChainLoss(num, den, pi, x, opts);
    return r.objf_mmi + r.objf_l2;
  };
  MatD work = loglikes;
  double max_rel = 0.0;
  for (int32 t = 0; t < loglikes.NumRows(); t++) {
    for (int32 p = 0; p < loglikes.NumCols(); p++) {
      double orig = work(t, p);
      work(t, p) = orig + eps;
      double fp = objf(work);
      work(t, p) = orig - eps;
      double fm = objf(work);
      work(t, p) = orig;
      double numeric = (fp - fm) / (2.0 * eps);
      double analytic = base.grad(t, p);
      double rel = std::abs(analytic - numeric) /
                   std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace chainforge
