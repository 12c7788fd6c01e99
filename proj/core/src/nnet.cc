// core/src/nnet.cc

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

#include "chainforge/nnet.h"

#include <Eigen/Dense>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "chainforge/ark-io.h"

namespace chainforge {

namespace {

constexpr double kBatchnormEps = 1e-5;
constexpr double kBatchnormMomentum = 0.99;

using EMatF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic,
                            Eigen::RowMajor>;

Eigen::Map<EMatF> Em(Mat &m) {
  return Eigen::Map<EMatF>(m.Data(), m.NumRows(), m.NumCols());
}
Eigen::Map<const EMatF> Em(const Mat &m) {
  return Eigen::Map<const EMatF>(m.Data(), m.NumRows(), m.NumCols());
}

int32 SplicedWidth(const LayerSpec &spec) {
  return spec.dim_in * int32(spec.offsets.size());
}

[[noreturn]] void BadSpec(const std::string &what) {
  throw std::invalid_argument("bad layer spec: " + what);
}

const char *KindName(LayerKind k) {
  switch (k) {
    case LayerKind::kAffine: return "affine";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kBatchnorm: return "batchnorm";
    case LayerKind::kTdnn: return "tdnn";
    case LayerKind::kTdnnf: return "tdnnf";
    case LayerKind::kSubsample: return "subsample";
  }
  return "?";
}

Mat Splice(const Mat &in, const std::vector<int32> &offsets) {
  const int32 span = offsets.back() - offsets.front();
  const int32 out_rows = in.NumRows() - span;
  if (out_rows <= 0)
    throw std::invalid_argument("insufficient context: splice of span " +
                                std::to_string(span) + " over " +
                                std::to_string(in.NumRows()) + " frames");
  const int32 d = in.NumCols(), K = int32(offsets.size());
  Mat out(out_rows, d * K);
  for (int32 i = 0; i < out_rows; i++)
    for (int32 k = 0; k < K; k++)
      std::memcpy(out.RowData(i) + size_t(k) * d,
                  in.RowData(i + offsets[k] - offsets.front()),
                  size_t(d) * sizeof(float));
  return out;
}

Mat UnspliceAdd(const Mat &dspliced, const std::vector<int32> &offsets,
                int32 in_rows, int32 in_cols) {
  Mat g(in_rows, in_cols);
  const int32 K = int32(offsets.size()), base = offsets.front();
  for (int32 i = 0; i < dspliced.NumRows(); i++) {
    for (int32 k = 0; k < K; k++) {
      float *dst = g.RowData(i + offsets[k] - base);
      const float *src = dspliced.RowData(i) + size_t(k) * in_cols;
      for (int32 c = 0; c < in_cols; c++) dst[c] += src[c];
    }
  }
  return g;
}

// y = x * w^T + b over rows.
Mat AffineFwd(const Mat &x, const Mat &w, const Mat &b) {
  Mat y(x.NumRows(), w.NumRows());
  Em(y).noalias() = Em(x) * Em(w).transpose();
  Em(y).rowwise() +=
      Eigen::Map<const Eigen::RowVectorXf>(b.Data(), b.NumCols());
  return y;
}

Mat WithBiasColumn(const Mat &x) {
  Mat out(x.NumRows(), x.NumCols() + 1);
  for (int32 r = 0; r < x.NumRows(); r++) {
    std::memcpy(out.RowData(r), x.RowData(r), size_t(x.NumCols()) * 4);
    out(r, x.NumCols()) = 1.0f;
  }
  return out;
}

// Column sums accumulated in double.
Mat ColSums(const Mat &x) {
  Mat out(1, x.NumCols());
  std::vector<double> acc(x.NumCols(), 0.0);
  for (int32 r = 0; r < x.NumRows(); r++)
    for (int32 c = 0; c < x.NumCols(); c++) acc[c] += x(r, c);
  for (int32 c = 0; c < x.NumCols(); c++) out(0, c) = float(acc[c]);
  return out;
}

struct BnStats {
  Mat mean, invstd;  // 1 x dim
};

BnStats BatchnormStats(const Mat &x) {
  const int32 N = x.NumRows(), D = x.NumCols();
  BnStats st;
  st.mean.Resize(1, D);
  st.invstd.Resize(1, D);
  std::vector<double> sum(D, 0.0), sumsq(D, 0.0);
  for (int32 r = 0; r < N; r++)
    for (int32 d = 0; d < D; d++) {
      double v = x(r, d);
      sum[d] += v;
      sumsq[d] += v * v;
    }
  for (int32 d = 0; d < D; d++) {
    double m = sum[d] / N;
    double var = std::max(0.0, sumsq[d] / N - m * m);
    st.mean(0, d) = float(m);
    st.invstd(0, d) = float(1.0 / std::sqrt(var + kBatchnormEps));
  }
  return st;
}

}  // namespace

Context ComputeContext(const std::vector<LayerSpec> &layers) {
  std::set<int64> ctx = {0};
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
    std::set<int64> next;
    switch (it->kind) {
      case LayerKind::kTdnn:
      case LayerKind::kTdnnf:
        for (int64 c : ctx)
          for (int32 o : it->offsets) next.insert(c + o);
        break;
      case LayerKind::kSubsample:
        for (int64 c : ctx) next.insert(c * it->stride);
        break;
      default:
        next = ctx;
    }
    ctx = std::move(next);
  }
  return Context{int32(-*ctx.begin()), int32(*ctx.rbegin())};
}

int32 StrideProduct(const std::vector<LayerSpec> &layers) {
  int32 s = 1;
  for (const LayerSpec &l : layers)
    if (l.kind == LayerKind::kSubsample) s *= l.stride;
  return s;
}

void ValidateLayerSpecs(const std::vector<LayerSpec> &layers) {
  if (layers.empty()) BadSpec("no layers");
  for (size_t i = 0; i < layers.size(); i++) {
    const LayerSpec &l = layers[i];
    if (l.dim_in <= 0 || l.dim_out <= 0) BadSpec("non-positive dimension");
    if (i > 0 && l.dim_in != layers[i - 1].dim_out)
      BadSpec("layer " + std::to_string(i) + " input dim " +
              std::to_string(l.dim_in) + " != previous output dim " +
              std::to_string(layers[i - 1].dim_out));
    switch (l.kind) {
      case LayerKind::kRelu:
      case LayerKind::kBatchnorm:
        if (l.dim_in != l.dim_out) BadSpec("frame-wise layer must keep dim");
        break;
      case LayerKind::kSubsample:
        if (l.dim_in != l.dim_out) BadSpec("subsample must keep dim");
        if (l.stride < 1) BadSpec("stride must be >= 1");
        break;
      case LayerKind::kTdnn:
      case LayerKind::kTdnnf:
        if (l.offsets.empty()) BadSpec("splice layer needs offsets");
        for (size_t k = 1; k < l.offsets.size(); k++)
          if (l.offsets[k] <= l.offsets[k - 1])
            BadSpec("offsets must be strictly ascending");
        if (l.kind == LayerKind::kTdnnf) {
          if (l.bottleneck <= 0) BadSpec("tdnnf needs a bottleneck");
          if (l.bottleneck >= l.dim_out)
            BadSpec("bottleneck must be smaller than dim_out");
          if (l.bottleneck > SplicedWidth(l))
            BadSpec("bottleneck exceeds spliced input width");
        }
        break;
      case LayerKind::kAffine:
        break;
    }
  }
}

Network InitNetwork(const std::vector<LayerSpec> &layers, uint64 seed) {
  ValidateLayerSpecs(layers);
  Network net;
  net.layers = layers;
  net.params.resize(layers.size());
  Context ctx = ComputeContext(layers);
  net.left_context = ctx.left;
  net.right_context = ctx.right;

  Rng rng(seed);
  auto uniform = [&rng](Mat *m, int32 rows, int32 cols) {
    m->Resize(rows, cols);
    double a = 1.0 / std::sqrt(double(cols));
    for (size_t i = 0; i < m->NumElements(); i++)
      m->Data()[i] = float(rng.UniformRange(-a, a));
  };
  auto fill = [](Mat *m, int32 cols, float v) {
    m->Resize(1, cols);
    for (int32 c = 0; c < cols; c++) (*m)(0, c) = v;
  };

  for (size_t i = 0; i < layers.size(); i++) {
    const LayerSpec &l = layers[i];
    LayerParams &p = net.params[i];
    switch (l.kind) {
      case LayerKind::kAffine:
      case LayerKind::kTdnn:
        uniform(&p.w, l.dim_out,
                l.kind == LayerKind::kTdnn ? SplicedWidth(l) : l.dim_in);
        fill(&p.b, l.dim_out, 0.0f);
        break;
      case LayerKind::kTdnnf:
        uniform(&p.factor, l.bottleneck, SplicedWidth(l));
        for (int s = 0; s < 20; s++)
          p.factor = SemiOrthogonalStep(p.factor, kSemiOrthogonalNu);
        uniform(&p.w, l.dim_out, l.bottleneck);
        fill(&p.b, l.dim_out, 0.0f);
        break;
      case LayerKind::kBatchnorm:
        fill(&p.scale, l.dim_in, 1.0f);
        fill(&p.offset, l.dim_in, 0.0f);
        fill(&p.running_mean, l.dim_in, 0.0f);
        fill(&p.running_var, l.dim_in, 1.0f);
        break;
      default:
        break;
    }
  }
  return net;
}

void ForEachParam(Network *net, const std::function<void(Mat &)> &fn) {
  for (size_t i = 0; i < net->layers.size(); i++) {
    LayerParams &p = net->params[i];
    switch (net->layers[i].kind) {
      case LayerKind::kAffine:
      case LayerKind::kTdnn:
        fn(p.w);
        fn(p.b);
        break;
      case LayerKind::kTdnnf:
        fn(p.factor);
        fn(p.w);
        fn(p.b);
        break;
      case LayerKind::kBatchnorm:
        fn(p.scale);
        fn(p.offset);
        break;
      default:
        break;
    }
  }
}

void ForEachParam(const Network &net,
                  const std::function<void(const Mat &)> &fn) {
  ForEachParam(const_cast<Network *>(&net),
               [&fn](Mat &m) { fn(const_cast<const Mat &>(m)); });
}

void ForEachTensor(Network *net, const std::function<void(Mat &)> &fn) {
  for (size_t i = 0; i < net->layers.size(); i++) {
    LayerParams &p = net->params[i];
    switch (net->layers[i].kind) {
      case LayerKind::kAffine:
      case LayerKind::kTdnn:
        fn(p.w);
        fn(p.b);
        break;
      case LayerKind::kTdnnf:
        fn(p.factor);
        fn(p.w);
        fn(p.b);
        break;
      case LayerKind::kBatchnorm:
        fn(p.scale);
        fn(p.offset);
        fn(p.running_mean);
        fn(p.running_var);
        break;
      default:
        break;
    }
  }
}

void ForEachTensor(const Network &net,
                   const std::function<void(const Mat &)> &fn) {
  ForEachTensor(const_cast<Network *>(&net),
                [&fn](Mat &m) { fn(const_cast<const Mat &>(m)); });
}

// ---- forward ----

static Mat ForwardImpl(const Network &net, Network *mut, const Mat &input,
                       bool train, FwdTrace *trace) {
  if (net.layers.empty()) throw std::invalid_argument("empty network");
  if (input.NumCols() != net.layers[0].dim_in)
    throw std::invalid_argument("input feature dim " +
                                std::to_string(input.NumCols()) +
                                " != network input dim " +
                                std::to_string(net.layers[0].dim_in));
  const int32 need = net.left_context + net.right_context + 1;
  if (input.NumRows() < need)
    throw std::invalid_argument("insufficient context: need >= " +
                                std::to_string(need) + " frames, got " +
                                std::to_string(input.NumRows()));
  if (trace != nullptr) trace->layers.resize(net.layers.size());

  Mat cur = input;
  for (size_t i = 0; i < net.layers.size(); i++) {
    const LayerSpec &l = net.layers[i];
    const LayerParams &p = net.params[i];
    LayerTrace *tr = trace != nullptr ? &trace->layers[i] : nullptr;
    if (tr != nullptr) tr->in = cur;
    switch (l.kind) {
      case LayerKind::kAffine:
        cur = AffineFwd(cur, p.w, p.b);
        break;
      case LayerKind::kRelu: {
        for (size_t j = 0; j < cur.NumElements(); j++)
          if (cur.Data()[j] < 0.0f) cur.Data()[j] = 0.0f;
        break;
      }
      case LayerKind::kBatchnorm: {
        BnStats st;
        if (train) {
          st = BatchnormStats(cur);
          // Exponential running averages; eval mode consumes them.
          LayerParams &mp = mut->params[i];
          for (int32 d = 0; d < l.dim_in; d++) {
            double mean = st.mean(0, d);
            double invstd = st.invstd(0, d);
            double var = 1.0 / (invstd * invstd) - kBatchnormEps;
            mp.running_mean(0, d) =
                float(kBatchnormMomentum * mp.running_mean(0, d) +
                      (1.0 - kBatchnormMomentum) * mean);
            mp.running_var(0, d) =
                float(kBatchnormMomentum * mp.running_var(0, d) +
                      (1.0 - kBatchnormMomentum) * var);
          }
        } else {
          st.mean = p.running_mean;
          st.invstd.Resize(1, l.dim_in);
          for (int32 d = 0; d < l.dim_in; d++)
            st.invstd(0, d) =
                float(1.0 / std::sqrt(double(p.running_var(0, d)) +
                                      kBatchnormEps));
        }
        Mat out(cur.NumRows(), cur.NumCols());
        for (int32 r = 0; r < cur.NumRows(); r++)
          for (int32 d = 0; d < cur.NumCols(); d++)
            out(r, d) = (cur(r, d) - st.mean(0, d)) * st.invstd(0, d) *
                            p.scale(0, d) +
                        p.offset(0, d);
        if (tr != nullptr) {
          tr->bn_mean = st.mean;
          tr->bn_invstd = st.invstd;
        }
        cur = std::move(out);
        break;
      }
      case LayerKind::kTdnn: {
        Mat spliced = Splice(cur, l.offsets);
        if (tr != nullptr) tr->spliced = spliced;
        cur = AffineFwd(spliced, p.w, p.b);
        break;
      }
      case LayerKind::kTdnnf: {
        Mat spliced = Splice(cur, l.offsets);
        Mat mid(spliced.NumRows(), l.bottleneck);
        Em(mid).noalias() = Em(spliced) * Em(p.factor).transpose();
        if (tr != nullptr) {
          tr->spliced = spliced;
          tr->mid = mid;
        }
        cur = AffineFwd(mid, p.w, p.b);
        break;
      }
      case LayerKind::kSubsample: {
        int32 out_rows = (cur.NumRows() + l.stride - 1) / l.stride;
        Mat out(out_rows, cur.NumCols());
        for (int32 j = 0; j < out_rows; j++)
          std::memcpy(out.RowData(j), cur.RowData(j * l.stride),
                      size_t(cur.NumCols()) * 4);
        cur = std::move(out);
        break;
      }
    }
  }
  if (trace != nullptr) trace->out = cur;
  return cur;
}

Mat Forward(const Network &net, const Mat &input) {
  return ForwardImpl(net, nullptr, input, /*train=*/false, nullptr);
}

FwdTrace ForwardTrain(Network *net, const Mat &input) {
  FwdTrace trace;
  ForwardImpl(*net, net, input, /*train=*/true, &trace);
  return trace;
}

// ---- backward ----

Gradients Backward(const Network &net, const FwdTrace &trace,
                   const Mat &grad_out) {
  const size_t L = net.layers.size();
  if (trace.layers.size() != L)
    throw std::invalid_argument("Backward: trace does not match network");
  Gradients g;
  g.layers.resize(L);
  Mat cur = grad_out;

  for (size_t ii = L; ii-- > 0;) {
    const LayerSpec &l = net.layers[ii];
    const LayerParams &p = net.params[ii];
    const LayerTrace &tr = trace.layers[ii];
    LayerGrads &lg = g.layers[ii];
    switch (l.kind) {
      case LayerKind::kAffine: {
        lg.dw.Resize(p.w.NumRows(), p.w.NumCols());
        Em(lg.dw).noalias() = Em(cur).transpose() * Em(tr.in);
        lg.db = ColSums(cur);
        lg.ng_in = WithBiasColumn(tr.in);
        lg.ng_out = cur;
        Mat next(tr.in.NumRows(), tr.in.NumCols());
        Em(next).noalias() = Em(cur) * Em(p.w);
        cur = std::move(next);
        break;
      }
      case LayerKind::kRelu: {
        for (int32 r = 0; r < cur.NumRows(); r++)
          for (int32 c = 0; c < cur.NumCols(); c++)
            if (tr.in(r, c) <= 0.0f) cur(r, c) = 0.0f;
        break;
      }
      case LayerKind::kBatchnorm: {
        const int32 N = cur.NumRows(), D = cur.NumCols();
        lg.dscale.Resize(1, D);
        lg.doffset.Resize(1, D);
        Mat next(N, D);
        for (int32 d = 0; d < D; d++) {
          const double mean = tr.bn_mean(0, d), istd = tr.bn_invstd(0, d);
          const double gamma = p.scale(0, d);
          double sum_dy = 0.0, sum_dy_xhat = 0.0;
          for (int32 r = 0; r < N; r++) {
            double xhat = (tr.in(r, d) - mean) * istd;
            double dy = cur(r, d);
            sum_dy += dy;
            sum_dy_xhat += dy * xhat;
          }
          lg.doffset(0, d) = float(sum_dy);
          lg.dscale(0, d) = float(sum_dy_xhat);
          // Train-mode statistics: the batch mean/variance depend on x.
          for (int32 r = 0; r < N; r++) {
            double xhat = (tr.in(r, d) - mean) * istd;
            double dy = cur(r, d);
            next(r, d) = float(gamma * istd *
                               (dy - sum_dy / N - xhat * sum_dy_xhat / N));
          }
        }
        cur = std::move(next);
        break;
      }
      case LayerKind::kTdnn: {
        lg.dw.Resize(p.w.NumRows(), p.w.NumCols());
        Em(lg.dw).noalias() = Em(cur).transpose() * Em(tr.spliced);
        lg.db = ColSums(cur);
        lg.ng_in = WithBiasColumn(tr.spliced);
        lg.ng_out = cur;
        Mat dspliced(tr.spliced.NumRows(), tr.spliced.NumCols());
        Em(dspliced).noalias() = Em(cur) * Em(p.w);
        cur = UnspliceAdd(dspliced, l.offsets, tr.in.NumRows(),
                          tr.in.NumCols());
        break;
      }
      case LayerKind::kTdnnf: {
        lg.dw.Resize(p.w.NumRows(), p.w.NumCols());
        Em(lg.dw).noalias() = Em(cur).transpose() * Em(tr.mid);
        lg.db = ColSums(cur);
        lg.ng_in = WithBiasColumn(tr.mid);
        lg.ng_out = cur;
        Mat dmid(tr.mid.NumRows(), tr.mid.NumCols());
        Em(dmid).noalias() = Em(cur) * Em(p.w);
        lg.dfactor.Resize(p.factor.NumRows(), p.factor.NumCols());
        Em(lg.dfactor).noalias() = Em(dmid).transpose() * Em(tr.spliced);
        lg.ng_in_factor = tr.spliced;
        lg.ng_out_factor = dmid;
        Mat dspliced(tr.spliced.NumRows(), tr.spliced.NumCols());
        Em(dspliced).noalias() = Em(dmid) * Em(p.factor);
        cur = UnspliceAdd(dspliced, l.offsets, tr.in.NumRows(),
                          tr.in.NumCols());
        break;
      }
      case LayerKind::kSubsample: {
        Mat next(tr.in.NumRows(), tr.in.NumCols());
        for (int32 j = 0; j < cur.NumRows(); j++)
          std::memcpy(next.RowData(j * l.stride), cur.RowData(j),
                      size_t(cur.NumCols()) * 4);
        cur = std::move(next);
        break;
      }
    }
  }
  g.input_grad = std::move(cur);
  return g;
}

// ---- semi-orthogonal constraint ----

Mat SemiOrthogonalStep(const Mat &m, double nu) {
  const int32 r = m.NumRows(), c = m.NumCols();
  if (r > c)
    throw std::invalid_argument(
        "semi-orthogonal factor must have rows <= cols");
  if (!(nu > 0.0 && nu <= 0.125))
    throw std::invalid_argument("semi-orthogonal nu must be in (0, 0.125]");
  Eigen::MatrixXd M = Em(m).cast<double>();
  Eigen::MatrixXd P = M * M.transpose();
  double tr_p = P.trace();
  if (tr_p <= 0.0) return m;  // zero matrix: nothing to constrain
  double alpha2 = P.squaredNorm() / tr_p;  // trace(P P^T) / trace(P)
  Eigen::MatrixXd out =
      M - 4.0 * nu * ((P - alpha2 * Eigen::MatrixXd::Identity(r, r)) * M);
  Mat result(r, c);
  Em(result) = out.cast<float>();
  return result;
}

// ---- gradient check ----

double GradCheckNet(Network net, const Mat &input, const LossFunction &loss,
                    double eps) {
  FwdTrace trace = ForwardTrain(&net, input);
  Mat lgrad(trace.out.NumRows(), trace.out.NumCols());
  loss(trace.out, &lgrad);
  Gradients grads = Backward(net, trace, lgrad);

  // Pair every trainable tensor with its analytic gradient, in
  // ForEachParam order.
  std::vector<Mat *> params;
  std::vector<const Mat *> analytic;
  for (size_t i = 0; i < net.layers.size(); i++) {
    LayerParams &p = net.params[i];
    LayerGrads &lg = grads.layers[i];
    switch (net.layers[i].kind) {
      case LayerKind::kAffine:
      case LayerKind::kTdnn:
        params.insert(params.end(), {&p.w, &p.b});
        analytic.insert(analytic.end(), {&lg.dw, &lg.db});
        break;
      case LayerKind::kTdnnf:
        params.insert(params.end(), {&p.factor, &p.w, &p.b});
        analytic.insert(analytic.end(), {&lg.dfactor, &lg.dw, &lg.db});
        break;
      case LayerKind::kBatchnorm:
        params.insert(params.end(), {&p.scale, &p.offset});
        analytic.insert(analytic.end(), {&lg.dscale, &lg.doffset});
        break;
      default:
        break;
    }
  }

  std::vector<double> diff2(params.size(), 0.0), a2(params.size(), 0.0),
      n2(params.size(), 0.0);
  for (size_t tj = 0; tj < params.size(); tj++) {
    Mat &tensor = *params[tj];
    for (size_t idx = 0; idx < tensor.NumElements(); idx++) {
      float orig = tensor.Data()[idx];
      tensor.Data()[idx] = float(orig + eps);
      double fp = loss(ForwardTrain(&net, input).out, nullptr);
      tensor.Data()[idx] = float(orig - eps);
      double fm = loss(ForwardTrain(&net, input).out, nullptr);
      tensor.Data()[idx] = orig;
      double numeric = (fp - fm) / (2.0 * eps);
      double a = analytic[tj]->Data()[idx];
      diff2[tj] += (a - numeric) * (a - numeric);
      a2[tj] += a * a;
      n2[tj] += numeric * numeric;
    }
  }

  // A tensor whose gradient is negligible against the model's largest (e.g.
  // a bias feeding a batchnorm, whose true gradient is exactly zero) carries
  // no signal beyond finite-difference noise; it is skipped rather than
  // normalized by that noise.
  double scale = 1e-8;
  for (size_t tj = 0; tj < params.size(); tj++)
    scale = std::max({scale, std::sqrt(a2[tj]), std::sqrt(n2[tj])});
  double worst = 0.0;
  for (size_t tj = 0; tj < params.size(); tj++) {
    double denom = std::max(std::sqrt(a2[tj]), std::sqrt(n2[tj]));
    if (denom <= 1e-3 * scale) continue;
    worst = std::max(worst, std::sqrt(diff2[tj]) / denom);
  }
  return worst;
}

// ---- model file ----

std::string FormatLayerSpec(const LayerSpec &spec) {
  std::ostringstream os;
  os << KindName(spec.kind);
  switch (spec.kind) {
    case LayerKind::kAffine:
      os << ' ' << spec.dim_in << ' ' << spec.dim_out;
      break;
    case LayerKind::kRelu:
    case LayerKind::kBatchnorm:
      os << ' ' << spec.dim_in;
      break;
    case LayerKind::kSubsample:
      os << ' ' << spec.dim_in << ' ' << spec.stride;
      break;
    case LayerKind::kTdnn:
    case LayerKind::kTdnnf: {
      os << ' ' << spec.dim_in << ' ' << spec.dim_out;
      if (spec.kind == LayerKind::kTdnnf) os << ' ' << spec.bottleneck;
      os << ' ';
      for (size_t k = 0; k < spec.offsets.size(); k++)
        os << (k > 0 ? "," : "") << spec.offsets[k];
      break;
    }
  }
  return os.str();
}

static std::vector<int32> ParseOffsets(const std::string &tok) {
  std::vector<int32> offsets;
  std::string cur;
  std::istringstream ss(tok);
  while (std::getline(ss, cur, ',')) {
    try {
      size_t used = 0;
      offsets.push_back(std::stoi(cur, &used));
      if (used != cur.size()) throw std::invalid_argument(cur);
    } catch (const std::logic_error &) {
      BadSpec("bad offset '" + cur + "'");
    }
  }
  if (offsets.empty()) BadSpec("empty offset list");
  return offsets;
}

LayerSpec ParseLayerSpec(const std::string &line) {
  std::istringstream ss(line);
  std::string kind;
  ss >> kind;
  LayerSpec spec;
  auto need = [&ss, &line](auto &v) {
    if (!(ss >> v)) BadSpec("truncated spec line '" + line + "'");
  };
  if (kind == "affine") {
    spec.kind = LayerKind::kAffine;
    need(spec.dim_in);
    need(spec.dim_out);
  } else if (kind == "relu" || kind == "batchnorm") {
    spec.kind = kind == "relu" ? LayerKind::kRelu : LayerKind::kBatchnorm;
    need(spec.dim_in);
    spec.dim_out = spec.dim_in;
  } else if (kind == "subsample") {
    spec.kind = LayerKind::kSubsample;
    need(spec.dim_in);
    need(spec.stride);
    spec.dim_out = spec.dim_in;
  } else if (kind == "tdnn" || kind == "tdnnf") {
    spec.kind = kind == "tdnn" ? LayerKind::kTdnn : LayerKind::kTdnnf;
    need(spec.dim_in);
    need(spec.dim_out);
    if (spec.kind == LayerKind::kTdnnf) need(spec.bottleneck);
    std::string offsets;
    need(offsets);
    spec.offsets = ParseOffsets(offsets);
  } else {
    BadSpec("unknown layer kind '" + kind + "'");
  }
  std::string rest;
  if (ss >> rest) BadSpec("trailing tokens on '" + line + "'");
  return spec;
}

// Matrices serialized per layer, in this order.
static std::vector<const Mat *> LayerTensors(const LayerSpec &spec,
                                             const LayerParams &p) {
  switch (spec.kind) {
    case LayerKind::kAffine:
    case LayerKind::kTdnn:
      return {&p.w, &p.b};
    case LayerKind::kTdnnf:
      return {&p.factor, &p.w, &p.b};
    case LayerKind::kBatchnorm:
      return {&p.scale, &p.offset, &p.running_mean, &p.running_var};
    default:
      return {};
  }
}

void WriteNetworkFile(const Network &net, const std::string &path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << "CHFG01\n";
  os << "layers " << net.layers.size() << '\n';
  for (const LayerSpec &l : net.layers) os << FormatLayerSpec(l) << '\n';
  os << "context " << net.left_context << ' ' << net.right_context << '\n';
  os << "end-header\n";
  for (size_t i = 0; i < net.layers.size(); i++)
    for (const Mat *m : LayerTensors(net.layers[i], net.params[i]))
      WriteMatrixValue(*m, os);
  if (!os) throw std::runtime_error("write failed: " + path);
}

Network ReadNetworkFile(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  auto fail = [&path](const std::string &what) {
    throw std::runtime_error("bad model file " + path + ": " + what);
  };
  std::string line;
  if (!std::getline(is, line) || line != "CHFG01") fail("missing CHFG01 magic");
  size_t num_layers = 0;
  {
    if (!std::getline(is, line)) fail("missing layer count");
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag >> num_layers) || tag != "layers")
      fail("expected 'layers <count>'");
  }
  Network net;
  for (size_t i = 0; i < num_layers; i++) {
    if (!std::getline(is, line)) fail("truncated layer list");
    net.layers.push_back(ParseLayerSpec(line));
  }
  Context stored;
  {
    if (!std::getline(is, line)) fail("missing context line");
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag >> stored.left >> stored.right) || tag != "context")
      fail("expected 'context <left> <right>'");
  }
  if (!std::getline(is, line) || line != "end-header")
    fail("missing end-header");

  ValidateLayerSpecs(net.layers);
  Context computed = ComputeContext(net.layers);
  if (!(computed == stored))
    fail("stored context does not match the layer stack");
  net.left_context = computed.left;
  net.right_context = computed.right;

  net.params.resize(net.layers.size());
  Network expect = InitNetwork(net.layers, /*seed=*/0);
  for (size_t i = 0; i < net.layers.size(); i++) {
    std::vector<const Mat *> want =
        LayerTensors(expect.layers[i], expect.params[i]);
    std::vector<const Mat *> slots =
        LayerTensors(net.layers[i], net.params[i]);
    for (size_t k = 0; k < slots.size(); k++) {
      Mat m = ReadMatrixValue(is, int64(is.tellg()));
      if (m.NumRows() != want[k]->NumRows() ||
          m.NumCols() != want[k]->NumCols())
        fail("parameter matrix " + std::to_string(k) + " of layer " +
             std::to_string(i) + " has wrong shape");
      *const_cast<Mat *>(slots[k]) = std::move(m);
    }
  }
  return net;
}

}  // namespace chainforge
