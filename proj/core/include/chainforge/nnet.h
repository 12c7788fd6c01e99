// chainforge/nnet.h

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

#ifndef CHAINFORGE_NNET_H_
#define CHAINFORGE_NNET_H_

#include <functional>
#include <string>
#include <vector>

#include "chainforge/matrix.h"

namespace chainforge {

// Feed-forward acoustic models are flat lists of layers; rows of every
// activation matrix are frames.  Parameters and activations are float32;
// reductions accumulate in double.
enum class LayerKind { kAffine, kRelu, kBatchnorm, kTdnn, kTdnnf, kSubsample };

struct LayerSpec {
  LayerKind kind = LayerKind::kAffine;
  int32 dim_in = 0;
  int32 dim_out = 0;
  std::vector<int32> offsets;  // tdnn/tdnnf: strictly ascending splice offsets
  int32 bottleneck = 0;        // tdnnf only
  int32 stride = 1;            // subsample only

  bool operator==(const LayerSpec &) const = default;
};

// Time context required per output frame.
struct Context {
  int32 left = 0;
  int32 right = 0;
  bool operator==(const Context &) const = default;
};

// Propagates the set of required input offsets backward from {0}: a splice
// layer with offsets O maps C to {c + o}; a subsample layer of stride s
// maps C to {c * s}.  left = -min, right = max of the final set.
Context ComputeContext(const std::vector<LayerSpec> &layers);

// Product of all subsample strides (the model's output frame rate divisor).
int32 StrideProduct(const std::vector<LayerSpec> &layers);

// Throws std::invalid_argument on inconsistent stacks: dimension chain
// mismatches, empty or non-ascending offsets, bottleneck not smaller than
// both dim_out and the spliced input width, stride < 1.
void ValidateLayerSpecs(const std::vector<LayerSpec> &layers);

// Parameters for one layer; only the fields the kind uses are non-empty.
//  affine/tdnn: w (dim_out x spliced_in), b (1 x dim_out)
//  tdnnf:       factor (bottleneck x spliced_in, semi-orthogonal),
//               w (dim_out x bottleneck), b (1 x dim_out)
//  batchnorm:   scale, offset, running_mean, running_var (each 1 x dim);
//               the running pair tracks training batch statistics with
//               momentum 0.99 and is used in eval mode
struct LayerParams {
  Mat w, b, factor;
  Mat scale, offset, running_mean, running_var;
};

struct Network {
  std::vector<LayerSpec> layers;
  std::vector<LayerParams> params;
  // Frozen at construction; always equals ComputeContext(layers).
  int32 left_context = 0;
  int32 right_context = 0;
};

// Weights U(-a, a) with a = 1/sqrt(fan_in); biases zero; batchnorm at
// identity; tdnnf factors immediately pulled onto the semi-orthogonal
// manifold (20 steps).
Network InitNetwork(const std::vector<LayerSpec> &layers, uint64 seed);

// Applies fn to every trainable tensor, in a fixed layer-major order (the
// same order Backward reports gradients in).
void ForEachParam(Network *net, const std::function<void(Mat &)> &fn);
void ForEachParam(const Network &net, const std::function<void(const Mat &)> &fn);

// Like ForEachParam but also visits non-trainable state (batchnorm running
// mean/variance) — the set of tensors the model file stores and model
// averaging must cover.
void ForEachTensor(Network *net, const std::function<void(Mat &)> &fn);
void ForEachTensor(const Network &net,
                   const std::function<void(const Mat &)> &fn);

// ---- forward / backward ----

struct LayerTrace {
  Mat in;                    // layer input
  Mat spliced;               // tdnn/tdnnf
  Mat mid;                   // tdnnf bottleneck output
  Mat bn_mean, bn_invstd;    // batchnorm statistics used (1 x dim)
};

struct FwdTrace {
  std::vector<LayerTrace> layers;
  Mat out;
};

// Eval-mode forward (running batchnorm statistics, no trace).
// Throws std::invalid_argument("insufficient context: ...") when fewer than
// left + right + 1 input frames are given.  Output frame count equals
// (input frames - left - right) divided by the stride product, rounding up.
Mat Forward(const Network &net, const Mat &input);

// Train-mode forward: batchnorm uses batch statistics (eps 1e-5) and
// updates the running averages in place; activations needed by Backward
// are stashed in the trace.
FwdTrace ForwardTrain(Network *net, const Mat &input);

// Per-layer gradients plus the captured (input, output-derivative) pairs
// that natural-gradient updates precondition.  ng_in carries a trailing
// all-ones bias column.
struct LayerGrads {
  Mat dw, db, dfactor, dscale, doffset;
  Mat ng_in, ng_out;                // for w/b of affine, tdnn, tdnnf
  Mat ng_in_factor, ng_out_factor;  // for the tdnnf factor (no bias column)
};

struct Gradients {
  std::vector<LayerGrads> layers;
  Mat input_grad;
};

// Backpropagation through a train-mode trace.
Gradients Backward(const Network &net, const FwdTrace &trace,
                   const Mat &grad_out);

// ---- semi-orthogonal constraint (factored layers) ----

// One constraint step: with P = M M^T and alpha^2 = trace(P P^T)/trace(P),
// returns M - 4 nu (P - alpha^2 I) M.  Row-orthogonal matrices scaled by
// any constant are exactly its fixed points.  Rows must not exceed columns.
Mat SemiOrthogonalStep(const Mat &m, double nu);

constexpr double kSemiOrthogonalNu = 0.125;
constexpr int32 kSemiOrthogonalInterval = 4;  // optimizer steps per constraint

// ---- gradient checking ----

// loss(out, grad) returns the scalar loss and, when grad != nullptr, fills
// it with d loss / d out.
using LossFunction = std::function<double(const Mat &, Mat *)>;

// Central finite differences over every trainable parameter, train-mode
// forward.  Returns the maximum over parameter tensors of the relative
// Frobenius error ||analytic - numeric||_F / max(||analytic||_F,
// ||numeric||_F); tensors whose gradient norm is below 1e-3 of the largest
// tensor's are skipped (their true gradient can be exactly zero, e.g. a
// bias feeding a batchnorm, leaving only finite-difference noise to
// normalize by).  Intended for small nets (<= ~1e4 parameters).
double GradCheckNet(Network net, const Mat &input, const LossFunction &loss,
                    double eps);

// ---- model file ----
//
// Layout: a text header
//   CHFG01
//   layers <count>
//   <one spec line per layer>        e.g.  tdnn 3 64 -1,0,1
//   context <left> <right>
//   end-header
// followed by each layer's parameter matrices, in ForEachParam order plus
// batchnorm running statistics, serialized in the binary archive matrix
// format.
void WriteNetworkFile(const Network &net, const std::string &path);
Network ReadNetworkFile(const std::string &path);

// One spec line, same syntax as the model header and the layer= lines of
// training configs:
//   affine <in> <out> | relu <dim> | batchnorm <dim> |
//   tdnn <in> <out> <o1,o2,...> | tdnnf <in> <out> <bottleneck> <o1,...> |
//   subsample <dim> <stride>
std::string FormatLayerSpec(const LayerSpec &spec);
LayerSpec ParseLayerSpec(const std::string &line);

}  // namespace chainforge

#endif  // CHAINFORGE_NNET_H_
