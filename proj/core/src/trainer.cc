// core/src/trainer.cc

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

#include "chainforge/trainer.h"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "chainforge/den-graph.h"

namespace chainforge {

namespace {

struct LayerState {
  NgState ng_w_in, ng_w_out;  // affine/tdnn [W|b]; tdnnf second transform
  NgState ng_f_in, ng_f_out;  // tdnnf bottleneck factor
  AdamState adam_w, adam_b, adam_factor, adam_scale, adam_offset;
};

MatD ToDouble(const Mat &m) {
  MatD out(m.NumRows(), m.NumCols());
  for (size_t i = 0; i < m.NumElements(); i++) out.Data()[i] = m.Data()[i];
  return out;
}

// Gradient of the minimized loss (the trainer descends on -objf).
Mat NegatedToFloat(const MatD &m) {
  Mat out(m.NumRows(), m.NumCols());
  for (size_t i = 0; i < m.NumElements(); i++)
    out.Data()[i] = float(-m.Data()[i]);
  return out;
}

void CheckChunkShape(const EgsChunk &chunk, int32 out_rows) {
  if (out_rows != chunk.output_frames)
    throw std::runtime_error(
        "model produced " + std::to_string(out_rows) + " output frames for " +
        chunk.key + ", egs expect " + std::to_string(chunk.output_frames) +
        " (context or subsample factor mismatch)");
}

}  // namespace

struct JobState {
  std::vector<LayerState> layers;
  int64 steps = 0;
};

JobState *NewJobState(const Network &net, const TrainerConfig &) {
  JobState *state = new JobState;
  state->layers.resize(net.layers.size());
  return state;
}

void FreeJobState(JobState *state) { delete state; }

OptimizerKind ParseOptimizerKind(const std::string &name) {
  if (name == "ngsgd") return OptimizerKind::kNgsgd;
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adam") return OptimizerKind::kAdam;
  throw std::invalid_argument("unknown optimizer '" + name +
                              "' (expected ngsgd, sgd, or adam)");
}

std::string OptimizerKindName(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::kNgsgd: return "ngsgd";
    case OptimizerKind::kSgd: return "sgd";
    case OptimizerKind::kAdam: return "adam";
  }
  return "?";
}

static void OptimizerStep(Network *model, const Gradients &grads,
                          const TrainerConfig &config, double lr,
                          JobState *state) {
  for (size_t i = 0; i < model->layers.size(); i++) {
    const LayerSpec &l = model->layers[i];
    LayerParams &p = model->params[i];
    const LayerGrads &lg = grads.layers[i];
    LayerState &ls = state->layers[i];
    switch (config.optimizer) {
      case OptimizerKind::kNgsgd:
        // Natural gradient on the affine transforms, plain steps elsewhere.
        switch (l.kind) {
          case LayerKind::kAffine:
          case LayerKind::kTdnn:
            NgAffineUpdate(lg.ng_in, lg.ng_out, lr, &ls.ng_w_in, &ls.ng_w_out,
                           &p.w, &p.b);
            break;
          case LayerKind::kTdnnf:
            NgAffineUpdate(lg.ng_in_factor, lg.ng_out_factor, lr, &ls.ng_f_in,
                           &ls.ng_f_out, &p.factor, nullptr);
            NgAffineUpdate(lg.ng_in, lg.ng_out, lr, &ls.ng_w_in, &ls.ng_w_out,
                           &p.w, &p.b);
            break;
          case LayerKind::kBatchnorm:
            SgdStep(&p.scale, lg.dscale, lr);
            SgdStep(&p.offset, lg.doffset, lr);
            break;
          default:
            break;
        }
        break;
      case OptimizerKind::kSgd:
        switch (l.kind) {
          case LayerKind::kAffine:
          case LayerKind::kTdnn:
            SgdStep(&p.w, lg.dw, lr);
            SgdStep(&p.b, lg.db, lr);
            break;
          case LayerKind::kTdnnf:
            SgdStep(&p.factor, lg.dfactor, lr);
            SgdStep(&p.w, lg.dw, lr);
            SgdStep(&p.b, lg.db, lr);
            break;
          case LayerKind::kBatchnorm:
            SgdStep(&p.scale, lg.dscale, lr);
            SgdStep(&p.offset, lg.doffset, lr);
            break;
          default:
            break;
        }
        break;
      case OptimizerKind::kAdam:
        switch (l.kind) {
          case LayerKind::kAffine:
          case LayerKind::kTdnn:
            AdamStep(&ls.adam_w, &p.w, lg.dw, lr);
            AdamStep(&ls.adam_b, &p.b, lg.db, lr);
            break;
          case LayerKind::kTdnnf:
            AdamStep(&ls.adam_factor, &p.factor, lg.dfactor, lr);
            AdamStep(&ls.adam_w, &p.w, lg.dw, lr);
            AdamStep(&ls.adam_b, &p.b, lg.db, lr);
            break;
          case LayerKind::kBatchnorm:
            AdamStep(&ls.adam_scale, &p.scale, lg.dscale, lr);
            AdamStep(&ls.adam_offset, &p.offset, lg.doffset, lr);
            break;
          default:
            break;
        }
        break;
    }
  }
  state->steps++;
  if (state->steps % kSemiOrthogonalInterval == 0) {
    for (size_t i = 0; i < model->layers.size(); i++)
      if (model->layers[i].kind == LayerKind::kTdnnf)
        model->params[i].factor =
            SemiOrthogonalStep(model->params[i].factor, kSemiOrthogonalNu);
  }
}

JobStats RunJob(Network *model, const std::vector<const EgsChunk *> &shard,
                const Wfsa &den, const LeakyInit &pi,
                const TrainerConfig &config, double lr, JobState *state) {
  if (state->layers.size() != model->layers.size())
    throw std::invalid_argument("RunJob: job state does not match model");
  JobStats stats;
  for (const EgsChunk *chunk : shard) {
    double objf_mmi = 0.0;
    if (lr == 0.0) {
      // A zero rate must leave the model bitwise unchanged, so avoid even
      // the train-mode batchnorm running-average update.
      Mat out = Forward(*model, chunk->input);
      CheckChunkShape(*chunk, out.NumRows());
      try {
        objf_mmi = ChainLoss(chunk->supervision, den, pi, ToDouble(out),
                             config.chain)
                       .objf_mmi;
      } catch (const EmptyCompositionError &) {
        stats.skipped++;
        continue;
      }
    } else {
      FwdTrace trace = ForwardTrain(model, chunk->input);
      CheckChunkShape(*chunk, trace.out.NumRows());
      ChainLossOutput loss;
      try {
        loss = ChainLoss(chunk->supervision, den, pi, ToDouble(trace.out),
                         config.chain);
      } catch (const EmptyCompositionError &) {
        stats.skipped++;
        continue;
      }
      objf_mmi = loss.objf_mmi;
      Gradients grads = Backward(*model, trace, NegatedToFloat(loss.grad));
      OptimizerStep(model, grads, config, lr, state);
    }
    if (!std::isfinite(objf_mmi))
      throw std::runtime_error("training diverged: non-finite objective on " +
                               chunk->key);
    stats.objf_sum += objf_mmi;
    stats.chunks++;
  }
  return stats;
}

Network MergeModels(const std::vector<Network> &models) {
  if (models.empty())
    throw std::invalid_argument("MergeModels: no models given");
  for (const Network &m : models)
    if (m.layers != models[0].layers)
      throw std::invalid_argument("MergeModels: architecture mismatch");

  Network out = models[0];
  std::vector<Mat *> out_tensors;
  ForEachTensor(&out, [&out_tensors](Mat &m) { out_tensors.push_back(&m); });
  std::vector<std::vector<const Mat *>> per_model(models.size());
  for (size_t i = 0; i < models.size(); i++)
    ForEachTensor(models[i], [&per_model, i](const Mat &m) {
      per_model[i].push_back(&m);
    });

  const double inv = 1.0 / models.size();
  for (size_t k = 0; k < out_tensors.size(); k++) {
    Mat *dst = out_tensors[k];
    for (size_t e = 0; e < dst->NumElements(); e++) {
      double sum = 0.0;
      for (size_t i = 0; i < models.size(); i++)
        sum += per_model[i][k]->Data()[e];
      dst->Data()[e] = float(sum * inv);
    }
  }
  return out;
}

namespace {

// Mean objf_mmi over the first max_chunks validation egs, evaluated on the
// merged model in eval mode; NaN when nothing is evaluable.
double ValidObjf(const Network &model, const std::vector<EgsChunk> &valid,
                 int32 max_chunks, const Wfsa &den, const LeakyInit &pi,
                 const ChainOptions &opts) {
  double sum = 0.0;
  int64 count = 0;
  const size_t n = std::min(size_t(std::max(max_chunks, 0)), valid.size());
  for (size_t i = 0; i < n; i++) {
    Mat out = Forward(model, valid[i].input);
    CheckChunkShape(valid[i], out.NumRows());
    try {
      sum += ChainLoss(valid[i].supervision, den, pi, ToDouble(out), opts)
                 .objf_mmi;
      count++;
    } catch (const EmptyCompositionError &) {
    }
  }
  return count > 0 ? sum / count : std::nan("");
}

}  // namespace

TrainResult Train(const Network &init, const std::vector<EgsChunk> &egs,
                  const std::vector<EgsChunk> &valid_egs, const Wfsa &den,
                  const TrainerConfig &config) {
  if (egs.empty()) throw std::invalid_argument("Train: no egs");
  if (config.num_epochs < 1 || config.num_jobs < 1 ||
      config.minibatch_chunks < 1 || config.subsample_factor < 1)
    throw std::invalid_argument("Train: counts must be >= 1");
  if (StrideProduct(init.layers) != config.subsample_factor)
    throw std::invalid_argument(
        "model stride product " +
        std::to_string(StrideProduct(init.layers)) +
        " != configured subsample factor " +
        std::to_string(config.subsample_factor));

  const int32 n = int32(egs.size());
  const int32 shards_per_epoch =
      (n + config.minibatch_chunks - 1) / config.minibatch_chunks;
  const int64 total_shards = int64(config.num_epochs) * shards_per_epoch;
  const int32 total_iters =
      int32((total_shards + config.num_jobs - 1) / config.num_jobs);
  const LrSchedule schedule{config.lr_initial, config.lr_final, total_iters};
  ValidateLrSchedule(schedule);

  const LeakyInit pi = StationaryDistribution(den);

  std::vector<JobStatePtr> states;
  for (int32 j = 0; j < config.num_jobs; j++)
    states.emplace_back(NewJobState(init, config));

  // Epoch -> that epoch's shuffled shard index lists, built lazily (one
  // iteration can straddle an epoch boundary).
  std::unordered_map<int32, std::vector<std::vector<int32>>> epoch_shards;
  auto shard_for = [&](int64 g) -> const std::vector<int32> & {
    int32 epoch = int32(g / shards_per_epoch);
    int32 pos = int32(g % shards_per_epoch);
    auto it = epoch_shards.find(epoch);
    if (it == epoch_shards.end())
      it = epoch_shards
               .emplace(epoch, ShardAndShuffleIndices(n, shards_per_epoch,
                                                      config.seed + epoch))
               .first;
    return it->second[pos];
  };

  TrainResult result;
  result.model = init;
  for (int32 iter = 0; iter < total_iters; iter++) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = LrAt(schedule, iter);

    // Collect this iteration's shards; the tail iteration may run fewer
    // jobs than configured.
    std::vector<std::vector<const EgsChunk *>> shards;
    for (int32 j = 0; j < config.num_jobs; j++) {
      int64 g = int64(iter) * config.num_jobs + j;
      if (g >= total_shards) break;
      std::vector<const EgsChunk *> shard;
      for (int32 idx : shard_for(g)) shard.push_back(&egs[idx]);
      shards.push_back(std::move(shard));
    }

    std::vector<Network> models(shards.size(), result.model);
    std::vector<JobStats> stats(shards.size());
    std::vector<std::exception_ptr> errors(shards.size());
    auto work = [&](size_t j) {
      try {
        stats[j] = RunJob(&models[j], shards[j], den, pi, config, lr,
                          states[j].get());
      } catch (...) {
        errors[j] = std::current_exception();
      }
    };
    if (shards.size() == 1) {
      work(0);
    } else {
      std::vector<std::thread> threads;
      for (size_t j = 0; j < shards.size(); j++)
        threads.emplace_back(work, j);
      for (std::thread &t : threads) t.join();
    }
    for (const std::exception_ptr &e : errors)
      if (e) std::rethrow_exception(e);

    result.model = MergeModels(models);

    TrainLogEntry entry;
    entry.iter = iter;
    entry.lr = lr;
    double objf_sum = 0.0;
    int64 chunks = 0;
    for (const JobStats &s : stats) {
      objf_sum += s.objf_sum;
      chunks += s.chunks;
      entry.skipped_chunks += s.skipped;
    }
    entry.objf_train = chunks > 0 ? objf_sum / chunks : std::nan("");
    entry.objf_valid = ValidObjf(result.model, valid_egs, config.valid_chunks,
                                 den, pi, config.chain);
    entry.seconds = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    result.skipped_chunks += entry.skipped_chunks;
    result.log.push_back(entry);
  }
  return result;
}

void WriteTrainLog(const std::vector<TrainLogEntry> &log,
                   const std::string &path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << "iter\tlr\tobjf_train\tobjf_valid\tseconds\tskipped\n";
  char buf[128];
  for (const TrainLogEntry &e : log) {
    std::snprintf(buf, sizeof(buf), "%d\t%.17g\t%.17g\t%.17g\t%.3f\t%lld",
                  int(e.iter), e.lr, e.objf_train, e.objf_valid, e.seconds,
                  static_cast<long long>(e.skipped_chunks));
    os << buf << '\n';
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

std::vector<TrainLogEntry> ReadTrainLog(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  std::string line;
  if (!std::getline(is, line) || line.rfind("iter\t", 0) != 0)
    throw std::runtime_error("bad train log header in " + path);
  std::vector<TrainLogEntry> log;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    // stod rather than stream extraction so "nan" round-trips.
    std::string lr, train, valid, seconds;
    TrainLogEntry e;
    long long skipped = 0;
    if (!(ss >> e.iter >> lr >> train >> valid >> seconds >> skipped))
      throw std::runtime_error("bad train log line '" + line + "'");
    try {
      e.lr = std::stod(lr);
      e.objf_train = std::stod(train);
      e.objf_valid = std::stod(valid);
      e.seconds = std::stod(seconds);
    } catch (const std::logic_error &) {
      throw std::runtime_error("bad train log line '" + line + "'");
    }
    e.skipped_chunks = skipped;
    log.push_back(e);
  }
  return log;
}

}  // namespace chainforge
