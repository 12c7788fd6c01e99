// core/include/chainforge/trainer.h

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

#ifndef CHAINFORGE_TRAINER_H_
#define CHAINFORGE_TRAINER_H_

#include <memory>
#include <string>
#include <vector>

#include "chainforge/chain-loss.h"
#include "chainforge/egs.h"
#include "chainforge/ngsgd.h"
#include "chainforge/nnet.h"
#include "chainforge/phone-lm.h"

namespace chainforge {

enum class OptimizerKind { kNgsgd, kSgd, kAdam };

OptimizerKind ParseOptimizerKind(const std::string &name);
std::string OptimizerKindName(OptimizerKind kind);

struct TrainerConfig {
  int32 num_epochs = 5;
  int32 num_jobs = 1;
  int32 minibatch_chunks = 32;  // chunks per shard; one shard per job/iter
  double lr_initial = 1e-3;
  double lr_final = 1e-5;
  OptimizerKind optimizer = OptimizerKind::kNgsgd;
  ChainOptions chain;
  int32 subsample_factor = 3;
  uint64 seed = 0;
  int32 valid_chunks = 32;  // validation egs evaluated after each merge
};

struct TrainLogEntry {
  int32 iter = 0;
  double lr = 0.0;
  double objf_train = 0.0;  // mean per-chunk objf_mmi across this iteration
  double objf_valid = 0.0;  // on the merged model; NaN when no valid egs
  double seconds = 0.0;
  int64 skipped_chunks = 0;
};

// Tab-separated with a leading "iter lr objf_train objf_valid seconds
// skipped" header; floats printed with 17 significant digits so values
// round-trip bitwise.
void WriteTrainLog(const std::vector<TrainLogEntry> &log,
                   const std::string &path);
std::vector<TrainLogEntry> ReadTrainLog(const std::string &path);

// Per-job optimizer state: natural-gradient covariances (one pair per
// preconditioned transform) or Adam moments, plus the step counter driving
// the periodic semi-orthogonal constraint.  States persist across the
// iterations of one training run; each job slot owns its own.
struct JobState;

JobState *NewJobState(const Network &net, const TrainerConfig &config);
void FreeJobState(JobState *state);

struct JobStateDeleter {
  void operator()(JobState *s) const { FreeJobState(s); }
};
using JobStatePtr = std::unique_ptr<JobState, JobStateDeleter>;

struct JobStats {
  double objf_sum = 0.0;  // sum of per-chunk objf_mmi
  int64 chunks = 0;       // chunks contributing to objf_sum
  int64 skipped = 0;      // chunks dropped on "empty composition"
};

// One pass over a shard: per chunk, train-mode forward, chain loss against
// `den`, backward, and one optimizer step at rate lr.  Chunks whose
// numerator or denominator rejects the frame count are skipped and counted.
// A zero rate leaves the model bitwise unchanged.
JobStats RunJob(Network *model, const std::vector<const EgsChunk *> &shard,
                const Wfsa &den, const LeakyInit &pi,
                const TrainerConfig &config, double lr, JobState *state);

// Parameter-wise arithmetic mean (including batchnorm running statistics).
// All models must share one architecture.
Network MergeModels(const std::vector<Network> &models);

struct TrainResult {
  Network model;
  std::vector<TrainLogEntry> log;
  int64 skipped_chunks = 0;
};

// Full training loop against denominator graph `den` (its stationary
// distribution seeds the leaky-HMM).  Each epoch's egs are reshuffled
// (seed + epoch) and cut into ceil(num_egs / minibatch_chunks) shards; every
// iteration hands the next num_jobs shards to parallel jobs seeded from the
// same merged model, then averages the job models and evaluates the first
// valid_chunks validation egs on the merge.  total_iters =
// ceil(num_epochs * shards / num_jobs); the learning rate decays
// exponentially across it.
TrainResult Train(const Network &init, const std::vector<EgsChunk> &egs,
                  const std::vector<EgsChunk> &valid_egs, const Wfsa &den,
                  const TrainerConfig &config);

}  // namespace chainforge

#endif  // CHAINFORGE_TRAINER_H_
