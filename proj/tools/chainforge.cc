// tools/chainforge.cc

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

// Command-line front end.  One executable, eight subcommands wiring the
// library into the full recipe: gen-toy -> egs -> train -> decode -> wer,
// plus graph building, objective evaluation and gradient checking.
//
// Exit codes: 0 success, 1 usage error, 2 data/computation error.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "chainforge/ark-io.h"
#include "chainforge/chain-loss.h"
#include "chainforge/common.h"
#include "chainforge/config.h"
#include "chainforge/decode.h"
#include "chainforge/den-graph.h"
#include "chainforge/egs.h"
#include "chainforge/matrix.h"
#include "chainforge/nnet.h"
#include "chainforge/num-graph.h"
#include "chainforge/phone-lm.h"
#include "chainforge/toy-corpus.h"
#include "chainforge/trainer.h"
#include "chainforge/wfsa.h"

namespace chainforge {
namespace {

std::string FormatReal(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<int32> ParseIntList(const std::string &text) {
  std::vector<int32> out;
  std::string norm = text;
  std::replace(norm.begin(), norm.end(), ',', ' ');
  std::istringstream ss(norm);
  int32 v;
  while (ss >> v) out.push_back(v);
  if (!ss.eof())
    throw std::invalid_argument("expected a list of integers, got '" + text +
                                "'");
  return out;
}

MatD ToDouble(const Mat &m) {
  MatD d(m.NumRows(), m.NumCols());
  for (int32 r = 0; r < m.NumRows(); r++)
    for (int32 c = 0; c < m.NumCols(); c++) d(r, c) = m(r, c);
  return d;
}

// Network output rows for one chunk must match the supervision length.
void CheckOutputRows(const EgsChunk &eg, const Mat &out) {
  if (out.NumRows() != eg.output_frames) {
    throw std::runtime_error(
        "model produced " + std::to_string(out.NumRows()) +
        " output frames for " + eg.key + ", egs expect " +
        std::to_string(eg.output_frames) +
        " (context or subsample factor mismatch)");
  }
}

// ---------------------------------------------------------------------------
// graph

struct GraphArgs {
  std::string type;
  std::string lm_path;
  std::string out_path;
  std::string transcript;
  std::string words_path;
  int32 frames = 0;
  int32 min_dur = 0;
  int32 max_dur = 0;
};

int RunGraph(const GraphArgs &a) {
  PhoneLm lm = ReadPhoneLmFile(a.lm_path);
  if (a.type == "den") {
    WriteWfsaFile(BuildDenominatorGraph(lm), a.out_path);
  } else if (a.type == "num") {
    if (a.frames <= 0)
      throw std::invalid_argument("numerator graphs need --frames > 0");
    std::vector<int32> transcript = ParseIntList(a.transcript);
    std::optional<std::vector<DurationRange>> durations;
    if (a.min_dur != 0 || a.max_dur != 0) {
      if (a.min_dur < 1 || a.max_dur < a.min_dur)
        throw std::invalid_argument(
            "bad duration bounds: need 1 <= --min-dur <= --max-dur");
      durations = std::vector<DurationRange>{{a.min_dur, a.max_dur}};
    }
    WriteWfsaFile(BuildNumeratorGraph(transcript, lm, a.frames, durations),
                  a.out_path);
  } else {  // "decode"
    if (a.words_path.empty())
      throw std::invalid_argument("decoding graphs need --words");
    std::vector<std::string> table = ReadWordTableFile(a.words_path);
    std::vector<std::string> phone_words(table.begin() + 1, table.end());
    WriteDecodeGraphFile(BuildDecodeGraph(lm, phone_words), a.out_path);
  }
  std::fprintf(stderr, "chainforge graph: wrote %s graph to %s\n",
               a.type.c_str(), a.out_path.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// egs

struct EgsArgs {
  std::string feats_scp;
  std::string transcripts_path;
  std::string lm_path;
  std::string out_path;
  std::string config_path;
  int32 chunk_width = 140;
  int32 subsample_factor = 3;
  int32 left_context = -1;   // -1: derive from --config layers
  int32 right_context = -1;
  int32 num_shards = 1;
  uint64 seed = 0;
};

// egs.ark -> egs.<j>.ark; anything else gets .<j> appended.
std::string ShardPath(const std::string &out, int32 shard) {
  const std::string ext = ".ark";
  if (out.size() > ext.size() &&
      out.compare(out.size() - ext.size(), ext.size(), ext) == 0) {
    return out.substr(0, out.size() - ext.size()) + "." +
           std::to_string(shard) + ext;
  }
  return out + "." + std::to_string(shard);
}

int RunEgs(const EgsArgs &a) {
  PhoneLm lm = ReadPhoneLmFile(a.lm_path);
  EgsOptions opts;
  opts.chunk_width = a.chunk_width;
  opts.subsample_factor = a.subsample_factor;
  opts.left_context = a.left_context;
  opts.right_context = a.right_context;
  if (opts.left_context < 0 || opts.right_context < 0) {
    if (a.config_path.empty())
      throw std::invalid_argument(
          "--left-context/--right-context not given and no --config to "
          "derive them from");
    RecipeConfig cfg = LoadRecipeConfig(a.config_path);
    ValidateLayerSpecs(cfg.layers);
    Context ctx = ComputeContext(cfg.layers);
    if (opts.left_context < 0) opts.left_context = ctx.left;
    if (opts.right_context < 0) opts.right_context = ctx.right;
  }

  auto transcripts = ReadTranscriptFile(a.transcripts_path);
  std::map<std::string, const std::vector<int32> *> transcript_of;
  for (const auto &[key, phones] : transcripts) {
    if (!transcript_of.emplace(key, &phones).second)
      throw std::runtime_error("duplicate transcript for utterance " + key);
  }

  RandomAccessMatrixReader feats(a.feats_scp);
  std::vector<EgsChunk> egs;
  for (const ScpEntry &entry : feats.Entries()) {
    auto it = transcript_of.find(entry.key);
    if (it == transcript_of.end())
      throw std::runtime_error("no transcript for utterance " + entry.key);
    std::vector<EgsChunk> chunks =
        MakeEgs(entry.key, feats.Read(entry.key), *it->second, lm, opts);
    for (EgsChunk &c : chunks) egs.push_back(std::move(c));
  }

  if (a.num_shards <= 1) {
    WriteEgsFile(egs, a.out_path);
    std::fprintf(stderr, "chainforge egs: wrote %zu chunks to %s\n",
                 egs.size(), a.out_path.c_str());
  } else {
    std::vector<std::vector<EgsChunk>> shards =
        ShardAndShuffle(egs, a.num_shards, a.seed);
    for (int32 j = 0; j < a.num_shards; j++) {
      std::string path = ShardPath(a.out_path, j + 1);
      WriteEgsFile(shards[j], path);
      std::fprintf(stderr, "chainforge egs: wrote %zu chunks to %s\n",
                   shards[j].size(), path.c_str());
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string config_path;
  std::string egs_path;
  std::string valid_egs_path;
  std::string lm_path;
  std::string dir;
  std::vector<std::string> overrides;  // "key=value", applied in order
};

int RunTrain(const TrainArgs &a) {
  RecipeConfig cfg = LoadRecipeConfig(a.config_path);
  for (const std::string &kv : a.overrides) {
    size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("override '" + kv +
                                  "' is not of the form key=value");
    ApplyConfigLine(&cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (cfg.layers.empty())
    throw std::invalid_argument("config " + a.config_path +
                                " has no layer= lines");

  PhoneLm lm = ReadPhoneLmFile(a.lm_path);
  Wfsa den = BuildDenominatorGraph(lm);
  std::vector<EgsChunk> egs = ReadEgsFile(a.egs_path);
  std::vector<EgsChunk> valid_egs;
  if (!a.valid_egs_path.empty()) valid_egs = ReadEgsFile(a.valid_egs_path);

  Network init = InitNetwork(cfg.layers, cfg.trainer.seed);
  TrainResult result = Train(init, egs, valid_egs, den, cfg.trainer);

  for (const TrainLogEntry &e : result.log) {
    std::fprintf(stderr,
                 "chainforge train: iter %d lr %.6g objf_train %.6f "
                 "objf_valid %.6f (%.2fs, skipped %lld)\n",
                 e.iter, e.lr, e.objf_train, e.objf_valid, e.seconds,
                 static_cast<long long>(e.skipped_chunks));
  }

  std::filesystem::create_directories(a.dir);
  std::string model_path = a.dir + "/final.mdl";
  std::string log_path = a.dir + "/train.log";
  WriteNetworkFile(result.model, model_path);
  WriteTrainLog(result.log, log_path);
  std::fprintf(stderr,
               "chainforge train: wrote %s and %s (%zu iterations, "
               "%lld skipped chunks)\n",
               model_path.c_str(), log_path.c_str(), result.log.size(),
               static_cast<long long>(result.skipped_chunks));
  return 0;
}

// ---------------------------------------------------------------------------
// objf

struct ObjfArgs {
  std::string egs_path;
  std::string model_path;
  std::string lm_path;
  int32 max_chunks = 0;  // 0: all
  ChainOptions chain;
};

int RunObjf(const ObjfArgs &a) {
  std::vector<EgsChunk> egs = ReadEgsFile(a.egs_path);
  if (egs.empty()) throw std::runtime_error("no egs in " + a.egs_path);
  Network net = ReadNetworkFile(a.model_path);
  PhoneLm lm = ReadPhoneLmFile(a.lm_path);
  Wfsa den = BuildDenominatorGraph(lm);
  LeakyInit pi = StationaryDistribution(den);

  int32 n = egs.size();
  if (a.max_chunks > 0) n = std::min(n, a.max_chunks);
  double mmi = 0.0, xent = 0.0, l2 = 0.0;
  for (int32 i = 0; i < n; i++) {
    Mat out = Forward(net, egs[i].input);
    CheckOutputRows(egs[i], out);
    MatD o = ToDouble(out);
    // The network's own output doubles as the cross-entropy head, so
    // objf_xent reports the frame-level diagnostic.
    ChainLossOutput loss =
        ChainLoss(egs[i].supervision, den, pi, o, a.chain, &o);
    mmi += loss.objf_mmi;
    xent += loss.objf_xent;
    l2 += loss.objf_l2;
  }
  std::printf("mmi=%.6f xent=%.6f l2=%.6f\n", mmi / n, xent / n, l2 / n);
  std::fprintf(stderr, "chainforge objf: averaged %d of %zu chunks\n", n,
               egs.size());
  return 0;
}

// ---------------------------------------------------------------------------
// gradcheck

PhoneLm RandomPhoneLm(int32 num_phones, Rng *rng) {
  PhoneLm lm;
  lm.num_phones = num_phones;
  lm.self_loop_prob = 0.3 + 0.4 * rng->UniformReal();
  int32 b = lm.Boundary();
  lm.bigram_logp.Resize(b + 1, b + 1);
  for (int32 p = 0; p <= b; p++) {
    std::vector<double> w(b + 1, 0.0);
    double sum = 0.0;
    for (int32 q = 0; q <= b; q++) {
      if (p == b && q == b) continue;  // begin -> end stays impossible
      w[q] = 0.1 + rng->UniformReal();
      sum += w[q];
    }
    for (int32 q = 0; q <= b; q++)
      lm.bigram_logp(p, q) = w[q] > 0.0 ? std::log(w[q] / sum) : kLogZero;
  }
  ValidatePhoneLm(lm);
  return lm;
}

struct GradcheckArgs {
  uint64 seed = 7;
  int32 cases = 100;
};

double RandomChainCheck(Rng *rng, double leaky) {
  PhoneLm lm = RandomPhoneLm(2 + int32(rng->UniformInt(3)), rng);
  Wfsa den = BuildDenominatorGraph(lm);
  LeakyInit pi = StationaryDistribution(den);
  int32 frames = 4 + int32(rng->UniformInt(5));  // 4..8
  int32 len = 1 + int32(rng->UniformInt(3));     // 1..3 <= frames
  std::vector<int32> transcript(len);
  for (int32 &p : transcript) p = int32(rng->UniformInt(lm.num_phones));
  Wfsa num = BuildNumeratorGraph(transcript, lm, frames);
  MatD loglikes(frames, lm.num_phones);
  for (int32 t = 0; t < frames; t++)
    for (int32 p = 0; p < lm.num_phones; p++)
      loglikes(t, p) = rng->Gaussian();
  ChainOptions opts;
  opts.leaky_hmm_coefficient = leaky;
  return GradCheckChain(num, den, pi, loglikes, opts, 1e-4);
}

double StackCheck(const std::vector<LayerSpec> &layers, int32 in_rows,
                  uint64 seed) {
  Network net = InitNetwork(layers, seed);
  Rng rng(seed + 1);
  Mat input(in_rows, layers.front().dim_in);
  for (int32 r = 0; r < input.NumRows(); r++)
    for (int32 c = 0; c < input.NumCols(); c++)
      input(r, c) = float(rng.Gaussian());
  Mat probe = Forward(net, input);
  Mat target(probe.NumRows(), probe.NumCols());
  for (int32 r = 0; r < target.NumRows(); r++)
    for (int32 c = 0; c < target.NumCols(); c++)
      target(r, c) = float(rng.Gaussian());
  LossFunction loss = [&target](const Mat &out, Mat *grad) {
    double sum = 0.0;
    if (grad != nullptr) grad->Resize(out.NumRows(), out.NumCols());
    for (int32 r = 0; r < out.NumRows(); r++) {
      for (int32 c = 0; c < out.NumCols(); c++) {
        double d = double(out(r, c)) - double(target(r, c));
        sum += 0.5 * d * d;
        if (grad != nullptr) (*grad)(r, c) = float(d);
      }
    }
    return sum;
  };
  return GradCheckNet(net, input, loss, 1e-3);
}

int RunGradcheck(const GradcheckArgs &a) {
  Rng rng(a.seed);
  const double lambdas[] = {0.0, 0.1, 0.5};
  double worst_chain = 0.0;
  for (int32 i = 0; i < a.cases; i++)
    worst_chain = std::max(worst_chain, RandomChainCheck(&rng, lambdas[i % 3]));

  std::vector<LayerSpec> tdnn_stack = {
      ParseLayerSpec("tdnn 5 8 -1,0,1"),
      ParseLayerSpec("relu 8"),
      ParseLayerSpec("batchnorm 8"),
      ParseLayerSpec("affine 8 4"),
  };
  std::vector<LayerSpec> tdnnf_stack = {
      ParseLayerSpec("tdnn 5 8 -1,0,1"),
      ParseLayerSpec("relu 8"),
      ParseLayerSpec("batchnorm 8"),
      ParseLayerSpec("tdnnf 8 8 3 -1,0,1"),
      ParseLayerSpec("relu 8"),
      ParseLayerSpec("batchnorm 8"),
      ParseLayerSpec("subsample 8 3"),
      ParseLayerSpec("affine 8 4"),
  };
  double worst_net = std::max(StackCheck(tdnn_stack, 8, a.seed),
                              StackCheck(tdnnf_stack, 13, a.seed + 17));

  double worst = std::max(worst_chain, worst_net);
  std::fprintf(stderr,
               "chainforge gradcheck: chain %.3g over %d cases, "
               "net %.3g over 2 stacks\n",
               worst_chain, a.cases, worst_net);
  std::printf("%.6g\n", worst);
  return worst < 1e-3 ? 0 : 2;
}

// ---------------------------------------------------------------------------
// decode

struct DecodeArgs {
  std::string graph_path;
  std::string model_path;
  std::string feats_scp;
  std::string out_path;
  double acoustic_scale = 1.0;
  int32 subsample_factor = 0;  // 0: the model's stride product
};

int RunDecode(const DecodeArgs &a) {
  DecodeGraph graph = ReadDecodeGraphFile(a.graph_path);
  Network net = ReadNetworkFile(a.model_path);
  int32 factor = a.subsample_factor > 0 ? a.subsample_factor
                                        : StrideProduct(net.layers);
  RandomAccessMatrixReader feats(a.feats_scp);
  std::ofstream os(a.out_path);
  if (!os) throw std::runtime_error("cannot open " + a.out_path);
  for (const ScpEntry &entry : feats.Entries()) {
    Mat out = EmitLoglikes(net, feats.Read(entry.key), factor);
    ViterbiResult best = Viterbi(graph, ToDouble(out), a.acoustic_scale);
    os << entry.key;
    for (const std::string &word : best.words) os << ' ' << word;
    os << '\n';
  }
  os.flush();
  if (!os) throw std::runtime_error("failed writing " + a.out_path);
  std::fprintf(stderr, "chainforge decode: wrote %zu hypotheses to %s\n",
               feats.Entries().size(), a.out_path.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// wer

struct WerArgs {
  std::string ref_path;
  std::string hyp_path;
};

int RunWer(const WerArgs &a) {
  auto refs = ReadTranscriptLines(a.ref_path);
  auto hyps = ReadTranscriptLines(a.hyp_path);
  std::map<std::string, const std::vector<std::string> *> hyp_of;
  for (const auto &[key, words] : hyps) {
    if (!hyp_of.emplace(key, &words).second)
      throw std::runtime_error("duplicate hypothesis for utterance " + key);
  }
  if (refs.empty()) throw std::runtime_error("empty reference " + a.ref_path);

  WerResult total;
  size_t used = 0;
  for (const auto &[key, ref_words] : refs) {
    auto it = hyp_of.find(key);
    if (it == hyp_of.end())
      throw std::runtime_error("no hypothesis for utterance " + key);
    WerResult w = ComputeWer(ref_words, *it->second);
    total.substitutions += w.substitutions;
    total.deletions += w.deletions;
    total.insertions += w.insertions;
    total.ref_len += w.ref_len;
    used++;
  }
  if (used != hyp_of.size())
    throw std::runtime_error("hypotheses for utterances absent from " +
                             a.ref_path);
  std::printf("WER %.2f%% [S=%d D=%d I=%d]\n", total.Percent(),
              total.substitutions, total.deletions, total.insertions);
  return 0;
}

// ---------------------------------------------------------------------------
// gen-toy

struct GenToyArgs {
  std::string dir;
  ToyCorpusOptions opts;
};

int RunGenToy(const GenToyArgs &a) {
  std::filesystem::create_directories(a.dir);
  ToyCorpus corpus = GenerateToyCorpus(a.opts);
  WriteToyCorpus(corpus, a.dir);
  int64 train_frames = 0;
  for (const ToyUtterance &u : corpus.train) train_frames += u.feats.NumRows();
  std::fprintf(stderr,
               "chainforge gen-toy: wrote %zu train (%lld frames) and %zu "
               "test utterances over %d phones to %s\n",
               corpus.train.size(), static_cast<long long>(train_frames),
               corpus.test.size(), a.opts.num_phones, a.dir.c_str());
  return 0;
}

}  // namespace
}  // namespace chainforge

// ---------------------------------------------------------------------------

int main(int argc, char **argv) {
  using namespace chainforge;

  CLI::App app{"chainforge: desk-scale lattice-free MMI acoustic training"};
  app.require_subcommand(1);

  GraphArgs graph_args;
  CLI::App *graph = app.add_subcommand(
      "graph", "Build denominator, numerator or decoding graphs");
  graph->add_option("--type", graph_args.type, "graph type")
      ->required()
      ->check(CLI::IsMember({"den", "num", "decode"}));
  graph->add_option("--lm", graph_args.lm_path, "phone LM file")->required();
  graph->add_option("--out", graph_args.out_path, "output path")->required();
  graph->add_option("--transcript", graph_args.transcript,
                    "num: phone ids, space or comma separated");
  graph->add_option("--frames", graph_args.frames, "num: frame budget");
  graph->add_option("--min-dur", graph_args.min_dur,
                    "num: minimum frames per phone (0 = unconstrained)");
  graph->add_option("--max-dur", graph_args.max_dur,
                    "num: maximum frames per phone (0 = unconstrained)");
  graph->add_option("--words", graph_args.words_path,
                    "decode: word table file");

  EgsArgs egs_args;
  CLI::App *egs = app.add_subcommand(
      "egs", "Cut features plus transcripts into training chunks");
  egs->add_option("--feats", egs_args.feats_scp, "feature scp")->required();
  egs->add_option("--transcripts", egs_args.transcripts_path,
                  "transcript file (<key> <phone id>...)")
      ->required();
  egs->add_option("--lm", egs_args.lm_path, "phone LM file")->required();
  egs->add_option("--out", egs_args.out_path, "output egs archive")
      ->required();
  egs->add_option("--chunk-width", egs_args.chunk_width, "frames per chunk")
      ->capture_default_str();
  egs->add_option("--subsample-factor", egs_args.subsample_factor,
                  "output frame subsampling")
      ->capture_default_str();
  egs->add_option("--left-context", egs_args.left_context,
                  "input frames left of the chunk (-1: from --config)")
      ->capture_default_str();
  egs->add_option("--right-context", egs_args.right_context,
                  "input frames right of the chunk (-1: from --config)")
      ->capture_default_str();
  egs->add_option("--config", egs_args.config_path,
                  "training config whose layers fix the contexts");
  egs->add_option("--num-shards", egs_args.num_shards,
                  "write this many shuffled shard archives")
      ->capture_default_str();
  egs->add_option("--seed", egs_args.seed, "shuffling seed")
      ->capture_default_str();

  TrainArgs train_args;
  int32 train_num_jobs = 0, train_num_epochs = 0, train_minibatch = 0;
  uint64 train_seed = 0;
  double train_lr_initial = 0.0, train_lr_final = 0.0;
  std::string train_optimizer;
  CLI::App *train =
      app.add_subcommand("train", "Train a model on egs (writes final.mdl "
                                  "and train.log under --dir)");
  train->add_option("--config", train_args.config_path,
                    "training config (key=value lines plus layer= lines)")
      ->required();
  train->add_option("--egs", train_args.egs_path, "training egs archive")
      ->required();
  train->add_option("--valid-egs", train_args.valid_egs_path,
                    "held-out egs for the per-iteration diagnostic");
  train->add_option("--lm", train_args.lm_path, "phone LM file")->required();
  train->add_option("--dir", train_args.dir, "output directory")->required();
  train->add_option("--set", train_args.overrides,
                    "config override key=value (repeatable, applied in "
                    "order after the file)");
  CLI::Option *opt_jobs =
      train->add_option("--num-jobs", train_num_jobs, "override num_jobs");
  CLI::Option *opt_epochs = train->add_option("--num-epochs", train_num_epochs,
                                              "override num_epochs");
  CLI::Option *opt_minibatch = train->add_option(
      "--minibatch-chunks", train_minibatch, "override minibatch_chunks");
  CLI::Option *opt_seed =
      train->add_option("--seed", train_seed, "override seed");
  CLI::Option *opt_lri = train->add_option("--lr-initial", train_lr_initial,
                                           "override lr_initial");
  CLI::Option *opt_lrf =
      train->add_option("--lr-final", train_lr_final, "override lr_final");
  CLI::Option *opt_optim = train->add_option("--optimizer", train_optimizer,
                                             "override optimizer");

  ObjfArgs objf_args;
  CLI::App *objf = app.add_subcommand(
      "objf", "Evaluate the chain objective of a model on egs");
  objf->add_option("--egs", objf_args.egs_path, "egs archive")->required();
  objf->add_option("--model", objf_args.model_path, "model file")->required();
  objf->add_option("--lm", objf_args.lm_path, "phone LM file")->required();
  objf->add_option("--chunks", objf_args.max_chunks,
                   "evaluate only the first N chunks (0 = all)")
      ->capture_default_str();
  objf->add_option("--leaky-hmm-coefficient",
                   objf_args.chain.leaky_hmm_coefficient,
                   "denominator leak coefficient")
      ->capture_default_str();
  objf->add_option("--xent-regularize", objf_args.chain.xent_regularize,
                   "cross-entropy regularizer weight")
      ->capture_default_str();
  objf->add_option("--l2-regularize", objf_args.chain.l2_regularize,
                   "output l2 regularizer weight")
      ->capture_default_str();

  GradcheckArgs gradcheck_args;
  CLI::App *gradcheck = app.add_subcommand(
      "gradcheck", "Finite-difference gradient checks (exits 0 iff the "
                   "worst relative error is below 1e-3)");
  gradcheck->add_option("--seed", gradcheck_args.seed, "random seed")
      ->capture_default_str();
  gradcheck->add_option("--cases", gradcheck_args.cases,
                        "number of random chain cases")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  DecodeArgs decode_args;
  CLI::App *decode = app.add_subcommand(
      "decode", "Viterbi-decode features and write hypothesis lines");
  decode->add_option("--graph", decode_args.graph_path, "decoding graph")
      ->required();
  decode->add_option("--model", decode_args.model_path, "model file")
      ->required();
  decode->add_option("--feats", decode_args.feats_scp, "feature scp")
      ->required();
  decode->add_option("--out", decode_args.out_path, "hypothesis output file")
      ->required();
  decode->add_option("--acoustic-scale", decode_args.acoustic_scale,
                     "scale on the model log-likelihoods")
      ->capture_default_str();
  decode->add_option("--subsample-factor", decode_args.subsample_factor,
                     "output frame subsampling (0: the model's own stride)")
      ->capture_default_str();

  WerArgs wer_args;
  CLI::App *wer =
      app.add_subcommand("wer", "Score a hypothesis file against references");
  wer->add_option("--ref", wer_args.ref_path, "reference transcripts")
      ->required();
  wer->add_option("--hyp", wer_args.hyp_path, "hypothesis transcripts")
      ->required();

  GenToyArgs gen_toy_args;
  CLI::App *gen_toy = app.add_subcommand(
      "gen-toy", "Generate the synthetic phone-sequence corpus");
  gen_toy->add_option("--dir", gen_toy_args.dir, "output directory")
      ->required();
  gen_toy->add_option("--phones", gen_toy_args.opts.num_phones,
                      "number of phones (= feature dim)")
      ->capture_default_str();
  gen_toy->add_option("--utts", gen_toy_args.opts.num_train,
                      "training utterances")
      ->capture_default_str();
  gen_toy->add_option("--test-utts", gen_toy_args.opts.num_test,
                      "test utterances")
      ->capture_default_str();
  gen_toy->add_option("--mu", gen_toy_args.opts.mu, "class feature mean")
      ->capture_default_str();
  gen_toy->add_option("--sigma", gen_toy_args.opts.sigma,
                      "feature noise stddev")
      ->capture_default_str();
  gen_toy->add_option("--min-dur", gen_toy_args.opts.min_phone_frames,
                      "minimum frames per phone")
      ->capture_default_str();
  gen_toy->add_option("--max-dur", gen_toy_args.opts.max_phone_frames,
                      "maximum frames per phone")
      ->capture_default_str();
  gen_toy->add_option("--min-frames", gen_toy_args.opts.min_utt_frames,
                      "phones are appended until this utterance length")
      ->capture_default_str();
  gen_toy->add_option("--max-frames", gen_toy_args.opts.max_utt_frames,
                      "per-utterance target length upper bound")
      ->capture_default_str();
  gen_toy->add_option("--end-prob", gen_toy_args.opts.end_prob,
                      "phone LM end probability")
      ->capture_default_str();
  gen_toy->add_option("--self-loop", gen_toy_args.opts.self_loop_prob,
                      "HMM self-loop probability")
      ->capture_default_str();
  gen_toy->add_option("--seed", gen_toy_args.opts.seed, "corpus seed")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  // Explicit train flags override --set entries, which override the file.
  if (opt_jobs->count())
    train_args.overrides.push_back("num_jobs=" +
                                   std::to_string(train_num_jobs));
  if (opt_epochs->count())
    train_args.overrides.push_back("num_epochs=" +
                                   std::to_string(train_num_epochs));
  if (opt_minibatch->count())
    train_args.overrides.push_back("minibatch_chunks=" +
                                   std::to_string(train_minibatch));
  if (opt_seed->count())
    train_args.overrides.push_back("seed=" + std::to_string(train_seed));
  if (opt_lri->count())
    train_args.overrides.push_back("lr_initial=" +
                                   FormatReal(train_lr_initial));
  if (opt_lrf->count())
    train_args.overrides.push_back("lr_final=" + FormatReal(train_lr_final));
  if (opt_optim->count())
    train_args.overrides.push_back("optimizer=" + train_optimizer);

  try {
    if (graph->parsed()) return RunGraph(graph_args);
    if (egs->parsed()) return RunEgs(egs_args);
    if (train->parsed()) return RunTrain(train_args);
    if (objf->parsed()) return RunObjf(objf_args);
    if (gradcheck->parsed()) return RunGradcheck(gradcheck_args);
    if (decode->parsed()) return RunDecode(decode_args);
    if (wer->parsed()) return RunWer(wer_args);
    if (gen_toy->parsed()) return RunGenToy(gen_toy_args);
  } catch (const std::exception &e) {
    std::fprintf(stderr, "chainforge: error: %s\n", e.what());
    return 2;
  }
  return 0;
}
