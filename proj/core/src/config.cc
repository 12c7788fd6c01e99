// core/src/config.cc

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

#include "chainforge/config.h"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace chainforge {

namespace {

std::string Trim(const std::string &s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

int64 ParseInt(const std::string &key, const std::string &value) {
  try {
    size_t used = 0;
    int64 v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::logic_error &) {
    throw std::invalid_argument("config key '" + key +
                                "' needs an integer, got '" + value + "'");
  }
}

double ParseReal(const std::string &key, const std::string &value) {
  try {
    size_t used = 0;
    double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::logic_error &) {
    throw std::invalid_argument("config key '" + key +
                                "' needs a number, got '" + value + "'");
  }
}

}  // namespace

void ApplyConfigLine(RecipeConfig *config, const std::string &key,
                     const std::string &value) {
  TrainerConfig &t = config->trainer;
  if (key == "num_epochs") {
    t.num_epochs = int32(ParseInt(key, value));
  } else if (key == "num_jobs") {
    t.num_jobs = int32(ParseInt(key, value));
  } else if (key == "minibatch_chunks") {
    t.minibatch_chunks = int32(ParseInt(key, value));
  } else if (key == "lr_initial") {
    t.lr_initial = ParseReal(key, value);
  } else if (key == "lr_final") {
    t.lr_final = ParseReal(key, value);
  } else if (key == "optimizer") {
    t.optimizer = ParseOptimizerKind(value);
  } else if (key == "leaky_hmm_coefficient") {
    t.chain.leaky_hmm_coefficient = ParseReal(key, value);
  } else if (key == "xent_regularize") {
    t.chain.xent_regularize = ParseReal(key, value);
  } else if (key == "l2_regularize") {
    t.chain.l2_regularize = ParseReal(key, value);
  } else if (key == "subsample_factor") {
    t.subsample_factor = int32(ParseInt(key, value));
  } else if (key == "seed") {
    t.seed = uint64(ParseInt(key, value));
  } else if (key == "valid_chunks") {
    t.valid_chunks = int32(ParseInt(key, value));
  } else if (key == "layer") {
    config->layers.push_back(ParseLayerSpec(value));
  } else {
    throw std::invalid_argument("unknown config key '" + key + "'");
  }
}

RecipeConfig ParseRecipeConfig(std::istream &is) {
  RecipeConfig config;
  std::string line;
  int64 line_no = 0;
  while (std::getline(is, line)) {
    line_no++;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = Trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key=value, got '" + line + "'");
    std::string key = Trim(line.substr(0, eq));
    std::string value = Trim(line.substr(eq + 1));
    try {
      ApplyConfigLine(&config, key, value);
    } catch (const std::invalid_argument &e) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": " + e.what());
    }
  }
  return config;
}

RecipeConfig LoadRecipeConfig(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config: " + path);
  return ParseRecipeConfig(is);
}

std::string FormatRecipeConfig(const RecipeConfig &config) {
  const TrainerConfig &t = config.trainer;
  std::ostringstream os;
  char buf[64];
  auto real = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  os << "num_epochs=" << t.num_epochs << '\n';
  os << "num_jobs=" << t.num_jobs << '\n';
  os << "minibatch_chunks=" << t.minibatch_chunks << '\n';
  os << "lr_initial=" << real(t.lr_initial) << '\n';
  os << "lr_final=" << real(t.lr_final) << '\n';
  os << "optimizer=" << OptimizerKindName(t.optimizer) << '\n';
  os << "leaky_hmm_coefficient=" << real(t.chain.leaky_hmm_coefficient)
     << '\n';
  os << "xent_regularize=" << real(t.chain.xent_regularize) << '\n';
  os << "l2_regularize=" << real(t.chain.l2_regularize) << '\n';
  os << "subsample_factor=" << t.subsample_factor << '\n';
  os << "seed=" << t.seed << '\n';
  os << "valid_chunks=" << t.valid_chunks << '\n';
  for (const LayerSpec &l : config.layers)
    os << "layer=" << FormatLayerSpec(l) << '\n';
  return os.str();
}

}  // namespace chainforge
