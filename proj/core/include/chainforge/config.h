// core/include/chainforge/config.h

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

#ifndef CHAINFORGE_CONFIG_H_
#define CHAINFORGE_CONFIG_H_

#include <iosfwd>
#include <string>
#include <vector>

#include "chainforge/nnet.h"
#include "chainforge/trainer.h"

namespace chainforge {

// Training recipe: trainer hyperparameters plus the model architecture.
// Plain-text `key=value` lines; `#` starts a comment; `layer=` repeats, one
// line per layer in order, e.g.
//
//   num_epochs=5
//   optimizer=ngsgd
//   layer=tdnn 3 64 -1,0,1
//   layer=relu 64
struct RecipeConfig {
  TrainerConfig trainer;
  std::vector<LayerSpec> layers;
};

RecipeConfig ParseRecipeConfig(std::istream &is);
RecipeConfig LoadRecipeConfig(const std::string &path);

// Applies one `key=value` assignment (the file syntax, also used for CLI
// overrides).  Throws std::invalid_argument on unknown keys or bad values.
void ApplyConfigLine(RecipeConfig *config, const std::string &key,
                     const std::string &value);

std::string FormatRecipeConfig(const RecipeConfig &config);

}  // namespace chainforge

#endif  // CHAINFORGE_CONFIG_H_
