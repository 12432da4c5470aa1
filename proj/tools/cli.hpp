// Copyright 2026 The trisplat Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef TRISPLAT_TOOLS_CLI_HPP_
#define TRISPLAT_TOOLS_CLI_HPP_

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "trisplat/trainer.hpp"

namespace trisplat::cli {

// Flags > config file > indoor/outdoor preset.
TrainConfig resolve_config(bool indoor, const std::optional<std::filesystem::path>& file,
                           const std::map<std::string, std::string>& flags);

// Entry point shared by the executable and the tests. Returns the exit code.
int run(int argc, char** argv);

}  // namespace trisplat::cli

#endif  // TRISPLAT_TOOLS_CLI_HPP_
