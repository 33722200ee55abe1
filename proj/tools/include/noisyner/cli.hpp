// Copyright 2026 The noisyner Authors.
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

#ifndef NOISYNER_CLI_HPP_
#define NOISYNER_CLI_HPP_

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace noisyner::cli {

enum ExitCode : int { kOk = 0, kConfigError = 1, kDataError = 2, kNumericalError = 3 };

/// Every configurable key with its default. Keys are flat and dotted
/// ("train.epochs"); a null seed means "not given".
nlohmann::json default_config();

/// Layers \p overrides onto \p base. Unknown keys and values of the wrong
/// type raise ConfigError. String values are converted to the type of the
/// default.
nlohmann::json merge_config(nlohmann::json base, const nlohmann::json& overrides);

/// Runs one subcommand. \p args excludes the program name. JSON lines go to
/// \p out, diagnostics to \p err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace noisyner::cli

#endif  // NOISYNER_CLI_HPP_
