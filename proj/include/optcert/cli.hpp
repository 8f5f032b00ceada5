/*
 Copyright 2026 The OptCert Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace optcert {

/// Exit codes: 0 success/ACCEPT, 1 REJECT or search minimum above tolerance,
/// 2 configuration error, 3 runtime/integration error. --strict additionally
/// promotes soft warnings (diverged paths, failed root-find brackets) to 1.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace optcert
