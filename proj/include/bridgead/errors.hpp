// Copyright 2026 The BridgeAD Desk Authors
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

#ifndef BRIDGEAD__ERRORS_HPP_
#define BRIDGEAD__ERRORS_HPP_

#include <stdexcept>

namespace bridgead
{

/// Invalid configuration, scenario or checkpoint contents.
class ConfigError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

}  // namespace bridgead

#endif  // BRIDGEAD__ERRORS_HPP_
