// Copyright 2026 The hprwbp Authors.
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

// Everything except io.hpp, which additionally needs nlohmann/json.

#pragma once

#include "hprwbp/common.hpp"
#include "hprwbp/datagen.hpp"
#include "hprwbp/hpr_core.hpp"
#include "hprwbp/ibp.hpp"
#include "hprwbp/lp_two_block.hpp"
#include "hprwbp/normal_solver.hpp"
#include "hprwbp/ot.hpp"
#include "hprwbp/problem.hpp"
#include "hprwbp/solvers.hpp"
