// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "tomosar/alista_weights.hpp"
#include "tomosar/config.hpp"
#include "tomosar/cube.hpp"
#include "tomosar/dsr.hpp"
#include "tomosar/errors.hpp"
#include "tomosar/geometry.hpp"
#include "tomosar/io.hpp"
#include "tomosar/metrics.hpp"
#include "tomosar/network.hpp"
#include "tomosar/parallel.hpp"
#include "tomosar/random.hpp"
#include "tomosar/scene.hpp"
#include "tomosar/simulate.hpp"
#include "tomosar/solver_handle.hpp"
#include "tomosar/solvers.hpp"
#include "tomosar/trainer.hpp"
