// Copyright 2026 The mbsyn Authors
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

#pragma once

#include "mbsyn/config.hpp"
#include "mbsyn/device.hpp"
#include "mbsyn/device_json.hpp"
#include "mbsyn/dynamics.hpp"
#include "mbsyn/effective.hpp"
#include "mbsyn/errors.hpp"
#include "mbsyn/experiments.hpp"
#include "mbsyn/fit.hpp"
#include "mbsyn/operators.hpp"
#include "mbsyn/parallel.hpp"
#include "mbsyn/planner.hpp"
#include "mbsyn/rng.hpp"
