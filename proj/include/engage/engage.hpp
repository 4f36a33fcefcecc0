/*
 * Copyright 2026 The Engage Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "engage/config.hpp"
#include "engage/corpus.hpp"
#include "engage/errors.hpp"
#include "engage/eval.hpp"
#include "engage/experiment.hpp"
#include "engage/features.hpp"
#include "engage/forest.hpp"
#include "engage/fusion.hpp"
#include "engage/ingest.hpp"
#include "engage/synth.hpp"
#include "engage/windowing.hpp"
