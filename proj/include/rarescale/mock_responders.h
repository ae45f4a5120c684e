// Copyright 2026 The RareScale Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef RARESCALE_MOCK_RESPONDERS_H_
#define RARESCALE_MOCK_RESPONDERS_H_

#include <memory>

#include "rarescale/llm_gateway.h"

namespace rarescale {

// Deterministic stand-ins for every prompt task, keyed by responder name:
//
//   chat              chat-single prompts. options: per_message (2), drop (0),
//                     overload (false: when true the first patient message
//                     carries four findings)
//   chat-turn         chat-turnwise prompts. options: per_turn (2), withhold (0)
//   checker           chat-check prompts. options: fix (true); false echoes
//                     the current conversation unchanged
//   ddx               copies the candidate list when the prompt has one,
//                     otherwise answers with common conditions only
//   judge-binary      "yes" iff the two names match
//   judge-similarity  "exact match" if any entry matches, else "unrelated"
//   profile           profile-fill prompts. options: contradict (false)
//   candidates        options: names (array of strings, default empty)
//   negative-screen   options: answer ("yes")
std::shared_ptr<const ResponderRegistry> BuiltinResponders();

// One repeating entry per task, routed on the prompt's "TASK: <name>" line.
MockScript DefaultMockScript();

}  // namespace rarescale

#endif  // RARESCALE_MOCK_RESPONDERS_H_
