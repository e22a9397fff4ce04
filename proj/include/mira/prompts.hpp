#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "mira/core_types.hpp"

namespace mira::prompts {

// Bumped whenever any prompt text below changes.
inline constexpr std::string_view kVersion = "mira-prompts/1";

// Three-stage reasoning scaffold shared by every inference-time prompt.
std::string_view Scaffold();

// Header under which a retrieved template's steps are listed.
inline constexpr std::string_view kTemplateHeader = "### Reference reasoning template:";

// Inference prompt: the scaffold, no in-context examples.
Prompt Inference();

// Construction prompt with the given examples (the built-in examples when
// `examples` is empty).
Prompt Construction(std::vector<InContextExample> examples = {});

std::vector<InContextExample> DefaultExamples();

}  // namespace mira::prompts
