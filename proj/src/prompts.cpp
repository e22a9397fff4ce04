#include "mira/prompts.hpp"

namespace mira::prompts {

namespace {

constexpr std::string_view kScaffold =
    "You recommend AI task instructions for an object the user long-pressed on a smartphone.\n"
    "Reason in three stages inside <REASONING> and </REASONING>, one stage per line:\n"
    "Entity Recognition: extract the key entities (phone numbers, addresses, dates, names) "
    "and summarize them into themes.\n"
    "Contextual Relevance: connect those entities to what the user most likely wants to do.\n"
    "Instruction Generation: state the instruction that best serves that intent.\n"
    "After </REASONING>, output exactly one instruction from the registered list.";

constexpr std::string_view kConstructionPreamble =
    "You are annotating a training set. For each trigger object the correct instruction is "
    "given. Write the three-stage reasoning, delimited by <REASONING> and </REASONING>, that "
    "leads from the trigger to that instruction. Follow the format of the examples.";

}  // namespace

std::string_view Scaffold() { return kScaffold; }

Prompt Inference() { return Prompt{std::string(kScaffold), std::nullopt}; }

Prompt Construction(std::vector<InContextExample> examples) {
  if (examples.empty()) examples = DefaultExamples();
  return Prompt{std::string(kConstructionPreamble) + "\n\n" + std::string(kScaffold),
                std::move(examples)};
}

std::vector<InContextExample> DefaultExamples() {
  return {
      {"Text message: \"Call me back at 555-0142 about the lease, Anna\"",
       "<REASONING>\n"
       "Entity Recognition: a phone number 555-0142 and a contact name Anna.\n"
       "Contextual Relevance: a callback number from a named person is usually kept for later.\n"
       "Instruction Generation: save the number to contacts.\n"
       "</REASONING>",
       "save phone number"},
      {"Screenshot of a train ticket: Beijing South to Shanghai Hongqiao, 08:00, 12 May",
       "<REASONING>\n"
       "Entity Recognition: departure station Beijing South, departure time 08:00 on 12 May.\n"
       "Contextual Relevance: the user must reach the departure station before the train "
       "leaves.\n"
       "Instruction Generation: start navigation to the departure station.\n"
       "</REASONING>",
       "navigate to station"},
  };
}

}  // namespace mira::prompts
