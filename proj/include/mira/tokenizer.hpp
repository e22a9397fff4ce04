#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mira/core_types.hpp"

namespace mira {

struct SpecialTokens {
  TokenId reasoning_open = 0;
  TokenId reasoning_close = 0;
  TokenId end_of_sequence = 0;
};

// Word-level vocabulary. Ids are dense in [0, size()); regular words occupy
// the low ids in ascending lexicographic order and the three specials follow.
class Vocabulary {
 public:
  // Builds from explicit token strings in id order. The strings "<REASONING>",
  // "</REASONING>" and "<EOS>" must each appear exactly once.
  explicit Vocabulary(std::vector<std::string> tokens);

  std::size_t size() const { return id_to_token_.size(); }
  const SpecialTokens& specials() const { return specials_; }
  const std::string& token(TokenId id) const;
  // Returns -1 when absent.
  TokenId find(std::string_view token) const;
  const std::vector<std::string>& tokens() const { return id_to_token_; }

  bool operator==(const Vocabulary& other) const { return id_to_token_ == other.id_to_token_; }

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, TokenId> token_to_id_;
  SpecialTokens specials_;
};

// Collects every lowercased whitespace-delimited word of every surface.
// Throws EmptyLibrary on an empty list, InvalidArgument on an empty surface.
Vocabulary BuildVocabulary(std::span<const std::string> surfaces);
Vocabulary BuildVocabulary(std::span<const Instruction> instructions);

// Throws InvalidArgument on empty text, UnknownToken(word) on an
// out-of-vocabulary word. Special tokens are never produced.
TokenSequence Tokenize(const Vocabulary& vocab, std::string_view text);

// Space-joined token strings; throws InvalidArgument on out-of-range ids.
std::string Detokenize(const Vocabulary& vocab, std::span<const TokenId> ids);

// {"tokens": [...in id order...], "specials": {...}}
Json ToJson(const Vocabulary& vocab);
Vocabulary VocabularyFromJson(const Json& json);

}  // namespace mira
