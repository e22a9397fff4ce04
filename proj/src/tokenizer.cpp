#include "mira/tokenizer.hpp"

#include <set>

#include "mira/error.hpp"

namespace mira {

Vocabulary::Vocabulary(std::vector<std::string> tokens) : id_to_token_(std::move(tokens)) {
  token_to_id_.reserve(id_to_token_.size());
  for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
    if (!token_to_id_.emplace(id_to_token_[i], static_cast<TokenId>(i)).second) {
      throw Error(ErrorCode::kInvariantViolation, "duplicate token '" + id_to_token_[i] + "'");
    }
  }
  const auto special = [&](std::string_view literal) {
    const TokenId id = find(literal);
    if (id < 0) {
      throw Error(ErrorCode::kInvariantViolation,
                  "vocabulary lacks special token " + std::string(literal));
    }
    return id;
  };
  specials_.reasoning_open = special(kReasoningOpen);
  specials_.reasoning_close = special(kReasoningClose);
  specials_.end_of_sequence = special(kEndOfSequence);
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "token id " + std::to_string(id) + " out of range");
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

TokenId Vocabulary::find(std::string_view token) const {
  const auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? -1 : it->second;
}

Vocabulary BuildVocabulary(std::span<const std::string> surfaces) {
  if (surfaces.empty()) throw Error(ErrorCode::kEmptyLibrary, "no instructions to build from");
  std::set<std::string> words;
  for (const std::string& surface : surfaces) {
    const auto pieces = SplitWords(ToLower(surface));
    if (pieces.empty()) throw Error(ErrorCode::kInvalidArgument, "empty instruction surface");
    words.insert(pieces.begin(), pieces.end());
  }
  std::vector<std::string> tokens(words.begin(), words.end());
  tokens.emplace_back(kReasoningOpen);
  tokens.emplace_back(kReasoningClose);
  tokens.emplace_back(kEndOfSequence);
  return Vocabulary(std::move(tokens));
}

Vocabulary BuildVocabulary(std::span<const Instruction> instructions) {
  std::vector<std::string> surfaces;
  surfaces.reserve(instructions.size());
  for (const Instruction& instruction : instructions) surfaces.push_back(instruction.surface);
  return BuildVocabulary(surfaces);
}

TokenSequence Tokenize(const Vocabulary& vocab, std::string_view text) {
  const auto words = SplitWords(ToLower(text));
  if (words.empty()) throw Error(ErrorCode::kInvalidArgument, "cannot tokenize empty text");
  TokenSequence ids;
  ids.reserve(words.size());
  const SpecialTokens& sp = vocab.specials();
  for (const std::string& word : words) {
    const TokenId id = vocab.find(word);
    if (id < 0 || id == sp.reasoning_open || id == sp.reasoning_close || id == sp.end_of_sequence) {
      throw Error(ErrorCode::kUnknownToken, word);
    }
    ids.push_back(id);
  }
  return ids;
}

std::string Detokenize(const Vocabulary& vocab, std::span<const TokenId> ids) {
  std::string out;
  for (TokenId id : ids) {
    if (!out.empty()) out += ' ';
    out += vocab.token(id);
  }
  return out;
}

Json ToJson(const Vocabulary& vocab) {
  Json out;
  out["tokens"] = vocab.tokens();
  const SpecialTokens& sp = vocab.specials();
  out["specials"] = Json{{"reasoning_open", sp.reasoning_open},
                         {"reasoning_close", sp.reasoning_close},
                         {"end_of_sequence", sp.end_of_sequence}};
  return out;
}

Vocabulary VocabularyFromJson(const Json& json) {
  if (!json.is_object() || !json.contains("tokens") || !json.at("tokens").is_array()) {
    throw Error(ErrorCode::kInvariantViolation, "vocabulary JSON needs a 'tokens' array");
  }
  Vocabulary vocab(json.at("tokens").get<std::vector<std::string>>());
  if (json.contains("specials")) {
    const Json& sp = json.at("specials");
    const SpecialTokens& actual = vocab.specials();
    if (sp.value("reasoning_open", actual.reasoning_open) != actual.reasoning_open ||
        sp.value("reasoning_close", actual.reasoning_close) != actual.reasoning_close ||
        sp.value("end_of_sequence", actual.end_of_sequence) != actual.end_of_sequence) {
      throw Error(ErrorCode::kInvariantViolation, "special token ids disagree with token list");
    }
  }
  return vocab;
}

}  // namespace mira
