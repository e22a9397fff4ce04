#include "mira/instruction_trie.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <unordered_set>

#include "mira/error.hpp"

namespace mira {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double Sanitize(double value) { return std::isnan(value) ? kNegInf : value; }

std::string PrefixString(std::span<const TokenId> prefix) {
  std::string out = "[";
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(prefix[i]);
  }
  return out + "]";
}

Logits CallScorer(const Scorer& scorer, std::span<const TokenId> prefix, std::size_t vocab_size) {
  Logits logits;
  try {
    logits = scorer(prefix);
  } catch (const Error& e) {
    throw Error(ErrorCode::kScorerFailure, std::string(ToString(e.code())) + ": " + e.detail());
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kScorerFailure, e.what());
  }
  if (logits.size() != vocab_size) {
    throw Error(ErrorCode::kDimensionMismatch,
                "scorer returned " + std::to_string(logits.size()) + " logits, vocabulary has " +
                    std::to_string(vocab_size));
  }
  return logits;
}

struct Hypothesis {
  TokenSequence path;
  InstructionTrie::NodeIndex node = 0;
  double score = 0.0;
  bool finished = false;
};

bool Better(const Hypothesis& a, const Hypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.path < b.path;
}

}  // namespace

std::span<const TokenId> InstructionTrie::Cursor::valid() const {
  return trie_->nodes_[node_].tokens;
}

bool InstructionTrie::Cursor::has_child(TokenId token) const {
  const auto& tokens = trie_->nodes_[node_].tokens;
  return std::binary_search(tokens.begin(), tokens.end(), token);
}

InstructionTrie::Cursor InstructionTrie::Cursor::advance(TokenId token) const {
  const Node& node = trie_->nodes_[node_];
  const auto it = std::lower_bound(node.tokens.begin(), node.tokens.end(), token);
  if (it == node.tokens.end() || *it != token) {
    throw Error(ErrorCode::kInvalidPrefix,
                "token " + std::to_string(token) + " is not a valid continuation");
  }
  return Cursor(trie_, node.targets[static_cast<std::size_t>(it - node.tokens.begin())]);
}

bool InstructionTrie::Cursor::is_terminal() const {
  return trie_->nodes_[node_].terminal.has_value();
}

const Instruction* InstructionTrie::Cursor::instruction() const {
  const auto& terminal = trie_->nodes_[node_].terminal;
  return terminal ? &trie_->instructions_[*terminal] : nullptr;
}

InstructionTrie InstructionTrie::Build(std::vector<Instruction> library,
                                       std::shared_ptr<const Vocabulary> vocab,
                                       std::uint64_t generation) {
  if (!vocab) throw Error(ErrorCode::kInvalidArgument, "null vocabulary");
  if (library.empty()) throw Error(ErrorCode::kEmptyLibrary, "instruction library is empty");

  InstructionTrie trie;
  trie.vocab_ = std::move(vocab);
  trie.generation_ = generation;
  trie.nodes_.emplace_back();

  const TokenId eos = trie.end_of_sequence();
  std::unordered_set<std::string> ids;
  std::map<TokenSequence, std::string> sequences;
  for (std::size_t index = 0; index < library.size(); ++index) {
    Instruction& instruction = library[index];
    if (instruction.id.empty()) throw Error(ErrorCode::kInvalidArgument, "empty instruction id");
    if (!ids.insert(instruction.id).second) {
      throw Error(ErrorCode::kDuplicateId, "instruction id '" + instruction.id + "'");
    }
    instruction.token_ids = Tokenize(*trie.vocab_, instruction.surface);
    if (auto [it, inserted] = sequences.emplace(instruction.token_ids, instruction.id); !inserted) {
      throw Error(ErrorCode::kDuplicateInstruction,
                  "'" + instruction.id + "' and '" + it->second + "' tokenize identically");
    }

    NodeIndex current = 0;
    const auto descend = [&](TokenId token) {
      Node& node = trie.nodes_[current];
      const auto it = std::lower_bound(node.tokens.begin(), node.tokens.end(), token);
      const auto offset = it - node.tokens.begin();
      if (it != node.tokens.end() && *it == token) {
        current = node.targets[static_cast<std::size_t>(offset)];
        return;
      }
      const auto fresh = static_cast<NodeIndex>(trie.nodes_.size());
      node.tokens.insert(it, token);
      node.targets.insert(node.targets.begin() + offset, fresh);
      trie.nodes_.emplace_back();  // invalidates `node`
      current = fresh;
    };
    for (TokenId token : instruction.token_ids) descend(token);
    descend(eos);
    trie.nodes_[current].terminal = index;
  }
  trie.instructions_ = std::move(library);
  return trie;
}

InstructionTrie::Cursor InstructionTrie::at(NodeIndex node) const {
  if (node >= nodes_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "node " + std::to_string(node) + " out of range");
  }
  return Cursor(this, node);
}

InstructionTrie::Cursor InstructionTrie::walk(std::span<const TokenId> prefix) const {
  Cursor cursor = root();
  for (TokenId token : prefix) {
    if (!cursor.has_child(token)) {
      throw Error(ErrorCode::kInvalidPrefix, "prefix " + PrefixString(prefix) + " leaves the trie");
    }
    cursor = cursor.advance(token);
  }
  return cursor;
}

const Instruction* InstructionTrie::find_instruction(std::string_view id) const {
  for (const Instruction& instruction : instructions_) {
    if (instruction.id == id) return &instruction;
  }
  return nullptr;
}

std::vector<std::string> InstructionTrie::instruction_ids() const {
  std::vector<std::string> ids;
  ids.reserve(instructions_.size());
  for (const Instruction& instruction : instructions_) ids.push_back(instruction.id);
  return ids;
}

std::size_t InstructionTrie::terminal_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.terminal.has_value(); }));
}

Json InstructionTrie::dump_node(NodeIndex index) const {
  const Node& node = nodes_[index];
  Json out;
  if (node.terminal) out["instruction"] = instructions_[*node.terminal].id;
  Json children = Json::object();
  for (std::size_t i = 0; i < node.tokens.size(); ++i) {
    children[vocab_->token(node.tokens[i])] = dump_node(node.targets[i]);
  }
  out["children"] = std::move(children);
  return out;
}

Json InstructionTrie::debug_dump() const {
  Json out;
  out["generation"] = generation_;
  out["vocab_size"] = vocab_size();
  out["instructions"] = instructions_.size();
  out["root"] = dump_node(0);
  return out;
}

InstructionTrie BuildTrie(std::vector<Instruction> library, const Vocabulary& vocab) {
  return InstructionTrie::Build(std::move(library), std::make_shared<const Vocabulary>(vocab));
}

std::vector<TokenId> ValidNext(const InstructionTrie& trie, std::span<const TokenId> prefix) {
  const auto valid = trie.walk(prefix).valid();
  return {valid.begin(), valid.end()};
}

Logits MaskLogits(std::span<const double> logits, std::span<const TokenId> valid,
                  std::size_t vocab_size) {
  if (logits.size() != vocab_size) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::to_string(logits.size()) + " logits for vocabulary of " +
                    std::to_string(vocab_size));
  }
  if (valid.empty()) throw Error(ErrorCode::kInvalidArgument, "empty valid-token set");
  Logits masked(logits.size(), kNegInf);
  for (TokenId id : valid) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_size) {
      throw Error(ErrorCode::kInvalidArgument, "valid token " + std::to_string(id) + " out of range");
    }
    masked[static_cast<std::size_t>(id)] = logits[static_cast<std::size_t>(id)];
  }
  return masked;
}

DecodeResult ConstrainedDecode(const InstructionTrie& trie, const Scorer& scorer) {
  const TokenId eos = trie.end_of_sequence();
  InstructionTrie::Cursor cursor = trie.root();
  TokenSequence prefix;
  double score = 0.0;
  while (true) {
    const Logits logits = CallScorer(scorer, prefix, trie.vocab_size());
    const auto valid = cursor.valid();
    // Ascending ids plus a strict comparison give the lowest-id tie-break.
    TokenId best = valid.front();
    double best_logit = Sanitize(logits[static_cast<std::size_t>(best)]);
    for (TokenId token : valid.subspan(1)) {
      const double logit = Sanitize(logits[static_cast<std::size_t>(token)]);
      if (logit > best_logit) {
        best = token;
        best_logit = logit;
      }
    }
    score = Sanitize(score + best_logit);
    cursor = cursor.advance(best);
    prefix.push_back(best);
    if (best == eos) break;
  }
  return DecodeResult{cursor.instruction()->id, score, std::move(prefix)};
}

std::vector<DecodeResult> TopKDecode(const InstructionTrie& trie, const Scorer& scorer,
                                     std::size_t k, std::size_t beam_width) {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be at least 1");
  const std::size_t library_size = trie.instructions().size();
  if (k > library_size) {
    throw Error(ErrorCode::kKTooLarge, "k=" + std::to_string(k) + " exceeds library size " +
                                           std::to_string(library_size));
  }
  const std::size_t width = std::max(k, beam_width);
  const TokenId eos = trie.end_of_sequence();

  std::vector<Hypothesis> finished;
  std::vector<Hypothesis> live{Hypothesis{}};
  while (!live.empty()) {
    std::vector<Hypothesis> candidates;
    for (const Hypothesis& hyp : live) {
      const Logits logits = CallScorer(scorer, hyp.path, trie.vocab_size());
      const InstructionTrie::Cursor cursor = trie.at(hyp.node);
      for (TokenId token : cursor.valid()) {
        Hypothesis next;
        next.path = hyp.path;
        next.path.push_back(token);
        next.node = cursor.advance(token).node();
        next.score = Sanitize(hyp.score + Sanitize(logits[static_cast<std::size_t>(token)]));
        next.finished = token == eos;
        candidates.push_back(std::move(next));
      }
    }
    // Finished hypotheses hold their slots, so the live budget shrinks.
    const std::size_t budget = width - finished.size();
    if (candidates.size() > budget) {
      std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(budget),
                        candidates.end(), Better);
      candidates.resize(budget);
    }
    live.clear();
    for (Hypothesis& hyp : candidates) {
      (hyp.finished ? finished : live).push_back(std::move(hyp));
    }
  }

  std::sort(finished.begin(), finished.end(), Better);
  finished.resize(std::min(k, finished.size()));
  std::vector<DecodeResult> results;
  results.reserve(finished.size());
  for (Hypothesis& hyp : finished) {
    const Instruction* instruction = trie.at(hyp.node).instruction();
    results.push_back(DecodeResult{instruction->id, hyp.score, std::move(hyp.path)});
  }
  return results;
}

std::shared_ptr<const InstructionTrie> TrieStore::snapshot() const {
  std::lock_guard lock(publish_mutex_);
  return current_;
}

std::shared_ptr<const InstructionTrie> TrieStore::Rebuild(std::vector<Instruction> library,
                                                          std::shared_ptr<const Vocabulary> vocab) {
  std::lock_guard rebuild_lock(rebuild_mutex_);
  const std::uint64_t next = generation() + 1;
  auto fresh = std::make_shared<const InstructionTrie>(
      InstructionTrie::Build(std::move(library), std::move(vocab), next));
  std::lock_guard lock(publish_mutex_);
  current_ = fresh;
  return fresh;
}

std::uint64_t TrieStore::generation() const {
  std::lock_guard lock(publish_mutex_);
  return current_ ? current_->generation() : 0;
}

}  // namespace mira
