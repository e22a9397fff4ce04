#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mira/core_types.hpp"
#include "mira/tokenizer.hpp"

namespace mira {

using Logits = std::vector<double>;

// Maps the tokens chosen so far to one unmasked logit per vocabulary id.
using Scorer = std::function<Logits(std::span<const TokenId> prefix)>;

// Prefix tree over the token ids of every registered instruction. Each
// instruction is inserted as its token ids followed by <EOS>, so no path is a
// prefix of another and the node reached by <EOS> names the instruction.
//
// A built trie is immutable.
class InstructionTrie {
 public:
  using NodeIndex = std::uint32_t;

  // Read-only position in the trie. Cheap to copy; valid while the trie lives.
  class Cursor {
   public:
    // Child token ids in ascending order.
    std::span<const TokenId> valid() const;
    bool has_child(TokenId token) const;
    // Throws InvalidPrefix if `token` is not a child.
    Cursor advance(TokenId token) const;
    bool is_terminal() const;
    // Library instruction ending here; nullptr unless terminal.
    const Instruction* instruction() const;
    NodeIndex node() const { return node_; }

   private:
    friend class InstructionTrie;
    Cursor(const InstructionTrie* trie, NodeIndex node) : trie_(trie), node_(node) {}
    const InstructionTrie* trie_;
    NodeIndex node_;
  };

  // Tokenizes every surface (refreshing Instruction::token_ids) and builds the
  // tree. Throws EmptyLibrary, UnknownToken, DuplicateId (repeated instruction
  // id) or DuplicateInstruction (two surfaces with identical token ids).
  static InstructionTrie Build(std::vector<Instruction> library,
                               std::shared_ptr<const Vocabulary> vocab,
                               std::uint64_t generation = 1);

  Cursor root() const { return Cursor(this, 0); }
  // Cursor for a node index previously obtained from Cursor::node().
  Cursor at(NodeIndex node) const;
  // Throws InvalidPrefix if the prefix walks off the tree.
  Cursor walk(std::span<const TokenId> prefix) const;

  std::size_t vocab_size() const { return vocab_->size(); }
  std::uint64_t generation() const { return generation_; }
  TokenId end_of_sequence() const { return vocab_->specials().end_of_sequence; }
  const Vocabulary& vocabulary() const { return *vocab_; }
  const std::shared_ptr<const Vocabulary>& shared_vocabulary() const { return vocab_; }
  std::span<const Instruction> instructions() const { return instructions_; }
  const Instruction* find_instruction(std::string_view id) const;
  std::vector<std::string> instruction_ids() const;

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t terminal_count() const;

  // Nested {"children": {token: node...}, "instruction": id} structure keyed
  // by token strings in id order.
  Json debug_dump() const;

 private:
  struct Node {
    std::vector<TokenId> tokens;  // sorted
    std::vector<NodeIndex> targets;
    std::optional<std::size_t> terminal;  // index into instructions_
  };

  InstructionTrie() = default;
  Json dump_node(NodeIndex index) const;

  std::vector<Node> nodes_;
  std::vector<Instruction> instructions_;
  std::shared_ptr<const Vocabulary> vocab_;
  std::uint64_t generation_ = 0;
};

InstructionTrie BuildTrie(std::vector<Instruction> library, const Vocabulary& vocab);

// Child token ids (ascending) of the node reached by `prefix`.
std::vector<TokenId> ValidNext(const InstructionTrie& trie, std::span<const TokenId> prefix);

// Copies `logits`, setting every id outside `valid` to -infinity. Throws
// DimensionMismatch when logits.size() != vocab_size and InvalidArgument when
// `valid` is empty or holds an out-of-range id.
Logits MaskLogits(std::span<const double> logits, std::span<const TokenId> valid,
                  std::size_t vocab_size);

struct DecodeResult {
  std::string instruction_id;
  double score = 0.0;
  TokenSequence path;  // instruction tokens followed by <EOS>

  bool operator==(const DecodeResult&) const = default;
};

// Greedy walk: at each node the scorer is called once with the current
// prefix, the highest masked logit wins (lowest token id on ties) and the
// walk stops after <EOS>. An instruction of L tokens costs exactly L + 1
// scorer calls. NaN logits count as -infinity. The score is the sum of the
// selected logits.
//
// Scorer exceptions are rethrown as ScorerFailure; a logit vector of the
// wrong length raises DimensionMismatch.
DecodeResult ConstrainedDecode(const InstructionTrie& trie, const Scorer& scorer);

// Beam search over the trie. Hypotheses are ranked by summed logits, then by
// path token ids ascending; a hypothesis that takes <EOS> keeps its beam slot.
// `beam_width` of 0 means k. With width 1 this reproduces ConstrainedDecode;
// with width >= the library size nothing is ever pruned and the result is
// the exact top k over all instructions.
//
// Throws InvalidArgument for k < 1 and KTooLarge for k > library size.
std::vector<DecodeResult> TopKDecode(const InstructionTrie& trie, const Scorer& scorer,
                                     std::size_t k, std::size_t beam_width = 0);

// Holds the published trie. Readers grab an immutable snapshot; Rebuild
// constructs a new trie off to the side and swaps it in, so a reader sees
// either the old or the new tree in full.
class TrieStore {
 public:
  TrieStore() = default;

  std::shared_ptr<const InstructionTrie> snapshot() const;
  // Builds with generation = previous + 1 and publishes. On failure the
  // previous trie stays published.
  std::shared_ptr<const InstructionTrie> Rebuild(std::vector<Instruction> library,
                                                 std::shared_ptr<const Vocabulary> vocab);
  std::uint64_t generation() const;

 private:
  mutable std::mutex publish_mutex_;
  std::mutex rebuild_mutex_;
  std::shared_ptr<const InstructionTrie> current_;
};

}  // namespace mira
