#pragma once

#include <chrono>
#include <cstddef>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "mira/core_types.hpp"
#include "mira/instruction_trie.hpp"

namespace mira {

enum class BackendMode { kGenerateText, kScoreTokens };

struct BackendRequest {
  Prompt prompt;
  Trigger trigger;
  BackendMode mode = BackendMode::kGenerateText;
  std::optional<TokenSequence> prefix;  // ScoreTokens only; may be empty
};

// Throws InvalidArgument when a ScoreTokens request has no prefix.
void Validate(const BackendRequest& request);

// Prompt body followed by the in-context examples, if any, as plain text.
std::string RenderPrompt(const Prompt& prompt);

// The POST /generate body:
//   {"prompt": str, "trigger": {"modality": "text"|"image", "text"?: str,
//    "image_b64"?: str}, "mode": "generate_text"|"score_tokens",
//    "prefix"?: [int]}
// With `inline_images` false an image given by path is written as
// "image_path" instead of being read and base64-encoded.
Json ToWireJson(const BackendRequest& request, bool inline_images = true);

class ModelBackend {
 public:
  virtual ~ModelBackend() = default;

  virtual std::string GenerateText(const BackendRequest& request) = 0;
  // One unmasked logit per vocabulary id. Throws DimensionMismatch when the
  // model answers with a different length.
  virtual Logits ScoreTokens(const BackendRequest& request, std::size_t vocab_size) = 0;
};

// One scripted reply. An entry applies when every `match` substring occurs in
// the serialized request (an empty list matches everything) and, for
// ScoreTokens, `prefix` (when set) equals the request prefix exactly. Text
// entries answer GenerateText; logit entries answer ScoreTokens, either as a
// dense `logits` vector or as `fill` plus `sparse` per-id overrides.
struct MockEntry {
  std::vector<std::string> match;
  std::optional<TokenSequence> prefix;
  std::optional<std::string> text;
  std::optional<Logits> logits;
  double fill = 0.0;
  std::map<TokenId, double> sparse;

  bool answers_text() const { return text.has_value(); }
};

struct MockScript {
  std::vector<MockEntry> entries;
  std::optional<std::size_t> vocab_size;  // checked against dense logits on load

  // {"vocab_size"?: n, "entries": [{"match": str|[str], "prefix"?: [int],
  //   "text"?: str, "logits"?: [num], "fill"?: num, "sparse"?: {id: num}}]}
  static MockScript FromJson(const Json& json);
  Json ToJson() const;
};

// Deterministic test double: the first matching entry wins. Requests are
// serialized and recorded in order.
class MockBackend final : public ModelBackend {
 public:
  explicit MockBackend(MockScript script);

  std::string GenerateText(const BackendRequest& request) override;
  Logits ScoreTokens(const BackendRequest& request, std::size_t vocab_size) override;

  std::vector<std::string> transcript() const;
  std::size_t call_count() const;

 private:
  const MockEntry& Match(const BackendRequest& request, bool want_text, std::string& serialized);

  MockScript script_;
  mutable std::mutex mutex_;
  std::vector<std::string> transcript_;
};

struct HttpBackendOptions {
  std::string endpoint;  // e.g. "http://127.0.0.1:8080"
  std::chrono::milliseconds timeout{30000};
};

// Stateless client for the wire format above. Any transport failure or
// non-200 status is BackendUnreachable; a body that is not the expected JSON
// is MalformedResponse. No retries.
class HttpBackend final : public ModelBackend {
 public:
  explicit HttpBackend(HttpBackendOptions options);

  std::string GenerateText(const BackendRequest& request) override;
  Logits ScoreTokens(const BackendRequest& request, std::size_t vocab_size) override;

 private:
  Json Post(const BackendRequest& request) const;

  HttpBackendOptions options_;
};

}  // namespace mira
