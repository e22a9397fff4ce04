#include "mira/model_backend.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include <httplib.h>

#include "mira/error.hpp"

namespace mira {

namespace {

std::string PrefixKey(const std::optional<TokenSequence>& prefix) {
  return prefix ? Json(*prefix).dump() : "none";
}

std::vector<std::uint8_t> ReadBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIOFailure, "cannot read image '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

void Validate(const BackendRequest& request) {
  if (request.mode == BackendMode::kScoreTokens && !request.prefix) {
    throw Error(ErrorCode::kInvalidArgument, "score_tokens request without a prefix");
  }
}

std::string RenderPrompt(const Prompt& prompt) {
  std::string out = prompt.body;
  if (!prompt.in_context_examples) return out;
  std::size_t n = 0;
  for (const InContextExample& ex : *prompt.in_context_examples) {
    out += "\n\n### Example " + std::to_string(++n) + "\n";
    out += "Trigger: " + ex.trigger_description + "\n";
    out += ex.reasoning + "\n";
    out += "Instruction: " + ex.instruction;
  }
  return out;
}

Json ToWireJson(const BackendRequest& request, bool inline_images) {
  Validate(request);
  Json trigger;
  const Trigger& t = request.trigger;
  trigger["modality"] = t.modality == Modality::kText ? "text" : "image";
  if (t.text) trigger["text"] = *t.text;
  if (t.image) {
    if (const auto* path = std::get_if<ImagePath>(&*t.image)) {
      if (inline_images) {
        trigger["image_b64"] = EncodeBase64(ReadBytes(path->path));
      } else {
        trigger["image_path"] = path->path;
      }
    } else {
      trigger["image_b64"] = EncodeBase64(std::get<ImageBytes>(*t.image));
    }
  }

  Json out;
  out["prompt"] = RenderPrompt(request.prompt);
  out["trigger"] = std::move(trigger);
  out["mode"] = request.mode == BackendMode::kGenerateText ? "generate_text" : "score_tokens";
  if (request.mode == BackendMode::kScoreTokens) out["prefix"] = *request.prefix;
  return out;
}

MockScript MockScript::FromJson(const Json& json) {
  if (!json.is_object() || !json.contains("entries") || !json.at("entries").is_array()) {
    throw Error(ErrorCode::kInvariantViolation, "mock script needs an 'entries' array");
  }
  MockScript script;
  if (json.contains("vocab_size")) script.vocab_size = json.at("vocab_size").get<std::size_t>();
  for (const Json& item : json.at("entries")) {
    MockEntry entry;
    if (item.contains("match")) {
      const Json& match = item.at("match");
      if (match.is_string()) {
        entry.match.push_back(match.get<std::string>());
      } else {
        entry.match = match.get<std::vector<std::string>>();
      }
    }
    if (item.contains("prefix")) entry.prefix = item.at("prefix").get<TokenSequence>();
    if (item.contains("text")) entry.text = item.at("text").get<std::string>();
    if (item.contains("logits")) entry.logits = item.at("logits").get<Logits>();
    entry.fill = item.value("fill", 0.0);
    if (item.contains("sparse")) {
      for (const auto& [key, value] : item.at("sparse").items()) {
        entry.sparse[static_cast<TokenId>(std::stol(key))] = value.get<double>();
      }
    }
    const bool has_logits = entry.logits || item.contains("fill") || item.contains("sparse");
    if (entry.text.has_value() == has_logits) {
      throw Error(ErrorCode::kInvariantViolation,
                  "mock entry must carry either 'text' or logits, not both or neither");
    }
    if (entry.logits && script.vocab_size && entry.logits->size() != *script.vocab_size) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "scripted logits of length " + std::to_string(entry.logits->size()) +
                      " for vocabulary of " + std::to_string(*script.vocab_size));
    }
    script.entries.push_back(std::move(entry));
  }
  return script;
}

Json MockScript::ToJson() const {
  Json out;
  if (vocab_size) out["vocab_size"] = *vocab_size;
  out["entries"] = Json::array();
  for (const MockEntry& entry : entries) {
    Json item;
    item["match"] = entry.match;
    if (entry.prefix) item["prefix"] = *entry.prefix;
    if (entry.text) {
      item["text"] = *entry.text;
    } else if (entry.logits) {
      item["logits"] = *entry.logits;
    } else {
      item["fill"] = entry.fill;
      Json sparse = Json::object();
      for (const auto& [id, value] : entry.sparse) sparse[std::to_string(id)] = value;
      item["sparse"] = std::move(sparse);
    }
    out["entries"].push_back(std::move(item));
  }
  return out;
}

MockBackend::MockBackend(MockScript script) : script_(std::move(script)) {}

const MockEntry& MockBackend::Match(const BackendRequest& request, bool want_text,
                                    std::string& serialized) {
  serialized = ToWireJson(request, /*inline_images=*/false).dump();
  transcript_.push_back(serialized);
  for (const MockEntry& entry : script_.entries) {
    if (entry.answers_text() != want_text) continue;
    if (!want_text && entry.prefix && entry.prefix != request.prefix) continue;
    const bool all = std::all_of(entry.match.begin(), entry.match.end(), [&](const std::string& m) {
      return serialized.find(m) != std::string::npos;
    });
    if (all) return entry;
  }
  throw Error(ErrorCode::kNoScriptMatch,
              std::string(want_text ? "generate_text" : "score_tokens") +
                  " request matched no script entry (prefix " + PrefixKey(request.prefix) + ")");
}

std::string MockBackend::GenerateText(const BackendRequest& request) {
  if (request.mode != BackendMode::kGenerateText) {
    throw Error(ErrorCode::kInvalidArgument, "GenerateText needs a generate_text request");
  }
  std::lock_guard lock(mutex_);
  std::string serialized;
  return *Match(request, true, serialized).text;
}

Logits MockBackend::ScoreTokens(const BackendRequest& request, std::size_t vocab_size) {
  if (request.mode != BackendMode::kScoreTokens) {
    throw Error(ErrorCode::kInvalidArgument, "ScoreTokens needs a score_tokens request");
  }
  std::lock_guard lock(mutex_);
  std::string serialized;
  const MockEntry& entry = Match(request, false, serialized);
  Logits logits;
  if (entry.logits) {
    logits = *entry.logits;
  } else {
    logits.assign(vocab_size, entry.fill);
    for (const auto& [id, value] : entry.sparse) {
      if (id >= 0 && static_cast<std::size_t>(id) < vocab_size) {
        logits[static_cast<std::size_t>(id)] = value;
      }
    }
  }
  if (logits.size() != vocab_size) {
    throw Error(ErrorCode::kDimensionMismatch, "scripted " + std::to_string(logits.size()) +
                                                   " logits, expected " + std::to_string(vocab_size));
  }
  return logits;
}

std::vector<std::string> MockBackend::transcript() const {
  std::lock_guard lock(mutex_);
  return transcript_;
}

std::size_t MockBackend::call_count() const {
  std::lock_guard lock(mutex_);
  return transcript_.size();
}

HttpBackend::HttpBackend(HttpBackendOptions options) : options_(std::move(options)) {
  if (options_.endpoint.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "HTTP backend needs an endpoint");
  }
}

Json HttpBackend::Post(const BackendRequest& request) const {
  const std::string body = ToWireJson(request).dump();
  httplib::Client client(options_.endpoint);
  if (!client.is_valid()) {
    throw Error(ErrorCode::kBackendUnreachable, "invalid endpoint '" + options_.endpoint + "'");
  }
  const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
  const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout - seconds);
  client.set_connection_timeout(seconds.count(), micros.count());
  client.set_read_timeout(seconds.count(), micros.count());
  client.set_write_timeout(seconds.count(), micros.count());

  const auto response = client.Post("/generate", body, "application/json");
  if (!response) {
    throw Error(ErrorCode::kBackendUnreachable,
                options_.endpoint + ": " + httplib::to_string(response.error()));
  }
  if (response->status != 200) {
    throw Error(ErrorCode::kBackendUnreachable,
                options_.endpoint + " answered HTTP " + std::to_string(response->status));
  }
  try {
    Json parsed = Json::parse(response->body);
    if (!parsed.is_object()) throw Error(ErrorCode::kMalformedResponse, "response is not an object");
    return parsed;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kMalformedResponse, e.what());
  }
}

std::string HttpBackend::GenerateText(const BackendRequest& request) {
  if (request.mode != BackendMode::kGenerateText) {
    throw Error(ErrorCode::kInvalidArgument, "GenerateText needs a generate_text request");
  }
  const Json response = Post(request);
  if (!response.contains("text") || !response.at("text").is_string()) {
    throw Error(ErrorCode::kMalformedResponse, "response lacks a 'text' string");
  }
  return response.at("text").get<std::string>();
}

Logits HttpBackend::ScoreTokens(const BackendRequest& request, std::size_t vocab_size) {
  if (request.mode != BackendMode::kScoreTokens) {
    throw Error(ErrorCode::kInvalidArgument, "ScoreTokens needs a score_tokens request");
  }
  const Json response = Post(request);
  if (!response.contains("logits") || !response.at("logits").is_array()) {
    throw Error(ErrorCode::kMalformedResponse, "response lacks a 'logits' array");
  }
  Logits logits;
  logits.reserve(response.at("logits").size());
  for (const Json& value : response.at("logits")) {
    if (!value.is_number()) throw Error(ErrorCode::kMalformedResponse, "non-numeric logit");
    logits.push_back(value.get<double>());
  }
  if (logits.size() != vocab_size) {
    throw Error(ErrorCode::kDimensionMismatch, "backend returned " + std::to_string(logits.size()) +
                                                   " logits, expected " + std::to_string(vocab_size));
  }
  return logits;
}

}  // namespace mira
