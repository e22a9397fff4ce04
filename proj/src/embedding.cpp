#include "mira/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mira/core_types.hpp"
#include "mira/error.hpp"

namespace mira {

namespace {

double EuclideanNorm(std::span<const double> values) {
  double sum = 0.0;
  for (double v : values) sum += v * v;
  return std::sqrt(sum);
}

}  // namespace

EmbeddingVector::EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw Error(ErrorCode::kInvalidArgument, "embedding has no dimensions");
  if (!std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); })) {
    throw Error(ErrorCode::kInvalidArgument, "embedding has non-finite entries");
  }
  norm_ = EuclideanNorm(values_);
}

EmbeddingVector EmbeddingVector::scaled(double factor) const {
  std::vector<double> out(values_);
  for (double& v : out) v *= factor;
  return EmbeddingVector(std::move(out));
}

double CosineSimilarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dimension() != b.dimension()) {
    throw Error(ErrorCode::kDimensionMismatch, std::to_string(a.dimension()) + " vs " +
                                                   std::to_string(b.dimension()));
  }
  if (a.norm() == 0.0 || b.norm() == 0.0) {
    throw Error(ErrorCode::kZeroNorm, "cosine similarity of a zero vector");
  }
  const auto x = a.values();
  const auto y = b.values();
  double dot = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * y[i];
  return std::clamp(dot / (a.norm() * b.norm()), -1.0, 1.0);
}

std::uint64_t Fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

HashingEmbedder::HashingEmbedder(std::size_t dimension) : dimension_(dimension) {
  if (dimension_ == 0) throw Error(ErrorCode::kInvalidArgument, "embedding dimension must be > 0");
}

std::size_t HashingEmbedder::bucket(std::string_view word) const {
  return static_cast<std::size_t>(Fnv1a64(word) % dimension_);
}

EmbeddingVector HashingEmbedder::Embed(std::string_view text) const {
  if (text.empty()) throw Error(ErrorCode::kEmptyText, "cannot embed empty text");
  std::vector<double> counts(dimension_, 0.0);
  const auto words = SplitWords(ToLower(text));
  if (words.empty()) {
    throw Error(ErrorCode::kDegenerateEmbedding, "text has no words to embed");
  }
  for (const std::string& word : words) counts[bucket(word)] += 1.0;
  const double norm = EuclideanNorm(counts);
  for (double& c : counts) c /= norm;
  return EmbeddingVector(std::move(counts));
}

}  // namespace mira
