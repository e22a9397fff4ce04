#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace mira {

class EmbeddingVector {
 public:
  EmbeddingVector() = default;
  // Throws InvalidArgument on an empty or non-finite vector.
  explicit EmbeddingVector(std::vector<double> values);

  std::size_t dimension() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  double norm() const { return norm_; }

  EmbeddingVector scaled(double factor) const;

  bool operator==(const EmbeddingVector& other) const { return values_ == other.values_; }

 private:
  std::vector<double> values_;
  double norm_ = 0.0;
};

// dot(a, b) / (|a| |b|), clamped to [-1, 1]. Throws DimensionMismatch or
// ZeroNorm.
double CosineSimilarity(const EmbeddingVector& a, const EmbeddingVector& b);

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dimension() const = 0;
  // Throws EmptyText for "", DegenerateEmbedding when the text yields no
  // features. Must be pure and safe to call concurrently.
  virtual EmbeddingVector Embed(std::string_view text) const = 0;
};

std::uint64_t Fnv1a64(std::string_view bytes);

// Hashed bag of words: lowercase, split on whitespace, add 1 to bucket
// fnv1a64(word) % dimension, then L2-normalize. Word order is irrelevant.
class HashingEmbedder final : public Embedder {
 public:
  static constexpr std::size_t kDefaultDimension = 256;

  explicit HashingEmbedder(std::size_t dimension = kDefaultDimension);

  std::size_t dimension() const override { return dimension_; }
  EmbeddingVector Embed(std::string_view text) const override;
  std::size_t bucket(std::string_view word) const;

 private:
  std::size_t dimension_;
};

}  // namespace mira
