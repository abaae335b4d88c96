#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "termalign/errors.hpp"
#include "termalign/hash.hpp"
#include "termalign/text.hpp"

namespace termalign {

using Vector = std::vector<double>;

inline double dot(const Vector& a, const Vector& b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
    return sum;
}

inline double l2_norm(const Vector& v) {
    return std::sqrt(dot(v, v));
}

inline void l2_normalize(Vector& v) {
    double norm = l2_norm(v);
    if (norm == 0.0) throw ZeroVector("cannot normalize an all-zero vector");
    for (double& x : v) x /= norm;
}

inline double cosine(const Vector& a, const Vector& b) {
    if (a.size() != b.size())
        throw DimensionMismatch("cosine: " + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
    double na = l2_norm(a), nb = l2_norm(b);
    if (na == 0.0 || nb == 0.0) throw ZeroVector("cosine of a zero vector");
    return dot(a, b) / (na * nb);
}

// Offline embedding: signed feature hashing of character 3-grams of the
// normalized text, L2-normalized. Deterministic in (text, dim, seed); texts
// sharing many 3-grams land closer than unrelated texts. Boundary markers
// keep one- and two-character inputs hashable.
inline Vector fallback_embed(std::string_view text, std::size_t dim, std::uint64_t seed) {
    std::string s = normalize_text(text);
    std::string padded;
    padded.reserve(s.size() + 2);
    padded.push_back('\x02');
    padded += s;
    padded.push_back('\x03');

    Vector v(dim, 0.0);
    if (padded.size() >= 3) {
        for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
            std::uint64_t h = fnv1a64(std::string_view(padded).substr(i, 3), seed);
            double sign = (h >> 63) ? -1.0 : 1.0;
            v[h % dim] += sign;
        }
    }
    if (l2_norm(v) == 0.0)
        throw ZeroVector("no hashable content in text: '" + std::string(text) + "'");
    l2_normalize(v);
    return v;
}

// A batch-oriented text embedder. Implementations return one raw vector per
// input text, in input order; embed_batch() handles batching, validation and
// normalization on top.
class EmbeddingProvider {
  public:
    virtual ~EmbeddingProvider() = default;
    virtual std::string id() const = 0;
    virtual std::size_t dim() const = 0;
    virtual std::vector<Vector> embed(const std::vector<std::string>& texts) = 0;
};

class FallbackEmbedder final : public EmbeddingProvider {
  public:
    FallbackEmbedder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {}

    std::string id() const override {
        return "fallback:dim=" + std::to_string(dim_) + ":seed=" + std::to_string(seed_);
    }
    std::size_t dim() const override { return dim_; }
    std::vector<Vector> embed(const std::vector<std::string>& texts) override {
        std::vector<Vector> out;
        out.reserve(texts.size());
        for (const std::string& t : texts) out.push_back(fallback_embed(t, dim_, seed_));
        return out;
    }

  private:
    std::size_t dim_;
    std::uint64_t seed_;
};

// Embeds texts in batches of at most `batch_size`, preserving input order,
// and L2-normalizes every returned vector. Calls are sequential; provider
// implementations handle their own transport retries.
inline std::vector<Vector> embed_batch(EmbeddingProvider& provider,
                                       const std::vector<std::string>& texts,
                                       std::size_t batch_size = 64) {
    if (batch_size == 0) throw Error("embed_batch: batch_size must be positive");
    for (std::size_t i = 0; i < texts.size(); ++i)
        if (texts[i].empty())
            throw Error("embed_batch: empty text at index " + std::to_string(i));

    std::vector<Vector> out;
    out.reserve(texts.size());
    for (std::size_t start = 0; start < texts.size(); start += batch_size) {
        std::size_t end = std::min(start + batch_size, texts.size());
        std::vector<std::string> batch(texts.begin() + start, texts.begin() + end);
        std::vector<Vector> vecs = provider.embed(batch);
        if (vecs.size() != batch.size())
            throw ProviderError("provider returned " + std::to_string(vecs.size()) +
                                " vectors for a batch of " + std::to_string(batch.size()));
        for (Vector& v : vecs) {
            if (v.size() != provider.dim())
                throw DimensionMismatch("provider returned dim " + std::to_string(v.size()) +
                                        ", expected " + std::to_string(provider.dim()));
            for (double x : v)
                if (!std::isfinite(x)) throw ProviderError("provider returned a non-finite value");
            l2_normalize(v);
            out.push_back(std::move(v));
        }
    }
    return out;
}

}  // namespace termalign
