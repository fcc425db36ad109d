#pragma once

#include "prompt_siege/gateway/gateway.hpp"

namespace prompt_siege {

/// Cosine of two feature vectors from the same space, clamped to [-1, 1].
inline double cosine(const FeatureVector& a, const FeatureVector& b) {
    if (a.space() != b.space()) {
        throw ValidationError("cosine across feature spaces " + std::string(to_string(a.space())) +
                              " and " + std::string(to_string(b.space())));
    }
    if (a.dim() != b.dim()) {
        throw ValidationError("dimension mismatch: " + std::to_string(a.dim()) + " vs " +
                              std::to_string(b.dim()));
    }
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0 || nb == 0) throw DegenerateEmbedding();
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

inline double motion_similarity(const MotionClip& a, const MotionClip& b, MotionEncoderGateway& encoder) {
    // Canonical argument order keeps the result bit-identical under swapping.
    const bool swap = b.id() < a.id();
    const auto fa = encoder.encode(swap ? b : a);
    const auto fb = encoder.encode(swap ? a : b);
    return cosine(fa, fb);
}

inline double text_similarity(const Prompt& p, const Prompt& q, TextEncoderGateway& encoder) {
    const bool swap = q.text() < p.text();
    const auto fp = encoder.encode(swap ? q.text() : p.text());
    const auto fq = encoder.encode(swap ? p.text() : q.text());
    return cosine(fp, fq);
}

}  // namespace prompt_siege
