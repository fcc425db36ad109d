#pragma once

#include <map>
#include <numeric>
#include <set>

#include "prompt_siege/gateway/gateway.hpp"

namespace prompt_siege {

inline constexpr std::size_t kStandardBatchSize = 20;

struct EvalItem {
    MotionClip generated;
    std::string text;
    MotionClip target;
};

/// Items plus the encoder pair mapping motions and texts into one space.
struct EvalBatch {
    std::vector<EvalItem> items;
    std::shared_ptr<MotionEncoderGateway> motion_encoder;
    std::shared_ptr<TextEncoderGateway> text_encoder;

    bool standard_size() const noexcept { return items.size() == kStandardBatchSize; }
};

struct RPrecision {
    std::map<std::size_t, std::size_t> hits;  // k -> items whose aligned text ranks within the top k
    std::size_t batch_size = 0;
    std::vector<std::string> warnings;
};

inline double euclidean(const FeatureVector& a, const FeatureVector& b) {
    if (a.dim() != b.dim()) {
        throw ValidationError("dimension mismatch: " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
    }
    double s = 0;
    for (std::size_t i = 0; i < a.dim(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

/// Retrieval ranking on precomputed features. Texts are ordered by distance
/// to the motion; equal distances keep text index order.
inline RPrecision r_precision(const std::vector<FeatureVector>& motion, const std::vector<FeatureVector>& text,
                              const std::vector<std::size_t>& k_values) {
    if (motion.size() != text.size()) throw ValidationError("r_precision needs aligned motion and text features");
    if (motion.empty()) throw ValidationError("r_precision needs a non-empty batch");
    RPrecision out;
    out.batch_size = motion.size();
    for (auto k : k_values) {
        if (k < 1) throw ValidationError("r_precision k must be ≥ 1");
        if (k > motion.size()) {
            throw ValidationError("r_precision k=" + std::to_string(k) + " exceeds batch size " +
                                  std::to_string(motion.size()));
        }
        out.hits[k] = 0;
    }
    const std::size_t n = motion.size();
    std::vector<std::size_t> order(n);
    std::vector<double> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) dist[j] = euclidean(motion[i], text[j]);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
        const auto rank = static_cast<std::size_t>(std::find(order.begin(), order.end(), i) - order.begin());
        for (auto& [k, hits] : out.hits) hits += rank < k ? 1 : 0;
    }
    return out;
}

inline RPrecision r_precision(const EvalBatch& batch, const std::vector<std::size_t>& k_values) {
    if (!batch.motion_encoder || !batch.text_encoder) throw GatewayError("eval_encoder", "unbound");
    if (batch.motion_encoder->descriptor().feature_dim != batch.text_encoder->descriptor().feature_dim) {
        throw ValidationError("eval encoders do not share a feature space");
    }
    std::vector<FeatureVector> m, t;
    std::set<std::string> seen;
    bool duplicates = false;
    for (const auto& item : batch.items) {
        m.push_back(batch.motion_encoder->encode(item.generated));
        t.push_back(batch.text_encoder->encode(item.text));
        duplicates |= !seen.insert(item.text).second;
    }
    auto out = r_precision(m, t, k_values);
    if (!batch.standard_size()) {
        out.warnings.push_back("non-standard batch size " + std::to_string(batch.items.size()));
    }
    if (duplicates) out.warnings.push_back("duplicate texts in batch; ranking uses index tie-break");
    return out;
}

inline double multimodal_distance(const std::vector<FeatureVector>& motion, const std::vector<FeatureVector>& text) {
    if (motion.empty() || motion.size() != text.size()) {
        throw ValidationError("multimodal distance needs a non-empty aligned batch");
    }
    double sum = 0;
    for (std::size_t i = 0; i < motion.size(); ++i) sum += euclidean(motion[i], text[i]);
    return sum / static_cast<double>(motion.size());
}

inline double multimodal_distance(const EvalBatch& batch) {
    if (!batch.motion_encoder || !batch.text_encoder) throw GatewayError("eval_encoder", "unbound");
    if (batch.motion_encoder->descriptor().feature_dim != batch.text_encoder->descriptor().feature_dim) {
        throw ValidationError("eval encoders do not share a feature space");
    }
    std::vector<FeatureVector> m, t;
    for (const auto& item : batch.items) {
        m.push_back(batch.motion_encoder->encode(item.generated));
        t.push_back(batch.text_encoder->encode(item.text));
    }
    return multimodal_distance(m, t);
}

}  // namespace prompt_siege
