#pragma once

#include <sstream>
#include <unordered_map>

#include "prompt_siege/assets.hpp"
#include "prompt_siege/gateway/gateway.hpp"

namespace prompt_siege {

inline double perplexity(std::string_view text, PerplexityGateway& scorer) {
    if (trim(text).empty()) throw ValidationError("perplexity: empty tokenization");
    const auto nll = scorer.token_nll(text);
    if (nll.empty()) throw ValidationError("perplexity: empty tokenization");
    double sum = 0;
    for (double v : nll) sum += v;
    return std::exp(sum / static_cast<double>(nll.size()));
}

/// Character trigram model with add-one smoothing. Text is lowercased and
/// runs of whitespace collapse to one space; each sentence is padded with two
/// start symbols and closed by an end symbol, which is scored as a token.
class TrigramScorer : public PerplexityBackend {
public:
    explicit TrigramScorer(std::string_view corpus = assets::kTrigramCorpus) {
        std::istringstream in{std::string(corpus)};
        std::string line;
        while (std::getline(in, line)) {
            const auto s = normalize(line);
            if (s.empty()) continue;
            for (unsigned char c : s) vocab_[c] = true;
            const auto seq = padded(s);
            for (std::size_t i = 2; i < seq.size(); ++i) {
                ++tri_[key(seq[i - 2], seq[i - 1], seq[i])];
                ++bi_[key(seq[i - 2], seq[i - 1], 0)];
            }
        }
        // Observed characters, the end symbol and one slot for unseen characters.
        V_ = 2;
        for (bool seen : vocab_) V_ += seen ? 1 : 0;
    }

    GatewayDescriptor descriptor() const override {
        return {GatewayKind::ppl_scorer, "char-trigram", std::nullopt, 64, true};
    }

    std::vector<double> token_nll(std::string_view text) override {
        const auto s = normalize(text);
        if (s.empty()) throw ValidationError("perplexity: empty tokenization");
        const auto seq = padded(s);
        std::vector<double> out;
        out.reserve(seq.size() - 2);
        for (std::size_t i = 2; i < seq.size(); ++i) {
            const double num = static_cast<double>(count(tri_, key(seq[i - 2], seq[i - 1], seq[i]))) + 1.0;
            const double den = static_cast<double>(count(bi_, key(seq[i - 2], seq[i - 1], 0))) + V_;
            out.push_back(-std::log(num / den));
        }
        return out;
    }

    std::size_t vocabulary_size() const noexcept { return V_; }

    static std::string normalize(std::string_view text) {
        std::string out;
        bool space = false;
        for (unsigned char c : trim(text)) {
            if (std::isspace(c)) {
                space = true;
                continue;
            }
            if (space && !out.empty()) out.push_back(' ');
            space = false;
            out.push_back(static_cast<char>(std::tolower(c)));
        }
        return out;
    }

private:
    static constexpr int kStart = 256;
    static constexpr int kEnd = 257;

    static std::vector<int> padded(const std::string& s) {
        std::vector<int> seq{kStart, kStart};
        for (unsigned char c : s) seq.push_back(c);
        seq.push_back(kEnd);
        return seq;
    }

    static std::uint32_t key(int a, int b, int c) {
        return (static_cast<std::uint32_t>(a) << 18) | (static_cast<std::uint32_t>(b) << 9) | static_cast<std::uint32_t>(c);
    }

    static std::size_t count(const std::unordered_map<std::uint32_t, std::size_t>& m, std::uint32_t k) {
        auto it = m.find(k);
        return it == m.end() ? 0 : it->second;
    }

    std::array<bool, 256> vocab_{};
    std::unordered_map<std::uint32_t, std::size_t> tri_;
    std::unordered_map<std::uint32_t, std::size_t> bi_;
    double V_ = 2;
};

inline std::shared_ptr<PerplexityGateway> trigram_ppl_gateway() {
    static const auto backend = std::make_shared<TrigramScorer>();
    return std::make_shared<PerplexityGateway>(backend);
}

}  // namespace prompt_siege
