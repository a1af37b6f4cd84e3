#include "nlufix/detection.hpp"

#include "nlufix/random.hpp"
#include "nlufix/text.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace nlufix {

const char* to_string(DialogAct act) {
    switch (act) {
    case DialogAct::Inform: return "inform";
    case DialogAct::Error: return "error";
    case DialogAct::Other: return "other";
    }
    return "other";
}

DialogAct dialog_act_from_string(std::string_view name) {
    const std::string n = to_lower_ascii(name);
    if (n == "inform") return DialogAct::Inform;
    if (n == "error") return DialogAct::Error;
    if (n == "other") return DialogAct::Other;
    throw ValidationError("InvalidDialogAct", "unknown dialog act '" + std::string(name) + "'");
}

const char* to_string(SamplingStrategy strategy) {
    return strategy == SamplingStrategy::Random ? "random" : "lc";
}

SamplingStrategy sampling_strategy_from_string(std::string_view name) {
    if (name == "random") return SamplingStrategy::Random;
    if (name == "lc" || name == "least_confidence") return SamplingStrategy::LeastConfidence;
    throw ConfigError("unknown sampling strategy '" + std::string(name) + "'");
}

const char* to_string(RankingKey key) {
    switch (key) {
    case RankingKey::Uncertainty: return "uncertainty";
    case RankingKey::Frequency: return "frequency";
    case RankingKey::Recency: return "recency";
    }
    return "uncertainty";
}

RankingKey ranking_key_from_string(std::string_view name) {
    if (name == "uncertainty") return RankingKey::Uncertainty;
    if (name == "frequency") return RankingKey::Frequency;
    if (name == "recency") return RankingKey::Recency;
    throw ConfigError("unknown ranking key '" + std::string(name) + "'");
}

void check_request(const LoggedRequest& record) {
    if (record.intent_confidence && !std::isnan(*record.intent_confidence) &&
        (*record.intent_confidence < 0.0 || *record.intent_confidence > 1.0)) {
        throw ValidationError("ConfidenceOutOfRange", "intent_confidence must lie in [0, 1]");
    }
    if (record.frequency < 1) throw ValidationError("InvalidFrequency", "frequency must be >= 1");
    if (split_whitespace(record.utterance) != record.predicted_frame.tokens()) {
        throw FrameError(FrameErrorKind::TokenSequenceMismatch,
                         "utterance '" + record.utterance + "' does not match predicted frame tokens");
    }
}

double uncertainty_score(const LoggedRequest& record) {
    if (!record.intent_confidence || std::isnan(*record.intent_confidence)) return 1.0;
    return 1.0 - std::clamp(*record.intent_confidence, 0.0, 1.0);
}

bool ranks_before(RankingKey key, const RankFields& a, const RankFields& b) {
    switch (key) {
    case RankingKey::Uncertainty:
        if (a.uncertainty != b.uncertainty) return a.uncertainty > b.uncertainty;
        if (a.frequency != b.frequency) return a.frequency > b.frequency;
        break;
    case RankingKey::Frequency:
        if (a.frequency != b.frequency) return a.frequency > b.frequency;
        if (a.uncertainty != b.uncertainty) return a.uncertainty > b.uncertainty;
        break;
    case RankingKey::Recency:
        if (a.recency != b.recency) return a.recency > b.recency;
        if (a.uncertainty != b.uncertainty) return a.uncertainty > b.uncertainty;
        if (a.frequency != b.frequency) return a.frequency > b.frequency;
        break;
    }
    return a.utterance < b.utterance;
}

namespace {

RankFields fields_of(const LoggedRequest& r) {
    return {uncertainty_score(r), r.frequency, r.timestamp, r.utterance};
}

std::optional<double> max_confidence(const std::optional<double>& a, const std::optional<double>& b) {
    const bool a_ok = a && !std::isnan(*a);
    const bool b_ok = b && !std::isnan(*b);
    if (a_ok && b_ok) return std::max(*a, *b);
    if (a_ok) return a;
    if (b_ok) return b;
    return std::nullopt;
}

} // namespace

std::vector<LoggedRequest> dedup_pool(const std::vector<LoggedRequest>& pool) {
    std::vector<LoggedRequest> out;
    std::unordered_map<std::string, std::size_t> slot_of;
    for (const auto& r : pool) {
        const std::string key = normalize_text(r.utterance, Normalization::FoldCaseAndWhitespace);
        auto [it, inserted] = slot_of.emplace(key, out.size());
        if (inserted) {
            out.push_back(r);
            continue;
        }
        LoggedRequest& merged = out[it->second];
        const std::int64_t frequency = merged.frequency + r.frequency;
        const auto confidence = max_confidence(merged.intent_confidence, r.intent_confidence);
        if (r.timestamp > merged.timestamp || (r.timestamp == merged.timestamp && r.id < merged.id)) {
            merged = r;
        }
        merged.frequency = frequency;
        merged.intent_confidence = confidence;
    }
    return out;
}

std::vector<LoggedRequest> sample_candidates(const std::vector<LoggedRequest>& pool, const SamplingConfig& config) {
    if (config.k == 0) throw ConfigError("sample budget k must be positive");
    if (config.pool_size != 0 && config.k > config.pool_size) throw ConfigError("sample budget k exceeds pool size n");
    auto candidates = dedup_pool(pool);
    if (candidates.empty()) throw ValidationError("EmptyPool", "candidate pool is empty");
    if (config.pool_size != 0 && candidates.size() > config.pool_size) candidates.resize(config.pool_size);

    const std::size_t k = std::min(config.k, candidates.size());
    const auto by = [](RankingKey key) {
        return [key](const LoggedRequest& a, const LoggedRequest& b) { return ranks_before(key, fields_of(a), fields_of(b)); };
    };

    std::vector<LoggedRequest> picked;
    if (config.strategy == SamplingStrategy::LeastConfidence) {
        std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k), candidates.end(),
                          by(RankingKey::Uncertainty));
        candidates.resize(k);
        picked = std::move(candidates);
    } else {
        Rng rng(config.seed);
        picked.reserve(k);
        for (std::size_t i : rng.sample_indices(candidates.size(), k)) picked.push_back(std::move(candidates[i]));
    }
    std::sort(picked.begin(), picked.end(), by(config.ranking));
    return picked;
}

bool task_success_proxy(const LoggedRequest& record) { return record.final_dialog_act == DialogAct::Inform; }

std::vector<HistogramBin> score_histogram(std::span<const double> scores, std::size_t bins) {
    if (bins == 0) throw ConfigError("histogram needs at least one bin");
    std::vector<HistogramBin> out(bins);
    const double width = static_cast<double>(bins);
    for (std::size_t i = 0; i < bins; ++i) {
        out[i].lo = static_cast<double>(i) / width;
        out[i].hi = static_cast<double>(i + 1) / width;
    }
    for (double s : scores) {
        if (!(s >= 0.0 && s <= 1.0)) throw ValidationError("ScoreOutOfRange", "score outside [0, 1]");
        std::size_t b = std::min(bins - 1, static_cast<std::size_t>(s * width));
        // Keep assignment consistent with the stored edges despite rounding.
        while (b > 0 && s < out[b].lo) --b;
        while (b + 1 < bins && s >= out[b + 1].lo) ++b;
        ++out[b].count;
    }
    return out;
}

MisclassificationSplit misclassification_split(const std::vector<GradedRequest>& graded, const Ontology& ontology) {
    MisclassificationSplit split;
    std::size_t above = 0;
    for (const auto& g : graded) {
        const double score = uncertainty_score(g.record);
        if (is_bug(g.golden, g.record.predicted_frame, ontology)) {
            split.misclassified_scores.push_back(score);
            if (score > 0.5) ++above;
        } else {
            split.correct_scores.push_back(score);
        }
    }
    if (!split.misclassified_scores.empty()) {
        split.misclassified_above_half = static_cast<double>(above) / static_cast<double>(split.misclassified_scores.size());
    }
    return split;
}

} // namespace nlufix
