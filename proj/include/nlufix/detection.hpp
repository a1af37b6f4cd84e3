#pragma once

// Uncertainty scoring and candidate sampling over logged traffic.

#include "nlufix/frames.hpp"
#include "nlufix/timeutil.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace nlufix {

enum class DialogAct { Inform, Error, Other };

const char* to_string(DialogAct act);
DialogAct dialog_act_from_string(std::string_view name);

struct LoggedRequest {
    std::string id;
    std::string utterance;
    SemanticFrame predicted_frame;
    // Top-level intent confidence; absent when the log lacks it.
    std::optional<double> intent_confidence;
    // Confidences of nested intents, in document order. Logged for
    // inspection; scoring ignores them.
    std::vector<double> nested_intent_confidences;
    std::int64_t frequency = 1;
    DialogAct final_dialog_act = DialogAct::Other;
    Timestamp timestamp = 0;

    bool operator==(const LoggedRequest&) const = default;
};

// Throws ValidationError on out-of-range confidence, frequency < 1, or an
// utterance that does not match the predicted frame's tokens.
void check_request(const LoggedRequest& record);

enum class SamplingStrategy { Random, LeastConfidence };
enum class RankingKey { Uncertainty, Frequency, Recency };

const char* to_string(SamplingStrategy strategy);
SamplingStrategy sampling_strategy_from_string(std::string_view name);
const char* to_string(RankingKey key);
RankingKey ranking_key_from_string(std::string_view name);

struct SamplingConfig {
    std::size_t k = 1;
    // Number of candidates considered; 0 means the whole deduplicated pool.
    std::size_t pool_size = 0;
    SamplingStrategy strategy = SamplingStrategy::LeastConfidence;
    // Order of the returned list (the selection itself is set by strategy).
    RankingKey ranking = RankingKey::Uncertainty;
    std::uint64_t seed = 0;
};

// 1 - intent_confidence; missing or NaN confidence scores 1.0.
double uncertainty_score(const LoggedRequest& record);

// Fields a ranking comparator looks at.
struct RankFields {
    double uncertainty = 0.0;
    std::int64_t frequency = 0;
    Timestamp recency = 0;
    std::string_view utterance;
};

// Strict weak ordering: true if `a` ranks ahead of `b` under `key`.
// Uncertainty: score desc, frequency desc, utterance asc.
// Frequency:   frequency desc, score desc, utterance asc.
// Recency:     timestamp desc, score desc, frequency desc, utterance asc.
bool ranks_before(RankingKey key, const RankFields& a, const RankFields& b);

// Merges records whose utterances normalize equal (case and whitespace
// folded): frequencies summed, latest timestamp, max confidence. The
// representative record (id, text, frame, act) is the latest one, ties going
// to the smallest id. Output follows first appearance.
std::vector<LoggedRequest> dedup_pool(const std::vector<LoggedRequest>& pool);

// Dedups, then selects min(k, n) records. LeastConfidence takes the k highest
// scores; Random draws a seeded uniform sample without replacement. The
// result is ordered by config.ranking. Throws ValidationError("EmptyPool").
std::vector<LoggedRequest> sample_candidates(const std::vector<LoggedRequest>& pool, const SamplingConfig& config);

// True iff the final dialog act informed the user.
bool task_success_proxy(const LoggedRequest& record);

struct HistogramBin {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;
    bool operator==(const HistogramBin&) const = default;
};

// Equal-width bins over [0, 1]; each bin is [lo, hi) except the last, which
// is closed. Throws ValidationError("ScoreOutOfRange").
std::vector<HistogramBin> score_histogram(std::span<const double> scores, std::size_t bins);

struct GradedRequest {
    LoggedRequest record;
    SemanticFrame golden;
};

struct MisclassificationSplit {
    std::vector<double> misclassified_scores;
    std::vector<double> correct_scores;
    // Share of misclassified records with uncertainty > 0.5 (0 when none).
    double misclassified_above_half = 0.0;
};

MisclassificationSplit misclassification_split(const std::vector<GradedRequest>& graded, const Ontology& ontology);

} // namespace nlufix
