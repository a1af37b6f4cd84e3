#pragma once

// Bracketed semantic frames: a tree of one root intent, its slots and
// (inside slots) nested intents, laid over a whitespace-tokenized utterance.
//
//   [IN:PLAY_MUSIC Play my [SL:PLAYLIST_NAME running ] [SL:MUSIC_TYPE playlist ] ]
//
// Labels are stored without their IN:/SL: prefix.

#include "nlufix/error.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nlufix {

enum class FrameErrorKind {
    EmptyInput,
    UnbalancedBrackets,
    UnknownPrefix,
    InvalidLabel,
    LiteralBracket,
    EmptySlot,
    SlotAtRoot,
    MissingRootIntent,
    InvalidNesting,
    MaxDepthExceeded,
    TrailingTokens,
    TokenSequenceMismatch,
    UnknownLabel,
};

const char* to_string(FrameErrorKind kind);

class FrameError : public ValidationError {
public:
    FrameError(FrameErrorKind kind, const std::string& message)
        : ValidationError(to_string(kind), message), kind_(kind) {}
    FrameErrorKind kind() const noexcept { return kind_; }

private:
    FrameErrorKind kind_;
};

enum class NodeKind { Token, Slot, Intent };

// Intents hold tokens and slots; slots hold tokens and nested intents.
struct FrameNode {
    NodeKind kind = NodeKind::Token;
    std::string value; // token text, or label for slots and intents
    std::vector<FrameNode> children;

    static FrameNode token(std::string text);
    static FrameNode slot(std::string label, std::vector<FrameNode> children);
    static FrameNode intent(std::string label, std::vector<FrameNode> children);

    bool is_token() const noexcept { return kind == NodeKind::Token; }
    bool operator==(const FrameNode&) const = default;
};

struct SemanticFrame {
    std::string intent;
    std::vector<FrameNode> children;

    bool operator==(const SemanticFrame&) const = default;

    std::vector<std::string> tokens() const;
    std::string utterance() const;
};

struct ParseOptions {
    // Maximum intent nesting depth; the root intent is depth 1.
    int max_depth = 8;
};

SemanticFrame parse_frame(std::string_view text, const ParseOptions& options = {});
std::string serialize_frame(const SemanticFrame& frame);

// Throws FrameError if the frame violates a structural invariant (empty slot,
// bad label, misplaced node, bracket characters inside a token).
void check_frame(const SemanticFrame& frame, const ParseOptions& options = {});

bool is_valid_label(std::string_view label);

// Token count of a node subtree.
std::size_t token_count(const FrameNode& node);

// Visits every slot node depth-first in document order as visit(node, index).
// Works on const and mutable node lists alike.
template <typename Nodes, typename F>
void visit_slots(Nodes& nodes, F&& visit) {
    std::size_t index = 0;
    auto walk = [&](auto& self, auto& list) -> void {
        for (auto& n : list) {
            if (n.kind == NodeKind::Slot) visit(n, index++);
            if (!n.is_token()) self(self, n.children);
        }
    };
    walk(walk, nodes);
}

// Same structure with tokens replaced positionally. Throws
// FrameError(TokenSequenceMismatch) when the counts differ.
SemanticFrame with_tokens(const SemanticFrame& frame, const std::vector<std::string>& tokens);

// Structural equality with ASCII case folded on tokens.
bool same_annotation(const SemanticFrame& a, const SemanticFrame& b);

struct SlotSpec {
    std::optional<std::string> gazetteer;
    bool templatable = false;
};

// Intent -> domain registry plus slot registry.
class Ontology {
public:
    int version = 1;

    void add_intent(const std::string& intent, const std::string& domain);
    void add_slot(const std::string& slot, SlotSpec spec = {});

    bool has_intent(std::string_view intent) const;
    bool has_slot(std::string_view slot) const;

    const std::string& domain_of(std::string_view intent) const;
    const SlotSpec& slot(std::string_view slot) const;

    // Templatable slots are gazetteer-backed; returns that gazetteer id.
    std::optional<std::string> template_gazetteer(std::string_view slot) const;

    // Throws FrameError(UnknownLabel) for any label not registered.
    void validate(const SemanticFrame& frame) const;

    const std::map<std::string, std::string, std::less<>>& domains() const { return domains_; }
    const std::map<std::string, SlotSpec, std::less<>>& slots() const { return slots_; }

private:
    std::map<std::string, std::string, std::less<>> domains_;
    std::map<std::string, SlotSpec, std::less<>> slots_;
};

struct TrainingExample {
    std::string utterance;
    SemanticFrame frame;
    int weight = 1;

    bool operator==(const TrainingExample&) const = default;
};

// Builds an example whose utterance is the frame's token sequence.
TrainingExample make_example(SemanticFrame frame, int weight = 1);

// Throws FrameError(TokenSequenceMismatch) unless the utterance tokens equal
// the frame tokens.
void check_example(const TrainingExample& example);

// --- diffing -----------------------------------------------------------

// Ordered by severity; lower value wins.
enum class DiffVerdict {
    Match = 0,
    DomainMismatch = 1,
    IntentMismatch = 2,
    MissingSlot = 3,
    ExtraSlot = 4,
    SpanMismatch = 5,
};

const char* to_string(DiffVerdict verdict);
DiffVerdict verdict_from_string(std::string_view name);

// Half-open token range [begin, end) over the utterance.
struct TokenSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
    bool operator==(const TokenSpan&) const = default;
    auto operator<=>(const TokenSpan&) const = default;
};

struct DiffFinding {
    DiffVerdict kind = DiffVerdict::Match;
    std::string label;           // expected-side label (slot or intent)
    std::string predicted_label; // predicted-side label when it differs
    std::optional<TokenSpan> expected_span;
    std::optional<TokenSpan> predicted_span;
    std::string path; // enclosing labels, e.g. "IN:GET_EVENT/SL:LOCATION"

    bool operator==(const DiffFinding&) const = default;
};

struct FrameDiff {
    DiffVerdict verdict = DiffVerdict::Match;
    std::vector<DiffFinding> details;
};

FrameDiff diff_frames(const SemanticFrame& expected, const SemanticFrame& predicted, const Ontology& ontology);
bool is_bug(const SemanticFrame& expected, const SemanticFrame& predicted, const Ontology& ontology);

} // namespace nlufix
