#include "nlufix/frames.hpp"

#include "nlufix/text.hpp"

#include <algorithm>
#include <map>

namespace nlufix {

const char* to_string(FrameErrorKind kind) {
    switch (kind) {
    case FrameErrorKind::EmptyInput: return "EmptyInput";
    case FrameErrorKind::UnbalancedBrackets: return "UnbalancedBrackets";
    case FrameErrorKind::UnknownPrefix: return "UnknownPrefix";
    case FrameErrorKind::InvalidLabel: return "InvalidLabel";
    case FrameErrorKind::LiteralBracket: return "LiteralBracket";
    case FrameErrorKind::EmptySlot: return "EmptySlot";
    case FrameErrorKind::SlotAtRoot: return "SlotAtRoot";
    case FrameErrorKind::MissingRootIntent: return "MissingRootIntent";
    case FrameErrorKind::InvalidNesting: return "InvalidNesting";
    case FrameErrorKind::MaxDepthExceeded: return "MaxDepthExceeded";
    case FrameErrorKind::TrailingTokens: return "TrailingTokens";
    case FrameErrorKind::TokenSequenceMismatch: return "TokenSequenceMismatch";
    case FrameErrorKind::UnknownLabel: return "UnknownLabel";
    }
    return "FrameError";
}

FrameNode FrameNode::token(std::string text) {
    return FrameNode{NodeKind::Token, std::move(text), {}};
}

FrameNode FrameNode::slot(std::string label, std::vector<FrameNode> children) {
    return FrameNode{NodeKind::Slot, std::move(label), std::move(children)};
}

FrameNode FrameNode::intent(std::string label, std::vector<FrameNode> children) {
    return FrameNode{NodeKind::Intent, std::move(label), std::move(children)};
}

namespace {

void collect_tokens(const std::vector<FrameNode>& nodes, std::vector<std::string>& out) {
    for (const auto& n : nodes) {
        if (n.is_token()) {
            out.push_back(n.value);
        } else {
            collect_tokens(n.children, out);
        }
    }
}

} // namespace

std::vector<std::string> SemanticFrame::tokens() const {
    std::vector<std::string> out;
    collect_tokens(children, out);
    return out;
}

std::string SemanticFrame::utterance() const { return join_tokens(tokens()); }

std::size_t token_count(const FrameNode& node) {
    if (node.is_token()) return 1;
    std::size_t n = 0;
    for (const auto& c : node.children) n += token_count(c);
    return n;
}

namespace {
void replace_tokens(std::vector<FrameNode>& nodes, const std::vector<std::string>& tokens, std::size_t& pos) {
    for (auto& n : nodes) {
        if (n.is_token()) {
            n.value = tokens[pos++];
        } else {
            replace_tokens(n.children, tokens, pos);
        }
    }
}
} // namespace

SemanticFrame with_tokens(const SemanticFrame& frame, const std::vector<std::string>& tokens) {
    SemanticFrame out = frame;
    std::size_t count = 0;
    for (const auto& c : out.children) count += token_count(c);
    if (count != tokens.size()) {
        throw FrameError(FrameErrorKind::TokenSequenceMismatch, "token count mismatch when projecting frame");
    }
    std::size_t pos = 0;
    replace_tokens(out.children, tokens, pos);
    return out;
}

bool same_annotation(const SemanticFrame& a, const SemanticFrame& b) {
    auto ta = a.tokens();
    const auto tb = b.tokens();
    if (ta.size() != tb.size()) return false;
    for (std::size_t i = 0; i < ta.size(); ++i) {
        if (to_lower_ascii(ta[i]) != to_lower_ascii(tb[i])) return false;
    }
    return with_tokens(b, ta) == a;
}

bool is_valid_label(std::string_view label) {
    if (label.empty() || label[0] < 'A' || label[0] > 'Z') return false;
    return std::all_of(label.begin(), label.end(), [](char c) {
        return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
    });
}

// --- parsing -----------------------------------------------------------

namespace {

enum class LexKind { OpenIntent, OpenSlot, Close, Word };

struct Lexeme {
    LexKind kind;
    std::string text;
};

[[noreturn]] void fail(FrameErrorKind kind, const std::string& message) { throw FrameError(kind, message); }

bool has_bracket(std::string_view s) { return s.find_first_of("[]") != std::string_view::npos; }

Lexeme lex_label(std::string_view raw) {
    const std::string upper = to_upper_ascii(raw);
    LexKind kind;
    if (upper.rfind("IN:", 0) == 0) {
        kind = LexKind::OpenIntent;
    } else if (upper.rfind("SL:", 0) == 0) {
        kind = LexKind::OpenSlot;
    } else {
        fail(FrameErrorKind::UnknownPrefix, "label '" + std::string(raw) + "' lacks an IN: or SL: prefix");
    }
    std::string label = upper.substr(3);
    if (has_bracket(label)) fail(FrameErrorKind::LiteralBracket, "bracket inside label '" + std::string(raw) + "'");
    if (!is_valid_label(label)) fail(FrameErrorKind::InvalidLabel, "invalid label '" + std::string(raw) + "'");
    return {kind, std::move(label)};
}

std::vector<Lexeme> lex(std::string_view text) {
    const auto raw = split_whitespace(text);
    std::vector<Lexeme> out;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        std::string_view tok = raw[i];
        std::size_t closes = 0;
        if (tok[0] == '[') {
            std::string_view label = tok.substr(1);
            if (label.empty()) {
                if (i + 1 >= raw.size()) fail(FrameErrorKind::UnbalancedBrackets, "'[' at end of input");
                label = raw[++i];
            }
            while (!label.empty() && label.back() == ']') {
                label.remove_suffix(1);
                ++closes;
            }
            out.push_back(lex_label(label));
        } else {
            while (!tok.empty() && tok.back() == ']') {
                tok.remove_suffix(1);
                ++closes;
            }
            if (!tok.empty()) {
                if (has_bracket(tok)) fail(FrameErrorKind::LiteralBracket, "bracket inside token '" + raw[i] + "'");
                out.push_back({LexKind::Word, std::string(tok)});
            }
        }
        for (std::size_t c = 0; c < closes; ++c) out.push_back({LexKind::Close, {}});
    }
    return out;
}

class Parser {
public:
    Parser(std::vector<Lexeme> lexemes, const ParseOptions& options)
        : lex_(std::move(lexemes)), options_(options) {}

    SemanticFrame parse_root() {
        if (lex_.empty()) fail(FrameErrorKind::EmptyInput, "empty frame string");
        const Lexeme& first = lex_[0];
        if (first.kind == LexKind::OpenSlot) fail(FrameErrorKind::SlotAtRoot, "top node must be an intent, got SL:" + first.text);
        if (first.kind != LexKind::OpenIntent) fail(FrameErrorKind::MissingRootIntent, "frame must start with [IN:");
        pos_ = 1;
        SemanticFrame frame;
        frame.intent = first.text;
        frame.children = intent_body(1);
        if (pos_ < lex_.size()) {
            if (lex_[pos_].kind == LexKind::Close) fail(FrameErrorKind::UnbalancedBrackets, "unmatched ']'");
            fail(FrameErrorKind::TrailingTokens, "tokens after the root intent closes");
        }
        return frame;
    }

private:
    // Consumes through the matching Close.
    std::vector<FrameNode> intent_body(int depth) {
        std::vector<FrameNode> children;
        while (true) {
            if (pos_ >= lex_.size()) fail(FrameErrorKind::UnbalancedBrackets, "missing ']'");
            Lexeme& l = lex_[pos_++];
            switch (l.kind) {
            case LexKind::Word: children.push_back(FrameNode::token(std::move(l.text))); break;
            case LexKind::OpenSlot: {
                std::string label = std::move(l.text);
                auto body = slot_body(depth, label);
                children.push_back(FrameNode::slot(std::move(label), std::move(body)));
                break;
            }
            case LexKind::OpenIntent: fail(FrameErrorKind::InvalidNesting, "intent IN:" + l.text + " directly inside an intent");
            case LexKind::Close: return children;
            }
        }
    }

    std::vector<FrameNode> slot_body(int depth, const std::string& label) {
        std::vector<FrameNode> children;
        std::size_t tokens = 0;
        while (true) {
            if (pos_ >= lex_.size()) fail(FrameErrorKind::UnbalancedBrackets, "missing ']'");
            Lexeme& l = lex_[pos_++];
            switch (l.kind) {
            case LexKind::Word:
                children.push_back(FrameNode::token(std::move(l.text)));
                ++tokens;
                break;
            case LexKind::OpenIntent: {
                if (depth + 1 > options_.max_depth) fail(FrameErrorKind::MaxDepthExceeded, "intent nesting deeper than " + std::to_string(options_.max_depth));
                std::string inner = std::move(l.text);
                auto body = intent_body(depth + 1);
                auto node = FrameNode::intent(std::move(inner), std::move(body));
                tokens += token_count(node);
                children.push_back(std::move(node));
                break;
            }
            case LexKind::OpenSlot: fail(FrameErrorKind::InvalidNesting, "slot SL:" + l.text + " directly inside slot SL:" + label);
            case LexKind::Close:
                if (tokens == 0) fail(FrameErrorKind::EmptySlot, "slot SL:" + label + " has no tokens");
                return children;
            }
        }
    }

    std::vector<Lexeme> lex_;
    ParseOptions options_;
    std::size_t pos_ = 0;
};

void serialize_children(const std::vector<FrameNode>& nodes, std::string& out) {
    for (const auto& n : nodes) {
        out += ' ';
        switch (n.kind) {
        case NodeKind::Token: out += n.value; break;
        case NodeKind::Slot:
            out += "[SL:" + n.value;
            serialize_children(n.children, out);
            out += " ]";
            break;
        case NodeKind::Intent:
            out += "[IN:" + n.value;
            serialize_children(n.children, out);
            out += " ]";
            break;
        }
    }
}

void check_label(const std::string& label, const char* prefix) {
    if (!is_valid_label(label)) fail(FrameErrorKind::InvalidLabel, std::string("invalid label '") + prefix + label + "'");
}

void check_intent_children(const std::vector<FrameNode>& nodes, int depth, const ParseOptions& options);

void check_slot(const FrameNode& slot, int depth, const ParseOptions& options) {
    check_label(slot.value, "SL:");
    for (const auto& c : slot.children) {
        if (c.kind == NodeKind::Slot) fail(FrameErrorKind::InvalidNesting, "slot SL:" + c.value + " directly inside slot SL:" + slot.value);
        if (c.kind == NodeKind::Intent) {
            if (depth + 1 > options.max_depth) fail(FrameErrorKind::MaxDepthExceeded, "intent nesting too deep");
            check_label(c.value, "IN:");
            check_intent_children(c.children, depth + 1, options);
        } else if (c.value.empty() || has_bracket(c.value) || split_whitespace(c.value).size() != 1) {
            fail(FrameErrorKind::LiteralBracket, "invalid token '" + c.value + "'");
        }
    }
    if (token_count(slot) == 0) fail(FrameErrorKind::EmptySlot, "slot SL:" + slot.value + " has no tokens");
}

void check_intent_children(const std::vector<FrameNode>& nodes, int depth, const ParseOptions& options) {
    for (const auto& c : nodes) {
        switch (c.kind) {
        case NodeKind::Token:
            if (c.value.empty() || has_bracket(c.value) || split_whitespace(c.value).size() != 1) {
                fail(FrameErrorKind::LiteralBracket, "invalid token '" + c.value + "'");
            }
            break;
        case NodeKind::Slot: check_slot(c, depth, options); break;
        case NodeKind::Intent: fail(FrameErrorKind::InvalidNesting, "intent IN:" + c.value + " directly inside an intent");
        }
    }
}

} // namespace

SemanticFrame parse_frame(std::string_view text, const ParseOptions& options) {
    return Parser(lex(text), options).parse_root();
}

std::string serialize_frame(const SemanticFrame& frame) {
    std::string out = "[IN:" + frame.intent;
    serialize_children(frame.children, out);
    out += " ]";
    return out;
}

void check_frame(const SemanticFrame& frame, const ParseOptions& options) {
    check_label(frame.intent, "IN:");
    check_intent_children(frame.children, 1, options);
}

// --- ontology ----------------------------------------------------------

void Ontology::add_intent(const std::string& intent, const std::string& domain) {
    if (!is_valid_label(intent)) throw FrameError(FrameErrorKind::InvalidLabel, "invalid intent label '" + intent + "'");
    domains_[intent] = domain;
}

void Ontology::add_slot(const std::string& slot, SlotSpec spec) {
    if (!is_valid_label(slot)) throw FrameError(FrameErrorKind::InvalidLabel, "invalid slot label '" + slot + "'");
    if (spec.templatable && !spec.gazetteer) spec.gazetteer = slot;
    slots_[slot] = std::move(spec);
}

bool Ontology::has_intent(std::string_view intent) const { return domains_.find(intent) != domains_.end(); }

bool Ontology::has_slot(std::string_view slot) const { return slots_.find(slot) != slots_.end(); }

const std::string& Ontology::domain_of(std::string_view intent) const {
    auto it = domains_.find(intent);
    if (it == domains_.end()) throw FrameError(FrameErrorKind::UnknownLabel, "unknown intent IN:" + std::string(intent));
    return it->second;
}

const SlotSpec& Ontology::slot(std::string_view slot) const {
    auto it = slots_.find(slot);
    if (it == slots_.end()) throw FrameError(FrameErrorKind::UnknownLabel, "unknown slot SL:" + std::string(slot));
    return it->second;
}

std::optional<std::string> Ontology::template_gazetteer(std::string_view slot) const {
    auto it = slots_.find(slot);
    if (it == slots_.end() || !it->second.templatable) return std::nullopt;
    return it->second.gazetteer;
}

namespace {
void validate_nodes(const Ontology& ont, const std::vector<FrameNode>& nodes) {
    for (const auto& n : nodes) {
        if (n.kind == NodeKind::Slot) {
            ont.slot(n.value);
        } else if (n.kind == NodeKind::Intent) {
            ont.domain_of(n.value);
        }
        validate_nodes(ont, n.children);
    }
}
} // namespace

void Ontology::validate(const SemanticFrame& frame) const {
    domain_of(frame.intent);
    validate_nodes(*this, frame.children);
}

TrainingExample make_example(SemanticFrame frame, int weight) {
    TrainingExample ex;
    ex.utterance = frame.utterance();
    ex.frame = std::move(frame);
    ex.weight = weight;
    return ex;
}

void check_example(const TrainingExample& example) {
    if (split_whitespace(example.utterance) != example.frame.tokens()) {
        throw FrameError(FrameErrorKind::TokenSequenceMismatch,
                         "utterance '" + example.utterance + "' does not match frame tokens");
    }
    if (example.weight < 1) throw ValidationError("InvalidWeight", "example weight must be >= 1");
}

// --- diffing -----------------------------------------------------------

const char* to_string(DiffVerdict verdict) {
    switch (verdict) {
    case DiffVerdict::Match: return "Match";
    case DiffVerdict::DomainMismatch: return "DomainMismatch";
    case DiffVerdict::IntentMismatch: return "IntentMismatch";
    case DiffVerdict::MissingSlot: return "MissingSlot";
    case DiffVerdict::ExtraSlot: return "ExtraSlot";
    case DiffVerdict::SpanMismatch: return "SpanMismatch";
    }
    return "Match";
}

DiffVerdict verdict_from_string(std::string_view name) {
    for (auto v : {DiffVerdict::Match, DiffVerdict::DomainMismatch, DiffVerdict::IntentMismatch,
                   DiffVerdict::MissingSlot, DiffVerdict::ExtraSlot, DiffVerdict::SpanMismatch}) {
        if (name == to_string(v)) return v;
    }
    throw ValidationError("UnknownVerdict", "unknown diff verdict '" + std::string(name) + "'");
}

namespace {

struct Located {
    const FrameNode* node;
    TokenSpan span;
};

// Non-token children of a node list with their token spans.
std::vector<Located> locate(const std::vector<FrameNode>& children, std::size_t offset) {
    std::vector<Located> out;
    for (const auto& c : children) {
        const std::size_t n = token_count(c);
        if (!c.is_token()) out.push_back({&c, {offset, offset + n}});
        offset += n;
    }
    return out;
}

class Differ {
public:
    std::vector<DiffFinding> findings;

    // Same-level slots compared as a multiset keyed by (label, span).
    void intent_level(const std::vector<FrameNode>& exp, const std::vector<FrameNode>& pred, std::size_t offset,
                      const std::string& path) {
        auto es = locate(exp, offset);
        auto ps = locate(pred, offset);
        std::vector<bool> e_used(es.size()), p_used(ps.size());
        for (std::size_t i = 0; i < es.size(); ++i) {
            for (std::size_t j = 0; j < ps.size(); ++j) {
                if (p_used[j] || ps[j].node->value != es[i].node->value || ps[j].span != es[i].span) continue;
                e_used[i] = p_used[j] = true;
                slot_level(*es[i].node, *ps[j].node, es[i].span.begin, path + "/SL:" + es[i].node->value);
                break;
            }
        }
        // Leftovers: same label with a different span pairs up in document order.
        for (std::size_t i = 0; i < es.size(); ++i) {
            if (e_used[i]) continue;
            DiffFinding f;
            f.label = es[i].node->value;
            f.expected_span = es[i].span;
            f.path = path;
            for (std::size_t j = 0; j < ps.size(); ++j) {
                if (!p_used[j] && ps[j].node->value == es[i].node->value) {
                    p_used[j] = true;
                    f.predicted_span = ps[j].span;
                    break;
                }
            }
            f.kind = f.predicted_span ? DiffVerdict::SpanMismatch : DiffVerdict::MissingSlot;
            findings.push_back(std::move(f));
        }
        for (std::size_t j = 0; j < ps.size(); ++j) {
            if (p_used[j]) continue;
            DiffFinding f;
            f.kind = DiffVerdict::ExtraSlot;
            f.label = ps[j].node->value;
            f.predicted_span = ps[j].span;
            f.path = path;
            findings.push_back(std::move(f));
        }
    }

    // Nested intents inside a matched slot pair.
    void slot_level(const FrameNode& exp, const FrameNode& pred, std::size_t offset, const std::string& path) {
        auto es = locate(exp.children, offset);
        auto ps = locate(pred.children, offset);
        std::vector<bool> e_used(es.size()), p_used(ps.size());
        for (std::size_t i = 0; i < es.size(); ++i) {
            for (std::size_t j = 0; j < ps.size(); ++j) {
                if (p_used[j] || ps[j].node->value != es[i].node->value || ps[j].span != es[i].span) continue;
                e_used[i] = p_used[j] = true;
                intent_level(es[i].node->children, ps[j].node->children, es[i].span.begin,
                             path + "/IN:" + es[i].node->value);
                break;
            }
        }
        for (std::size_t i = 0; i < es.size(); ++i) {
            if (e_used[i]) continue;
            DiffFinding f;
            f.kind = DiffVerdict::IntentMismatch;
            f.label = es[i].node->value;
            f.expected_span = es[i].span;
            f.path = path;
            for (std::size_t j = 0; j < ps.size(); ++j) {
                if (!p_used[j] && ps[j].span == es[i].span) {
                    p_used[j] = true;
                    f.predicted_label = ps[j].node->value;
                    f.predicted_span = ps[j].span;
                    break;
                }
            }
            findings.push_back(std::move(f));
        }
        for (std::size_t j = 0; j < ps.size(); ++j) {
            if (p_used[j]) continue;
            DiffFinding f;
            f.kind = DiffVerdict::IntentMismatch;
            f.predicted_label = ps[j].node->value;
            f.predicted_span = ps[j].span;
            f.path = path;
            findings.push_back(std::move(f));
        }
    }
};

} // namespace

FrameDiff diff_frames(const SemanticFrame& expected, const SemanticFrame& predicted, const Ontology& ontology) {
    const auto tokens = expected.tokens();
    if (tokens != predicted.tokens()) {
        throw FrameError(FrameErrorKind::TokenSequenceMismatch, "expected and predicted frames cover different tokens");
    }
    ontology.validate(expected);
    ontology.validate(predicted);

    FrameDiff diff;
    if (expected == predicted) return diff;

    Differ differ;
    const TokenSpan whole{0, tokens.size()};
    if (expected.intent != predicted.intent) {
        DiffFinding f;
        f.kind = ontology.domain_of(expected.intent) != ontology.domain_of(predicted.intent) ? DiffVerdict::DomainMismatch
                                                                                            : DiffVerdict::IntentMismatch;
        f.label = expected.intent;
        f.predicted_label = predicted.intent;
        f.expected_span = whole;
        f.predicted_span = whole;
        differ.findings.push_back(std::move(f));
    }
    differ.intent_level(expected.children, predicted.children, 0, "IN:" + expected.intent);

    diff.details = std::move(differ.findings);
    diff.verdict = diff.details.front().kind;
    for (const auto& f : diff.details) {
        if (static_cast<int>(f.kind) < static_cast<int>(diff.verdict)) diff.verdict = f.kind;
    }
    return diff;
}

bool is_bug(const SemanticFrame& expected, const SemanticFrame& predicted, const Ontology& ontology) {
    return diff_frames(expected, predicted, ontology).verdict != DiffVerdict::Match;
}

} // namespace nlufix
