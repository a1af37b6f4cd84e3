#include "nlufix/correction.hpp"

#include "nlufix/random.hpp"
#include "nlufix/text.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <set>
#include <unordered_set>

namespace nlufix {

// --- gazetteers --------------------------------------------------------

void Gazetteers::set(const std::string& id, const std::vector<std::string>& values) {
    if (values.empty()) throw ValidationError("EmptyGazetteer", "gazetteer '" + id + "' has no values");
    std::vector<std::vector<std::string>> parsed;
    std::set<std::vector<std::string>> seen;
    for (const auto& v : values) {
        auto tokens = split_whitespace(v);
        if (tokens.empty()) throw ValidationError("EmptyGazetteerValue", "gazetteer '" + id + "' has an empty value");
        for (const auto& t : tokens) {
            if (t.find_first_of("[]") != std::string::npos) {
                throw ValidationError("LiteralBracket", "gazetteer '" + id + "' value '" + v + "' contains a bracket");
            }
        }
        if (seen.insert(tokens).second) parsed.push_back(std::move(tokens));
    }
    values_[id] = std::move(parsed);
}

const std::vector<std::vector<std::string>>& Gazetteers::values(std::string_view id) const {
    auto it = values_.find(id);
    if (it == values_.end()) throw ValidationError("MissingGazetteer", "no gazetteer '" + std::string(id) + "'");
    return it->second;
}

// --- slot walking ------------------------------------------------------

namespace {

bool is_leaf_slot(const FrameNode& slot) {
    return std::all_of(slot.children.begin(), slot.children.end(), [](const FrameNode& c) { return c.is_token(); });
}

void emit_pieces(const std::vector<FrameNode>& nodes, const std::set<std::size_t>& bound, std::size_t& index,
                 std::vector<TemplatePiece>& out) {
    for (const auto& n : nodes) {
        if (n.is_token()) {
            out.push_back({n.value, std::nullopt});
            continue;
        }
        if (n.kind == NodeKind::Slot) {
            const std::size_t mine = index++;
            if (bound.count(mine)) {
                out.push_back({{}, n.value});
                // A leaf slot holds no nested slots, so no indices are skipped.
                continue;
            }
        }
        emit_pieces(n.children, bound, index, out);
    }
}

} // namespace

std::vector<std::size_t> templatable_slot_positions(const SemanticFrame& frame, const Ontology& ontology) {
    std::vector<std::size_t> out;
    visit_slots(frame.children, [&](const FrameNode& slot, std::size_t i) {
        if (is_leaf_slot(slot) && ontology.template_gazetteer(slot.value)) out.push_back(i);
    });
    return out;
}

std::string Template::text() const {
    std::vector<std::string> parts;
    parts.reserve(pattern.size());
    for (const auto& p : pattern) parts.push_back(p.slot ? "<SL:" + *p.slot + ">" : p.literal);
    return join_tokens(parts);
}

std::vector<Template> extract_templates(const Bug& bug, const Ontology& ontology, std::size_t max_templates) {
    if (!bug.golden) throw ValidationError("MissingGolden", "bug " + bug.id + " has no golden frame");
    const SemanticFrame& golden = *bug.golden;
    const auto positions = templatable_slot_positions(golden, ontology);
    std::vector<std::string> labels;
    visit_slots(golden.children, [&](const FrameNode& slot, std::size_t) { labels.push_back(slot.value); });

    std::vector<Template> out;
    const std::size_t m = positions.size();
    for (std::size_t size = 1; size <= m && out.size() < max_templates; ++size) {
        // Lexicographic combinations of `size` out of m.
        std::vector<std::size_t> pick(size);
        std::iota(pick.begin(), pick.end(), 0);
        while (out.size() < max_templates) {
            Template tpl;
            tpl.source_bug_id = bug.id;
            tpl.golden = golden;
            std::set<std::size_t> bound;
            for (std::size_t p : pick) {
                const std::size_t slot_index = positions[p];
                bound.insert(slot_index);
                tpl.bound_positions.push_back(slot_index);
                tpl.bound_slots.push_back(labels[slot_index]);
                tpl.bound_gazetteers.push_back(*ontology.template_gazetteer(labels[slot_index]));
            }
            std::size_t index = 0;
            emit_pieces(golden.children, bound, index, tpl.pattern);
            out.push_back(std::move(tpl));

            // Advance to the next combination.
            std::size_t i = size;
            while (i > 0 && pick[i - 1] == m - size + (i - 1)) --i;
            if (i == 0) break;
            ++pick[i - 1];
            for (std::size_t j = i; j < size; ++j) pick[j] = pick[j - 1] + 1;
        }
    }
    return out;
}

std::vector<TrainingExample> expand_template(const Template& tpl, const Gazetteers& gazetteers,
                                             std::size_t max_expansions, std::uint64_t seed) {
    std::vector<const std::vector<std::vector<std::string>>*> choices;
    for (const auto& id : tpl.bound_gazetteers) choices.push_back(&gazetteers.values(id));
    std::vector<TrainingExample> out;
    if (max_expansions == 0 || choices.empty()) return out;

    std::size_t total = 1;
    for (const auto* c : choices) {
        total = total > std::numeric_limits<std::size_t>::max() / c->size() ? std::numeric_limits<std::size_t>::max()
                                                                            : total * c->size();
    }

    const std::string source = normalize_text(tpl.golden.utterance(), Normalization::FoldCaseAndWhitespace);
    std::unordered_set<std::string> seen{source};

    auto emit = [&](const std::vector<std::size_t>& combo) {
        SemanticFrame frame = tpl.golden;
        visit_slots(frame.children, [&](FrameNode& slot, std::size_t i) {
            auto pos = std::find(tpl.bound_positions.begin(), tpl.bound_positions.end(), i);
            if (pos == tpl.bound_positions.end()) return;
            const std::size_t j = static_cast<std::size_t>(pos - tpl.bound_positions.begin());
            slot.children.clear();
            for (const auto& t : (*choices[j])[combo[j]]) slot.children.push_back(FrameNode::token(t));
        });
        TrainingExample ex = make_example(std::move(frame), 1);
        if (seen.insert(normalize_text(ex.utterance, Normalization::FoldCaseAndWhitespace)).second) {
            out.push_back(std::move(ex));
        }
    };

    Rng rng(seed);
    constexpr std::size_t kEnumerateLimit = 4096;
    if (total <= kEnumerateLimit) {
        std::vector<std::size_t> order(total);
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);
        std::vector<std::size_t> combo(choices.size());
        for (std::size_t code : order) {
            if (out.size() >= max_expansions) break;
            for (std::size_t j = 0; j < choices.size(); ++j) {
                combo[j] = code % choices[j]->size();
                code /= choices[j]->size();
            }
            emit(combo);
        }
    } else {
        std::set<std::vector<std::size_t>> tried;
        const std::size_t attempts = max_expansions * 50;
        std::vector<std::size_t> combo(choices.size());
        for (std::size_t a = 0; a < attempts && out.size() < max_expansions; ++a) {
            for (std::size_t j = 0; j < choices.size(); ++j) combo[j] = rng.below(choices[j]->size());
            if (tried.insert(combo).second) emit(combo);
        }
    }
    return out;
}

// --- proposals ---------------------------------------------------------

const char* to_string(ProposalStrategy strategy) {
    return strategy == ProposalStrategy::ExactMatch ? "ExactMatch" : "Templated";
}

ProposalStrategy proposal_strategy_from_string(std::string_view name) {
    if (name == "ExactMatch" || name == "exact") return ProposalStrategy::ExactMatch;
    if (name == "Templated" || name == "templated") return ProposalStrategy::Templated;
    throw ValidationError("UnknownStrategy", "unknown proposal strategy '" + std::string(name) + "'");
}

const char* to_string(ReviewStatus status) {
    switch (status) {
    case ReviewStatus::Pending: return "Pending";
    case ReviewStatus::Accepted: return "Accepted";
    case ReviewStatus::Rejected: return "Rejected";
    }
    return "Pending";
}

ReviewStatus review_status_from_string(std::string_view name) {
    for (auto s : {ReviewStatus::Pending, ReviewStatus::Accepted, ReviewStatus::Rejected}) {
        if (name == to_string(s)) return s;
    }
    throw ValidationError("UnknownReviewStatus", "unknown review status '" + std::string(name) + "'");
}

std::string proposal_id(const std::string& bug_id, ProposalStrategy strategy) {
    return "prop-" + bug_id + (strategy == ProposalStrategy::ExactMatch ? "-exact" : "-templated");
}

AugmentationProposal exact_match_proposal(const Bug& bug) {
    if (!bug.golden) throw ValidationError("MissingGolden", "bug " + bug.id + " has no golden frame");
    AugmentationProposal p;
    p.id = proposal_id(bug.id, ProposalStrategy::ExactMatch);
    p.source_bug_id = bug.id;
    p.strategy = ProposalStrategy::ExactMatch;
    p.examples.push_back({bug.utterance, with_tokens(*bug.golden, split_whitespace(bug.utterance)), kExactMatchWeight});
    return p;
}

AugmentationProposal templated_proposal(const Bug& bug, const Ontology& ontology, const Gazetteers& gazetteers,
                                        const TemplatedOptions& options, const TrainingIndex* existing) {
    AugmentationProposal p;
    p.id = proposal_id(bug.id, ProposalStrategy::Templated);
    p.source_bug_id = bug.id;
    p.strategy = ProposalStrategy::Templated;
    std::unordered_set<std::string> seen;
    const auto templates = extract_templates(bug, ontology, options.max_templates);
    for (std::size_t t = 0; t < templates.size(); ++t) {
        const auto seed = derive_seed(options.seed, fnv1a64(bug.id) ^ t);
        for (auto& ex : expand_template(templates[t], gazetteers, options.max_expansions, seed)) {
            if (existing && existing->contains(ex.utterance)) continue;
            if (!seen.insert(normalize_text(ex.utterance, Normalization::FoldCaseAndWhitespace)).second) continue;
            p.examples.push_back(std::move(ex));
        }
    }
    return p;
}

// --- rules -------------------------------------------------------------

std::string rule_id_for(std::string_view utterance) {
    return "rule-" + hex64(fnv1a64(normalize_text(utterance, Normalization::FoldCaseAndWhitespace)));
}

Rule generate_rule(const std::string& utterance, const SemanticFrame& golden) {
    if (split_whitespace(utterance) != golden.tokens()) {
        throw FrameError(FrameErrorKind::TokenSequenceMismatch, "golden frame does not cover '" + utterance + "'");
    }
    return {rule_id_for(utterance), utterance, golden};
}

// --- transforms --------------------------------------------------------

const char* to_string(TransformOp op) {
    switch (op) {
    case TransformOp::RenameIntent: return "RenameIntent";
    case TransformOp::RenameSlot: return "RenameSlot";
    case TransformOp::AddSlotWrap: return "AddSlotWrap";
    }
    return "RenameSlot";
}

TransformOp transform_op_from_string(std::string_view name) {
    for (auto op : {TransformOp::RenameIntent, TransformOp::RenameSlot, TransformOp::AddSlotWrap}) {
        if (name == to_string(op)) return op;
    }
    throw ValidationError("UnknownTransform", "unknown transform op '" + std::string(name) + "'");
}

namespace {

std::string strip_prefix(std::string label) {
    const std::string upper = to_upper_ascii(label);
    if (upper.rfind("IN:", 0) == 0 || upper.rfind("SL:", 0) == 0) return upper.substr(3);
    return upper;
}

bool rename_nodes(std::vector<FrameNode>& nodes, NodeKind kind, const std::string& from, const std::string& to) {
    bool changed = false;
    for (auto& n : nodes) {
        if (n.kind == kind && n.value == from) {
            n.value = to;
            changed = true;
        }
        if (!n.is_token()) changed = rename_nodes(n.children, kind, from, to) || changed;
    }
    return changed;
}

// Wraps the first direct token run equal to `span` in an intent's children.
bool wrap_in(std::vector<FrameNode>& children, const std::vector<std::string>& span, const std::string& slot) {
    for (std::size_t i = 0; i + span.size() <= children.size(); ++i) {
        bool hit = true;
        for (std::size_t j = 0; j < span.size() && hit; ++j) {
            const auto& c = children[i + j];
            hit = c.is_token() && to_lower_ascii(c.value) == span[j];
        }
        if (!hit) continue;
        std::vector<FrameNode> inner(std::make_move_iterator(children.begin() + static_cast<std::ptrdiff_t>(i)),
                                     std::make_move_iterator(children.begin() + static_cast<std::ptrdiff_t>(i + span.size())));
        children.erase(children.begin() + static_cast<std::ptrdiff_t>(i),
                       children.begin() + static_cast<std::ptrdiff_t>(i + span.size()));
        children.insert(children.begin() + static_cast<std::ptrdiff_t>(i), FrameNode::slot(slot, std::move(inner)));
        return true;
    }
    return false;
}

bool wrap_nested(std::vector<FrameNode>& nodes, const std::string& intent, const std::vector<std::string>& span,
                 const std::string& slot) {
    for (auto& n : nodes) {
        if (n.kind == NodeKind::Intent) {
            if ((intent.empty() || n.value == intent) && wrap_in(n.children, span, slot)) return true;
        }
        if (!n.is_token() && wrap_nested(n.children, intent, span, slot)) return true;
    }
    return false;
}

bool in_scope(const TrainingExample& ex, const TransformScope& scope) {
    if (scope.intent && ex.frame.intent != strip_prefix(*scope.intent)) return false;
    if (scope.text_contains) {
        const auto hay = normalize_text(ex.utterance, Normalization::FoldCaseAndWhitespace);
        const auto needle = normalize_text(*scope.text_contains, Normalization::FoldCaseAndWhitespace);
        if (hay.find(needle) == std::string::npos) return false;
    }
    return true;
}

} // namespace

TransformResult apply_transform(const std::vector<TrainingExample>& dataset, const TransformSpec& spec,
                                const Ontology& ontology) {
    const std::string from = strip_prefix(spec.from_label);
    const std::string to = strip_prefix(spec.to_label);
    const bool intent_target = spec.op == TransformOp::RenameIntent;
    if (!is_valid_label(to) || (intent_target ? !ontology.has_intent(to) : !ontology.has_slot(to))) {
        throw ValidationError("InvalidTargetLabel", "target label '" + spec.to_label + "' is not in the ontology");
    }
    if (spec.op != TransformOp::AddSlotWrap && from.empty()) throw ConfigError("rename needs a from_label");
    const auto span = split_whitespace(to_lower_ascii(spec.span));
    if (spec.op == TransformOp::AddSlotWrap && span.empty()) throw ConfigError("AddSlotWrap needs a span");

    TransformResult result;
    result.dataset.reserve(dataset.size());
    for (const auto& ex : dataset) {
        if (!in_scope(ex, spec.scope)) {
            result.dataset.push_back(ex);
            continue;
        }
        TrainingExample out = ex;
        bool changed = false;
        switch (spec.op) {
        case TransformOp::RenameIntent:
            if (out.frame.intent == from) {
                out.frame.intent = to;
                changed = true;
            }
            changed = rename_nodes(out.frame.children, NodeKind::Intent, from, to) || changed;
            break;
        case TransformOp::RenameSlot: changed = rename_nodes(out.frame.children, NodeKind::Slot, from, to); break;
        case TransformOp::AddSlotWrap:
            if (from.empty() || out.frame.intent == from) changed = wrap_in(out.frame.children, span, to);
            if (!changed) changed = wrap_nested(out.frame.children, from, span, to);
            break;
        }
        if (changed) {
            check_frame(out.frame);
            ++result.change_count;
        }
        result.dataset.push_back(std::move(out));
    }
    return result;
}

} // namespace nlufix
