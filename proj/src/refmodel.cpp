#include "nlufix/refmodel.hpp"

#include "nlufix/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <set>

namespace nlufix {

using nlohmann::json;

const char* to_string(PredictionSource source) {
    switch (source) {
    case PredictionSource::Exact: return "exact";
    case PredictionSource::Template: return "template";
    case PredictionSource::Fallback: return "fallback";
    }
    return "fallback";
}

namespace {

std::vector<std::string> lowered(const std::vector<std::string>& tokens) {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(to_lower_ascii(t));
    return out;
}

SemanticFrame lowercase_frame(const SemanticFrame& frame) { return with_tokens(frame, lowered(frame.tokens())); }

std::vector<std::string> slot_tokens(const FrameNode& slot) {
    std::vector<std::string> out;
    for (const auto& c : slot.children) out.push_back(c.value);
    return out;
}

} // namespace

ReferenceModel train(const std::vector<TrainingExample>& dataset, const Gazetteers& gazetteers, const Ontology& ontology) {
    if (dataset.empty()) throw ValidationError("EmptyDataset", "cannot train on an empty dataset");
    ReferenceModel model;

    for (const auto& [id, values] : gazetteers.all()) {
        std::set<std::vector<std::string>> seen;
        auto& dst = model.gazetteers_[id];
        for (const auto& v : values) {
            auto low = lowered(v);
            if (seen.insert(low).second) dst.push_back(std::move(low));
        }
    }

    // Weight tallies per normalized text, keyed by the lowercased annotation.
    std::map<std::string, std::map<std::string, std::pair<long long, SemanticFrame>>> tally;
    std::map<std::string, long long> intent_weight;
    std::set<std::string> skeletons;
    std::vector<std::pair<std::size_t, BankTemplate>> bank; // (literal prefix, template)

    for (const auto& ex : dataset) {
        SemanticFrame low = lowercase_frame(ex.frame);
        const std::string key = join_tokens(low.tokens());
        auto& entry = tally[key][serialize_frame(low)];
        entry.first += ex.weight;
        entry.second = low;
        intent_weight[low.intent] += ex.weight;

        // Generalize templatable leaf slots whose value the gazetteer knows.
        BankTemplate tpl;
        tpl.frame = low;
        const auto positions = templatable_slot_positions(low, ontology);
        visit_slots(low.children, [&](const FrameNode& slot, std::size_t i) {
            if (std::find(positions.begin(), positions.end(), i) == positions.end()) return;
            const auto gaz = ontology.template_gazetteer(slot.value);
            auto it = model.gazetteers_.find(*gaz);
            if (it == model.gazetteers_.end()) return;
            const auto value = slot_tokens(slot);
            if (std::find(it->second.begin(), it->second.end(), value) == it->second.end()) return;
            tpl.slot_positions.push_back(i);
            tpl.slot_gazetteers.push_back(*gaz);
        });
        if (tpl.slot_positions.empty()) continue;

        SemanticFrame skeleton = low;
        std::size_t literal_prefix = 0;
        bool prefix_open = true;
        {
            std::size_t next = 0;
            visit_slots(skeleton.children, [&](FrameNode& slot, std::size_t i) {
                if (next < tpl.slot_positions.size() && tpl.slot_positions[next] == i) {
                    slot.children = {FrameNode::token("<" + tpl.slot_gazetteers[next] + ">")};
                    ++next;
                }
            });
            // Literal prefix: tokens before the first generalized slot.
            std::size_t next_slot = 0;
            std::size_t pos = 0;
            auto walk = [&](auto& self, const std::vector<FrameNode>& nodes) -> void {
                for (const auto& n : nodes) {
                    if (!prefix_open) return;
                    if (n.is_token()) {
                        ++literal_prefix;
                        continue;
                    }
                    if (n.kind == NodeKind::Slot) {
                        if (next_slot < tpl.slot_positions.size() && tpl.slot_positions[next_slot] == pos) {
                            prefix_open = false;
                            return;
                        }
                        ++pos;
                    }
                    self(self, n.children);
                }
            };
            walk(walk, low.children);
        }
        if (!skeletons.insert(serialize_frame(skeleton)).second) continue;
        bank.emplace_back(literal_prefix, std::move(tpl));
    }

    for (auto& [key, frames] : tally) {
        long long best = -1;
        for (auto& [serialized, entry] : frames) {
            if (entry.first > best) {
                best = entry.first;
                model.exact_[key] = entry.second;
            }
        }
    }

    long long best = -1;
    for (const auto& [intent, weight] : intent_weight) {
        if (weight > best) {
            best = weight;
            model.prior_ = intent;
        }
    }

    std::stable_sort(bank.begin(), bank.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (auto& [prefix, tpl] : bank) model.bank_.push_back(std::move(tpl));
    model.compile();
    return model;
}

void ReferenceModel::compile() {
    compiled_.clear();
    by_first_literal_.clear();
    matcher_first_.clear();
    lookup_.clear();

    for (std::size_t t = 0; t < bank_.size(); ++t) {
        const BankTemplate& tpl = bank_[t];
        Compiled c;
        std::size_t slot_index = 0;
        std::size_t next = 0;
        auto walk = [&](auto& self, const std::vector<FrameNode>& nodes) -> void {
            for (const auto& n : nodes) {
                if (n.is_token()) {
                    c.elements.push_back({n.value, -1});
                    ++c.literal_count;
                    continue;
                }
                if (n.kind == NodeKind::Slot) {
                    const std::size_t mine = slot_index++;
                    if (next < tpl.slot_positions.size() && tpl.slot_positions[next] == mine) {
                        c.elements.push_back({{}, static_cast<int>(next)});
                        ++next;
                        continue;
                    }
                }
                self(self, n.children);
            }
        };
        walk(walk, tpl.frame.children);
        if (!c.elements.empty() && c.elements[0].matcher < 0) {
            by_first_literal_[c.elements[0].literal].push_back(t);
        } else {
            matcher_first_.push_back(t);
        }
        compiled_.push_back(std::move(c));
    }

    for (const auto& [id, values] : gazetteers_) {
        auto& by_first = lookup_[id];
        for (std::size_t v = 0; v < values.size(); ++v) by_first[values[v][0]].push_back(v);
        for (auto& [first, list] : by_first) {
            std::stable_sort(list.begin(), list.end(),
                             [&](std::size_t a, std::size_t b) { return values[a].size() > values[b].size(); });
        }
    }
}

std::optional<SemanticFrame> ReferenceModel::match(const BankTemplate& tpl, const Compiled& compiled,
                                                   const std::vector<std::string>& query) const {
    if (compiled.literal_count > query.size()) return std::nullopt;
    std::vector<std::pair<std::size_t, std::size_t>> spans(tpl.slot_positions.size());

    auto rec = [&](auto& self, std::size_t e, std::size_t q) -> bool {
        if (e == compiled.elements.size()) return q == query.size();
        if (q >= query.size()) return false;
        const Element& el = compiled.elements[e];
        if (el.matcher < 0) return query[q] == el.literal && self(self, e + 1, q + 1);
        const std::size_t j = static_cast<std::size_t>(el.matcher);
        auto gaz = lookup_.find(tpl.slot_gazetteers[j]);
        if (gaz == lookup_.end()) return false;
        auto first = gaz->second.find(query[q]);
        if (first == gaz->second.end()) return false;
        const auto& values = gazetteers_.at(tpl.slot_gazetteers[j]);
        for (std::size_t v : first->second) {
            const auto& value = values[v];
            if (q + value.size() > query.size()) continue;
            if (!std::equal(value.begin(), value.end(), query.begin() + static_cast<std::ptrdiff_t>(q))) continue;
            spans[j] = {q, q + value.size()};
            if (self(self, e + 1, q + value.size())) return true;
        }
        return false;
    };
    if (!rec(rec, 0, 0)) return std::nullopt;

    SemanticFrame frame = tpl.frame;
    std::size_t next = 0;
    visit_slots(frame.children, [&](FrameNode& slot, std::size_t i) {
        if (next < tpl.slot_positions.size() && tpl.slot_positions[next] == i) {
            slot.children.clear();
            for (std::size_t k = spans[next].first; k < spans[next].second; ++k) {
                slot.children.push_back(FrameNode::token(query[k]));
            }
            ++next;
        }
    });
    return frame;
}

Prediction ReferenceModel::predict(std::string_view utterance) const {
    const auto tokens = split_whitespace(utterance);
    const auto query = lowered(tokens);

    if (auto it = exact_.find(join_tokens(query)); it != exact_.end()) {
        return {with_tokens(it->second, tokens), tiers_.exact, PredictionSource::Exact};
    }

    if (!query.empty()) {
        static const std::vector<std::size_t> none;
        auto bucket = by_first_literal_.find(query[0]);
        const auto& a = bucket == by_first_literal_.end() ? none : bucket->second;
        const auto& b = matcher_first_;
        std::size_t i = 0, j = 0;
        while (i < a.size() || j < b.size()) {
            const std::size_t t = (j >= b.size() || (i < a.size() && a[i] < b[j])) ? a[i++] : b[j++];
            if (auto frame = match(bank_[t], compiled_[t], query)) {
                return {with_tokens(*frame, tokens), tiers_.templated, PredictionSource::Template};
            }
        }
    }

    SemanticFrame fallback;
    fallback.intent = prior_;
    for (const auto& t : tokens) fallback.children.push_back(FrameNode::token(t));
    return {std::move(fallback), tiers_.fallback, PredictionSource::Fallback};
}

std::string ReferenceModel::dump() const {
    json doc;
    doc["format"] = "nlufix-refmodel";
    doc["version"] = 1;
    doc["tiers"] = {{"exact", tiers_.exact}, {"template", tiers_.templated}, {"fallback", tiers_.fallback}};
    doc["intent_prior"] = prior_;
    json table = json::object();
    for (const auto& [key, frame] : exact_) table[key] = serialize_frame(frame);
    doc["exact_table"] = std::move(table);
    json templates = json::array();
    for (const auto& tpl : bank_) {
        json slots = json::array();
        for (std::size_t i = 0; i < tpl.slot_positions.size(); ++i) {
            slots.push_back({{"position", tpl.slot_positions[i]}, {"gazetteer", tpl.slot_gazetteers[i]}});
        }
        templates.push_back({{"frame", serialize_frame(tpl.frame)}, {"slots", std::move(slots)}});
    }
    doc["templates"] = std::move(templates);
    json gaz = json::object();
    for (const auto& [id, values] : gazetteers_) {
        json list = json::array();
        for (const auto& v : values) list.push_back(join_tokens(v));
        gaz[id] = std::move(list);
    }
    doc["gazetteers"] = std::move(gaz);
    return doc.dump(2) + "\n";
}

ReferenceModel ReferenceModel::load(std::string_view text) {
    ReferenceModel model;
    try {
        const json doc = json::parse(text);
        if (doc.value("format", "") != "nlufix-refmodel") throw ValidationError("InvalidModel", "not a model dump");
        const auto& tiers = doc.at("tiers");
        model.tiers_ = {tiers.at("exact").get<double>(), tiers.at("template").get<double>(),
                        tiers.at("fallback").get<double>()};
        model.prior_ = doc.at("intent_prior").get<std::string>();
        for (const auto& [key, frame] : doc.at("exact_table").items()) {
            model.exact_[key] = parse_frame(frame.get<std::string>());
        }
        for (const auto& [id, values] : doc.at("gazetteers").items()) {
            auto& dst = model.gazetteers_[id];
            for (const auto& v : values) dst.push_back(split_whitespace(v.get<std::string>()));
        }
        for (const auto& t : doc.at("templates")) {
            BankTemplate tpl;
            tpl.frame = parse_frame(t.at("frame").get<std::string>());
            for (const auto& s : t.at("slots")) {
                tpl.slot_positions.push_back(s.at("position").get<std::size_t>());
                tpl.slot_gazetteers.push_back(s.at("gazetteer").get<std::string>());
            }
            model.bank_.push_back(std::move(tpl));
        }
    } catch (const json::exception& e) {
        throw ValidationError("InvalidModel", std::string("malformed model dump: ") + e.what());
    }
    model.compile();
    return model;
}

} // namespace nlufix
