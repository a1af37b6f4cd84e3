#include "nlufix/codec.hpp"

#include "nlufix/text.hpp"

#include <cmath>

namespace nlufix {

namespace {

template <typename F>
auto guarded(const char* what, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const Json::exception& e) {
        throw ValidationError("MalformedRecord", std::string("malformed ") + what + ": " + e.what());
    }
}

Timestamp timestamp_from_json(const Json& j) {
    if (j.is_number_integer()) return j.get<Timestamp>();
    return parse_iso8601(j.get<std::string>());
}

std::string strip_label_prefix(std::string label) {
    const std::string upper = to_upper_ascii(label);
    if (upper.rfind("IN:", 0) == 0 || upper.rfind("SL:", 0) == 0) return upper.substr(3);
    return upper;
}

// Gazetteer ids are case-sensitive; a slot label spelled with its SL: prefix is
// accepted as an id too.
std::string gazetteer_id(const std::string& id) {
    const bool prefixed = id.size() > 3 && to_upper_ascii(id.substr(0, 3)) == "SL:";
    return prefixed ? id.substr(3) : id;
}

} // namespace

SemanticFrame frame_from_json(const Json& j) {
    auto frame = parse_frame(j.get<std::string>());
    return frame;
}

Json to_json(const LoggedRequest& r) {
    Json j;
    j["id"] = r.id;
    j["utterance"] = r.utterance;
    j["predicted_frame"] = serialize_frame(r.predicted_frame);
    if (r.intent_confidence && !std::isnan(*r.intent_confidence)) {
        j["intent_confidence"] = *r.intent_confidence;
    } else {
        j["intent_confidence"] = nullptr;
    }
    if (!r.nested_intent_confidences.empty()) j["nested_intent_confidences"] = r.nested_intent_confidences;
    j["frequency"] = r.frequency;
    j["final_dialog_act"] = to_string(r.final_dialog_act);
    j["timestamp"] = format_iso8601(r.timestamp);
    return j;
}

LoggedRequest logged_request_from_json(const Json& j) {
    return guarded("logged request", [&] {
        LoggedRequest r;
        r.id = j.at("id").get<std::string>();
        r.utterance = j.at("utterance").get<std::string>();
        r.predicted_frame = frame_from_json(j.at("predicted_frame"));
        if (auto it = j.find("intent_confidence"); it != j.end() && !it->is_null()) r.intent_confidence = it->get<double>();
        if (auto it = j.find("nested_intent_confidences"); it != j.end()) {
            r.nested_intent_confidences = it->get<std::vector<double>>();
        }
        r.frequency = j.value("frequency", std::int64_t{1});
        r.final_dialog_act = dialog_act_from_string(j.value("final_dialog_act", std::string("other")));
        if (auto it = j.find("timestamp"); it != j.end()) r.timestamp = timestamp_from_json(*it);
        check_request(r);
        return r;
    });
}

Json to_json(const TrainingExample& ex) {
    Json j;
    j["utterance"] = ex.utterance;
    j["frame"] = serialize_frame(ex.frame);
    j["weight"] = ex.weight;
    return j;
}

TrainingExample training_example_from_json(const Json& j) {
    return guarded("training example", [&] {
        TrainingExample ex;
        ex.frame = frame_from_json(j.at("frame"));
        ex.utterance = j.contains("utterance") ? j.at("utterance").get<std::string>() : ex.frame.utterance();
        ex.weight = j.value("weight", 1);
        check_example(ex);
        return ex;
    });
}

Json to_json(const ErrorAttribution& a) {
    Json j;
    j["category"] = to_string(a.category);
    j["correction"] = to_string(correction_for(a.category));
    Json ev = Json::object();
    if (const auto* rc = std::get_if<RuleConflict>(&a.evidence)) {
        ev["rule_id"] = rc->rule_id;
        ev["rule_frame"] = serialize_frame(rc->rule_frame);
    } else if (const auto* lc = std::get_if<LabelConflict>(&a.evidence)) {
        Json conflicts = Json::array();
        for (const auto& ex : lc->conflicts) conflicts.push_back(to_json(ex));
        ev["conflicts"] = std::move(conflicts);
        ev["agreeing"] = lc->agreeing;
        ev["confidence"] = lc->confidence;
    } else if (const auto* nm = std::get_if<NearestMatch>(&a.evidence)) {
        ev["lookup_key"] = nm->lookup_key;
        ev["nearest_utterance"] = nm->nearest_utterance ? Json(*nm->nearest_utterance) : Json(nullptr);
        ev["token_overlap"] = nm->token_overlap;
    }
    j["evidence"] = std::move(ev);
    return j;
}

ErrorAttribution attribution_from_json(const Json& j) {
    return guarded("attribution", [&] {
        ErrorAttribution a;
        a.category = attribution_category_from_string(j.at("category").get<std::string>());
        const Json& ev = j.contains("evidence") ? j.at("evidence") : Json::object();
        switch (a.category) {
        case AttributionCategory::RuleMismatch:
            a.evidence = RuleConflict{ev.at("rule_id").get<std::string>(), frame_from_json(ev.at("rule_frame"))};
            break;
        case AttributionCategory::Mislabeled: {
            LabelConflict lc;
            for (const auto& c : ev.at("conflicts")) lc.conflicts.push_back(training_example_from_json(c));
            lc.agreeing = ev.value("agreeing", std::size_t{0});
            lc.confidence = ev.value("confidence", 0.0);
            a.evidence = std::move(lc);
            break;
        }
        case AttributionCategory::LowTrainingData: {
            NearestMatch nm;
            nm.lookup_key = ev.value("lookup_key", std::string());
            if (auto it = ev.find("nearest_utterance"); it != ev.end() && !it->is_null()) {
                nm.nearest_utterance = it->get<std::string>();
            }
            nm.token_overlap = ev.value("token_overlap", 0.0);
            a.evidence = std::move(nm);
            break;
        }
        case AttributionCategory::Unknown: break;
        }
        return a;
    });
}

Json to_json(const Bug& bug) {
    Json j;
    j["id"] = bug.id;
    j["utterance"] = bug.utterance;
    j["golden_frame"] = bug.golden ? Json(serialize_frame(*bug.golden)) : Json(nullptr);
    j["predicted_frame"] = serialize_frame(bug.predicted);
    j["intent_confidence"] = bug.intent_confidence ? Json(*bug.intent_confidence) : Json(nullptr);
    j["uncertainty"] = bug.uncertainty;
    j["frequency"] = bug.frequency;
    j["last_seen"] = format_iso8601(bug.last_seen);
    j["attribution"] = bug.attribution ? to_json(*bug.attribution) : Json(nullptr);
    j["proposals"] = bug.proposals;
    j["status"] = to_string(bug.status);
    Json history = Json::array();
    for (const auto& h : bug.history) {
        history.push_back({{"timestamp", format_iso8601(h.at)}, {"status", to_string(h.status)}, {"actor", h.actor}});
    }
    j["history"] = std::move(history);
    return j;
}

Bug bug_from_json(const Json& j) {
    return guarded("bug", [&] {
        Bug bug;
        bug.id = j.at("id").get<std::string>();
        bug.utterance = j.at("utterance").get<std::string>();
        if (auto it = j.find("golden_frame"); it != j.end() && !it->is_null()) bug.golden = frame_from_json(*it);
        bug.predicted = frame_from_json(j.at("predicted_frame"));
        if (auto it = j.find("intent_confidence"); it != j.end() && !it->is_null()) bug.intent_confidence = it->get<double>();
        bug.uncertainty = j.contains("uncertainty")
                              ? j.at("uncertainty").get<double>()
                              : (bug.intent_confidence ? 1.0 - *bug.intent_confidence : 1.0);
        bug.frequency = j.value("frequency", std::int64_t{1});
        if (auto it = j.find("last_seen"); it != j.end()) bug.last_seen = timestamp_from_json(*it);
        if (auto it = j.find("attribution"); it != j.end() && !it->is_null()) bug.attribution = attribution_from_json(*it);
        if (auto it = j.find("proposals"); it != j.end()) bug.proposals = it->get<std::vector<std::string>>();
        bug.status = bug_status_from_string(j.value("status", std::string("Detected")));
        if (auto it = j.find("history"); it != j.end()) {
            for (const auto& h : *it) {
                bug.history.push_back({timestamp_from_json(h.at("timestamp")), bug_status_from_string(h.at("status").get<std::string>()),
                                       h.value("actor", std::string())});
            }
        }
        if (split_whitespace(bug.utterance) != bug.predicted.tokens() ||
            (bug.golden && bug.golden->tokens() != bug.predicted.tokens())) {
            throw FrameError(FrameErrorKind::TokenSequenceMismatch, "bug " + bug.id + ": frames do not cover the utterance");
        }
        return bug;
    });
}

Json to_json(const Rule& rule) {
    Json j;
    j["utterance"] = rule.utterance;
    j["frame"] = serialize_frame(rule.frame);
    j["id"] = rule.id;
    return j;
}

Rule rule_from_json(const Json& j) {
    return guarded("rule", [&] {
        Rule r;
        r.utterance = j.at("utterance").get<std::string>();
        r.frame = frame_from_json(j.at("frame"));
        r.id = j.at("id").get<std::string>();
        if (split_whitespace(r.utterance) != r.frame.tokens()) {
            throw FrameError(FrameErrorKind::TokenSequenceMismatch, "rule " + r.id + ": frame does not cover utterance");
        }
        return r;
    });
}

Json to_json(const AugmentationProposal& p) {
    Json j;
    j["id"] = p.id;
    j["source_bug_id"] = p.source_bug_id;
    j["strategy"] = to_string(p.strategy);
    j["status"] = to_string(p.review_status);
    Json examples = Json::array();
    for (const auto& ex : p.examples) examples.push_back(to_json(ex));
    j["examples"] = std::move(examples);
    return j;
}

AugmentationProposal proposal_from_json(const Json& j) {
    return guarded("proposal", [&] {
        AugmentationProposal p;
        p.id = j.at("id").get<std::string>();
        p.source_bug_id = j.at("source_bug_id").get<std::string>();
        p.strategy = proposal_strategy_from_string(j.at("strategy").get<std::string>());
        p.review_status = review_status_from_string(j.value("status", std::string("Pending")));
        for (const auto& ex : j.at("examples")) p.examples.push_back(training_example_from_json(ex));
        return p;
    });
}

Json to_json(const Gazetteers& g) {
    Json j = Json::object();
    for (const auto& [id, values] : g.all()) {
        Json list = Json::array();
        for (const auto& v : values) list.push_back(join_tokens(v));
        j[id] = std::move(list);
    }
    return j;
}

Gazetteers gazetteers_from_json(const Json& j) {
    return guarded("gazetteers", [&] {
        Gazetteers g;
        for (const auto& [id, values] : j.items()) {
            g.set(gazetteer_id(id), values.get<std::vector<std::string>>());
        }
        return g;
    });
}

Json to_json(const Ontology& o) {
    Json j;
    j["version"] = o.version;
    Json domains = Json::object();
    for (const auto& [intent, domain] : o.domains()) domains[intent] = domain;
    j["domains"] = std::move(domains);
    Json slots = Json::object();
    for (const auto& [slot, spec] : o.slots()) {
        Json s;
        s["templatable"] = spec.templatable;
        if (spec.gazetteer) s["gazetteer"] = *spec.gazetteer;
        slots[slot] = std::move(s);
    }
    j["slots"] = std::move(slots);
    return j;
}

Ontology ontology_from_json(const Json& j) {
    return guarded("ontology", [&] {
        Ontology o;
        o.version = j.value("version", 1);
        for (const auto& [intent, domain] : j.at("domains").items()) o.add_intent(strip_label_prefix(intent), domain.get<std::string>());
        for (const auto& [slot, spec] : j.at("slots").items()) {
            SlotSpec s;
            s.templatable = spec.value("templatable", false);
            if (auto it = spec.find("gazetteer"); it != spec.end() && !it->is_null()) s.gazetteer = gazetteer_id(it->get<std::string>());
            o.add_slot(strip_label_prefix(slot), std::move(s));
        }
        return o;
    });
}

Json to_json(const TransformSpec& spec) {
    Json j;
    j["op"] = to_string(spec.op);
    j["from_label"] = spec.from_label;
    j["to_label"] = spec.to_label;
    if (!spec.span.empty()) j["span"] = spec.span;
    Json scope = Json::object();
    if (spec.scope.intent) scope["intent"] = *spec.scope.intent;
    if (spec.scope.text_contains) scope["text_contains"] = *spec.scope.text_contains;
    j["scope"] = std::move(scope);
    return j;
}

TransformSpec transform_spec_from_json(const Json& j) {
    return guarded("transform spec", [&] {
        TransformSpec spec;
        spec.op = transform_op_from_string(j.at("op").get<std::string>());
        spec.from_label = j.value("from_label", std::string());
        spec.to_label = j.at("to_label").get<std::string>();
        spec.span = j.value("span", std::string());
        if (auto it = j.find("scope"); it != j.end()) {
            if (it->contains("intent")) spec.scope.intent = it->at("intent").get<std::string>();
            if (it->contains("text_contains")) spec.scope.text_contains = it->at("text_contains").get<std::string>();
        }
        return spec;
    });
}

Json to_json(const TokenSpan& s) { return Json::array({s.begin, s.end}); }

Json to_json(const FrameDiff& d) {
    Json j;
    j["verdict"] = to_string(d.verdict);
    Json details = Json::array();
    for (const auto& f : d.details) {
        Json x;
        x["kind"] = to_string(f.kind);
        x["label"] = f.label;
        if (!f.predicted_label.empty()) x["predicted_label"] = f.predicted_label;
        x["expected_span"] = f.expected_span ? to_json(*f.expected_span) : Json(nullptr);
        x["predicted_span"] = f.predicted_span ? to_json(*f.predicted_span) : Json(nullptr);
        x["path"] = f.path;
        details.push_back(std::move(x));
    }
    j["details"] = std::move(details);
    return j;
}

Json to_json(const HistogramBin& b) { return {{"lo", b.lo}, {"hi", b.hi}, {"count", b.count}}; }

} // namespace nlufix
