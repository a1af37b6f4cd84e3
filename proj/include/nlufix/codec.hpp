#pragma once

// JSON encodings for every persisted or transmitted record. Frames travel as
// canonical bracketed strings; timestamps as UTC ISO-8601.

#include "nlufix/bug.hpp"
#include "nlufix/correction.hpp"
#include "nlufix/detection.hpp"
#include "nlufix/frames.hpp"
#include "nlufix/rules.hpp"

#include <json.hpp>

namespace nlufix {

using Json = nlohmann::ordered_json;

SemanticFrame frame_from_json(const Json& j);

Json to_json(const LoggedRequest& r);
LoggedRequest logged_request_from_json(const Json& j);

Json to_json(const TrainingExample& ex);
TrainingExample training_example_from_json(const Json& j);

Json to_json(const ErrorAttribution& a);
ErrorAttribution attribution_from_json(const Json& j);

Json to_json(const Bug& bug);
Bug bug_from_json(const Json& j);

Json to_json(const Rule& rule);
Rule rule_from_json(const Json& j);

Json to_json(const AugmentationProposal& p);
AugmentationProposal proposal_from_json(const Json& j);

Json to_json(const Gazetteers& g);
Gazetteers gazetteers_from_json(const Json& j);

// {"version": 1, "domains": {"PLAY_MUSIC": "music"}, "slots": {"PLAYLIST_NAME":
// {"templatable": true, "gazetteer": "PLAYLIST_NAME"}}}
Json to_json(const Ontology& o);
Ontology ontology_from_json(const Json& j);

Json to_json(const TransformSpec& spec);
TransformSpec transform_spec_from_json(const Json& j);

Json to_json(const TokenSpan& s);
Json to_json(const FrameDiff& d);

Json to_json(const HistogramBin& b);

} // namespace nlufix
