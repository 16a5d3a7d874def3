#include "spike/scenario_gen.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <ctime>
#include <fstream>
#include <future>
#include <nlohmann/json.hpp>
#include <sstream>

namespace spike {

using ordered_json = nlohmann::ordered_json;

namespace {

// The generation templates. {dataset} is substituted from the request; the
// document text goes under [Text Content].

constexpr const char* kTeacherTemplate =
    R"([Task Description]
You are an advanced language model specializing in knowledge extraction and user need modeling. Your task is to extract hypothetical user scenarios from a given {dataset} document, ensuring that the generated information needs reflect the document's overall insights and knowledge, rather than isolated details.

**Step 1: Document Analysis**:
Summarize the key points of the document in a structured manner. This step should not be a direct extraction but should synthesize the document's core concepts, key arguments, and insights, avoiding specific code snippets, variable names, or minor details.

Content:
- Main Topic: Briefly describe the primary subject of the document
- Key Aspects: Summarize the core concepts, insights, or knowledge presented

**Step 2: Generate Possible Information Needs**:
Based on the document analysis, generate a diverse set of possible information needs that can be satisfied by the document, ensuring that they **focus on high-level insights, generalizable knowledge, or core principles conveyed by the document rather than specific implementation details (e.g., function names, variable names, or isolated sections)**.

Guidelines:
- The information needs must align with the document's main message and core knowledge, not minor details.
- Focus on concepts, reasoning, and insights rather than localized facts.
- Ensure that they **focus on high-level insights, generalizable knowledge, or core principles conveyed by the document rather than specific implementation details (e.g., function names, variable names, or isolated sections)**.
- Ensure that the needs **capture different aspects of the document's knowledge** rather than concentrating on a single part.

Format:
- Each information need is started with "A User wants to know"
- Generate a python list of information needs. (e.g. ["information need 1", "information need 2", "information need 3"])

**Step 3: Generate Explanation for Each Information Need**:
For each information need, explain how the document fulfills that need, ensuring that explanations are generalized and conceptual rather than overly detailed. Avoid focusing on function names, variable names, or specific lines unless absolutely necessary for clarity.

Format:
- Generate JSON format with the following components:
- Key: information need
- Value: explanation for the information need

[Text Content]
)";

constexpr const char* kGeneratorTemplate =
    R"([Task Description]
You are an advanced language model specializing in knowledge extraction and user need modeling. Your task is to extract hypothetical user scenarios from a given {dataset} document, ensuring that the generated information needs reflect the document's overall insights and knowledge, rather than isolated details.

Content:
- Main Topic: Briefly describe the primary subject of the document
- Key Aspects: Summarize the core concepts, insights, or knowledge presented
- Information Needs: Generate a diverse set of possible information needs that can be satisfied by the document
- Explanation: Explain how the document fulfills that need, ensuring that explanations are generalized and conceptual rather than overly detailed.

Format:
- Generate JSON format

[Text Content]
)";

constexpr const char* kPseudoQueryTemplate =
    R"([Task Description]
You are a search query generation model. Given a {dataset} document, write three search queries that this document would answer well. Each query should reflect a realistic information request that the document satisfies.

Format:
- Output exactly three queries, one per line.
- Do not number the queries or add any other text.

[Text Content]
)";

constexpr const char* kSummaryTemplate =
    R"([Task Description]
You are a summarization model. Given a {dataset} document, write one concise summary that captures its main content.

Format:
- Output the summary as a single paragraph with no preamble.

[Text Content]
)";

constexpr const char* kTruncationMarker = "\n[... truncated]";
constexpr const char* kNeedPrefix = "A User wants to know";

const char* template_for(PromptKind kind) {
    switch (kind) {
        case PromptKind::teacher_3step: return kTeacherTemplate;
        case PromptKind::generator_instruction: return kGeneratorTemplate;
        case PromptKind::pseudo_query: return kPseudoQueryTemplate;
        case PromptKind::summary: return kSummaryTemplate;
    }
    throw ContractError("unknown prompt kind");
}

std::string substitute_dataset(std::string text, const std::string& dataset_name) {
    const std::string slot = "{dataset}";
    std::size_t pos = text.find(slot);
    if (pos != std::string::npos && dataset_name.empty())
        throw ContractError("prompt template has a {dataset} slot but no dataset name was given");
    while (pos != std::string::npos) {
        text.replace(pos, slot.size(), dataset_name);
        pos = text.find(slot, pos + dataset_name.size());
    }
    return text;
}

// Truncates at a UTF-8 codepoint boundary so no multibyte sequence is split.
std::string truncate_doc_text(const std::string& text, std::size_t max_chars) {
    if (text.size() <= max_chars) return text;
    std::size_t cut = max_chars;
    while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
    return text.substr(0, cut) + kTruncationMarker;
}

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

// Case-insensitive key with spaces, underscores and hyphens removed.
std::string fold_key(std::string_view key) {
    std::string out;
    out.reserve(key.size());
    for (char c : key) {
        if (c == ' ' || c == '_' || c == '-') continue;
        out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

// Pulls the payload out of markdown code fences when present; otherwise the
// first-{ to last-} span as a fallback for chatty responses.
std::string extract_json_payload(const std::string& text) {
    std::size_t fence = text.find("```");
    if (fence != std::string::npos) {
        std::size_t body_start = text.find('\n', fence);
        std::size_t fence_end = body_start == std::string::npos ? std::string::npos
                                                                : text.find("```", body_start);
        if (body_start != std::string::npos && fence_end != std::string::npos)
            return trim(text.substr(body_start + 1, fence_end - body_start - 1));
    }
    std::string trimmed = trim(text);
    if (!trimmed.empty() && (trimmed.front() == '{' || trimmed.front() == '[')) return trimmed;
    std::size_t first = text.find_first_of("{[");
    if (first == std::string::npos) return trimmed;
    char open = text[first];
    char close = open == '{' ? '}' : ']';
    std::size_t last = text.rfind(close);
    if (last == std::string::npos || last < first) return trimmed;
    return text.substr(first, last - first + 1);
}

std::string raw_excerpt(const std::string& text) {
    constexpr std::size_t kMax = 400;
    return text.size() <= kMax ? text : text.substr(0, kMax) + "...";
}

std::string need_string(const ordered_json& value, ParseMode mode) {
    if (value.is_string()) return value.get<std::string>();
    if (mode == ParseMode::strict) throw ParseError("information need is not a string");
    return value.dump();
}

void append_pair(Scenario& scenario, std::string need, std::string explanation, ParseMode mode) {
    need = trim(need);
    explanation = trim(explanation);
    if (need.empty() || explanation.empty()) {
        if (mode == ParseMode::strict)
            throw ParseError("information need with empty need or explanation");
        spdlog::warn("dropping scenario pair with empty need or explanation (doc {})", scenario.doc_id);
        return;
    }
    if (!need.starts_with(kNeedPrefix)) {
        if (mode == ParseMode::strict)
            throw ParseError("information need does not start with \"" + std::string(kNeedPrefix) +
                             "\": " + raw_excerpt(need));
        spdlog::warn("information need does not start with \"{}\" (doc {}): {}", kNeedPrefix,
                     scenario.doc_id, raw_excerpt(need));
    }
    scenario.needs.push_back({std::move(need), std::move(explanation)});
}

Scenario scenario_from_object(const ordered_json& object, const std::string& doc_id, ParseMode mode) {
    if (!object.is_object()) throw ParseError("scenario payload is not a JSON object");

    Scenario scenario;
    scenario.doc_id = doc_id;

    const ordered_json* needs_value = nullptr;
    const ordered_json* explanations_value = nullptr;
    for (const auto& [key, value] : object.items()) {
        const std::string folded = fold_key(key);
        if (folded == "maintopic") {
            if (value.is_string()) scenario.main_topic = trim(value.get<std::string>());
        } else if (folded == "keyaspects" || folded == "keyaspect") {
            if (value.is_string()) {
                scenario.key_aspects.push_back(trim(value.get<std::string>()));
            } else if (value.is_array()) {
                for (const auto& item : value) {
                    if (item.is_string()) scenario.key_aspects.push_back(trim(item.get<std::string>()));
                    else if (mode == ParseMode::strict) throw ParseError("key aspect is not a string");
                    else scenario.key_aspects.push_back(item.dump());
                }
            }
        } else if (folded == "informationneeds" || folded == "informationneed" || folded == "needs") {
            needs_value = &value;
        } else if (folded == "explanation" || folded == "explanations") {
            explanations_value = &value;
        } else if (folded == "scenarioid") {
            if (value.is_string()) scenario.scenario_id = value.get<std::string>();
        } else if (folded == "docid") {
            if (value.is_string() && doc_id.empty()) scenario.doc_id = value.get<std::string>();
        }
    }

    if (scenario.main_topic.empty()) throw ParseError("missing Main Topic");
    if (!needs_value) throw ParseError("missing Information Needs");

    const ordered_json& needs = *needs_value;
    if (needs.is_object()) {
        // Teacher shape: {"need": "explanation", ...}
        for (const auto& [need, explanation] : needs.items())
            append_pair(scenario, need, need_string(explanation, mode), mode);
    } else if (needs.is_array() && !needs.empty() && needs.front().is_object()) {
        // Store shape: [{"need": ..., "explanation": ...}, ...]
        for (const auto& item : needs) {
            std::string need, explanation;
            for (const auto& [key, value] : item.items()) {
                const std::string folded = fold_key(key);
                if (folded == "need" || folded == "informationneed") need = need_string(value, mode);
                else if (folded == "explanation") explanation = need_string(value, mode);
            }
            append_pair(scenario, need, explanation, mode);
        }
    } else if (needs.is_array()) {
        // Generator shape: parallel arrays of needs and explanations.
        std::vector<std::string> need_list;
        for (const auto& item : needs) need_list.push_back(need_string(item, mode));
        std::vector<std::string> explanation_list;
        if (explanations_value) {
            if (explanations_value->is_array()) {
                for (const auto& item : *explanations_value)
                    explanation_list.push_back(need_string(item, mode));
            } else if (explanations_value->is_object()) {
                // Explanations keyed by need text.
                for (const auto& need : need_list) {
                    auto it = explanations_value->find(need);
                    explanation_list.push_back(it != explanations_value->end()
                                                   ? need_string(*it, mode)
                                                   : std::string());
                }
            } else if (explanations_value->is_string()) {
                explanation_list.assign(need_list.size(), explanations_value->get<std::string>());
            }
        }
        if (need_list.size() != explanation_list.size()) {
            if (mode == ParseMode::strict)
                throw ParseError("information needs and explanations have different lengths");
            spdlog::warn("pairing {} needs with {} explanations (doc {})", need_list.size(),
                         explanation_list.size(), doc_id);
        }
        std::size_t pairs = std::min(need_list.size(), explanation_list.size());
        for (std::size_t i = 0; i < pairs; ++i)
            append_pair(scenario, need_list[i], explanation_list[i], mode);
    } else {
        throw ParseError("Information Needs has an unsupported shape");
    }

    if (scenario.needs.empty()) throw ParseError("missing Information Needs");
    return scenario;
}

ordered_json parse_json_or_throw(const std::string& text) {
    const std::string payload = extract_json_payload(text);
    try {
        return ordered_json::parse(payload);
    } catch (const ordered_json::exception& e) {
        throw ParseError(std::string("response is not valid JSON: ") + e.what() +
                         "; raw: " + raw_excerpt(text));
    }
}

std::string default_scenario_id(const std::string& doc_id, std::size_t index) {
    return doc_id + "#s" + std::to_string(index);
}

}  // namespace

std::string to_string(PromptKind kind) {
    switch (kind) {
        case PromptKind::teacher_3step: return "teacher_3step";
        case PromptKind::generator_instruction: return "generator_instruction";
        case PromptKind::pseudo_query: return "pseudo_query";
        case PromptKind::summary: return "summary";
    }
    throw ContractError("unknown prompt kind");
}

PromptKind prompt_kind_from_string(const std::string& s) {
    if (s == "teacher_3step") return PromptKind::teacher_3step;
    if (s == "generator_instruction") return PromptKind::generator_instruction;
    if (s == "pseudo_query") return PromptKind::pseudo_query;
    if (s == "summary") return PromptKind::summary;
    throw ContractError("unknown prompt kind '" + s + "'");
}

std::string to_string(ExpansionKind kind) {
    return kind == ExpansionKind::pseudo_query ? "pseudo_query" : "summary";
}

ExpansionKind expansion_kind_from_string(const std::string& s) {
    if (s == "pseudo_query") return ExpansionKind::pseudo_query;
    if (s == "summary") return ExpansionKind::summary;
    throw ContractError("unknown expansion kind '" + s + "'");
}

std::string build_prompt(const GenerationRequest& req) {
    std::string prompt = substitute_dataset(template_for(req.prompt_kind), req.dataset_name);
    prompt += truncate_doc_text(req.document.text, req.max_doc_chars);
    return prompt;
}

Scenario parse_scenario_json(const std::string& text, const std::string& doc_id, ParseMode mode) {
    ordered_json parsed = parse_json_or_throw(text);
    if (parsed.is_array()) {
        if (parsed.size() != 1) throw ParseError("expected one scenario object, got an array");
        parsed = parsed.front();
    }
    Scenario scenario = scenario_from_object(parsed, doc_id, mode);
    if (scenario.scenario_id.empty()) scenario.scenario_id = default_scenario_id(scenario.doc_id, 0);
    return scenario;
}

std::vector<Scenario> parse_scenarios_json(const std::string& text, const std::string& doc_id,
                                           ParseMode mode) {
    ordered_json parsed = parse_json_or_throw(text);
    std::vector<Scenario> scenarios;
    if (parsed.is_array()) {
        for (const auto& item : parsed) {
            Scenario s = scenario_from_object(item, doc_id, mode);
            if (s.scenario_id.empty()) s.scenario_id = default_scenario_id(s.doc_id, scenarios.size());
            scenarios.push_back(std::move(s));
        }
        if (scenarios.empty()) throw ParseError("empty scenario array");
    } else {
        Scenario s = scenario_from_object(parsed, doc_id, mode);
        if (s.scenario_id.empty()) s.scenario_id = default_scenario_id(s.doc_id, 0);
        scenarios.push_back(std::move(s));
    }
    return scenarios;
}

GenerationOutcome generate_scenarios(const Document& doc, ChatClient& client, PromptKind kind,
                                     const std::string& dataset_name, ParseMode mode,
                                     std::size_t max_doc_chars) {
    GenerationRequest req{doc, kind, dataset_name, max_doc_chars};
    const std::string prompt = build_prompt(req);

    auto call = [&](const std::string& p) {
        try {
            return client.complete(p);
        } catch (const ProviderError& e) {
            throw GenerationError("scenario generation failed for doc '" + doc.doc_id + "': " + e.what());
        }
    };

    const std::string raw = call(prompt);
    GenerationOutcome outcome;
    try {
        outcome.scenarios = parse_scenarios_json(raw, doc.doc_id, mode);
        return outcome;
    } catch (const ParseError& first_error) {
        spdlog::warn("parse failure for doc '{}', attempting one repair: {}", doc.doc_id,
                     first_error.what());
        const std::string repair_prompt = prompt +
            "\n\nYour previous response could not be parsed: " + std::string(first_error.what()) +
            "\nRespond again with exactly one valid JSON object and nothing else.";
        const std::string repaired = call(repair_prompt);
        try {
            outcome.scenarios = parse_scenarios_json(repaired, doc.doc_id, mode);
            outcome.repair_count = 1;
            return outcome;
        } catch (const ParseError& second_error) {
            throw ParseError("doc '" + doc.doc_id + "': " + second_error.what() +
                             " (after one repair attempt; raw: " + raw_excerpt(repaired) + ")");
        }
    }
}

std::vector<ExpansionUnit> generate_expansion(const Document& doc, ChatClient& client,
                                              ExpansionKind kind, const std::string& dataset_name,
                                              ParseMode mode, std::size_t max_doc_chars) {
    GenerationRequest req{doc,
                          kind == ExpansionKind::pseudo_query ? PromptKind::pseudo_query
                                                              : PromptKind::summary,
                          dataset_name, max_doc_chars};
    std::string raw;
    try {
        raw = client.complete(build_prompt(req));
    } catch (const ProviderError& e) {
        throw GenerationError("expansion generation failed for doc '" + doc.doc_id + "': " + e.what());
    }

    if (kind == ExpansionKind::summary) {
        std::string text = trim(raw);
        if (text.empty()) throw ContractError("summary expansion for doc '" + doc.doc_id + "' is empty");
        return {ExpansionUnit{doc.doc_id, kind, std::move(text)}};
    }

    std::vector<ExpansionUnit> units;
    std::istringstream lines(raw);
    std::string line;
    while (std::getline(lines, line)) {
        std::string cleaned = trim(line);
        // Tolerate numbering/bullets the model was asked not to emit.
        if (cleaned.size() > 2 && std::isdigit(static_cast<unsigned char>(cleaned[0])) &&
            (cleaned[1] == '.' || cleaned[1] == ')'))
            cleaned = trim(cleaned.substr(2));
        else if (cleaned.size() > 1 && (cleaned[0] == '-' || cleaned[0] == '*'))
            cleaned = trim(cleaned.substr(1));
        if (!cleaned.empty()) units.push_back(ExpansionUnit{doc.doc_id, kind, std::move(cleaned)});
    }

    constexpr std::size_t kExpected = 3;
    if (units.size() != kExpected) {
        if (mode == ParseMode::strict)
            throw ContractError("expected " + std::to_string(kExpected) + " pseudo queries for doc '" +
                                doc.doc_id + "', got " + std::to_string(units.size()));
        if (units.size() > kExpected) {
            units.resize(kExpected);
        } else {
            spdlog::warn("doc '{}': keeping {} pseudo queries (expected {})", doc.doc_id, units.size(),
                         kExpected);
        }
    }
    if (units.empty()) throw ContractError("no pseudo queries produced for doc '" + doc.doc_id + "'");
    return units;
}

std::vector<ScenarioUnit> render_units(const Scenario& scenario, ComponentMode mode) {
    auto unit_id = [&](std::size_t index) {
        char buf[8];
        std::snprintf(buf, sizeof(buf), "%04zu", index);
        return scenario.scenario_id + "#" + to_string(mode) + "#" + buf;
    };
    auto make_unit = [&](std::size_t index, std::string text) {
        return ScenarioUnit{unit_id(index), scenario.doc_id, scenario.scenario_id, mode, std::move(text)};
    };

    std::vector<ScenarioUnit> units;
    if (mode == ComponentMode::main_topic) {
        units.push_back(make_unit(0, scenario.main_topic));
        return units;
    }
    units.reserve(scenario.needs.size());
    for (std::size_t i = 0; i < scenario.needs.size(); ++i) {
        const auto& [need, explanation] = scenario.needs[i];
        switch (mode) {
            case ComponentMode::info_need: units.push_back(make_unit(i, need)); break;
            case ComponentMode::explanation: units.push_back(make_unit(i, explanation)); break;
            case ComponentMode::topic_explanation:
                units.push_back(make_unit(i, scenario.main_topic + "\n" + explanation));
                break;
            case ComponentMode::need_explanation: units.push_back(make_unit(i, need + "\n" + explanation)); break;
            case ComponentMode::main_topic: break;  // handled above
        }
    }
    return units;
}

UnitRef parse_unit_id(const std::string& unit_id) {
    auto last = unit_id.rfind('#');
    auto second = last == std::string::npos ? std::string::npos : unit_id.rfind('#', last - 1);
    if (second == std::string::npos || second == 0)
        throw ParseError("malformed unit id '" + unit_id + "'");
    UnitRef ref;
    ref.scenario_id = unit_id.substr(0, second);
    ref.mode = component_mode_from_string(unit_id.substr(second + 1, last - second - 1));
    ref.pair_index = std::stoi(unit_id.substr(last + 1));
    return ref;
}

// ---------------------------------------------------------------------------
// Stores

std::string scenario_to_jsonl(const Scenario& scenario, const std::string& generator_name,
                              const std::string& created_at) {
    ordered_json needs = ordered_json::array();
    for (const auto& pair : scenario.needs)
        needs.push_back(ordered_json{{"need", pair.need}, {"explanation", pair.explanation}});
    ordered_json record{{"doc_id", scenario.doc_id},
                        {"scenario_id", scenario.scenario_id},
                        {"main_topic", scenario.main_topic},
                        {"key_aspects", scenario.key_aspects},
                        {"needs", std::move(needs)},
                        {"generator", generator_name},
                        {"created_at", created_at}};
    return record.dump();
}

std::vector<Scenario> load_scenarios(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open scenario file '" + path + "'");
    std::vector<Scenario> scenarios;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            ordered_json record = ordered_json::parse(line);
            scenarios.push_back(scenario_from_object(record, std::string(), ParseMode::lenient));
            if (scenarios.back().doc_id.empty())
                throw ParseError("record has no doc_id");
            if (scenarios.back().scenario_id.empty())
                scenarios.back().scenario_id = default_scenario_id(scenarios.back().doc_id, 0);
        } catch (const std::exception& e) {
            throw ParseError("scenario file line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return scenarios;
}

std::string expansion_to_jsonl(const ExpansionUnit& unit) {
    ordered_json record{{"doc_id", unit.doc_id}, {"kind", to_string(unit.kind)}, {"text", unit.text}};
    return record.dump();
}

std::vector<ExpansionUnit> load_expansions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open expansion file '" + path + "'");
    std::vector<ExpansionUnit> units;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            ordered_json record = ordered_json::parse(line);
            units.push_back(ExpansionUnit{record.at("doc_id").get<std::string>(),
                                          expansion_kind_from_string(record.at("kind").get<std::string>()),
                                          record.at("text").get<std::string>()});
        } catch (const std::exception& e) {
            throw ParseError("expansion file line " + std::to_string(line_no) + ": " + e.what());
        }
        if (units.back().text.empty())
            throw ParseError("expansion file line " + std::to_string(line_no) + ": empty text");
    }
    return units;
}

std::string iso8601_utc_now() {
    std::time_t now = std::time(nullptr);
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

FailureLedger::FailureLedger(const std::string& path) : path_(path) {}

void FailureLedger::record(const std::string& doc_id, const std::string& error_kind,
                           const std::string& excerpt) {
    std::lock_guard lock(mutex_);
    std::ofstream out(path_, std::ios::app);
    if (!out) {
        spdlog::error("cannot append to failure ledger '{}'", path_);
        return;
    }
    ordered_json record{{"doc_id", doc_id}, {"error_kind", error_kind}, {"raw_excerpt", excerpt}};
    out << record.dump() << '\n';
}

// ---------------------------------------------------------------------------
// Corpus-scale runners

namespace {

struct DocOutcome {
    std::vector<std::string> lines;  // records to append, already serialized
    int repairs = 0;
    bool parse_failed = false;
    std::string parse_error;
    bool transport_failed = false;
    std::string transport_error;
};

template <typename WorkFn>
GenerateStats run_pool(const std::vector<const Document*>& docs, const GenerateOptions& options,
                       std::ostream& out, FailureLedger* ledger,
                       const std::unordered_set<std::string>& already_done, WorkFn work) {
    GenerateStats stats;
    const int parallelism = std::max(1, options.parallelism);

    std::vector<const Document*> pending;
    for (const Document* doc : docs) {
        if (already_done.count(doc->doc_id)) {
            ++stats.skipped;
            continue;
        }
        pending.push_back(doc);
    }

    std::optional<std::string> abort_error;
    for (std::size_t base = 0; base < pending.size() && !abort_error;
         base += static_cast<std::size_t>(parallelism)) {
        std::size_t end = std::min(pending.size(), base + static_cast<std::size_t>(parallelism));
        std::vector<std::future<DocOutcome>> batch;
        for (std::size_t i = base; i < end; ++i)
            batch.push_back(std::async(std::launch::async, work, pending[i]));
        for (std::size_t i = base; i < end; ++i) {
            DocOutcome outcome = batch[i - base].get();
            if (abort_error) continue;  // drain remaining futures without writing
            if (outcome.transport_failed) {
                if (ledger) ledger->record(pending[i]->doc_id, "transport", outcome.transport_error);
                abort_error = outcome.transport_error;
                continue;
            }
            if (outcome.parse_failed) {
                ++stats.failed;
                if (ledger) ledger->record(pending[i]->doc_id, "parse_error", outcome.parse_error);
                continue;
            }
            for (const std::string& line : outcome.lines) out << line << '\n';
            out.flush();
            stats.repaired += static_cast<std::size_t>(outcome.repairs);
            ++stats.generated;
        }
    }
    if (abort_error) throw GenerationError(*abort_error);
    return stats;
}

std::string dataset_for(const Document& doc, const GenerateOptions& options) {
    return !options.dataset_name.empty() ? options.dataset_name : doc.dataset_tag;
}

}  // namespace

GenerateStats generate_corpus_scenarios(const std::vector<const Document*>& docs, ChatClient& client,
                                        const GenerateOptions& options, std::ostream& out,
                                        FailureLedger* ledger,
                                        const std::unordered_set<std::string>& already_done) {
    const std::string created_at = iso8601_utc_now();
    auto work = [&](const Document* doc) {
        DocOutcome outcome;
        try {
            GenerationOutcome generated = generate_scenarios(*doc, client, options.prompt_kind,
                                                             dataset_for(*doc, options),
                                                             options.parse_mode, options.max_doc_chars);
            outcome.repairs = generated.repair_count;
            std::vector<Scenario>& scenarios = generated.scenarios;
            if (options.max_scenarios > 0 &&
                scenarios.size() > static_cast<std::size_t>(options.max_scenarios))
                scenarios.resize(static_cast<std::size_t>(options.max_scenarios));
            for (const Scenario& s : scenarios)
                outcome.lines.push_back(scenario_to_jsonl(s, options.generator_name, created_at));
        } catch (const GenerationError& e) {
            outcome.transport_failed = true;
            outcome.transport_error = e.what();
        } catch (const ParseError& e) {
            outcome.parse_failed = true;
            outcome.parse_error = e.what();
        } catch (const ContractError& e) {
            outcome.parse_failed = true;
            outcome.parse_error = e.what();
        }
        return outcome;
    };
    return run_pool(docs, options, out, ledger, already_done, work);
}

GenerateStats generate_corpus_expansions(const std::vector<const Document*>& docs, ChatClient& client,
                                         ExpansionKind kind, const GenerateOptions& options,
                                         std::ostream& out, FailureLedger* ledger,
                                         const std::unordered_set<std::string>& already_done) {
    auto work = [&](const Document* doc) {
        DocOutcome outcome;
        try {
            auto units = generate_expansion(*doc, client, kind, dataset_for(*doc, options),
                                            options.parse_mode, options.max_doc_chars);
            for (const ExpansionUnit& unit : units) outcome.lines.push_back(expansion_to_jsonl(unit));
        } catch (const GenerationError& e) {
            outcome.transport_failed = true;
            outcome.transport_error = e.what();
        } catch (const ContractError& e) {
            outcome.parse_failed = true;
            outcome.parse_error = e.what();
        } catch (const ParseError& e) {
            outcome.parse_failed = true;
            outcome.parse_error = e.what();
        }
        return outcome;
    };
    return run_pool(docs, options, out, ledger, already_done, work);
}

}  // namespace spike
