#pragma once
// Scenario generation: prompt construction, chat-model driving with one
// repair round, structured-output parsing into Scenarios, rendering of
// indexable units, and the pseudo-query / summary expansion baselines.

#include "spike/chat.hpp"
#include "spike/core.hpp"

#include <iosfwd>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

namespace spike {

enum class PromptKind { teacher_3step, generator_instruction, pseudo_query, summary };
enum class ParseMode { strict, lenient };
enum class ExpansionKind { pseudo_query, summary };

std::string to_string(PromptKind kind);
PromptKind prompt_kind_from_string(const std::string& s);
std::string to_string(ExpansionKind kind);
ExpansionKind expansion_kind_from_string(const std::string& s);

struct GenerationRequest {
    Document document;
    PromptKind prompt_kind = PromptKind::teacher_3step;
    std::string dataset_name;            // substituted into the {dataset} slot
    std::size_t max_doc_chars = 24000;   // document text guard, tail-truncated
};

// Deterministic prompt text; document text is appended under the
// "[Text Content]" marker and tail-truncated at the guard with a marker.
// Throws ContractError when the template has a {dataset} slot and
// dataset_name is empty.
std::string build_prompt(const GenerationRequest& req);

// Parses one JSON scenario object (teacher or generator shape, store records
// too). Accepted key spellings are case-insensitive with space/underscore
// folding. In strict mode every information need must start with
// "A User wants to know"; lenient keeps nonconforming needs with a warning.
Scenario parse_scenario_json(const std::string& text, const std::string& doc_id, ParseMode mode);

// Same, but tolerates a top-level array of scenario objects.
std::vector<Scenario> parse_scenarios_json(const std::string& text, const std::string& doc_id,
                                           ParseMode mode);

struct GenerationOutcome {
    std::vector<Scenario> scenarios;
    int repair_count = 0;  // 0 or 1
};

// One model call (plus one reprompt-with-error repair on parse failure).
// Transport exhaustion surfaces as GenerationError; a second parse failure
// as ParseError carrying an excerpt of the raw response.
GenerationOutcome generate_scenarios(const Document& doc, ChatClient& client, PromptKind kind,
                                     const std::string& dataset_name,
                                     ParseMode mode = ParseMode::lenient,
                                     std::size_t max_doc_chars = 24000);

struct ExpansionUnit {
    std::string doc_id;
    ExpansionKind kind = ExpansionKind::pseudo_query;
    std::string text;

    bool operator==(const ExpansionUnit&) const = default;
};

// pseudo_query yields exactly 3 units, summary exactly 1. In strict mode a
// wrong pseudo-query count is a ContractError; lenient truncates extras and
// keeps a short count with a warning.
std::vector<ExpansionUnit> generate_expansion(const Document& doc, ChatClient& client,
                                              ExpansionKind kind, const std::string& dataset_name,
                                              ParseMode mode = ParseMode::lenient,
                                              std::size_t max_doc_chars = 24000);

// Pure rendering of retrieval texts. Unit counts: M -> 1, all other modes ->
// one per (need, explanation) pair. Unit ids are "<scenario_id>#<mode>#<idx>"
// with a zero-padded index, stable across runs.
std::vector<ScenarioUnit> render_units(const Scenario& scenario, ComponentMode mode);

struct UnitRef {
    std::string scenario_id;
    ComponentMode mode = ComponentMode::topic_explanation;
    int pair_index = 0;
};
UnitRef parse_unit_id(const std::string& unit_id);

// ---------------------------------------------------------------------------
// Scenario / expansion stores (JSONL)

std::string scenario_to_jsonl(const Scenario& scenario, const std::string& generator_name,
                              const std::string& created_at);
std::vector<Scenario> load_scenarios(const std::string& path);
std::string expansion_to_jsonl(const ExpansionUnit& unit);
std::vector<ExpansionUnit> load_expansions(const std::string& path);

std::string iso8601_utc_now();

// Append-only JSONL of {doc_id, error_kind, raw_excerpt}; writes are
// serialized through one lock.
class FailureLedger {
public:
    explicit FailureLedger(const std::string& path);
    void record(const std::string& doc_id, const std::string& error_kind, const std::string& raw_excerpt);

private:
    std::mutex mutex_;
    std::string path_;
};

// ---------------------------------------------------------------------------
// Corpus-scale generation

struct GenerateOptions {
    PromptKind prompt_kind = PromptKind::teacher_3step;
    std::string dataset_name;  // overrides per-document dataset tags when set
    ParseMode parse_mode = ParseMode::lenient;
    int parallelism = 4;
    int max_scenarios = 0;  // per document; 0 keeps the adaptive count
    std::size_t max_doc_chars = 24000;
    std::string generator_name = "chat";
};

struct GenerateStats {
    std::size_t generated = 0;  // documents with output written
    std::size_t skipped = 0;    // already present in the output (resume)
    std::size_t failed = 0;     // parse failures recorded in the ledger
    std::size_t repaired = 0;   // documents that needed one repair round
};

// Streams documents through the generator with a bounded worker pool,
// writing scenario records in input order. Documents whose ids appear in
// `already_done` are skipped (resume). Parse failures go to the ledger and
// the run continues; transport exhaustion stops the run (GenerationError)
// with all completed output preserved.
GenerateStats generate_corpus_scenarios(const std::vector<const Document*>& docs, ChatClient& client,
                                        const GenerateOptions& options, std::ostream& out,
                                        FailureLedger* ledger,
                                        const std::unordered_set<std::string>& already_done);

// Same contract for expansion baselines; records ExpansionUnit lines.
GenerateStats generate_corpus_expansions(const std::vector<const Document*>& docs, ChatClient& client,
                                         ExpansionKind kind, const GenerateOptions& options,
                                         std::ostream& out, FailureLedger* ledger,
                                         const std::unordered_set<std::string>& already_done);

}  // namespace spike
