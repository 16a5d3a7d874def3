#pragma once
// Retrieval-augmented generation: context assembly (document-only, with the
// winning scenario, or oracle gold documents), answer generation, and rubric
// judging on a 0-100 scale.

#include "spike/chat.hpp"
#include "spike/core.hpp"
#include "spike/embedding.hpp"
#include "spike/eval.hpp"
#include "spike/index_store.hpp"
#include "spike/retrieval.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace spike {

enum class RagContextMode { document_only, with_scenario, oracle };

std::string to_string(RagContextMode mode);
RagContextMode rag_mode_from_string(const std::string& s);

// Scenario lookup by id and by owning document.
class ScenarioStore {
public:
    ScenarioStore() = default;
    explicit ScenarioStore(std::vector<Scenario> scenarios);

    const Scenario* find(const std::string& scenario_id) const;
    const std::vector<Scenario>& all() const { return scenarios_; }

private:
    std::vector<Scenario> scenarios_;
    std::map<std::string, std::size_t> by_id_;
};

// Deterministic numbered concatenation of the top documents. with_scenario
// adds one "Scenario:" line per document holding the winning unit's main
// topic and explanation. oracle ignores the hits and uses the gold ids.
std::string assemble_context(std::span<const SearchHit> hits, std::size_t top_n, const Corpus& corpus,
                             const ScenarioStore& scenarios, RagContextMode mode,
                             const std::vector<std::string>* gold_doc_ids = nullptr);

std::string build_answer_prompt(const std::string& question, const std::string& context);
std::string answer_question(const std::string& question, const std::string& context, ChatClient& client);

struct JudgeScore {
    int score = 0;
    std::string reason;
};

std::string build_judge_prompt(const std::string& problem, const std::string& predicted,
                               const std::string& gold);

// Parses the REASON/SCORE rubric output. Accepts "SCORE:" followed by the
// integer on the same or the next line; out-of-range values clamp to [0, 100]
// with a warning. Throws ScoringError when no integer follows SCORE.
JudgeScore parse_judge_response(const std::string& text);

// One judge call plus one reprompt when the response has no parseable score.
JudgeScore score_answer(const std::string& problem, const std::string& predicted,
                        const std::string& gold, ChatClient& judge);

struct RagResult {
    std::string query_id;
    std::string answer;
    int score = 0;
    std::string judge_reason;
};

// JSONL {"id": str, "answer": str}.
std::map<std::string, std::string> load_gold_answers(const std::string& path);

struct RagOptions {
    RagContextMode mode = RagContextMode::with_scenario;
    std::size_t top_n = 10;
    int parallelism = 2;
    RetrievalParams params;
};

// Full pipeline per query: retrieve (or collect gold docs), assemble context,
// answer, judge, and append a transcript record
// {query_id, query, context_hash, answer, score, reason} per query.
std::vector<RagResult> run_rag(const std::vector<EvalQuery>& queries, const DualIndex& index,
                               const Corpus& corpus, const ScenarioStore& scenarios,
                               const std::map<std::string, std::string>& gold_answers,
                               const Qrels* qrels_for_oracle, ChatClient& generator, ChatClient& judge,
                               const RagOptions& options, const EmbeddingProviderConfig& provider_cfg,
                               std::ostream* transcript);

}  // namespace spike
