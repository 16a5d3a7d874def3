#pragma once
// Core domain model: documents, scenarios, rendered scenario units, corpora,
// relevance judgments and ranked lists, plus the loaders for the on-disk
// corpus/qrels formats.

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace spike {

// ---------------------------------------------------------------------------
// Errors

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input text or files (JSON, JSONL, TSV, model output).
class ParseError : public Error {
public:
    using Error::Error;
};

// Violated preconditions: dimension mismatches, out-of-range parameters,
// references to unknown ids.
class ContractError : public Error {
public:
    using Error::Error;
};

// Remote provider failures (HTTP status, transport, malformed wire payload).
class ProviderError : public Error {
public:
    using Error::Error;
};

// Index file with wrong magic or an unsupported version.
class FormatError : public Error {
public:
    using Error::Error;
};

// Index file that fails its checksum or is truncated.
class IntegrityError : public Error {
public:
    using Error::Error;
};

// Scenario/expansion generation that exhausted its transport retries.
class GenerationError : public Error {
public:
    using Error::Error;
};

// Judge responses with no parseable score.
class ScoringError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Domain types

struct Document {
    std::string doc_id;
    std::string text;
    std::string dataset_tag;  // empty when the corpus line carries no dataset

    bool operator==(const Document&) const = default;
};

struct NeedExplanation {
    std::string need;
    std::string explanation;

    bool operator==(const NeedExplanation&) const = default;
};

// One generated reasoning unit for a document: main topic, key aspects and
// (information need, explanation) pairs. Key aspects are stored for prompt
// fidelity but are never rendered into retrieval units.
struct Scenario {
    std::string scenario_id;
    std::string doc_id;
    std::string main_topic;
    std::vector<std::string> key_aspects;
    std::vector<NeedExplanation> needs;

    bool operator==(const Scenario&) const = default;
};

// Which scenario components are rendered into the indexed text.
enum class ComponentMode { main_topic, info_need, explanation, topic_explanation, need_explanation };

std::string to_string(ComponentMode mode);
ComponentMode component_mode_from_string(const std::string& s);

// A rendered retrieval text for one scenario under a component mode.
// Rendering is a pure function of (Scenario, mode); unit ids are stable.
struct ScenarioUnit {
    std::string unit_id;
    std::string doc_id;
    std::string scenario_id;
    ComponentMode mode = ComponentMode::topic_explanation;
    std::string text;

    bool operator==(const ScenarioUnit&) const = default;
};

// Documents keyed by id, iteration in insertion (file) order.
class Corpus {
public:
    void add(Document doc);

    bool contains(const std::string& doc_id) const { return by_id_.count(doc_id) > 0; }
    const Document* find(const std::string& doc_id) const;
    const Document& at(const std::string& doc_id) const;

    std::size_t size() const { return docs_.size(); }
    bool empty() const { return docs_.empty(); }
    const std::vector<Document>& documents() const { return docs_; }

    bool operator==(const Corpus& other) const { return docs_ == other.docs_; }

private:
    std::vector<Document> docs_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

// Graded relevance judgments per query. Absent pairs mean grade 0.
class Qrels {
public:
    // Last write wins for duplicate (query, doc) pairs.
    void set(const std::string& query_id, const std::string& doc_id, int grade);

    int grade(const std::string& query_id, const std::string& doc_id) const;
    bool has_query(const std::string& query_id) const { return by_query_.count(query_id) > 0; }
    const std::map<std::string, int>* judgments(const std::string& query_id) const;
    std::size_t num_queries() const { return by_query_.size(); }
    const std::map<std::string, std::map<std::string, int>>& all() const { return by_query_; }

    bool operator==(const Qrels&) const = default;

private:
    std::map<std::string, std::map<std::string, int>> by_query_;
};

struct RankedEntry {
    std::string doc_id;
    double score = 0.0;

    bool operator==(const RankedEntry&) const = default;
};

// Ordered results for one query. Scores non-increasing, ties broken by
// ascending doc_id, no duplicate doc ids.
struct RankedList {
    std::string query_id;
    std::vector<RankedEntry> entries;

    bool operator==(const RankedList&) const = default;
};

// Canonical constructor: sorts by (score desc, doc_id asc) and truncates to k
// entries (k <= 0 keeps everything). Throws ContractError on duplicate ids.
RankedList make_ranked_list(std::string query_id, std::vector<RankedEntry> entries, int k = 0);

// ---------------------------------------------------------------------------
// Loaders

// JSONL corpus, one document per line: {"id": str, "text": str, "dataset": str?}.
// Malformed lines and duplicate ids raise ParseError naming the line/id.
Corpus load_corpus(const std::string& path);

// TSV qrels, "query_id<TAB>doc_id<TAB>grade". Non-integer grades raise
// ParseError with the line number; negative grades raise ContractError.
// Duplicate (query, doc) lines: last write wins, with a warning.
Qrels load_qrels(const std::string& path);

}  // namespace spike
