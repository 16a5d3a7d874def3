#pragma once
// Evaluation: truncated nDCG with linear gain, TREC run files, report
// aggregation with per-dataset macro-averages and improvement rates, and the
// component-mode/alpha and candidate-size sweeps.

#include "spike/core.hpp"
#include "spike/embedding.hpp"
#include "spike/index_store.hpp"
#include "spike/retrieval.hpp"

#include <iosfwd>
#include <map>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <string>
#include <vector>

namespace spike {

struct NdcgValue {
    double value = 0.0;
    bool skipped = false;  // no relevant documents for this query
};

// DCG = sum grade_i / log2(i+1) over the top k, IDCG from the ideal ordering
// of all judged documents truncated at k. Linear gain. Returns 0 with the
// skip flag when the query has no relevant documents.
NdcgValue ndcg_at_k(const RankedList& ranked, const Qrels& qrels, int k = 10);

struct EvalQuery {
    std::string query_id;
    std::string text;
    std::string dataset_tag;
};

// JSONL {"id": str, "text": str, "dataset": str?}.
std::vector<EvalQuery> load_queries(const std::string& path);

struct EvalReport {
    int k = 10;
    std::map<std::string, double> per_query;
    std::map<std::string, double> per_dataset;  // macro mean over the dataset's queries
    double average = 0.0;                       // macro mean over datasets
    std::vector<std::string> skipped;           // queries without relevant judgments
    std::optional<double> baseline_average;
    std::optional<double> improvement_rate;     // (average - baseline) / baseline
};

double improvement_rate(double baseline_average, double average);

// "query_id Q0 doc_id rank score tag", one line per entry.
void write_run_file(std::ostream& out, const RankedList& ranked, const std::string& tag);

struct EvalOptions {
    RetrievalParams params;
    int parallelism = 4;
    std::string run_tag = "spike";
    std::optional<double> baseline_average;
};

// Retrieves every query (parallel over a shared index), optionally writing a
// TREC run file, and aggregates nDCG@k into a report.
EvalReport evaluate_run(const std::vector<EvalQuery>& queries, const DualIndex& index,
                        const Qrels& qrels, const EvalOptions& options,
                        const EmbeddingProviderConfig& provider_cfg, std::ostream* run_out = nullptr);

nlohmann::json report_to_json(const EvalReport& report);
std::string format_report(const EvalReport& report);  // scores x100, one decimal

// ---------------------------------------------------------------------------
// Sweeps

struct AblationCell {
    ComponentMode mode = ComponentMode::topic_explanation;
    double alpha = 0.0;
    double avg_ndcg = 0.0;
};

// Full cross-product of component modes and relevance weights. Every mode
// must have an index built from the same corpus and scenarios.
std::vector<AblationCell> ablation_sweep(const std::map<ComponentMode, const DualIndex*>& indexes,
                                         const std::vector<EvalQuery>& queries, const Qrels& qrels,
                                         const std::vector<double>& alpha_grid,
                                         const EvalOptions& base_options,
                                         const EmbeddingProviderConfig& provider_cfg);

struct KPrimeCell {
    std::optional<int> k_prime;  // nullopt = exhaustive
    double avg_ndcg = 0.0;
};

std::vector<KPrimeCell> kprime_sweep(const DualIndex& index, const std::vector<EvalQuery>& queries,
                                     const Qrels& qrels, const std::vector<std::optional<int>>& k_primes,
                                     const EvalOptions& base_options,
                                     const EmbeddingProviderConfig& provider_cfg);

void write_ablation_csv(std::ostream& out, const std::vector<AblationCell>& cells);
std::string format_ablation_table(const std::vector<AblationCell>& cells);
void write_kprime_csv(std::ostream& out, const std::vector<KPrimeCell>& cells);
std::string format_kprime_table(const std::vector<KPrimeCell>& cells);

}  // namespace spike
