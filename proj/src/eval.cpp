#include "spike/eval.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <nlohmann/json.hpp>
#include <sstream>

namespace spike {

using nlohmann::json;

NdcgValue ndcg_at_k(const RankedList& ranked, const Qrels& qrels, int k) {
    if (k <= 0) throw ContractError("ndcg cutoff must be positive");

    const std::map<std::string, int>* judged = qrels.judgments(ranked.query_id);
    std::vector<int> ideal_grades;
    if (judged)
        for (const auto& [doc_id, grade] : *judged)
            if (grade > 0) ideal_grades.push_back(grade);
    if (ideal_grades.empty()) return {0.0, true};

    std::sort(ideal_grades.begin(), ideal_grades.end(), std::greater<int>());
    double idcg = 0.0;
    for (std::size_t i = 0; i < std::min<std::size_t>(ideal_grades.size(), static_cast<std::size_t>(k)); ++i)
        idcg += ideal_grades[i] / std::log2(static_cast<double>(i) + 2.0);

    double dcg = 0.0;
    const std::size_t depth = std::min(ranked.entries.size(), static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < depth; ++i)
        dcg += qrels.grade(ranked.query_id, ranked.entries[i].doc_id) /
               std::log2(static_cast<double>(i) + 2.0);

    return {dcg / idcg, false};
}

std::vector<EvalQuery> load_queries(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open queries file '" + path + "'");
    std::vector<EvalQuery> queries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            json record = json::parse(line);
            EvalQuery q;
            q.query_id = record.at("id").get<std::string>();
            q.text = record.at("text").get<std::string>();
            if (record.contains("dataset") && !record.at("dataset").is_null())
                q.dataset_tag = record.at("dataset").get<std::string>();
            queries.push_back(std::move(q));
        } catch (const json::exception& e) {
            throw ParseError("queries file line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return queries;
}

double improvement_rate(double baseline_average, double average) {
    if (baseline_average <= 0.0) throw ContractError("baseline average must be positive");
    return (average - baseline_average) / baseline_average;
}

void write_run_file(std::ostream& out, const RankedList& ranked, const std::string& tag) {
    char score_buf[32];
    for (std::size_t i = 0; i < ranked.entries.size(); ++i) {
        std::snprintf(score_buf, sizeof(score_buf), "%.6f", ranked.entries[i].score);
        out << ranked.query_id << " Q0 " << ranked.entries[i].doc_id << ' ' << (i + 1) << ' ' << score_buf
            << ' ' << tag << '\n';
    }
}

namespace {

// Runs fn(0..n-1) on a bounded pool, results in input order.
template <typename T, typename Fn>
std::vector<T> parallel_map(std::size_t n, int parallelism, Fn fn) {
    std::vector<T> results(n);
    const std::size_t window = static_cast<std::size_t>(std::max(1, parallelism));
    for (std::size_t base = 0; base < n; base += window) {
        const std::size_t end = std::min(n, base + window);
        std::vector<std::future<T>> batch;
        for (std::size_t i = base; i < end; ++i)
            batch.push_back(std::async(std::launch::async, fn, i));
        for (std::size_t i = base; i < end; ++i) results[i] = batch[i - base].get();
    }
    return results;
}

EvalReport aggregate(const std::vector<EvalQuery>& queries, const std::vector<NdcgValue>& values,
                     const std::vector<bool>& missing, int k, std::optional<double> baseline) {
    EvalReport report;
    report.k = k;
    std::map<std::string, std::pair<double, std::size_t>> dataset_sums;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        if (missing[i] || values[i].skipped) {
            report.skipped.push_back(queries[i].query_id);
            continue;
        }
        report.per_query[queries[i].query_id] = values[i].value;
        auto& [sum, count] = dataset_sums[queries[i].dataset_tag];
        sum += values[i].value;
        ++count;
    }
    double dataset_total = 0.0;
    for (const auto& [tag, sum_count] : dataset_sums) {
        const double mean = sum_count.first / static_cast<double>(sum_count.second);
        report.per_dataset[tag] = mean;
        dataset_total += mean;
    }
    report.average = dataset_sums.empty() ? 0.0 : dataset_total / static_cast<double>(dataset_sums.size());
    if (baseline) {
        report.baseline_average = baseline;
        report.improvement_rate = improvement_rate(*baseline, report.average);
    }
    return report;
}

EvalReport evaluate_vectors(const std::vector<EvalQuery>& queries,
                            const std::vector<Embedding>& query_vectors, const DualIndex& index,
                            const Qrels& qrels, const EvalOptions& options, std::ostream* run_out) {
    auto results = parallel_map<SearchResult>(queries.size(), options.parallelism, [&](std::size_t i) {
        return retrieve_with_vector(query_vectors[i], index, options.params, queries[i].query_id);
    });

    std::vector<NdcgValue> values(queries.size());
    std::vector<bool> missing(queries.size(), false);
    for (std::size_t i = 0; i < queries.size(); ++i) {
        if (run_out) write_run_file(*run_out, results[i].ranked, options.run_tag);
        if (!qrels.has_query(queries[i].query_id)) {
            missing[i] = true;
            spdlog::warn("query '{}' has no qrels entry, skipping", queries[i].query_id);
            continue;
        }
        values[i] = ndcg_at_k(results[i].ranked, qrels, options.params.k);
    }
    return aggregate(queries, values, missing, options.params.k, options.baseline_average);
}

std::vector<Embedding> embed_queries(const std::vector<EvalQuery>& queries,
                                     const EmbeddingProviderConfig& provider_cfg,
                                     const DualIndex& index) {
    auto provider = make_embedding_provider(provider_cfg);
    if (provider->fingerprint() != index.provider_fingerprint)
        spdlog::warn("query provider fingerprint {} differs from index fingerprint {}",
                     provider->fingerprint(), index.provider_fingerprint);
    std::vector<std::string> texts;
    texts.reserve(queries.size());
    for (const EvalQuery& q : queries) texts.push_back(q.text);
    return provider->embed(texts, EmbedRole::query);
}

}  // namespace

EvalReport evaluate_run(const std::vector<EvalQuery>& queries, const DualIndex& index,
                        const Qrels& qrels, const EvalOptions& options,
                        const EmbeddingProviderConfig& provider_cfg, std::ostream* run_out) {
    if (queries.empty()) throw ContractError("no queries to evaluate");
    const std::vector<Embedding> vectors = embed_queries(queries, provider_cfg, index);
    return evaluate_vectors(queries, vectors, index, qrels, options, run_out);
}

nlohmann::json report_to_json(const EvalReport& report) {
    json out{{"metric", "ndcg@" + std::to_string(report.k)},
             {"gain", "linear"},
             {"discount", "log2(rank+1)"},
             {"average", report.average},
             {"per_dataset", report.per_dataset},
             {"per_query", report.per_query},
             {"skipped_queries", report.skipped}};
    if (report.baseline_average) out["baseline_average"] = *report.baseline_average;
    if (report.improvement_rate) out["improvement_rate"] = *report.improvement_rate;
    return out;
}

std::string format_report(const EvalReport& report) {
    // Scores x100 with one decimal, the usual table convention.
    char buf[128];
    std::ostringstream out;
    out << "nDCG@" << report.k << " (linear gain, log2 discount)\n";
    for (const auto& [tag, score] : report.per_dataset) {
        std::snprintf(buf, sizeof(buf), "  %-16s %5.1f\n", (tag.empty() ? "(untagged)" : tag.c_str()),
                      score * 100.0);
        out << buf;
    }
    std::snprintf(buf, sizeof(buf), "  %-16s %5.1f\n", "average", report.average * 100.0);
    out << buf;
    if (report.improvement_rate) {
        std::snprintf(buf, sizeof(buf), "  improvement     %+5.1f%%\n", *report.improvement_rate * 100.0);
        out << buf;
    }
    if (!report.skipped.empty()) out << "  skipped queries: " << report.skipped.size() << "\n";
    return out.str();
}

std::vector<AblationCell> ablation_sweep(const std::map<ComponentMode, const DualIndex*>& indexes,
                                         const std::vector<EvalQuery>& queries, const Qrels& qrels,
                                         const std::vector<double>& alpha_grid,
                                         const EvalOptions& base_options,
                                         const EmbeddingProviderConfig& provider_cfg) {
    if (indexes.empty()) throw ContractError("ablation sweep needs at least one mode index");
    for (const auto& [mode, index] : indexes)
        if (!index) throw ContractError("missing index for mode '" + to_string(mode) + "'");

    std::vector<Embedding> vectors;  // identical across modes: same provider
    std::vector<AblationCell> cells;
    for (const auto& [mode, index] : indexes) {
        if (vectors.empty()) vectors = embed_queries(queries, provider_cfg, *index);
        for (double alpha : alpha_grid) {
            EvalOptions options = base_options;
            options.params.alpha = alpha;
            EvalReport report = evaluate_vectors(queries, vectors, *index, qrels, options, nullptr);
            cells.push_back({mode, alpha, report.average});
        }
    }
    return cells;
}

std::vector<KPrimeCell> kprime_sweep(const DualIndex& index, const std::vector<EvalQuery>& queries,
                                     const Qrels& qrels, const std::vector<std::optional<int>>& k_primes,
                                     const EvalOptions& base_options,
                                     const EmbeddingProviderConfig& provider_cfg) {
    const std::vector<Embedding> vectors = embed_queries(queries, provider_cfg, index);
    std::vector<KPrimeCell> cells;
    for (const auto& k_prime : k_primes) {
        EvalOptions options = base_options;
        options.params.k_prime = k_prime;
        EvalReport report = evaluate_vectors(queries, vectors, index, qrels, options, nullptr);
        cells.push_back({k_prime, report.average});
    }
    return cells;
}

void write_ablation_csv(std::ostream& out, const std::vector<AblationCell>& cells) {
    out << "mode,alpha,avg_ndcg\n";
    char buf[64];
    for (const AblationCell& cell : cells) {
        std::snprintf(buf, sizeof(buf), "%s,%.2f,%.6f\n", to_string(cell.mode).c_str(), cell.alpha,
                      cell.avg_ndcg);
        out << buf;
    }
}

std::string format_ablation_table(const std::vector<AblationCell>& cells) {
    // Rows are modes, columns the alpha grid, cells x100 with one decimal.
    std::vector<double> alphas;
    std::vector<ComponentMode> modes;
    for (const AblationCell& cell : cells) {
        if (std::find(alphas.begin(), alphas.end(), cell.alpha) == alphas.end())
            alphas.push_back(cell.alpha);
        if (std::find(modes.begin(), modes.end(), cell.mode) == modes.end()) modes.push_back(cell.mode);
    }
    auto lookup = [&](ComponentMode mode, double alpha) -> const AblationCell* {
        for (const AblationCell& cell : cells)
            if (cell.mode == mode && cell.alpha == alpha) return &cell;
        return nullptr;
    };

    char buf[64];
    std::ostringstream out;
    out << "mode ";
    for (double alpha : alphas) {
        std::snprintf(buf, sizeof(buf), "  a=%.2f", alpha);
        out << buf;
    }
    out << '\n';
    for (ComponentMode mode : modes) {
        std::snprintf(buf, sizeof(buf), "%-5s", to_string(mode).c_str());
        out << buf;
        for (double alpha : alphas) {
            const AblationCell* cell = lookup(mode, alpha);
            if (cell)
                std::snprintf(buf, sizeof(buf), "  %6.1f", cell->avg_ndcg * 100.0);
            else
                std::snprintf(buf, sizeof(buf), "  %6s", "-");
            out << buf;
        }
        out << '\n';
    }
    return out.str();
}

void write_kprime_csv(std::ostream& out, const std::vector<KPrimeCell>& cells) {
    out << "k_prime,avg_ndcg\n";
    char buf[64];
    for (const KPrimeCell& cell : cells) {
        std::snprintf(buf, sizeof(buf), "%s,%.6f\n",
                      cell.k_prime ? std::to_string(*cell.k_prime).c_str() : "all", cell.avg_ndcg);
        out << buf;
    }
}

std::string format_kprime_table(const std::vector<KPrimeCell>& cells) {
    char buf[64];
    std::ostringstream out;
    out << "k'      avg nDCG\n";
    for (const KPrimeCell& cell : cells) {
        std::snprintf(buf, sizeof(buf), "%-7s %6.1f\n",
                      cell.k_prime ? std::to_string(*cell.k_prime).c_str() : "all",
                      cell.avg_ndcg * 100.0);
        out << buf;
    }
    return out.str();
}

}  // namespace spike
