#include "spike/rag.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <future>
#include <nlohmann/json.hpp>
#include <sstream>

#include "spike/scenario_gen.hpp"

namespace spike {

using nlohmann::ordered_json;

std::string to_string(RagContextMode mode) {
    switch (mode) {
        case RagContextMode::document_only: return "document_only";
        case RagContextMode::with_scenario: return "with_scenario";
        case RagContextMode::oracle: return "oracle";
    }
    throw ContractError("unknown rag context mode");
}

RagContextMode rag_mode_from_string(const std::string& s) {
    if (s == "document_only") return RagContextMode::document_only;
    if (s == "with_scenario") return RagContextMode::with_scenario;
    if (s == "oracle") return RagContextMode::oracle;
    throw ContractError("unknown rag context mode '" + s + "'");
}

ScenarioStore::ScenarioStore(std::vector<Scenario> scenarios) : scenarios_(std::move(scenarios)) {
    for (std::size_t i = 0; i < scenarios_.size(); ++i) by_id_.emplace(scenarios_[i].scenario_id, i);
}

const Scenario* ScenarioStore::find(const std::string& scenario_id) const {
    auto it = by_id_.find(scenario_id);
    return it == by_id_.end() ? nullptr : &scenarios_[it->second];
}

namespace {

// "Scenario: <main topic> — <explanation>" for the unit that won the max.
std::string scenario_line(const ScenarioStore& scenarios, const std::string& unit_id) {
    UnitRef ref = parse_unit_id(unit_id);
    const Scenario* scenario = scenarios.find(ref.scenario_id);
    if (!scenario) {
        spdlog::warn("winning unit '{}' has no scenario in the store", unit_id);
        return {};
    }
    std::size_t pair_index = static_cast<std::size_t>(ref.pair_index);
    if (pair_index >= scenario->needs.size()) {
        spdlog::warn("winning unit '{}' is out of range for scenario '{}'", unit_id, ref.scenario_id);
        return {};
    }
    return "Scenario: " + scenario->main_topic + " — " + scenario->needs[pair_index].explanation;
}

void append_document(std::string& context, std::size_t number, const std::string& text,
                     const std::string& scenario) {
    context += "Document " + std::to_string(number) + ":\n" + text + "\n";
    if (!scenario.empty()) context += scenario + "\n";
    context += "\n";
}

}  // namespace

std::string assemble_context(std::span<const SearchHit> hits, std::size_t top_n, const Corpus& corpus,
                             const ScenarioStore& scenarios, RagContextMode mode,
                             const std::vector<std::string>* gold_doc_ids) {
    std::string context;
    if (mode == RagContextMode::oracle) {
        if (!gold_doc_ids) throw ContractError("oracle context requires gold doc ids");
        std::size_t number = 1;
        for (const std::string& doc_id : *gold_doc_ids)
            append_document(context, number++, corpus.at(doc_id).text, {});
        return context;
    }

    const std::size_t depth = std::min(hits.size(), top_n);
    for (std::size_t i = 0; i < depth; ++i) {
        std::string line;
        if (mode == RagContextMode::with_scenario && hits[i].unit_id)
            line = scenario_line(scenarios, *hits[i].unit_id);
        append_document(context, i + 1, corpus.at(hits[i].doc_id).text, line);
    }
    return context;
}

std::string build_answer_prompt(const std::string& question, const std::string& context) {
    if (context.empty()) spdlog::warn("assembling an answer prompt with an empty context");
    return "Problem:\n" + question + "\n\nDocument:\n" + context +
           "\n\nBased on the provided documents, write an answer to the problem.";
}

std::string answer_question(const std::string& question, const std::string& context,
                            ChatClient& client) {
    return client.complete(build_answer_prompt(question, context));
}

std::string build_judge_prompt(const std::string& problem, const std::string& predicted,
                               const std::string& gold) {
    std::string prompt;
    prompt += "———- PROBLEM START ———-\n";
    prompt += problem + "\n";
    prompt += "———- PROBLEM END ———-\n";
    prompt += "———- STUDENT ANSWER START ———-\n";
    prompt += predicted + "\n";
    prompt += "———- STUDENT ANSWER END ———-\n";
    prompt += "———- REFERENCE ANSWER START ———-\n";
    prompt += gold + "\n";
    prompt += "———- REFERENCE ANSWER END ———-\n";
    prompt += "Criteria:\n";
    prompt += "0 - The student's answer is completely irrelevant or blank.\n";
    for (int level = 10; level <= 100; level += 10)
        prompt += std::to_string(level) + " - The student's answer addresses about " +
                  std::to_string(level) + "% of the reference content.\n";
    prompt += "Use the following format to give a score:\n";
    prompt += "REASON:\n";
    prompt += "Describe why you give a specific score\n";
    prompt += "SCORE:\n";
    prompt += "The score you give, e.g., 60\n";
    prompt += "Do not say anything after the score\n";
    return prompt;
}

namespace {

std::string trim_copy(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

}  // namespace

JudgeScore parse_judge_response(const std::string& text) {
    const std::string score_marker = "SCORE:";
    const std::string reason_marker = "REASON:";

    std::size_t score_pos = text.rfind(score_marker);
    if (score_pos == std::string::npos) throw ScoringError("judge response has no SCORE marker");

    std::string tail = trim_copy(text.substr(score_pos + score_marker.size()));
    std::size_t digits = 0;
    while (digits < tail.size() && std::isdigit(static_cast<unsigned char>(tail[digits]))) ++digits;
    if (digits == 0) throw ScoringError("judge response has no integer after SCORE");

    int score = std::stoi(tail.substr(0, digits));
    if (score < 0 || score > 100) {
        spdlog::warn("judge score {} out of range, clamping", score);
        score = std::clamp(score, 0, 100);
    }

    std::string reason;
    std::size_t reason_pos = text.find(reason_marker);
    if (reason_pos != std::string::npos && reason_pos < score_pos)
        reason = trim_copy(text.substr(reason_pos + reason_marker.size(), score_pos - reason_pos -
                                                                              reason_marker.size()));
    return {score, reason};
}

JudgeScore score_answer(const std::string& problem, const std::string& predicted,
                        const std::string& gold, ChatClient& judge) {
    const std::string prompt = build_judge_prompt(problem, predicted, gold);
    const std::string raw = judge.complete(prompt);
    try {
        return parse_judge_response(raw);
    } catch (const ScoringError& first_error) {
        spdlog::warn("judge response unparseable, reprompting once: {}", first_error.what());
        const std::string repair = prompt +
            "\n\nYour previous response could not be scored: " + std::string(first_error.what()) +
            "\nRespond again, ending with SCORE: followed by an integer between 0 and 100.";
        const std::string repaired = judge.complete(repair);
        try {
            return parse_judge_response(repaired);
        } catch (const ScoringError& second_error) {
            throw ScoringError(std::string(second_error.what()) + " (after one reprompt)");
        }
    }
}

std::map<std::string, std::string> load_gold_answers(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open gold answers file '" + path + "'");
    std::map<std::string, std::string> answers;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            ordered_json record = ordered_json::parse(line);
            answers[record.at("id").get<std::string>()] = record.at("answer").get<std::string>();
        } catch (const ordered_json::exception& e) {
            throw ParseError("gold answers line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return answers;
}

std::vector<RagResult> run_rag(const std::vector<EvalQuery>& queries, const DualIndex& index,
                               const Corpus& corpus, const ScenarioStore& scenarios,
                               const std::map<std::string, std::string>& gold_answers,
                               const Qrels* qrels_for_oracle, ChatClient& generator, ChatClient& judge,
                               const RagOptions& options, const EmbeddingProviderConfig& provider_cfg,
                               std::ostream* transcript) {
    if (options.mode == RagContextMode::oracle && !qrels_for_oracle)
        throw ContractError("oracle mode requires qrels for the gold document sets");

    auto worker = [&](const EvalQuery& query) {
        std::string context;
        if (options.mode == RagContextMode::oracle) {
            std::vector<std::string> gold_ids;
            if (const auto* judged = qrels_for_oracle->judgments(query.query_id))
                for (const auto& [doc_id, grade] : *judged)
                    if (grade > 0 && corpus.contains(doc_id)) gold_ids.push_back(doc_id);
            context = assemble_context({}, options.top_n, corpus, scenarios, options.mode, &gold_ids);
        } else {
            RetrievalParams params = options.params;
            params.k = std::max(params.k, static_cast<int>(options.top_n));
            if (params.k_prime && *params.k_prime < params.k) params.k_prime = params.k;
            SearchResult found = retrieve(query.text, index, params, provider_cfg, query.query_id);
            context = assemble_context(found.hits, options.top_n, corpus, scenarios, options.mode);
        }

        RagResult result;
        result.query_id = query.query_id;
        result.answer = answer_question(query.text, context, generator);
        auto gold = gold_answers.find(query.query_id);
        if (gold == gold_answers.end())
            throw ContractError("no gold answer for query '" + query.query_id + "'");
        JudgeScore judged = score_answer(query.text, result.answer, gold->second, judge);
        result.score = judged.score;
        result.judge_reason = judged.reason;
        return std::make_pair(result, context);
    };

    std::vector<RagResult> results;
    results.reserve(queries.size());
    const std::size_t window = static_cast<std::size_t>(std::max(1, options.parallelism));
    for (std::size_t base = 0; base < queries.size(); base += window) {
        const std::size_t end = std::min(queries.size(), base + window);
        std::vector<std::future<std::pair<RagResult, std::string>>> batch;
        for (std::size_t i = base; i < end; ++i)
            batch.push_back(std::async(std::launch::async, worker, queries[i]));
        for (std::size_t i = base; i < end; ++i) {
            auto [result, context] = batch[i - base].get();
            if (transcript) {
                std::ostringstream hash;
                hash << std::hex << fnv1a64(context);
                ordered_json record{{"query_id", result.query_id},  {"query", queries[i].text},
                                    {"context_hash", hash.str()},   {"answer", result.answer},
                                    {"score", result.score},        {"reason", result.judge_reason}};
                *transcript << record.dump() << '\n';
            }
            results.push_back(std::move(result));
        }
    }
    return results;
}

}  // namespace spike
