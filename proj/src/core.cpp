#include "spike/core.hpp"

#include <spdlog/spdlog.h>

#include <fstream>
#include <nlohmann/json.hpp>

namespace spike {

using nlohmann::json;

std::string to_string(ComponentMode mode) {
    switch (mode) {
        case ComponentMode::main_topic: return "m";
        case ComponentMode::info_need: return "i";
        case ComponentMode::explanation: return "e";
        case ComponentMode::topic_explanation: return "m_e";
        case ComponentMode::need_explanation: return "i_e";
    }
    throw ContractError("unknown component mode");
}

ComponentMode component_mode_from_string(const std::string& s) {
    if (s == "m") return ComponentMode::main_topic;
    if (s == "i") return ComponentMode::info_need;
    if (s == "e") return ComponentMode::explanation;
    if (s == "m_e") return ComponentMode::topic_explanation;
    if (s == "i_e") return ComponentMode::need_explanation;
    throw ContractError("unknown component mode '" + s + "' (expected m, i, e, m_e or i_e)");
}

void Corpus::add(Document doc) {
    if (doc.doc_id.empty()) throw ContractError("document with empty id");
    if (doc.text.empty()) throw ContractError("document '" + doc.doc_id + "' has empty text");
    auto [it, inserted] = by_id_.emplace(doc.doc_id, docs_.size());
    if (!inserted) throw ContractError("duplicate document id '" + doc.doc_id + "'");
    docs_.push_back(std::move(doc));
}

const Document* Corpus::find(const std::string& doc_id) const {
    auto it = by_id_.find(doc_id);
    return it == by_id_.end() ? nullptr : &docs_[it->second];
}

const Document& Corpus::at(const std::string& doc_id) const {
    const Document* doc = find(doc_id);
    if (!doc) throw ContractError("unknown document id '" + doc_id + "'");
    return *doc;
}

void Qrels::set(const std::string& query_id, const std::string& doc_id, int grade) {
    if (grade < 0) throw ContractError("negative relevance grade for (" + query_id + ", " + doc_id + ")");
    by_query_[query_id][doc_id] = grade;
}

int Qrels::grade(const std::string& query_id, const std::string& doc_id) const {
    auto q = by_query_.find(query_id);
    if (q == by_query_.end()) return 0;
    auto d = q->second.find(doc_id);
    return d == q->second.end() ? 0 : d->second;
}

const std::map<std::string, int>* Qrels::judgments(const std::string& query_id) const {
    auto q = by_query_.find(query_id);
    return q == by_query_.end() ? nullptr : &q->second;
}

RankedList make_ranked_list(std::string query_id, std::vector<RankedEntry> entries, int k) {
    std::sort(entries.begin(), entries.end(), [](const RankedEntry& a, const RankedEntry& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    for (std::size_t i = 1; i < entries.size(); ++i) {
        if (entries[i].doc_id == entries[i - 1].doc_id)
            throw ContractError("duplicate doc id '" + entries[i].doc_id + "' in ranked list");
    }
    if (k > 0 && entries.size() > static_cast<std::size_t>(k)) entries.resize(static_cast<std::size_t>(k));
    return RankedList{std::move(query_id), std::move(entries)};
}

Corpus load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open corpus file '" + path + "'");

    Corpus corpus;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json doc;
        try {
            doc = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError("corpus line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!doc.is_object() || !doc.contains("id") || !doc.contains("text"))
            throw ParseError("corpus line " + std::to_string(line_no) + ": expected object with id and text");
        Document d;
        try {
            d.doc_id = doc.at("id").get<std::string>();
            d.text = doc.at("text").get<std::string>();
            if (doc.contains("dataset") && !doc.at("dataset").is_null())
                d.dataset_tag = doc.at("dataset").get<std::string>();
        } catch (const json::exception& e) {
            throw ParseError("corpus line " + std::to_string(line_no) + ": " + e.what());
        }
        try {
            corpus.add(std::move(d));
        } catch (const ContractError& e) {
            throw ParseError("corpus line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return corpus;
}

Qrels load_qrels(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open qrels file '" + path + "'");

    Qrels qrels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto tab1 = line.find('\t');
        auto tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
        if (tab2 == std::string::npos)
            throw ParseError("qrels line " + std::to_string(line_no) + ": expected query<TAB>doc<TAB>grade");
        std::string query_id = line.substr(0, tab1);
        std::string doc_id = line.substr(tab1 + 1, tab2 - tab1 - 1);
        std::string grade_str = line.substr(tab2 + 1);
        int grade = 0;
        try {
            std::size_t pos = 0;
            grade = std::stoi(grade_str, &pos);
            if (pos != grade_str.size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw ParseError("qrels line " + std::to_string(line_no) + ": grade '" + grade_str +
                             "' is not an integer");
        }
        if (grade < 0)
            throw ContractError("qrels line " + std::to_string(line_no) + ": negative grade " +
                                std::to_string(grade));
        if (qrels.judgments(query_id) && qrels.judgments(query_id)->count(doc_id)) {
            spdlog::warn("qrels line {}: duplicate ({}, {}), keeping the later grade {}", line_no, query_id,
                         doc_id, grade);
        }
        qrels.set(query_id, doc_id, grade);
    }
    return qrels;
}

}  // namespace spike
