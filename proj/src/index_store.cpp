#include "spike/index_store.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <zlib.h>

namespace spike {

using nlohmann::json;

std::string to_string(ExpansionMode mode) {
    switch (mode) {
        case ExpansionMode::scenario: return "scenario";
        case ExpansionMode::pseudo_query: return "pseudo_query";
        case ExpansionMode::summary: return "summary";
        case ExpansionMode::none: return "none";
    }
    throw ContractError("unknown expansion mode");
}

ExpansionMode expansion_mode_from_string(const std::string& s) {
    if (s == "scenario") return ExpansionMode::scenario;
    if (s == "pseudo_query") return ExpansionMode::pseudo_query;
    if (s == "summary") return ExpansionMode::summary;
    if (s == "none") return ExpansionMode::none;
    throw ContractError("unknown expansion mode '" + s + "'");
}

std::optional<std::size_t> DualIndex::doc_index(const std::string& doc_id) const {
    auto it = std::lower_bound(doc_ids.begin(), doc_ids.end(), doc_id);
    if (it == doc_ids.end() || *it != doc_id) return std::nullopt;
    return static_cast<std::size_t>(it - doc_ids.begin());
}

// ---------------------------------------------------------------------------
// Build

namespace {

std::vector<std::string> sorted_doc_ids(const Corpus& corpus) {
    std::vector<std::string> ids;
    ids.reserve(corpus.size());
    for (const Document& doc : corpus.documents()) ids.push_back(doc.doc_id);
    std::sort(ids.begin(), ids.end());
    return ids;
}

void append_vectors(std::vector<float>& matrix, const std::vector<Embedding>& embeddings, int dim) {
    for (const Embedding& e : embeddings) {
        if (e.dim() != dim)
            throw ContractError("provider returned dim " + std::to_string(e.dim()) + ", expected " +
                                std::to_string(dim));
        matrix.insert(matrix.end(), e.values.begin(), e.values.end());
    }
}

DualIndex build_common(const Corpus& corpus, const std::vector<std::string>& doc_texts,
                       EmbeddingProvider& provider) {
    DualIndex index;
    index.dim = provider.dim();
    index.doc_ids = sorted_doc_ids(corpus);
    index.provider_fingerprint = provider.fingerprint();
    if (!doc_texts.empty())
        append_vectors(index.doc_vectors, provider.embed(doc_texts, EmbedRole::passage), index.dim);
    return index;
}

}  // namespace

DualIndex build_index(const Corpus& corpus, const std::vector<ScenarioUnit>& units,
                      const EmbeddingProviderConfig& provider_cfg, ComponentMode component_mode) {
    auto provider = make_embedding_provider(provider_cfg);

    std::vector<std::string> doc_ids = sorted_doc_ids(corpus);
    std::vector<std::string> doc_texts;
    doc_texts.reserve(doc_ids.size());
    for (const std::string& id : doc_ids) doc_texts.push_back(corpus.at(id).text);

    DualIndex index = build_common(corpus, doc_texts, *provider);
    index.component_mode = component_mode;
    index.expansion_mode = ExpansionMode::scenario;

    // Units grouped by owner doc, ordered by unit id within each group.
    struct Keyed {
        std::uint32_t owner;
        const ScenarioUnit* unit;
    };
    std::vector<Keyed> keyed;
    keyed.reserve(units.size());
    for (const ScenarioUnit& unit : units) {
        auto owner = index.doc_index(unit.doc_id);
        if (!owner)
            throw ContractError("scenario unit '" + unit.unit_id + "' references unknown document '" +
                                unit.doc_id + "'");
        if (unit.text.empty()) throw ContractError("scenario unit '" + unit.unit_id + "' has empty text");
        keyed.push_back({static_cast<std::uint32_t>(*owner), &unit});
    }
    std::sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
        if (a.owner != b.owner) return a.owner < b.owner;
        return a.unit->unit_id < b.unit->unit_id;
    });

    index.doc_units.assign(index.num_docs(), {});
    std::vector<std::string> unit_texts;
    unit_texts.reserve(keyed.size());
    for (const Keyed& k : keyed) {
        index.unit_ids.push_back(k.unit->unit_id);
        index.unit_owner.push_back(k.owner);
        unit_texts.push_back(k.unit->text);
    }
    for (std::size_t i = 0; i < index.unit_owner.size(); ++i) {
        DualIndex::Range& range = index.doc_units[index.unit_owner[i]];
        if (range.end == range.begin) range.begin = static_cast<std::uint32_t>(i);
        range.end = static_cast<std::uint32_t>(i + 1);
    }
    if (!unit_texts.empty())
        append_vectors(index.unit_vectors, provider->embed(unit_texts, EmbedRole::passage), index.dim);
    return index;
}

DualIndex build_index(const Corpus& corpus, const std::vector<ExpansionUnit>& units,
                      const EmbeddingProviderConfig& provider_cfg, ExpansionMode expansion_mode) {
    if (expansion_mode != ExpansionMode::pseudo_query && expansion_mode != ExpansionMode::summary)
        throw ContractError("expansion units require pseudo_query or summary mode");

    std::map<std::string, std::vector<const ExpansionUnit*>> by_doc;
    for (const ExpansionUnit& unit : units) {
        if (!corpus.contains(unit.doc_id))
            throw ContractError("expansion unit references unknown document '" + unit.doc_id + "'");
        by_doc[unit.doc_id].push_back(&unit);
    }

    auto provider = make_embedding_provider(provider_cfg);
    std::vector<std::string> doc_ids = sorted_doc_ids(corpus);
    std::vector<std::string> doc_texts;
    doc_texts.reserve(doc_ids.size());
    for (const std::string& id : doc_ids) {
        std::string text = corpus.at(id).text;
        auto it = by_doc.find(id);
        if (it != by_doc.end())
            for (const ExpansionUnit* unit : it->second) text += "\n" + unit->text;
        doc_texts.push_back(std::move(text));
    }

    DualIndex index = build_common(corpus, doc_texts, *provider);
    index.expansion_mode = expansion_mode;
    index.doc_units.assign(index.num_docs(), {});
    return index;
}

DualIndex build_index(const Corpus& corpus, const EmbeddingProviderConfig& provider_cfg) {
    auto provider = make_embedding_provider(provider_cfg);
    std::vector<std::string> doc_ids = sorted_doc_ids(corpus);
    std::vector<std::string> doc_texts;
    doc_texts.reserve(doc_ids.size());
    for (const std::string& id : doc_ids) doc_texts.push_back(corpus.at(id).text);

    DualIndex index = build_common(corpus, doc_texts, *provider);
    index.expansion_mode = ExpansionMode::none;
    index.doc_units.assign(index.num_docs(), {});
    return index;
}

// ---------------------------------------------------------------------------
// Persistence
//
// "SPKIDX" | u32 version | u32 header length | header JSON |
// f32[num_docs*dim] | f32[num_units*dim] | doc id table | unit id table |
// u32 unit_owner[num_units] | (u32,u32) doc_units[num_docs] | u32 crc32
//
// All integers and floats little-endian; id tables are (u32 length, bytes)
// per entry. The checksum covers every preceding byte.

namespace {

constexpr char kMagic[6] = {'S', 'P', 'K', 'I', 'D', 'X'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
    out.push_back(static_cast<char>((v >> 16) & 0xFF));
    out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

void put_f32_matrix(std::string& out, const std::vector<float>& values) {
    if constexpr (std::endian::native == std::endian::little) {
        out.append(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(float));
    } else {
        for (float f : values) put_u32(out, std::bit_cast<std::uint32_t>(f));
    }
}

void put_string(std::string& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.append(s);
}

class Reader {
public:
    Reader(const std::string& data, std::size_t limit) : data_(data), limit_(limit) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = static_cast<std::uint8_t>(data_[pos_]) |
                          (static_cast<std::uint32_t>(static_cast<std::uint8_t>(data_[pos_ + 1])) << 8) |
                          (static_cast<std::uint32_t>(static_cast<std::uint8_t>(data_[pos_ + 2])) << 16) |
                          (static_cast<std::uint32_t>(static_cast<std::uint8_t>(data_[pos_ + 3])) << 24);
        pos_ += 4;
        return v;
    }

    std::string bytes(std::size_t n) {
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    std::vector<float> f32_matrix(std::size_t count) {
        need(count * sizeof(float));
        std::vector<float> values(count);
        if constexpr (std::endian::native == std::endian::little) {
            std::memcpy(values.data(), data_.data() + pos_, count * sizeof(float));
            pos_ += count * sizeof(float);
        } else {
            for (std::size_t i = 0; i < count; ++i) values[i] = std::bit_cast<float>(u32());
        }
        return values;
    }

    std::size_t position() const { return pos_; }

private:
    void need(std::size_t n) {
        if (pos_ + n > limit_) throw IntegrityError("index file truncated");
    }

    const std::string& data_;
    std::size_t limit_;
    std::size_t pos_ = 0;
};

std::uint32_t crc32_of(const char* data, std::size_t size) {
    return static_cast<std::uint32_t>(
        ::crc32(0L, reinterpret_cast<const Bytef*>(data), static_cast<uInt>(size)));
}

}  // namespace

void save_index(const DualIndex& index, const std::string& path) {
    json header{{"dim", index.dim},
                {"component_mode", to_string(index.component_mode)},
                {"expansion_mode", to_string(index.expansion_mode)},
                {"num_docs", index.num_docs()},
                {"num_units", index.num_units()},
                {"fingerprint", index.provider_fingerprint}};
    const std::string header_json = header.dump();

    std::string out;
    out.append(kMagic, sizeof(kMagic));
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(header_json.size()));
    out.append(header_json);
    put_f32_matrix(out, index.doc_vectors);
    put_f32_matrix(out, index.unit_vectors);
    for (const std::string& id : index.doc_ids) put_string(out, id);
    for (const std::string& id : index.unit_ids) put_string(out, id);
    for (std::uint32_t owner : index.unit_owner) put_u32(out, owner);
    for (const DualIndex::Range& range : index.doc_units) {
        put_u32(out, range.begin);
        put_u32(out, range.end);
    }
    put_u32(out, crc32_of(out.data(), out.size()));

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw Error("cannot write index file '" + path + "'");
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!file) throw Error("short write to index file '" + path + "'");
}

DualIndex load_index(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw Error("cannot open index file '" + path + "'");
    std::string data((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());

    if (data.size() < sizeof(kMagic) + 8 + 4 || std::memcmp(data.data(), kMagic, sizeof(kMagic)) != 0)
        throw FormatError("'" + path + "' is not an index file (bad magic)");

    Reader prelude(data, data.size());
    prelude.bytes(sizeof(kMagic));
    const std::uint32_t version = prelude.u32();
    if (version != kVersion)
        throw FormatError("index file version " + std::to_string(version) + " is newer than supported " +
                          std::to_string(kVersion) + "; upgrade this build to read it");

    const std::size_t payload_size = data.size() - 4;
    Reader crc_reader(data, data.size());
    crc_reader.bytes(payload_size);
    const std::uint32_t stored_crc = crc_reader.u32();
    if (crc32_of(data.data(), payload_size) != stored_crc)
        throw IntegrityError("index file '" + path + "' failed its checksum");

    Reader reader(data, payload_size);
    reader.bytes(sizeof(kMagic));
    reader.u32();  // version, already checked
    const std::uint32_t header_size = reader.u32();
    json header;
    try {
        header = json::parse(reader.bytes(header_size));
    } catch (const json::exception& e) {
        throw IntegrityError(std::string("index header is not valid JSON: ") + e.what());
    }

    DualIndex index;
    try {
        index.dim = header.at("dim").get<int>();
        index.component_mode = component_mode_from_string(header.at("component_mode").get<std::string>());
        index.expansion_mode = expansion_mode_from_string(header.at("expansion_mode").get<std::string>());
        index.provider_fingerprint = header.at("fingerprint").get<std::string>();
        const auto num_docs = header.at("num_docs").get<std::size_t>();
        const auto num_units = header.at("num_units").get<std::size_t>();
        if (index.dim <= 0) throw IntegrityError("index header has non-positive dim");

        index.doc_vectors = reader.f32_matrix(num_docs * static_cast<std::size_t>(index.dim));
        index.unit_vectors = reader.f32_matrix(num_units * static_cast<std::size_t>(index.dim));
        index.doc_ids.reserve(num_docs);
        for (std::size_t i = 0; i < num_docs; ++i) index.doc_ids.push_back(reader.bytes(reader.u32()));
        index.unit_ids.reserve(num_units);
        for (std::size_t i = 0; i < num_units; ++i) index.unit_ids.push_back(reader.bytes(reader.u32()));
        index.unit_owner.reserve(num_units);
        for (std::size_t i = 0; i < num_units; ++i) index.unit_owner.push_back(reader.u32());
        index.doc_units.reserve(num_docs);
        for (std::size_t i = 0; i < num_docs; ++i) {
            DualIndex::Range range;
            range.begin = reader.u32();
            range.end = reader.u32();
            index.doc_units.push_back(range);
        }
    } catch (const json::exception& e) {
        throw IntegrityError(std::string("index header is missing fields: ") + e.what());
    }
    if (reader.position() != payload_size) throw IntegrityError("index file has trailing bytes");

    for (std::uint32_t owner : index.unit_owner)
        if (owner >= index.num_docs()) throw IntegrityError("unit owner out of range");
    return index;
}

}  // namespace spike
