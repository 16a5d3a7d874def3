#pragma once
// The dual index: document vectors plus scenario-unit vectors with the
// unit-to-document mapping, built once and immutable afterwards. One file
// holds both sides so the mapping can never desynchronize.

#include "spike/core.hpp"
#include "spike/embedding.hpp"
#include "spike/scenario_gen.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace spike {

enum class ExpansionMode { scenario, pseudo_query, summary, none };

std::string to_string(ExpansionMode mode);
ExpansionMode expansion_mode_from_string(const std::string& s);

struct DualIndex {
    struct Range {
        std::uint32_t begin = 0;
        std::uint32_t end = 0;

        bool operator==(const Range&) const = default;
    };

    int dim = 0;
    std::vector<std::string> doc_ids;   // ascending
    std::vector<float> doc_vectors;     // row-major [num_docs x dim]
    std::vector<std::string> unit_ids;  // grouped by owner, then by unit id
    std::vector<float> unit_vectors;    // row-major [num_units x dim]
    std::vector<std::uint32_t> unit_owner;
    std::vector<Range> doc_units;       // per-doc [begin, end) into the unit arrays
    std::string provider_fingerprint;
    ComponentMode component_mode = ComponentMode::topic_explanation;
    ExpansionMode expansion_mode = ExpansionMode::none;

    std::size_t num_docs() const { return doc_ids.size(); }
    std::size_t num_units() const { return unit_ids.size(); }

    std::span<const float> doc_vector(std::size_t i) const {
        return {doc_vectors.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
    }
    std::span<const float> unit_vector(std::size_t i) const {
        return {unit_vectors.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
    }

    std::optional<std::size_t> doc_index(const std::string& doc_id) const;

    bool operator==(const DualIndex&) const = default;
};

// Scenario-unit index: documents and units embedded with the same provider,
// role=passage. Unit doc_ids must exist in the corpus.
DualIndex build_index(const Corpus& corpus, const std::vector<ScenarioUnit>& units,
                      const EmbeddingProviderConfig& provider_cfg, ComponentMode component_mode);

// Expansion baselines: unit texts are concatenated onto the document text
// before embedding and the unit arrays stay empty.
DualIndex build_index(const Corpus& corpus, const std::vector<ExpansionUnit>& units,
                      const EmbeddingProviderConfig& provider_cfg, ExpansionMode expansion_mode);

// Document-only baseline.
DualIndex build_index(const Corpus& corpus, const EmbeddingProviderConfig& provider_cfg);

// Single-file format: magic, version, JSON header, raw little-endian f32
// matrices, id tables, CRC32. Round-trips bit-exactly.
void save_index(const DualIndex& index, const std::string& path);

// FormatError on magic/version problems, IntegrityError on checksum or
// truncation.
DualIndex load_index(const std::string& path);

}  // namespace spike
