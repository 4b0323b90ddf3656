#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mila/codegen.hpp"
#include "mila/model.hpp"

namespace mila {

enum class RecordKind : std::uint8_t { validation, plan, artifact, round, prediction };

template <>
struct EnumTraits<RecordKind> {
    static constexpr std::array<std::string_view, 5> names{"validation", "plan", "artifact", "round", "prediction"};
};

struct TraceRecord {
    std::uint64_t record_id = 0;  // assigned by the ledger
    RecordKind kind = RecordKind::validation;
    std::string experiment_id;
    std::string model_id;
    std::string model_hash;
    std::vector<std::string> element_paths;
    std::vector<std::string> ontology_uris;
    std::optional<std::string> site_id;
    std::optional<std::uint32_t> round;
    std::string content_hash;
    /// Content hash of the record this one derives from: the document for
    /// plans, the plan for artifacts and the first round, the previous round
    /// after that, the last round for predictions.
    std::optional<std::string> parent_hash;
    std::string subject;  // artifact path, experiment id or model id
    std::uint64_t logical_time = 0;

    bool operator==(const TraceRecord&) const = default;
};

nlohmann::json to_json(const TraceRecord& r);
TraceRecord record_from_json(const nlohmann::json& j);

/// Append-only, single-writer record log. When bound to a file every
/// append is also written there as one JSON line.
class Ledger {
public:
    Ledger() = default;
    /// Resumes from `file` when it already holds records.
    explicit Ledger(std::filesystem::path file);
    Ledger(const Ledger&) = delete;
    Ledger& operator=(const Ledger&) = delete;

    /// Verifies sha256(content) == record.content_hash, then assigns
    /// record_id and logical_time. Throws Error(TA_HASH_MISMATCH).
    const TraceRecord& append(TraceRecord record, std::string_view content);

    std::vector<TraceRecord> snapshot() const;
    std::size_t size() const;
    std::string jsonl() const;

    /// Rebuilds a ledger from its JSON-lines form without re-hashing content.
    static std::vector<TraceRecord> parse(std::string_view jsonl);

private:
    mutable std::mutex mutex_;
    std::vector<TraceRecord> records_;
    std::vector<std::string> lines_;
    std::optional<std::filesystem::path> file_;
};

struct AuditRow {
    std::string model_id;
    std::string task_label;
    bool traced_to_plan = false;
    bool traced_to_document = false;
    bool ontology_preserved = false;
    bool pass = false;

    bool operator==(const AuditRow&) const = default;
};

using AuditTable = std::vector<AuditRow>;

/// What a simulation left on disk for one model.
struct SessionArtifacts {
    std::vector<std::string> round_lines;  // one JSON object per round, as logged
    std::optional<std::string> predictions;
};

/// One row per model, ordered by model id. Never throws for bad inputs; a
/// broken link shows up as a false cell.
AuditTable audit(const std::vector<TraceRecord>& ledger, const std::vector<ModelDocument>& models,
                 const ArtifactSet& artifacts, const std::map<std::string, SessionArtifacts>& sessions);

enum class TableFormat : std::uint8_t { text, csv };

std::string export_table(const AuditTable& table, TableFormat format);

}  // namespace mila
