#include "mila/trace.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "mila/digest.hpp"
#include "mila/plan.hpp"

namespace mila {

using nlohmann::json;

json to_json(const TraceRecord& r) {
    json j = {{"record_id", r.record_id},
              {"kind", enum_name(r.kind)},
              {"experiment_id", r.experiment_id},
              {"model_id", r.model_id},
              {"model_hash", r.model_hash},
              {"element_paths", r.element_paths},
              {"ontology_uris", r.ontology_uris},
              {"content_hash", r.content_hash},
              {"subject", r.subject},
              {"logical_time", r.logical_time}};
    if (r.site_id) j["site_id"] = *r.site_id;
    if (r.round) j["round"] = *r.round;
    if (r.parent_hash) j["parent_hash"] = *r.parent_hash;
    return j;
}

TraceRecord record_from_json(const json& j) {
    try {
        TraceRecord r;
        r.record_id = j.at("record_id").get<std::uint64_t>();
        auto kind = enum_parse<RecordKind>(j.at("kind").get<std::string>());
        if (!kind) throw Error("TA_SYNTAX", "unknown record kind");
        r.kind = *kind;
        r.experiment_id = j.at("experiment_id").get<std::string>();
        r.model_id = j.at("model_id").get<std::string>();
        r.model_hash = j.at("model_hash").get<std::string>();
        r.element_paths = j.at("element_paths").get<std::vector<std::string>>();
        r.ontology_uris = j.at("ontology_uris").get<std::vector<std::string>>();
        r.content_hash = j.at("content_hash").get<std::string>();
        r.subject = j.at("subject").get<std::string>();
        r.logical_time = j.at("logical_time").get<std::uint64_t>();
        if (j.contains("site_id")) r.site_id = j["site_id"].get<std::string>();
        if (j.contains("round")) r.round = j["round"].get<std::uint32_t>();
        if (j.contains("parent_hash")) r.parent_hash = j["parent_hash"].get<std::string>();
        return r;
    } catch (const json::exception& ex) {
        throw Error("TA_SYNTAX", std::string("malformed ledger record: ") + ex.what());
    }
}

Ledger::Ledger(std::filesystem::path file) : file_(std::move(file)) {
    if (!std::filesystem::exists(*file_)) return;
    std::ifstream in(*file_, std::ios::binary);
    for (std::string line; std::getline(in, line);) {
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) throw Error("TA_SYNTAX", "unreadable line in " + file_->string(), file_->string());
        records_.push_back(record_from_json(j));
        lines_.push_back(std::move(line));
    }
}

const TraceRecord& Ledger::append(TraceRecord record, std::string_view content) {
    const auto actual = sha256_hex(content);
    if (actual != record.content_hash) {
        throw Error("TA_HASH_MISMATCH", "record for " + record.subject + " claims " + record.content_hash +
                                            " but the content hashes to " + actual);
    }
    std::lock_guard lock(mutex_);
    record.record_id = records_.size() + 1;
    record.logical_time = records_.empty() ? 1 : records_.back().logical_time + 1;
    auto line = to_json(record).dump();
    if (file_) {
        std::ofstream out(*file_, std::ios::app | std::ios::binary);
        out << line << '\n';
        if (!out) throw Error("TA_IO", "cannot append to " + file_->string(), file_->string());
    }
    lines_.push_back(std::move(line));
    records_.push_back(std::move(record));
    return records_.back();
}

std::vector<TraceRecord> Ledger::snapshot() const {
    std::lock_guard lock(mutex_);
    return records_;
}

std::size_t Ledger::size() const {
    std::lock_guard lock(mutex_);
    return records_.size();
}

std::string Ledger::jsonl() const {
    std::lock_guard lock(mutex_);
    std::string out;
    for (const auto& l : lines_) out += l + "\n";
    return out;
}

std::vector<TraceRecord> Ledger::parse(std::string_view jsonl) {
    std::vector<TraceRecord> out;
    std::istringstream in{std::string(jsonl)};
    for (std::string line; std::getline(in, line);) {
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) throw Error("TA_SYNTAX", "ledger line " + std::to_string(out.size() + 1) + " is not JSON");
        out.push_back(record_from_json(j));
    }
    return out;
}

namespace {

std::vector<std::string> sorted(std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    return v;
}

class ModelAudit {
public:
    ModelAudit(const std::vector<TraceRecord>& ledger, const ModelDocument& doc, const ArtifactSet& artifacts,
               const SessionArtifacts* session)
        : ledger_(ledger), doc_(doc), artifacts_(artifacts), session_(session) {
        doc_hash_ = canonical_hash(doc);
        uris_ = doc.concept_uris();
        for (const auto& r : ledger_) {
            if (r.model_id != doc.id) continue;
            switch (r.kind) {
            case RecordKind::validation: validation_ = &r; break;
            case RecordKind::plan: plan_ = &r; break;
            case RecordKind::artifact: artifacts_by_path_[r.subject] = &r; break;
            case RecordKind::round: rounds_.push_back(&r); break;
            case RecordKind::prediction: predictions_.push_back(&r); break;
            }
        }
        // Only the most recent session counts; earlier runs stay in the ledger as history.
        auto start = std::find_if(rounds_.rbegin(), rounds_.rend(), [](auto* r) { return r->round == 1u; });
        if (start != rounds_.rend()) rounds_.erase(rounds_.begin(), std::prev(start.base()));
        if (predictions_.size() > 1) predictions_.erase(predictions_.begin(), std::prev(predictions_.end()));
    }

    AuditRow row() {
        AuditRow row;
        row.model_id = doc_.id;
        row.task_label = std::string(task_label(doc_.task.kind));
        row.traced_to_document = document_link();
        row.traced_to_plan = plan_link();
        row.ontology_preserved = ontology();
        row.pass = row.traced_to_document && row.traced_to_plan && row.ontology_preserved;
        return row;
    }

private:
    std::vector<std::string> expected_paths() const {
        return {"app/models/" + doc_.name + ".json", "app/routes/" + doc_.id + ".txt",
                "app/services/" + doc_.id + "_service.txt", "plans/" + doc_.id + "_plan.json"};
    }

    bool document_link() const {
        if (!validation_ || validation_->content_hash != doc_hash_) return false;
        if (!plan_ || plan_->model_hash != doc_hash_ || plan_->parent_hash != doc_hash_) return false;
        for (const auto& path : expected_paths()) {
            if (!artifacts_by_path_.contains(path)) return false;
        }
        for (const auto& [path, rec] : artifacts_by_path_) {
            const auto* a = artifacts_.find(path);
            if (!a || sha256_hex(a->content) != rec->content_hash) return false;
            if (rec->model_hash != doc_hash_ || rec->parent_hash != plan_->content_hash) return false;
            const auto header = parse_provenance_header(a->content);
            if (!header || header->model_id != doc_.id || header->model_hash != doc_hash_) return false;
        }
        try {
            const auto body = [&](const std::string& path) {
                return std::string(strip_provenance_header(artifacts_.find(path)->content));
            };
            const auto model_copy = parse_model(body("app/models/" + doc_.name + ".json"));
            if (!model_copy.ok() || canonical_hash(*model_copy) != doc_hash_) return false;
            const auto plan = plan_from_json(json::parse(body("plans/" + doc_.id + "_plan.json")));
            if (plan_hash(plan) != plan_->content_hash || plan.model_hash != doc_hash_) return false;
        } catch (const std::exception&) {
            return false;
        }
        return true;
    }

    /// Follows parent links until a plan record; true if it is this model's plan.
    bool reaches_plan(const TraceRecord& start) const {
        const TraceRecord* cur = &start;
        for (std::size_t steps = 0; steps <= ledger_.size(); ++steps) {
            if (cur->kind == RecordKind::plan) return cur->content_hash == plan_->content_hash;
            if (!cur->parent_hash) return false;
            const TraceRecord* parent = nullptr;
            for (const auto& r : ledger_) {
                if (r.content_hash == *cur->parent_hash && r.record_id < cur->record_id) parent = &r;
            }
            if (!parent) return false;
            cur = parent;
        }
        return false;
    }

    bool plan_link() const {
        if (!plan_) return false;
        const std::size_t logged = session_ ? session_->round_lines.size() : 0;
        if (rounds_.size() != logged) return false;
        for (std::size_t i = 0; i < rounds_.size(); ++i) {
            const auto& rec = *rounds_[i];
            if (rec.round != i + 1 || rec.model_hash != plan_->model_hash) return false;
            if (sha256_hex(session_->round_lines[i]) != rec.content_hash) return false;
            const json line = json::parse(session_->round_lines[i], nullptr, false);
            if (line.is_discarded() || line.value("plan_hash", "") != plan_->content_hash) return false;
            if (!reaches_plan(rec)) return false;
        }
        const bool has_prediction_file = session_ && session_->predictions;
        if (predictions_.empty() != !has_prediction_file) return false;
        for (const auto* rec : predictions_) {
            if (rec->model_hash != plan_->model_hash) return false;
            if (sha256_hex(*session_->predictions) != rec->content_hash) return false;
            if (!reaches_plan(*rec)) return false;
        }
        return true;
    }

    bool ontology() const {
        if (!plan_ || sorted(plan_->ontology_uris) != uris_) return false;
        if (validation_ && sorted(validation_->ontology_uris) != uris_) return false;
        for (const auto& [path, rec] : artifacts_by_path_) {
            if (sorted(rec->ontology_uris) != uris_) return false;
            const auto* a = artifacts_.find(path);
            if (!a) return false;
            const auto header = parse_provenance_header(a->content);
            if (!header || sorted(header->ontology_uris) != uris_) return false;
        }
        for (const auto& [path, a] : artifacts_.artifacts()) {
            const auto header = parse_provenance_header(a.content);
            if (header && header->model_id == doc_.id && sorted(header->ontology_uris) != uris_) return false;
        }
        try {
            if (const auto* a = artifacts_.find("plans/" + doc_.id + "_plan.json")) {
                const auto plan = plan_from_json(json::parse(std::string(strip_provenance_header(a->content))));
                if (sorted(plan.ontology_refs) != uris_) return false;
            }
        } catch (const std::exception&) {
            return false;
        }
        for (const auto* r : rounds_) {
            if (sorted(r->ontology_uris) != uris_) return false;
        }
        for (const auto* r : predictions_) {
            if (sorted(r->ontology_uris) != uris_) return false;
        }
        return true;
    }

    const std::vector<TraceRecord>& ledger_;
    const ModelDocument& doc_;
    const ArtifactSet& artifacts_;
    const SessionArtifacts* session_;
    std::string doc_hash_;
    std::vector<std::string> uris_;
    const TraceRecord* validation_ = nullptr;
    const TraceRecord* plan_ = nullptr;
    std::map<std::string, const TraceRecord*> artifacts_by_path_;
    std::vector<const TraceRecord*> rounds_;
    std::vector<const TraceRecord*> predictions_;
};

std::string csv_cell(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

AuditTable audit(const std::vector<TraceRecord>& ledger, const std::vector<ModelDocument>& models,
                 const ArtifactSet& artifacts, const std::map<std::string, SessionArtifacts>& sessions) {
    std::vector<const ModelDocument*> ordered;
    for (const auto& m : models) ordered.push_back(&m);
    std::sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->id < b->id; });

    AuditTable table;
    for (const auto* doc : ordered) {
        auto it = sessions.find(doc->id);
        ModelAudit a(ledger, *doc, artifacts, it == sessions.end() ? nullptr : &it->second);
        table.push_back(a.row());
    }
    return table;
}

std::string export_table(const AuditTable& table, TableFormat format) {
    std::ostringstream out;
    if (format == TableFormat::csv) {
        out << "model_id,task_label,traced_to_plan,traced_to_document,ontology_preserved,pass\n";
        auto b = [](bool v) { return v ? "true" : "false"; };
        for (const auto& r : table) {
            out << csv_cell(r.model_id) << ',' << csv_cell(r.task_label) << ',' << b(r.traced_to_plan) << ','
                << b(r.traced_to_document) << ',' << b(r.ontology_preserved) << ',' << b(r.pass) << '\n';
        }
        return out.str();
    }

    std::size_t id_w = std::string_view("model").size();
    std::size_t task_w = std::string_view("task").size();
    for (const auto& r : table) {
        id_w = std::max(id_w, r.model_id.size());
        task_w = std::max(task_w, r.task_label.size());
    }
    auto pad = [](const std::string& s, std::size_t w) { return s + std::string(w - s.size(), ' '); };
    auto mark = [](bool v) { return v ? "✓" : "✗"; };
    out << pad("model", id_w) << "  " << pad("task", task_w) << "  plan  document  ontology  result\n";
    for (const auto& r : table) {
        out << pad(r.model_id, id_w) << "  " << pad(r.task_label, task_w) << "  " << mark(r.traced_to_plan) << "     "
            << mark(r.traced_to_document) << "         " << mark(r.ontology_preserved) << "         "
            << (r.pass ? "pass" : "FAIL") << '\n';
    }
    return out.str();
}

}  // namespace mila
