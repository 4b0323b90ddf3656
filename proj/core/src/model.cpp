#include "mila/model.hpp"

#include <algorithm>
#include <set>

#include "mila/digest.hpp"
#include "mila/metamodel.hpp"

namespace mila {
namespace {

using nlohmann::json;

template <typename E>
E enum_at(const json& obj, const char* key) {
    return *enum_parse<E>(obj.at(key).get<std::string>());
}

ModelDocument build(const json& j) {
    ModelDocument doc;
    doc.id = j.at("id").get<std::string>();
    doc.name = j.at("name").get<std::string>();
    doc.version = j.at("version").get<std::string>();

    const auto& task = j.at("task");
    doc.task.kind = enum_at<TaskKind>(task, "kind");
    doc.task.description = task.at("description").get<std::string>();

    for (const auto& e : j.at("data_elements")) {
        DataElementRef ref;
        ref.local_name = e.at("local_name").get<std::string>();
        ref.concept_uri = e.at("concept_uri").get<std::string>();
        ref.role = enum_at<Role>(e, "role");
        ref.expected_datatype = enum_at<DataType>(e, "expected_datatype");
        if (auto it = e.find("expected_unit"); it != e.end()) ref.expected_unit = it->get<std::string>();
        doc.data_elements.push_back(std::move(ref));
    }

    const auto& fed = j.at("federation");
    doc.federation.mode = enum_at<FederationMode>(fed, "mode");
    doc.federation.site_ids = fed.at("site_ids").get<std::vector<std::string>>();
    doc.federation.rounds = fed.at("rounds").get<std::uint32_t>();
    doc.federation.min_local_instances = fed.at("min_local_instances").get<std::uint32_t>();
    doc.federation.aggregator = enum_at<Aggregator>(fed, "aggregator");
    doc.federation.seed = fed.at("seed").get<std::uint64_t>();

    const auto& tr = j.at("training");
    doc.training.algorithm_tag = enum_at<AlgorithmTag>(tr, "algorithm_tag");
    doc.training.executable = tr.at("executable").get<bool>();
    doc.training.learning_rate = tr.at("learning_rate").get<double>();
    doc.training.local_epochs = tr.at("local_epochs").get<std::uint32_t>();
    doc.training.l2 = tr.at("l2").get<double>();
    for (auto it = tr.at("preprocessing").begin(); it != tr.at("preprocessing").end(); ++it) {
        PreprocessConstant c;
        const auto& impute = it->at("impute_value");
        if (impute.is_string()) {
            c.impute_value = impute.get<std::string>();
        } else {
            c.impute_value = impute.get<double>();
        }
        c.scale_offset = it->value("scale_offset", 0.0);
        c.scale_factor = it->value("scale_factor", 1.0);
        doc.training.preprocessing.emplace(it.key(), c);
    }

    if (auto it = j.find("metadata"); it != j.end()) {
        doc.metadata = it->get<std::map<std::string, std::string>>();
    }
    return doc;
}

}  // namespace

std::string_view task_label(TaskKind kind) {
    switch (kind) {
    case TaskKind::treatment_recommendation: return "treatment recommendation";
    case TaskKind::ae_causality: return "AE causality";
    case TaskKind::treatment_ae_detection: return "treatment-related AE";
    case TaskKind::future_ae_family: return "future AE family";
    case TaskKind::generic_prediction: return "generic prediction";
    }
    return "generic prediction";
}

const DataElementRef* ModelDocument::outcome() const {
    for (const auto& e : data_elements) {
        if (e.role == Role::outcome) return &e;
    }
    return nullptr;
}

const DataElementRef* ModelDocument::find_element(std::string_view local_name) const {
    for (const auto& e : data_elements) {
        if (e.local_name == local_name) return &e;
    }
    return nullptr;
}

std::string ModelDocument::element_path(std::size_t index) {
    return "/data_elements/" + std::to_string(index);
}

std::vector<std::string> ModelDocument::concept_uris() const {
    std::set<std::string> uris;
    for (const auto& e : data_elements) uris.insert(e.concept_uri);
    return {uris.begin(), uris.end()};
}

std::string pointer_escape(std::string_view token) {
    std::string out;
    for (char c : token) {
        if (c == '~') {
            out += "~0";
        } else if (c == '/') {
            out += "~1";
        } else {
            out += c;
        }
    }
    return out;
}

Result<ModelDocument> parse_model(std::string_view text, std::vector<Diagnostic>* warnings) {
    return parse_model(text, builtin_metamodel(), warnings);
}

Result<ModelDocument> parse_model(std::string_view text, const Metamodel& mm, std::vector<Diagnostic>* warnings) {
    json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) {
        return std::vector<Diagnostic>{make_error("MM_SYNTAX", "document is not well-formed JSON", "")};
    }
    auto diags = mm.check(j);
    if (has_errors(diags)) return diags;
    if (warnings) warnings->insert(warnings->end(), diags.begin(), diags.end());
    try {
        return build(j);
    } catch (const json::exception& ex) {
        // Only reachable when the metamodel table is weaker than the builder.
        return std::vector<Diagnostic>{make_error("MM_BAD_TYPE", ex.what(), "")};
    }
}

nlohmann::json to_json(const ModelDocument& doc) {
    json j = json::object();
    j["id"] = doc.id;
    j["name"] = doc.name;
    j["version"] = doc.version;
    j["task"] = {{"kind", enum_name(doc.task.kind)}, {"description", doc.task.description}};

    json elements = json::array();
    for (const auto& e : doc.data_elements) {
        json o = {{"local_name", e.local_name},
                  {"concept_uri", e.concept_uri},
                  {"role", enum_name(e.role)},
                  {"expected_datatype", enum_name(e.expected_datatype)}};
        if (e.expected_unit) o["expected_unit"] = *e.expected_unit;
        elements.push_back(std::move(o));
    }
    j["data_elements"] = std::move(elements);

    const auto& f = doc.federation;
    j["federation"] = {{"mode", enum_name(f.mode)},
                       {"site_ids", f.site_ids},
                       {"rounds", f.rounds},
                       {"min_local_instances", f.min_local_instances},
                       {"aggregator", enum_name(f.aggregator)},
                       {"seed", f.seed}};

    const auto& t = doc.training;
    json pre = json::object();
    for (const auto& [key, c] : t.preprocessing) {
        json impute = std::holds_alternative<double>(c.impute_value)
                          ? json(std::get<double>(c.impute_value))
                          : json(std::get<std::string>(c.impute_value));
        pre[key] = {{"impute_value", impute}, {"scale_offset", c.scale_offset}, {"scale_factor", c.scale_factor}};
    }
    j["training"] = {{"algorithm_tag", enum_name(t.algorithm_tag)},
                     {"executable", t.executable},
                     {"learning_rate", t.learning_rate},
                     {"local_epochs", t.local_epochs},
                     {"l2", t.l2},
                     {"preprocessing", std::move(pre)}};
    j["metadata"] = doc.metadata;
    return j;
}

std::string serialize_model(const ModelDocument& doc) { return to_json(doc).dump(); }

std::string canonical_hash(const ModelDocument& doc) { return sha256_hex(serialize_model(doc)); }

}  // namespace mila
