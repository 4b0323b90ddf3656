#include "mila/ontology.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>

namespace mila {
namespace {

using nlohmann::json;

template <typename E>
E parse_enum(const json& obj, const char* key) {
    const auto text = obj.at(key).get<std::string>();
    auto v = enum_parse<E>(text);
    if (!v) throw Error("ONT_SYNTAX", "unknown " + std::string(key) + " '" + text + "'");
    return *v;
}

Concept parse_concept(const json& c) {
    Concept out;
    out.uri = c.at("uri").get<std::string>();
    out.label = c.at("label").get<std::string>();
    out.category = parse_enum<Category>(c, "category");
    if (auto it = c.find("unit_dimension"); it != c.end() && !it->is_null()) {
        out.unit_dimension = parse_enum<UnitDimension>(c, "unit_dimension");
    }
    out.parents = c.at("parents").get<std::vector<std::string>>();
    for (const auto& r : c.at("allowed_roles")) {
        auto role = enum_parse<Role>(r.get<std::string>());
        if (!role) throw Error("ONT_SYNTAX", "unknown role '" + r.get<std::string>() + "'");
        out.allowed_roles.push_back(*role);
    }
    out.values = c.value("values", std::vector<std::string>{});
    if (out.uri.empty()) throw Error("ONT_SYNTAX", "concept uri must be non-empty");
    return out;
}

// Three-colour DFS over parent edges. Returns the URI at which a back edge
// closes a cycle, or nullopt.
std::optional<std::string> find_cycle(const std::map<std::string, Concept>& concepts) {
    enum class Colour { white, grey, black };
    std::map<std::string, Colour> colour;
    for (const auto& [uri, _] : concepts) colour[uri] = Colour::white;

    for (const auto& [root, _] : concepts) {
        if (colour[root] != Colour::white) continue;
        std::vector<std::pair<std::string, std::size_t>> stack{{root, 0}};
        colour[root] = Colour::grey;
        while (!stack.empty()) {
            auto& [uri, next] = stack.back();
            const auto& parents = concepts.at(uri).parents;
            if (next == parents.size()) {
                colour[uri] = Colour::black;
                stack.pop_back();
                continue;
            }
            const auto& p = parents[next++];
            auto it = colour.find(p);
            if (it == colour.end()) continue;  // dangling, reported separately
            if (it->second == Colour::grey) return p;
            if (it->second == Colour::white) {
                it->second = Colour::grey;
                stack.emplace_back(p, 0);
            }
        }
    }
    return std::nullopt;
}

}  // namespace

bool Concept::allows(Role r) const {
    return std::find(allowed_roles.begin(), allowed_roles.end(), r) != allowed_roles.end();
}

const Concept* OntologyCatalog::resolve(std::string_view uri) const {
    auto it = concepts_.find(std::string(uri));
    return it == concepts_.end() ? nullptr : &it->second;
}

bool OntologyCatalog::rule_allows(TaskKind task, Category outcome, Category predictor) const {
    auto it = rule_index_.find({task, outcome, predictor});
    return it != rule_index_.end() && it->second;
}

void OntologyCatalog::add_concept(Concept c) {
    if (concepts_.contains(c.uri)) throw Error("ONT_DUP_URI", "duplicate concept '" + c.uri + "'");
    auto uri = c.uri;
    concepts_.emplace(std::move(uri), std::move(c));
}

Result<OntologyCatalog> load_catalog(std::string_view text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        return std::vector<Diagnostic>{make_error("ONT_SYNTAX", "catalog is not a JSON object", "")};
    }
    OntologyCatalog cat;
    std::vector<Diagnostic> diags;
    std::map<std::string, std::size_t> index_of;

    try {
        cat.version_ = j.at("version").get<std::string>();
    } catch (const json::exception&) {
        diags.push_back(make_error("ONT_SYNTAX", "missing string field 'version'", ""));
    }

    const auto concepts = j.value("concepts", json::array());
    for (std::size_t i = 0; i < concepts.size(); ++i) {
        const auto path = "/concepts/" + std::to_string(i);
        try {
            Concept c = parse_concept(concepts[i]);
            if (cat.concepts_.contains(c.uri)) {
                diags.push_back(make_error("ONT_DUP_URI", "duplicate concept '" + c.uri + "'", path + "/uri"));
                continue;
            }
            index_of[c.uri] = i;
            auto uri = c.uri;
            cat.concepts_.emplace(std::move(uri), std::move(c));
        } catch (const json::exception& ex) {
            diags.push_back(make_error("ONT_SYNTAX", ex.what(), path));
        } catch (const Error& ex) {
            diags.push_back(ex.diagnostic());
            diags.back().element_path = path;
        }
    }

    for (const auto& [uri, c] : cat.concepts_) {
        for (std::size_t p = 0; p < c.parents.size(); ++p) {
            if (!cat.concepts_.contains(c.parents[p])) {
                diags.push_back(make_error("ONT_DANGLING_PARENT",
                                           "parent '" + c.parents[p] + "' of '" + uri + "' is not in the catalog",
                                           "/concepts/" + std::to_string(index_of[uri]) + "/parents/" +
                                               std::to_string(p)));
            }
        }
    }
    if (auto at = find_cycle(cat.concepts_)) {
        diags.push_back(make_error("ONT_CYCLE", "parent graph has a cycle through '" + *at + "'",
                                   "/concepts/" + std::to_string(index_of[*at])));
    }

    const auto rules = j.value("role_rules", json::array());
    for (std::size_t i = 0; i < rules.size(); ++i) {
        const auto path = "/role_rules/" + std::to_string(i);
        try {
            RoleRule r;
            r.task_kind = parse_enum<TaskKind>(rules[i], "task_kind");
            r.outcome_category = parse_enum<Category>(rules[i], "outcome_category");
            r.predictor_category = parse_enum<Category>(rules[i], "predictor_category");
            r.allowed = rules[i].at("allowed").get<bool>();
            auto key = std::tuple{r.task_kind, r.outcome_category, r.predictor_category};
            auto [it, inserted] = cat.rule_index_.emplace(key, r.allowed);
            if (!inserted && it->second != r.allowed) {
                diags.push_back(make_error("ONT_SYNTAX", "conflicting rules for the same triple", path));
                continue;
            }
            cat.rules_.push_back(r);
        } catch (const json::exception& ex) {
            diags.push_back(make_error("ONT_SYNTAX", ex.what(), path));
        } catch (const Error& ex) {
            diags.push_back(ex.diagnostic());
            diags.back().element_path = path;
        }
    }

    if (!diags.empty()) return diags;
    return cat;
}

ValidationReport validate_semantics(const ModelDocument& doc, const OntologyCatalog& catalog,
                                    const UnitRegistry& units) {
    ValidationReport report;
    auto& out = report.diagnostics;

    const Concept* outcome_concept = nullptr;
    if (const auto* outcome = doc.outcome()) outcome_concept = catalog.resolve(outcome->concept_uri);

    for (std::size_t i = 0; i < doc.data_elements.size(); ++i) {
        const auto& e = doc.data_elements[i];
        const auto path = ModelDocument::element_path(i);
        const Concept* c = catalog.resolve(e.concept_uri);
        if (!c) {
            out.push_back(make_error("SEM_UNKNOWN_CONCEPT", "concept '" + e.concept_uri + "' is not in the ontology",
                                     path));
            continue;
        }
        if (!c->allows(e.role)) {
            out.push_back(make_error("SEM_ROLE_FORBIDDEN",
                                     "'" + c->label + "' may not act as " + std::string(enum_name(e.role)), path));
        }
        if (e.role == Role::predictor && outcome_concept &&
            !catalog.rule_allows(doc.task.kind, outcome_concept->category, c->category)) {
            out.push_back(make_error(
                "SEM_RULE_DENY",
                "'" + c->label + "' (" + std::string(enum_name(c->category)) + ") cannot predict '" +
                    outcome_concept->label + "' (" + std::string(enum_name(outcome_concept->category)) +
                    ") for task " + std::string(enum_name(doc.task.kind)),
                path));
        }
        if (e.expected_unit) {
            auto dim = units.dimension(*e.expected_unit);
            if (!dim) {
                out.push_back(make_error("SEM_UNIT_DIMENSION", "unknown unit '" + *e.expected_unit + "'", path));
            } else if (!c->unit_dimension || *c->unit_dimension != *dim) {
                out.push_back(make_error(
                    "SEM_UNIT_DIMENSION",
                    "unit '" + *e.expected_unit + "' measures " + std::string(enum_name(*dim)) + " but '" +
                        c->label + "' is " +
                        (c->unit_dimension ? std::string(enum_name(*c->unit_dimension)) : std::string("unitless")),
                    path));
            }
        }
        if (e.expected_datatype == DataType::categorical) {
            if (c->values.empty()) {
                out.push_back(make_error("SEM_NO_VALUE_SET", "'" + c->label + "' declares no category values", path));
                continue;
            }
            auto it = doc.training.preprocessing.find(e.local_name);
            if (it == doc.training.preprocessing.end()) continue;
            if (const auto* label = std::get_if<std::string>(&it->second.impute_value);
                label && std::find(c->values.begin(), c->values.end(), *label) == c->values.end()) {
                out.push_back(make_error("SEM_BAD_CATEGORY",
                                         "impute value '" + *label + "' is not a category of '" + c->label + "'",
                                         path));
            }
        }
    }
    return report;
}

}  // namespace mila
