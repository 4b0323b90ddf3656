#include "mila/metamodel.hpp"

#include <cmath>
#include <regex>
#include <set>
#include <utility>

namespace mila {
namespace {

using nlohmann::json;

template <typename E>
std::vector<std::string> names_of() {
    std::vector<std::string> out;
    for (auto n : EnumTraits<E>::names) out.emplace_back(n);
    return out;
}

FieldSpec field(std::string name, FieldType type, bool required = true) {
    FieldSpec f;
    f.name = std::move(name);
    f.type = type;
    f.required = required;
    return f;
}

FieldSpec with_pattern(FieldSpec f, Pattern p) {
    f.pattern = p;
    return f;
}

FieldSpec enum_field(std::string name, std::vector<std::string> allowed) {
    FieldSpec f = field(std::move(name), FieldType::enumeration);
    f.allowed = std::move(allowed);
    return f;
}

FieldSpec nested(std::string name, FieldType type, std::string kind) {
    FieldSpec f = field(std::move(name), type);
    f.element_kind = std::move(kind);
    return f;
}

FieldSpec bounded(std::string name, FieldType type, std::optional<double> min, bool exclusive,
                  std::optional<double> max = std::nullopt) {
    FieldSpec f = field(std::move(name), type);
    f.minimum = min;
    f.exclusive_minimum = exclusive;
    f.maximum = max;
    return f;
}

std::string type_name(FieldType t) {
    switch (t) {
    case FieldType::string: return "string";
    case FieldType::integer: return "integer";
    case FieldType::number: return "number";
    case FieldType::boolean: return "boolean";
    case FieldType::enumeration: return "enumeration string";
    case FieldType::scalar: return "number or string";
    case FieldType::object: return "object";
    case FieldType::object_array: return "array of objects";
    case FieldType::string_array: return "array of strings";
    case FieldType::string_map: return "object of strings";
    case FieldType::object_map: return "object of objects";
    }
    return "value";
}

class Walker {
public:
    explicit Walker(const Metamodel& mm) : mm_(mm) {}

    std::vector<Diagnostic> take() { return std::move(diags_); }

    void element(const json& value, const ElementKind& kind, const std::string& path) {
        if (!value.is_object()) {
            error("MM_BAD_TYPE", "expected object for " + kind.name, path);
            return;
        }
        for (const auto& f : kind.fields) {
            auto it = value.find(f.name);
            if (it == value.end()) {
                if (f.required) {
                    error("MM_MISSING_FIELD",
                          "missing required field '" + f.name + "' in " + kind.name, path);
                }
                continue;
            }
            field_value(*it, f, path + "/" + pointer_escape(f.name));
        }
        for (auto it = value.begin(); it != value.end(); ++it) {
            bool known = false;
            for (const auto& f : kind.fields) known = known || f.name == it.key();
            if (known) continue;
            const auto p = path + "/" + pointer_escape(it.key());
            const auto msg = "unknown field '" + it.key() + "' in " + kind.name;
            if (kind.open) {
                diags_.push_back(make_warning("MM_UNKNOWN_FIELD", msg, p));
            } else {
                error("MM_UNKNOWN_FIELD", msg, p);
            }
        }
    }

private:
    void error(const char* code, std::string msg, std::string path) {
        diags_.push_back(make_error(code, std::move(msg), std::move(path)));
    }

    void bad_type(const FieldSpec& f, const std::string& path) {
        error("MM_BAD_TYPE", "field '" + f.name + "' must be " + type_name(f.type), path);
    }

    void check_range(const FieldSpec& f, double v, const std::string& path) {
        if (f.minimum) {
            bool low = f.exclusive_minimum ? !(v > *f.minimum) : !(v >= *f.minimum);
            if (low) {
                error("MM_BAD_VALUE",
                      "field '" + f.name + "' must be " + (f.exclusive_minimum ? "> " : ">= ") +
                          json(*f.minimum).dump(),
                      path);
            }
        }
        if (f.maximum && v > *f.maximum) {
            error("MM_BAD_VALUE", "field '" + f.name + "' exceeds " + json(*f.maximum).dump(), path);
        }
        if (f.nonzero && v == 0.0) error("MM_BAD_VALUE", "field '" + f.name + "' must be nonzero", path);
        if (!std::isfinite(v)) error("MM_BAD_VALUE", "field '" + f.name + "' must be finite", path);
    }

    void check_string(const FieldSpec& f, const std::string& s, const std::string& path) {
        if (f.pattern != Pattern::none && !matches_pattern(f.pattern, s)) {
            error("MM_BAD_VALUE", "field '" + f.name + "' has malformed value '" + s + "'", path);
        } else if (f.pattern == Pattern::none && f.required && s.empty()) {
            error("MM_BAD_VALUE", "field '" + f.name + "' must be non-empty", path);
        }
    }

    void field_value(const json& v, const FieldSpec& f, const std::string& path) {
        switch (f.type) {
        case FieldType::string:
            if (!v.is_string()) return bad_type(f, path);
            check_string(f, v.get<std::string>(), path);
            return;
        case FieldType::integer: {
            if (!v.is_number_integer()) return bad_type(f, path);
            if (v.is_number_unsigned()) {
                check_range(f, static_cast<double>(v.get<std::uint64_t>()), path);
            } else {
                check_range(f, static_cast<double>(v.get<std::int64_t>()), path);
            }
            return;
        }
        case FieldType::number:
            if (!v.is_number()) return bad_type(f, path);
            check_range(f, v.get<double>(), path);
            return;
        case FieldType::boolean:
            if (!v.is_boolean()) return bad_type(f, path);
            return;
        case FieldType::enumeration: {
            if (!v.is_string()) return bad_type(f, path);
            const auto s = v.get<std::string>();
            for (const auto& a : f.allowed) {
                if (a == s) return;
            }
            error("MM_BAD_ENUM", "value '" + s + "' is not allowed for '" + f.name + "'", path);
            return;
        }
        case FieldType::scalar:
            if (v.is_number()) return check_range(f, v.get<double>(), path);
            if (v.is_string()) return;
            return bad_type(f, path);
        case FieldType::object:
            if (const auto* k = mm_.find(f.element_kind)) element(v, *k, path);
            return;
        case FieldType::object_array: {
            if (!v.is_array()) return bad_type(f, path);
            if (v.size() < f.min_items) {
                error("MM_CARDINALITY",
                      "field '" + f.name + "' needs at least " + std::to_string(f.min_items) + " item(s)",
                      path);
            }
            const auto* k = mm_.find(f.element_kind);
            std::set<std::string> seen;
            for (std::size_t i = 0; i < v.size(); ++i) {
                const auto item_path = path + "/" + std::to_string(i);
                if (k) element(v[i], *k, item_path);
                if (f.unique_by.empty() || !v[i].is_object()) continue;
                auto key = v[i].find(f.unique_by);
                if (key == v[i].end() || !key->is_string()) continue;
                if (!seen.insert(key->get<std::string>()).second) {
                    error("MM_DUP_NAME", "duplicate " + f.unique_by + " '" + key->get<std::string>() + "'",
                          item_path + "/" + pointer_escape(f.unique_by));
                }
            }
            return;
        }
        case FieldType::string_array: {
            if (!v.is_array()) return bad_type(f, path);
            if (v.size() < f.min_items) {
                error("MM_CARDINALITY",
                      "field '" + f.name + "' needs at least " + std::to_string(f.min_items) + " item(s)",
                      path);
            }
            for (std::size_t i = 0; i < v.size(); ++i) {
                const auto item_path = path + "/" + std::to_string(i);
                if (!v[i].is_string()) {
                    error("MM_BAD_TYPE", "items of '" + f.name + "' must be strings", item_path);
                    continue;
                }
                check_string(f, v[i].get<std::string>(), item_path);
            }
            return;
        }
        case FieldType::string_map:
            if (!v.is_object()) return bad_type(f, path);
            for (auto it = v.begin(); it != v.end(); ++it) {
                if (!it->is_string()) {
                    error("MM_BAD_TYPE", "values of '" + f.name + "' must be strings",
                          path + "/" + pointer_escape(it.key()));
                }
            }
            return;
        case FieldType::object_map: {
            if (!v.is_object()) return bad_type(f, path);
            const auto* k = mm_.find(f.element_kind);
            for (auto it = v.begin(); it != v.end(); ++it) {
                if (k) element(*it, *k, path + "/" + pointer_escape(it.key()));
            }
            return;
        }
        }
    }

    const Metamodel& mm_;
    std::vector<Diagnostic> diags_;
};

void add(std::vector<Diagnostic>& out, const char* code, std::string msg, std::string path) {
    out.push_back(make_error(code, std::move(msg), std::move(path)));
}

}  // namespace

Metamodel::Metamodel(std::string root_kind, std::vector<ElementKind> kinds,
                     std::vector<RoleCardinality> cardinalities)
    : root_kind_(std::move(root_kind)), kinds_(std::move(kinds)), cardinalities_(std::move(cardinalities)) {}

const ElementKind* Metamodel::find(const std::string& kind) const {
    for (const auto& k : kinds_) {
        if (k.name == kind) return &k;
    }
    return nullptr;
}

std::vector<std::string> Metamodel::consistency_errors() const {
    std::vector<std::string> errs;
    if (!find(root_kind_)) errs.push_back("root kind '" + root_kind_ + "' is not declared");
    std::set<std::string> names;
    for (const auto& k : kinds_) {
        if (!names.insert(k.name).second) errs.push_back("kind '" + k.name + "' declared twice");
        std::set<std::string> fields;
        for (const auto& f : k.fields) {
            const auto where = k.name + "." + f.name;
            if (f.name.empty()) errs.push_back(k.name + " has an unnamed field");
            if (!fields.insert(f.name).second) errs.push_back(where + " declared twice");
            const bool needs_kind = f.type == FieldType::object || f.type == FieldType::object_array ||
                                    f.type == FieldType::object_map;
            if (needs_kind && !find(f.element_kind)) {
                errs.push_back(where + " references undeclared kind '" + f.element_kind + "'");
            }
            if (f.type == FieldType::enumeration && f.allowed.empty()) {
                errs.push_back(where + " is an enumeration without values");
            }
            if (!f.unique_by.empty()) {
                const auto* inner = find(f.element_kind);
                bool ok = false;
                if (inner) {
                    for (const auto& g : inner->fields) ok = ok || g.name == f.unique_by;
                }
                if (!ok) errs.push_back(where + " is unique by an undeclared field");
            }
        }
    }
    return errs;
}

std::vector<Diagnostic> Metamodel::check(const nlohmann::json& value) const {
    Walker w(*this);
    if (const auto* root = find(root_kind_)) w.element(value, *root, "");
    return w.take();
}

bool matches_pattern(Pattern p, std::string_view text) {
    static const std::regex slug("[a-z0-9][a-z0-9_-]*");
    static const std::regex identifier("[a-z_][a-z0-9_]*");
    static const std::regex name("[A-Za-z][A-Za-z0-9_-]*");
    static const std::regex uri(R"([A-Za-z][A-Za-z0-9+.-]*:[^\s<>"{}|\\^`]+)");
    static const std::regex semver(R"(\d+\.\d+(\.\d+)?([-+][0-9A-Za-z.-]+)?)");
    static const std::regex unit(R"([!-~]+)");
    const std::string s(text);
    switch (p) {
    case Pattern::none: return true;
    case Pattern::slug: return std::regex_match(s, slug);
    case Pattern::identifier: return std::regex_match(s, identifier);
    case Pattern::name: return std::regex_match(s, name);
    case Pattern::uri: return std::regex_match(s, uri);
    case Pattern::semver: return std::regex_match(s, semver);
    case Pattern::unit: return std::regex_match(s, unit);
    }
    return false;
}

const Metamodel& builtin_metamodel() {
    static const Metamodel mm = [] {
        constexpr double u32_max = 4294967295.0;

        ElementKind document{"document", {}, true};
        document.fields.push_back(with_pattern(field("id", FieldType::string), Pattern::slug));
        document.fields.push_back(with_pattern(field("name", FieldType::string), Pattern::name));
        document.fields.push_back(with_pattern(field("version", FieldType::string), Pattern::semver));
        document.fields.push_back(nested("task", FieldType::object, "task"));
        FieldSpec elements = nested("data_elements", FieldType::object_array, "data_element");
        elements.min_items = 1;
        elements.unique_by = "local_name";
        document.fields.push_back(elements);
        document.fields.push_back(nested("federation", FieldType::object, "federation"));
        document.fields.push_back(nested("training", FieldType::object, "training"));
        document.fields.push_back(field("metadata", FieldType::string_map, false));

        ElementKind task{"task", {}, false};
        task.fields.push_back(enum_field("kind", names_of<TaskKind>()));
        task.fields.push_back(field("description", FieldType::string));

        ElementKind element{"data_element", {}, false};
        element.fields.push_back(with_pattern(field("local_name", FieldType::string), Pattern::identifier));
        element.fields.push_back(with_pattern(field("concept_uri", FieldType::string), Pattern::uri));
        element.fields.push_back(enum_field("role", names_of<Role>()));
        element.fields.push_back(enum_field("expected_datatype", names_of<DataType>()));
        element.fields.push_back(with_pattern(field("expected_unit", FieldType::string, false), Pattern::unit));

        ElementKind federation{"federation", {}, false};
        federation.fields.push_back(enum_field("mode", names_of<FederationMode>()));
        FieldSpec sites = with_pattern(field("site_ids", FieldType::string_array), Pattern::slug);
        sites.min_items = 1;
        federation.fields.push_back(sites);
        federation.fields.push_back(bounded("rounds", FieldType::integer, 1.0, false, u32_max));
        federation.fields.push_back(bounded("min_local_instances", FieldType::integer, 1.0, false, u32_max));
        federation.fields.push_back(enum_field("aggregator", names_of<Aggregator>()));
        federation.fields.push_back(bounded("seed", FieldType::integer, 0.0, false));

        ElementKind training{"training", {}, false};
        training.fields.push_back(enum_field("algorithm_tag", names_of<AlgorithmTag>()));
        training.fields.push_back(field("executable", FieldType::boolean));
        training.fields.push_back(bounded("learning_rate", FieldType::number, 0.0, true));
        training.fields.push_back(bounded("local_epochs", FieldType::integer, 1.0, false, u32_max));
        training.fields.push_back(bounded("l2", FieldType::number, 0.0, false));
        training.fields.push_back(nested("preprocessing", FieldType::object_map, "preprocess_constant"));

        ElementKind constant{"preprocess_constant", {}, false};
        constant.fields.push_back(field("impute_value", FieldType::scalar));
        constant.fields.push_back(field("scale_offset", FieldType::number, false));
        FieldSpec factor = field("scale_factor", FieldType::number, false);
        factor.nonzero = true;
        constant.fields.push_back(factor);

        std::vector<RoleCardinality> cards{
            {Role::outcome, 1, 1},
            {Role::predictor, 1, std::numeric_limits<std::size_t>::max()},
            {Role::cohort_filter, 0, std::numeric_limits<std::size_t>::max()},
        };
        return Metamodel("document", {document, task, element, federation, training, constant},
                         std::move(cards));
    }();
    return mm;
}

ValidationReport validate_structure(const ModelDocument& doc, const Metamodel& mm) {
    ValidationReport report;
    auto& out = report.diagnostics;
    out = mm.check(to_json(doc));

    std::vector<std::size_t> counts(EnumTraits<Role>::names.size(), 0);
    for (const auto& e : doc.data_elements) ++counts[static_cast<std::size_t>(e.role)];
    for (const auto& c : mm.cardinalities()) {
        const auto n = counts[static_cast<std::size_t>(c.role)];
        if (n < c.min || n > c.max) {
            std::string bound = c.min == c.max ? "exactly " + std::to_string(c.min)
                                               : "at least " + std::to_string(c.min);
            add(out, "MM_CARDINALITY",
                "expected " + bound + " " + std::string(enum_name(c.role)) + " element(s), found " +
                    std::to_string(n),
                "/data_elements");
        }
    }

    const DataElementRef* outcome = doc.outcome();
    for (std::size_t i = 0; i < doc.data_elements.size(); ++i) {
        const auto& e = doc.data_elements[i];
        const auto path = ModelDocument::element_path(i);
        if (e.expected_unit && e.expected_datatype != DataType::numeric) {
            add(out, "MM_UNIT_DATATYPE", "expected_unit is only allowed on numeric elements",
                path + "/expected_unit");
        }
        if (e.role == Role::outcome && e.expected_datatype != DataType::categorical &&
            e.expected_datatype != DataType::boolean) {
            add(out, "MM_SHAPE", "outcome must be categorical or boolean", path + "/expected_datatype");
        }
        if (e.expected_datatype == DataType::datetime && e.role != Role::cohort_filter) {
            add(out, "MM_SHAPE", "datetime elements may only act as cohort filters", path + "/role");
        }
        if (outcome && &e != outcome && e.role == Role::predictor && e.concept_uri == outcome->concept_uri) {
            add(out, "MM_SHAPE", "predictor '" + e.local_name + "' references the outcome concept",
                path + "/concept_uri");
        }
    }

    const auto& fed = doc.federation;
    if (fed.mode == FederationMode::local && fed.site_ids.size() != 1) {
        add(out, "MM_FEDERATION", "local mode requires exactly one site", "/federation/site_ids");
    }
    if (fed.mode != FederationMode::local && fed.site_ids.size() < 2) {
        add(out, "MM_FEDERATION",
            std::string(enum_name(fed.mode)) + " mode requires at least two sites", "/federation/site_ids");
    }
    std::set<std::string> site_seen;
    for (std::size_t i = 0; i < fed.site_ids.size(); ++i) {
        if (!site_seen.insert(fed.site_ids[i]).second) {
            add(out, "MM_DUP_NAME", "duplicate site id '" + fed.site_ids[i] + "'",
                "/federation/site_ids/" + std::to_string(i));
        }
    }

    const auto& tr = doc.training;
    if (tr.executable != (tr.algorithm_tag == AlgorithmTag::logistic_regression)) {
        add(out, "MM_EXECUTABLE", "executable must be true exactly for logistic_regression",
            "/training/executable");
    }
    for (const auto& [key, constant] : tr.preprocessing) {
        const auto path = "/training/preprocessing/" + pointer_escape(key);
        const auto* e = doc.find_element(key);
        if (!e || e->role == Role::outcome || e->expected_datatype == DataType::datetime) {
            add(out, "MM_DANGLING_REF", "preprocessing entry '" + key + "' names no feature element", path);
            continue;
        }
        const bool numeric_impute = std::holds_alternative<double>(constant.impute_value);
        if (e->expected_datatype == DataType::categorical && numeric_impute) {
            add(out, "MM_BAD_VALUE", "categorical element needs a category label as impute_value",
                path + "/impute_value");
        }
        if (e->expected_datatype == DataType::numeric && !numeric_impute) {
            add(out, "MM_BAD_VALUE", "numeric element needs a numeric impute_value", path + "/impute_value");
        }
        if (e->expected_datatype == DataType::boolean) {
            const auto* v = std::get_if<double>(&constant.impute_value);
            if (!v || (*v != 0.0 && *v != 1.0)) {
                add(out, "MM_BAD_VALUE", "boolean element needs impute_value 0 or 1", path + "/impute_value");
            }
        }
    }
    for (const auto& e : doc.data_elements) {
        if (e.role == Role::outcome || e.expected_datatype == DataType::datetime) continue;
        if (!tr.preprocessing.contains(e.local_name)) {
            add(out, "MM_MISSING_FIELD", "no preprocessing entry for feature element '" + e.local_name + "'",
                "/training/preprocessing");
        }
    }
    return report;
}

}  // namespace mila
