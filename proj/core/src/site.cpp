#include "mila/site.hpp"

#include <charconv>
#include <regex>
#include <set>

namespace mila {
namespace {

using nlohmann::json;

bool is_sql_identifier(const std::string& s) {
    static const std::regex re("[A-Za-z_][A-Za-z0-9_]*");
    return std::regex_match(s, re);
}

bool is_iri(const std::string& s) {
    static const std::regex re(R"([A-Za-z][A-Za-z0-9+.-]*:[^\s<>"{}|\\^`]+)");
    return std::regex_match(s, re);
}

Value to_value(const json& j) {
    if (j.is_null()) return std::monostate{};
    if (j.is_boolean()) return j.get<bool>();
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) return j.get<std::string>();
    throw Error("VDL_SYNTAX", "fixture cells must be scalars");
}

json from_value(const Value& v) {
    return std::visit(
        [](const auto& x) -> json {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, std::monostate>) {
                return nullptr;
            } else {
                return x;
            }
        },
        v);
}

class SiteLoader {
public:
    SiteLoader(const json& j, const UnitRegistry* units) : j_(j), units_(units) {}

    Result<SiteCatalog> run() {
        try {
            site_.site_id = j_.at("site_id").get<std::string>();
            auto dialect = enum_parse<Dialect>(j_.at("dialect").get<std::string>());
            if (!dialect) return fail("VDL_SYNTAX", "unknown dialect", "/dialect");
            site_.dialect = *dialect;
            site_.patient_key = j_.at("patient_key").get<std::string>();
        } catch (const json::exception& ex) {
            return fail("VDL_SYNTAX", ex.what(), "");
        }
        if (site_.dialect == Dialect::sparql && !is_iri(site_.patient_key)) {
            error("VDL_SYNTAX", "sparql patient_key must be a predicate IRI", "/patient_key");
        }
        if (site_.dialect == Dialect::sql && !is_sql_identifier(site_.patient_key)) {
            error("VDL_SYNTAX", "sql patient_key must be a column name", "/patient_key");
        }

        const auto mappings = j_.value("mappings", json::object());
        for (auto it = mappings.begin(); it != mappings.end(); ++it) {
            mapping(it.key(), *it, "/mappings/" + pointer_escape(it.key()));
        }
        check_table_keys();

        const auto counts = j_.value("record_count", json::object());
        for (auto it = counts.begin(); it != counts.end(); ++it) {
            if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<std::int64_t>() >= 0)) {
                error("VDL_SYNTAX", "record counts must be non-negative integers",
                      "/record_count/" + pointer_escape(it.key()));
                continue;
            }
            site_.record_count[it.key()] = it->get<std::uint64_t>();
        }

        if (auto it = j_.find("fixture"); it != j_.end() && !it->is_null()) fixture(*it);

        if (!diags_.empty()) return diags_;
        return std::move(site_);
    }

private:
    Result<SiteCatalog> fail(const char* code, std::string msg, std::string path) {
        error(code, std::move(msg), std::move(path));
        return diags_;
    }

    void error(const char* code, std::string msg, std::string path) {
        diags_.push_back(make_error(code, std::move(msg), std::move(path)));
    }

    void mapping(const std::string& uri, const json& m, const std::string& path) {
        try {
            FieldMapping fm;
            auto dt = enum_parse<DataType>(m.at("datatype").get<std::string>());
            if (!dt) return error("VDL_SYNTAX", "unknown datatype", path + "/datatype");
            fm.datatype = *dt;
            fm.identifying = m.value("identifying", false);
            if (auto u = m.find("unit"); u != m.end() && !u->is_null()) fm.unit = u->get<std::string>();

            const bool relational = m.contains("table") || m.contains("column");
            const bool graph = m.contains("subject_class_uri") || m.contains("predicate_uri");
            if (relational == graph) return error("VDL_SYNTAX", "mapping must be relational or graph", path);
            if (relational != (site_.dialect == Dialect::sql)) {
                return error("VDL_DIALECT_MISMATCH",
                             std::string(relational ? "relational" : "graph") + " mapping in a " +
                                 std::string(enum_name(site_.dialect)) + " site",
                             path);
            }
            if (relational) {
                RelationalMapping r{m.at("table").get<std::string>(), m.at("column").get<std::string>(),
                                    m.value("patient_key_column", site_.patient_key)};
                if (!is_sql_identifier(r.table) || !is_sql_identifier(r.column) ||
                    !is_sql_identifier(r.patient_key_column)) {
                    return error("VDL_SYNTAX", "table and column names must be plain identifiers", path);
                }
                fm.location = std::move(r);
            } else {
                GraphMapping g{m.at("subject_class_uri").get<std::string>(), m.at("predicate_uri").get<std::string>()};
                if (!is_iri(g.subject_class_uri) || !is_iri(g.predicate_uri)) {
                    return error("VDL_SYNTAX", "graph mappings need absolute IRIs", path);
                }
                fm.location = std::move(g);
            }
            if (fm.unit) {
                if (fm.datatype != DataType::numeric) {
                    return error("VDL_SYNTAX", "unit on a non-numeric mapping", path + "/unit");
                }
                if (units_ && !units_->dimension(*fm.unit)) {
                    return error("VDL_UNKNOWN_UNIT", "unit '" + *fm.unit + "' is not registered", path + "/unit");
                }
            }
            site_.mappings.emplace(uri, std::move(fm));
        } catch (const json::exception& ex) {
            error("VDL_SYNTAX", ex.what(), path);
        }
    }

    void check_table_keys() {
        std::map<std::string, std::string> key_of;
        for (const auto& [uri, m] : site_.mappings) {
            const auto* r = m.relational();
            if (!r) continue;
            auto [it, inserted] = key_of.emplace(r->table, r->patient_key_column);
            if (!inserted && it->second != r->patient_key_column) {
                error("VDL_SYNTAX", "table '" + r->table + "' mapped with two patient key columns",
                      "/mappings/" + pointer_escape(uri));
            }
        }
    }

    void fixture(const json& f) {
        FixtureStore store;
        try {
            if (f.contains("tables") && site_.dialect != Dialect::sql) {
                return error("VDL_DIALECT_MISMATCH", "table fixture in a sparql site", "/fixture/tables");
            }
            if (f.contains("triples") && site_.dialect != Dialect::sparql) {
                return error("VDL_DIALECT_MISMATCH", "triple fixture in a sql site", "/fixture/triples");
            }
            const auto tables = f.value("tables", json::object());
            for (auto it = tables.begin(); it != tables.end(); ++it) {
                FixtureTable t;
                t.columns = it->at("columns").get<std::vector<std::string>>();
                for (const auto& row : it->at("rows")) {
                    if (row.size() != t.columns.size()) {
                        return error("VDL_SYNTAX", "row width differs from column count",
                                     "/fixture/tables/" + pointer_escape(it.key()));
                    }
                    std::vector<Value> cells;
                    for (const auto& c : row) cells.push_back(to_value(c));
                    t.rows.push_back(std::move(cells));
                }
                store.tables.emplace(it.key(), std::move(t));
            }
            const auto triples = f.value("triples", json::array());
            for (std::size_t i = 0; i < triples.size(); ++i) {
                const auto& t = triples[i];
                auto kind = t.size() == 4 ? enum_parse<ObjectKind>(t[3].get<std::string>()) : std::nullopt;
                if (!kind) {
                    return error("VDL_SYNTAX", "triples are [subject, predicate, object, kind]",
                                 "/fixture/triples/" + std::to_string(i));
                }
                store.triples.push_back(
                    {t[0].get<std::string>(), t[1].get<std::string>(), t[2].get<std::string>(), *kind});
            }
        } catch (const json::exception& ex) {
            return error("VDL_SYNTAX", ex.what(), "/fixture");
        } catch (const Error& ex) {
            return error("VDL_SYNTAX", ex.what(), "/fixture");
        }
        site_.fixture = std::move(store);
    }

    const json& j_;
    const UnitRegistry* units_;
    SiteCatalog site_;
    std::vector<Diagnostic> diags_;
};

}  // namespace

std::string value_to_string(const Value& v) {
    return std::visit(
        [](const auto& x) -> std::string {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, std::monostate>) {
                return "null";
            } else if constexpr (std::is_same_v<T, bool>) {
                return x ? "true" : "false";
            } else if constexpr (std::is_same_v<T, double>) {
                return json(x).dump();
            } else {
                return x;
            }
        },
        v);
}

const FieldMapping* SiteCatalog::mapping(std::string_view concept_uri) const {
    auto it = mappings.find(std::string(concept_uri));
    return it == mappings.end() ? nullptr : &it->second;
}

std::uint64_t SiteCatalog::count(std::string_view concept_uri) const {
    auto it = record_count.find(std::string(concept_uri));
    return it == record_count.end() ? 0 : it->second;
}

Result<SiteCatalog> load_site_catalog(std::string_view text, const UnitRegistry* units) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        return std::vector<Diagnostic>{make_error("VDL_SYNTAX", "site catalog is not a JSON object", "")};
    }
    return SiteLoader(j, units).run();
}

nlohmann::json to_json(const SiteCatalog& site) {
    json j = {{"site_id", site.site_id}, {"dialect", enum_name(site.dialect)}, {"patient_key", site.patient_key}};
    json mappings = json::object();
    for (const auto& [uri, m] : site.mappings) {
        json o = {{"datatype", enum_name(m.datatype)}, {"identifying", m.identifying}};
        if (m.unit) o["unit"] = *m.unit;
        if (const auto* r = m.relational()) {
            o["table"] = r->table;
            o["column"] = r->column;
            o["patient_key_column"] = r->patient_key_column;
        } else if (const auto* g = m.graph()) {
            o["subject_class_uri"] = g->subject_class_uri;
            o["predicate_uri"] = g->predicate_uri;
        }
        mappings[uri] = std::move(o);
    }
    j["mappings"] = std::move(mappings);
    j["record_count"] = site.record_count;
    if (site.fixture) {
        json f = json::object();
        if (site.dialect == Dialect::sql) {
            json tables = json::object();
            for (const auto& [name, t] : site.fixture->tables) {
                json rows = json::array();
                for (const auto& row : t.rows) {
                    json r = json::array();
                    for (const auto& c : row) r.push_back(from_value(c));
                    rows.push_back(std::move(r));
                }
                tables[name] = {{"columns", t.columns}, {"rows", std::move(rows)}};
            }
            f["tables"] = std::move(tables);
        } else {
            json triples = json::array();
            for (const auto& t : site.fixture->triples) {
                triples.push_back({t.subject, t.predicate, t.object, enum_name(t.kind)});
            }
            f["triples"] = std::move(triples);
        }
        j["fixture"] = std::move(f);
    }
    return j;
}

double HarmonizationAction::apply(double x) const {
    for (const auto& s : steps) x = s.apply(x);
    return x;
}

bool AvailabilityReport::pass() const {
    for (const auto& [site, diags] : per_site) {
        if (has_errors(diags)) return false;
    }
    return true;
}

bool AvailabilityReport::site_passes(const std::string& site_id) const {
    auto it = per_site.find(site_id);
    return it != per_site.end() && !has_errors(it->second);
}

std::vector<Diagnostic> AvailabilityReport::diagnostics() const {
    std::vector<Diagnostic> out;
    for (const auto& [site, diags] : per_site) out.insert(out.end(), diags.begin(), diags.end());
    return out;
}

AvailabilityReport check_availability(const ModelDocument& doc, const std::vector<SiteCatalog>& sites,
                                      const UnitRegistry& units, std::uint64_t k_min) {
    AvailabilityReport report;
    std::set<std::string> requested(doc.federation.site_ids.begin(), doc.federation.site_ids.end());
    for (const auto& site_id : requested) {
        auto& diags = report.per_site[site_id];
        const SiteCatalog* site = nullptr;
        for (const auto& s : sites) {
            if (s.site_id == site_id) site = &s;
        }
        if (!site) {
            diags.push_back(make_error("AVAIL_NO_SITE", "site '" + site_id + "' has no catalog", "/federation/site_ids"));
            continue;
        }
        for (std::size_t i = 0; i < doc.data_elements.size(); ++i) {
            const auto& e = doc.data_elements[i];
            const auto path = ModelDocument::element_path(i);
            const auto at = " at site " + site_id;
            const FieldMapping* m = site->mapping(e.concept_uri);
            if (!m) {
                diags.push_back(make_error("AVAIL_MISSING", "'" + e.local_name + "' is not mapped" + at, path));
                continue;
            }
            if (m->datatype != e.expected_datatype) {
                diags.push_back(make_error("AVAIL_TYPE",
                                           "'" + e.local_name + "' is " + std::string(enum_name(m->datatype)) +
                                               at + ", model expects " +
                                               std::string(enum_name(e.expected_datatype)),
                                           path));
            }
            if (const auto n = site->count(e.concept_uri); n < k_min) {
                diags.push_back(make_error("AVAIL_COUNT",
                                           "'" + e.local_name + "' has " + std::to_string(n) + " records" + at +
                                               ", need " + std::to_string(k_min),
                                           path));
            }
            if (e.expected_datatype != DataType::numeric || !e.expected_unit) continue;
            if (!m->unit) {
                diags.push_back(make_error("AVAIL_UNIT", "'" + e.local_name + "' has no recorded unit" + at, path));
                continue;
            }
            if (*m->unit == *e.expected_unit) continue;
            auto hops = units.steps(*m->unit, *e.expected_unit);
            if (!hops) {
                diags.push_back(make_error("AVAIL_UNIT",
                                           "'" + e.local_name + "' recorded in " + *m->unit + at +
                                               " cannot be converted to " + *e.expected_unit,
                                           path));
                continue;
            }
            report.actions.push_back({site_id, e.local_name, e.concept_uri, *m->unit, *e.expected_unit, *hops,
                                      *units.composed(*m->unit, *e.expected_unit)});
        }
    }
    return report;
}

}  // namespace mila
