#include "mila/query.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <numeric>
#include <regex>
#include <set>
#include <sstream>

namespace mila {
namespace {

constexpr std::string_view kRdfType = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
constexpr std::string_view kKeyVar = "__patient";

[[noreturn]] void unsupported(const std::string& why) {
    throw Error("VDL_UNSUPPORTED_QUERY", why);
}

std::vector<std::string> query_lines(const std::string& text, std::string_view comment) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        if (line.empty() || line.starts_with(comment)) continue;
        lines.push_back(line);
    }
    return lines;
}

void header(std::ostringstream& out, std::string_view comment, const ModelDocument& doc, const SiteCatalog& site) {
    out << comment << " mila:model=" << doc.id << " site=" << site.site_id << " dialect=" << enum_name(site.dialect)
        << '\n';
    for (const auto& e : doc.data_elements) out << comment << ' ' << e.local_name << ": " << e.concept_uri << '\n';
}

std::string emit_sql(const ModelDocument& doc, const SiteCatalog& site,
                     const std::vector<const RelationalMapping*>& maps) {
    // Tables in order of first use by the declaration order, then by name.
    std::map<std::string, std::size_t> first_use;
    for (std::size_t i = 0; i < maps.size(); ++i) first_use.emplace(maps[i]->table, i);
    std::vector<std::string> tables;
    for (const auto& [t, _] : first_use) tables.push_back(t);
    std::sort(tables.begin(), tables.end(), [&](const auto& a, const auto& b) {
        return std::pair(first_use[a], a) < std::pair(first_use[b], b);
    });
    std::map<std::string, std::string> alias;
    std::map<std::string, std::string> key_column;
    for (std::size_t i = 0; i < tables.size(); ++i) alias[tables[i]] = "t" + std::to_string(i);
    for (const auto* m : maps) key_column[m->table] = m->patient_key_column;

    std::ostringstream out;
    header(out, "--", doc, site);
    out << "SELECT\n";
    for (std::size_t i = 0; i < maps.size(); ++i) {
        out << "  " << alias[maps[i]->table] << '.' << maps[i]->column << " AS " << doc.data_elements[i].local_name
            << (i + 1 < maps.size() ? ",\n" : "\n");
    }
    out << "FROM " << tables[0] << " AS t0\n";
    for (std::size_t i = 1; i < tables.size(); ++i) {
        const auto& t = tables[i];
        out << "  INNER JOIN " << t << " AS " << alias[t] << " ON " << alias[t] << '.' << key_column[t]
            << " = t0." << key_column[tables[0]] << '\n';
    }
    out << "ORDER BY t0." << key_column[tables[0]] << ";\n";
    return out.str();
}

std::string emit_sparql(const ModelDocument& doc, const SiteCatalog& site,
                        const std::vector<const GraphMapping*>& maps) {
    std::ostringstream out;
    header(out, "#", doc, site);
    out << "SELECT";
    for (const auto& e : doc.data_elements) out << " ?" << e.local_name;
    out << "\nWHERE {\n";
    for (std::size_t i = 0; i < maps.size(); ++i) {
        const auto s = "?s" + std::to_string(i);
        out << "  " << s << " a <" << maps[i]->subject_class_uri << "> .\n";
        out << "  " << s << " <" << site.patient_key << "> ?" << kKeyVar << " .\n";
        out << "  " << s << " <" << maps[i]->predicate_uri << "> ?" << doc.data_elements[i].local_name << " .\n";
    }
    out << "}\nORDER BY ?" << kKeyVar << '\n';
    return out.str();
}

// ---- fixture evaluation -------------------------------------------------

std::string key_of(const Value& v) {
    if (const auto* s = std::get_if<std::string>(&v)) return *s;
    return value_to_string(v);
}

struct SqlSelect {
    std::vector<std::pair<std::string, std::string>> items;  // (alias.column, output name)
    std::vector<std::pair<std::string, std::string>> tables;  // (table, alias)
    std::map<std::string, std::string> join_key;             // alias -> key column
    std::string order_by;                                    // alias.column
};

SqlSelect parse_sql(const std::string& text) {
    static const std::regex item(R"(  (t\d+)\.([A-Za-z_][A-Za-z0-9_]*) AS ([a-z_][a-z0-9_]*),?)");
    static const std::regex from(R"(FROM ([A-Za-z_][A-Za-z0-9_]*) AS t0)");
    static const std::regex join(
        R"(  INNER JOIN ([A-Za-z_][A-Za-z0-9_]*) AS (t\d+) ON (t\d+)\.([A-Za-z_][A-Za-z0-9_]*) = t0\.([A-Za-z_][A-Za-z0-9_]*))");
    static const std::regex order(R"(ORDER BY t0\.([A-Za-z_][A-Za-z0-9_]*);)");

    auto lines = query_lines(text, "--");
    SqlSelect q;
    std::size_t i = 0;
    if (lines.empty() || lines[i++] != "SELECT") unsupported("expected SELECT");
    std::smatch m;
    for (; i < lines.size() && std::regex_match(lines[i], m, item); ++i) {
        const bool last = lines[i].back() != ',';
        q.items.emplace_back(m[1].str() + "." + m[2].str(), m[3].str());
        if (last) {
            ++i;
            break;
        }
    }
    if (q.items.empty()) unsupported("empty select list");
    if (i >= lines.size() || !std::regex_match(lines[i], m, from)) unsupported("expected FROM <table> AS t0");
    q.tables.emplace_back(m[1].str(), "t0");
    std::string base_key;
    for (++i; i < lines.size() && std::regex_match(lines[i], m, join); ++i) {
        if (m[2].str() != m[3].str()) unsupported("join condition must reference the joined alias");
        if (!base_key.empty() && base_key != m[5].str()) unsupported("joins must share the base key");
        base_key = m[5].str();
        q.tables.emplace_back(m[1].str(), m[2].str());
        q.join_key[m[2].str()] = m[4].str();
    }
    if (i >= lines.size() || !std::regex_match(lines[i], m, order)) unsupported("expected ORDER BY");
    if (!base_key.empty() && base_key != m[1].str()) unsupported("ORDER BY must use the join key");
    q.join_key["t0"] = m[1].str();
    if (++i != lines.size()) unsupported("trailing text after ORDER BY");
    return q;
}

struct Row {
    std::string key;
    std::vector<Value> cells;
};

std::vector<Row> run_sql(const QueryText& q, const FixtureStore& store) {
    const SqlSelect sel = parse_sql(q.text);
    std::map<std::string, const FixtureTable*> by_alias;
    std::map<std::string, std::size_t> key_index;
    for (const auto& [table, alias] : sel.tables) {
        auto it = store.tables.find(table);
        if (it == store.tables.end()) unsupported("unknown table '" + table + "'");
        by_alias[alias] = &it->second;
        const auto& cols = it->second.columns;
        auto k = std::find(cols.begin(), cols.end(), sel.join_key.at(alias));
        if (k == cols.end()) unsupported("unknown key column in '" + table + "'");
        key_index[alias] = static_cast<std::size_t>(k - cols.begin());
    }
    std::vector<std::pair<std::string, std::size_t>> projection;
    for (const auto& [qualified, name] : sel.items) {
        const auto dot = qualified.find('.');
        const auto alias = qualified.substr(0, dot);
        const auto column = qualified.substr(dot + 1);
        if (!by_alias.contains(alias)) unsupported("unknown alias '" + alias + "'");
        const auto& cols = by_alias[alias]->columns;
        auto c = std::find(cols.begin(), cols.end(), column);
        if (c == cols.end()) unsupported("unknown column '" + column + "'");
        projection.emplace_back(alias, static_cast<std::size_t>(c - cols.begin()));
    }

    // Inner equi-join on the patient key: base rows, then each joined table.
    using Binding = std::map<std::string, const std::vector<Value>*>;
    std::vector<std::pair<std::string, Binding>> partial;
    for (const auto& row : by_alias["t0"]->rows) {
        const auto& k = row[key_index["t0"]];
        if (std::holds_alternative<std::monostate>(k)) continue;
        partial.push_back({key_of(k), Binding{{"t0", &row}}});
    }
    for (std::size_t t = 1; t < sel.tables.size(); ++t) {
        const auto& alias = sel.tables[t].second;
        std::multimap<std::string, const std::vector<Value>*> index;
        for (const auto& row : by_alias[alias]->rows) {
            const auto& k = row[key_index[alias]];
            if (!std::holds_alternative<std::monostate>(k)) index.emplace(key_of(k), &row);
        }
        std::vector<std::pair<std::string, Binding>> next;
        for (const auto& [key, binding] : partial) {
            auto [lo, hi] = index.equal_range(key);
            for (auto it = lo; it != hi; ++it) {
                Binding b = binding;
                b[alias] = it->second;
                next.emplace_back(key, std::move(b));
            }
        }
        partial = std::move(next);
    }

    std::vector<Row> rows;
    for (const auto& [key, binding] : partial) {
        Row r{key, {}};
        for (const auto& [alias, col] : projection) r.cells.push_back((*binding.at(alias))[col]);
        rows.push_back(std::move(r));
    }
    return rows;
}

struct Pattern {
    std::string subject_class;
    std::string key_predicate;
    std::string value_predicate;
    std::string value_var;
};

std::vector<Row> run_sparql(const QueryText& q, const FixtureStore& store) {
    static const std::regex select(R"(SELECT((?: \?[a-z_][a-z0-9_]*)+))");
    static const std::regex triple(R"(  \?(s\d+) (a|<[^>\s]+>) (<[^>\s]+>|\?[A-Za-z_][A-Za-z0-9_]*) \.)");

    auto lines = query_lines(q.text, "#");
    std::smatch m;
    if (lines.empty() || !std::regex_match(lines[0], m, select)) unsupported("expected SELECT ?vars");
    std::vector<std::string> vars;
    {
        std::istringstream in(m[1].str());
        for (std::string v; in >> v;) vars.push_back(v.substr(1));
    }
    if (lines.size() < 3 || lines[1] != "WHERE {") unsupported("expected WHERE {");

    std::map<std::string, Pattern> patterns;
    std::vector<std::string> subject_order;
    std::size_t i = 2;
    for (; i < lines.size() && std::regex_match(lines[i], m, triple); ++i) {
        const auto s = m[1].str();
        auto pred = m[2].str();
        auto obj = m[3].str();
        if (!patterns.contains(s)) subject_order.push_back(s);
        auto& p = patterns[s];
        const auto iri = [](const std::string& t) { return t.substr(1, t.size() - 2); };
        if (pred == "a") {
            if (obj.front() != '<') unsupported("rdf:type object must be an IRI");
            p.subject_class = iri(obj);
        } else if (obj == "?" + std::string(kKeyVar)) {
            p.key_predicate = iri(pred);
        } else if (obj.front() == '?') {
            p.value_predicate = iri(pred);
            p.value_var = obj.substr(1);
        } else {
            unsupported("constant objects are outside the generated subset");
        }
    }
    if (i + 2 != lines.size() || lines[i] != "}" || lines[i + 1] != "ORDER BY ?" + std::string(kKeyVar)) {
        unsupported("expected closing brace and ORDER BY ?" + std::string(kKeyVar));
    }
    for (const auto& [s, p] : patterns) {
        if (p.subject_class.empty() || p.key_predicate.empty() || p.value_var.empty()) {
            unsupported("subject ?" + s + " needs a class, a patient key and a value");
        }
    }

    // subject -> predicate -> objects
    std::map<std::string, std::multimap<std::string, const Triple*>> by_subject;
    for (const auto& t : store.triples) by_subject[t.subject].emplace(t.predicate, &t);

    auto typed = [](const Triple& t) -> Value {
        switch (t.kind) {
        case ObjectKind::decimal: {
            double v = 0;
            auto [ptr, ec] = std::from_chars(t.object.data(), t.object.data() + t.object.size(), v);
            if (ec != std::errc{} || ptr != t.object.data() + t.object.size()) {
                throw Error("VDL_SYNTAX", "bad decimal literal '" + t.object + "'");
            }
            return v;
        }
        case ObjectKind::boolean: return t.object == "true";
        case ObjectKind::iri:
        case ObjectKind::string: return t.object;
        }
        return std::monostate{};
    };

    // Solutions per subject pattern: (patient key, value).
    std::map<std::string, std::multimap<std::string, Value>> solutions;
    for (const auto& s : subject_order) {
        const auto& p = patterns[s];
        auto& sol = solutions[s];
        for (const auto& [subject, preds] : by_subject) {
            bool typed_ok = false;
            for (auto [lo, hi] = preds.equal_range(std::string(kRdfType)); lo != hi; ++lo) {
                typed_ok = typed_ok || lo->second->object == p.subject_class;
            }
            if (!typed_ok) continue;
            auto [klo, khi] = preds.equal_range(p.key_predicate);
            auto [vlo, vhi] = preds.equal_range(p.value_predicate);
            for (auto k = klo; k != khi; ++k) {
                for (auto v = vlo; v != vhi; ++v) sol.emplace(k->second->object, typed(*v->second));
            }
        }
    }

    std::map<std::string, std::size_t> var_pos;
    for (std::size_t v = 0; v < vars.size(); ++v) var_pos[vars[v]] = v;
    std::vector<Row> rows;
    const auto& first = solutions[subject_order.front()];
    std::set<std::string> keys;
    for (const auto& [k, _] : first) keys.insert(k);
    for (const auto& key : keys) {
        std::vector<std::vector<Value>> partial{std::vector<Value>(vars.size())};
        for (const auto& s : subject_order) {
            const auto& p = patterns[s];
            if (!var_pos.contains(p.value_var)) unsupported("unprojected variable ?" + p.value_var);
            std::vector<std::vector<Value>> next;
            auto [lo, hi] = solutions[s].equal_range(key);
            for (const auto& row : partial) {
                for (auto it = lo; it != hi; ++it) {
                    auto r = row;
                    r[var_pos[p.value_var]] = it->second;
                    next.push_back(std::move(r));
                }
            }
            partial = std::move(next);
        }
        for (auto& r : partial) rows.push_back(Row{key, std::move(r)});
    }
    return rows;
}

}  // namespace

std::vector<OutputColumn> output_columns_for(const ModelDocument& doc) {
    std::vector<OutputColumn> cols;
    for (const auto& e : doc.data_elements) cols.push_back({e.local_name, e.concept_uri, e.expected_unit.value_or("")});
    return cols;
}

QueryText generate_query(const ModelDocument& doc, const SiteCatalog& site) {
    if (doc.data_elements.empty()) throw Error("VDL_EMPTY", "model '" + doc.id + "' has no data elements");
    std::vector<const FieldMapping*> maps;
    for (const auto& e : doc.data_elements) {
        const auto* m = site.mapping(e.concept_uri);
        if (!m) {
            throw Error("VDL_MISSING_MAPPING", "site " + site.site_id + " does not map " + e.concept_uri);
        }
        if (m->identifying) {
            throw Error("VDL_IDENTIFYING", "site " + site.site_id + " flags " + e.concept_uri + " as identifying");
        }
        maps.push_back(m);
    }

    QueryText q;
    q.dialect = site.dialect;
    q.output_columns = output_columns_for(doc);
    if (site.dialect == Dialect::sql) {
        std::vector<const RelationalMapping*> rel;
        for (const auto* m : maps) {
            if (!m->relational()) throw Error("VDL_DIALECT_MISMATCH", "graph mapping in sql site " + site.site_id);
            rel.push_back(m->relational());
        }
        q.text = emit_sql(doc, site, rel);
    } else {
        std::vector<const GraphMapping*> graph;
        for (const auto* m : maps) {
            if (!m->graph()) throw Error("VDL_DIALECT_MISMATCH", "relational mapping in sparql site " + site.site_id);
            graph.push_back(m->graph());
        }
        q.text = emit_sparql(doc, site, graph);
    }
    return q;
}

Table execute_fixture_query(const QueryText& q, const SiteCatalog& site, std::span<const HarmonizationAction> actions) {
    if (!site.fixture) throw Error("VDL_NO_FIXTURE", "site " + site.site_id + " has no fixture store");
    if (q.dialect != site.dialect) unsupported("query dialect differs from the site dialect");

    std::vector<Row> rows = q.dialect == Dialect::sql ? run_sql(q, *site.fixture) : run_sparql(q, *site.fixture);

    Table out;
    out.columns = q.output_columns;
    std::vector<const HarmonizationAction*> column_action(out.columns.size(), nullptr);
    for (const auto& a : actions) {
        if (a.site_id != site.site_id) continue;
        for (std::size_t c = 0; c < out.columns.size(); ++c) {
            if (out.columns[c].local_name == a.local_name) column_action[c] = &a;
        }
    }

    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.key < b.key; });
    for (auto& r : rows) {
        if (r.cells.size() != out.columns.size()) unsupported("projection does not match the output columns");
        for (std::size_t c = 0; c < r.cells.size(); ++c) {
            if (auto* v = std::get_if<double>(&r.cells[c]); v && column_action[c]) *v = column_action[c]->apply(*v);
        }
        out.rows.push_back(std::move(r.cells));
    }
    return out;
}

}  // namespace mila
