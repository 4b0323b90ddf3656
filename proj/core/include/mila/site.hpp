#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mila/diagnostic.hpp"
#include "mila/model.hpp"
#include "mila/units.hpp"

namespace mila {

enum class Dialect : std::uint8_t { sql, sparql };

template <>
struct EnumTraits<Dialect> {
    static constexpr std::array<std::string_view, 2> names{"sql", "sparql"};
};

struct RelationalMapping {
    std::string table;
    std::string column;
    std::string patient_key_column;

    bool operator==(const RelationalMapping&) const = default;
};

struct GraphMapping {
    std::string subject_class_uri;
    std::string predicate_uri;

    bool operator==(const GraphMapping&) const = default;
};

struct FieldMapping {
    std::variant<RelationalMapping, GraphMapping> location;
    DataType datatype = DataType::numeric;
    std::optional<std::string> unit;
    bool identifying = false;

    const RelationalMapping* relational() const { return std::get_if<RelationalMapping>(&location); }
    const GraphMapping* graph() const { return std::get_if<GraphMapping>(&location); }
};

/// Cell value in a fixture or a query result.
using Value = std::variant<std::monostate, double, std::string, bool>;

std::string value_to_string(const Value& v);

struct FixtureTable {
    std::vector<std::string> columns;
    std::vector<std::vector<Value>> rows;
};

enum class ObjectKind : std::uint8_t { iri, string, decimal, boolean };

template <>
struct EnumTraits<ObjectKind> {
    static constexpr std::array<std::string_view, 4> names{"iri", "string", "decimal", "boolean"};
};

struct Triple {
    std::string subject;
    std::string predicate;
    std::string object;  // lexical form
    ObjectKind kind = ObjectKind::string;
};

/// In-memory store backing a site in tests and demos: named tables for
/// relational sites, a triple list for graph sites.
struct FixtureStore {
    std::map<std::string, FixtureTable> tables;
    std::vector<Triple> triples;
};

struct SiteCatalog {
    std::string site_id;
    Dialect dialect = Dialect::sql;
    /// sql: default patient key column; sparql: predicate linking a subject to its patient id.
    std::string patient_key;
    std::map<std::string, FieldMapping> mappings;  // concept uri -> mapping
    std::map<std::string, std::uint64_t> record_count;
    std::optional<FixtureStore> fixture;

    const FieldMapping* mapping(std::string_view concept_uri) const;
    std::uint64_t count(std::string_view concept_uri) const;
};

/// Site catalog format: `{site_id, dialect, patient_key, mappings:{uri:{...,
/// identifying}}, record_count:{uri:int}, fixture?}`. Units are checked
/// against `units` when given.
Result<SiteCatalog> load_site_catalog(std::string_view text, const UnitRegistry* units = nullptr);

nlohmann::json to_json(const SiteCatalog& site);

struct HarmonizationAction {
    std::string site_id;
    std::string local_name;
    std::string concept_uri;
    std::string from_unit;
    std::string to_unit;
    std::vector<ConversionStep> steps;
    AffineMap net;  // composed map, for reports

    double apply(double x) const;
    bool operator==(const HarmonizationAction&) const = default;
};

struct AvailabilityReport {
    std::map<std::string, std::vector<Diagnostic>> per_site;  // sorted by site id
    std::vector<HarmonizationAction> actions;

    bool pass() const;
    bool site_passes(const std::string& site_id) const;
    /// Every per-site diagnostic, sites in lexicographic order.
    std::vector<Diagnostic> diagnostics() const;
};

inline constexpr std::uint64_t kDefaultMinLocalInstances = 10;

/// Cross-checks every data element against every site named by the
/// federation directive: mapping present, datatype, record count and
/// unit (harmonizable differences become actions rather than errors).
AvailabilityReport check_availability(const ModelDocument& doc, const std::vector<SiteCatalog>& sites,
                                      const UnitRegistry& units, std::uint64_t k_min = kDefaultMinLocalInstances);

}  // namespace mila
