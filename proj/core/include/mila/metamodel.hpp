#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mila/diagnostic.hpp"
#include "mila/model.hpp"

namespace mila {

enum class FieldType : std::uint8_t {
    string,
    integer,
    number,
    boolean,
    enumeration,
    scalar,            // number or string
    object,            // nested element of `element_kind`
    object_array,      // array of `element_kind`
    string_array,
    string_map,
    object_map,        // string -> element of `element_kind`
};

enum class Pattern : std::uint8_t { none, slug, identifier, name, uri, semver, unit };

struct FieldSpec {
    std::string name;
    FieldType type = FieldType::string;
    bool required = true;
    std::vector<std::string> allowed;  // enumeration values
    std::string element_kind;          // object / object_array / object_map
    Pattern pattern = Pattern::none;   // string, string_array items
    std::optional<double> minimum;
    bool exclusive_minimum = false;
    std::optional<double> maximum;
    bool nonzero = false;
    std::size_t min_items = 0;
    std::string unique_by;  // object_array: field whose values must be unique
};

struct ElementKind {
    std::string name;
    std::vector<FieldSpec> fields;
    bool open = false;  // unknown keys are warnings instead of errors
};

struct RoleCardinality {
    Role role = Role::predictor;
    std::size_t min = 0;
    std::size_t max = std::numeric_limits<std::size_t>::max();
};

/// The MILA metamodel as data: element kinds with their field requirements
/// plus role cardinalities. Parsing and structural validation are both
/// driven from this table.
class Metamodel {
public:
    Metamodel(std::string root_kind, std::vector<ElementKind> kinds,
              std::vector<RoleCardinality> cardinalities);

    const std::string& root_kind() const { return root_kind_; }
    const std::vector<ElementKind>& kinds() const { return kinds_; }
    const std::vector<RoleCardinality>& cardinalities() const { return cardinalities_; }
    const ElementKind* find(const std::string& kind) const;

    /// Problems with the table itself (undeclared kinds, untyped fields).
    std::vector<std::string> consistency_errors() const;

    /// Walks a JSON value against `root_kind`, accumulating MM_* diagnostics.
    std::vector<Diagnostic> check(const nlohmann::json& value) const;

private:
    std::string root_kind_;
    std::vector<ElementKind> kinds_;
    std::vector<RoleCardinality> cardinalities_;
};

const Metamodel& builtin_metamodel();

bool matches_pattern(Pattern p, std::string_view text);

/// Metamodel conformance plus cross-field workflow rules. Pure.
ValidationReport validate_structure(const ModelDocument& doc, const Metamodel& mm = builtin_metamodel());

}  // namespace mila
