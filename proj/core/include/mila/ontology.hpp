#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "mila/diagnostic.hpp"
#include "mila/model.hpp"
#include "mila/units.hpp"

namespace mila {

enum class Category : std::uint8_t {
    condition,
    observation,
    lab_test,
    treatment,
    adverse_event,
    patient_attribute,
    outcome_measure,
};

template <>
struct EnumTraits<Category> {
    static constexpr std::array<std::string_view, 7> names{
        "condition", "observation", "lab_test", "treatment",
        "adverse_event", "patient_attribute", "outcome_measure"};
};

struct Concept {
    std::string uri;
    std::string label;
    Category category = Category::condition;
    std::optional<UnitDimension> unit_dimension;
    std::vector<std::string> parents;
    std::vector<Role> allowed_roles;
    /// Permitted category labels for categorical data, in declaration order.
    std::vector<std::string> values;

    bool allows(Role r) const;
};

struct RoleRule {
    TaskKind task_kind = TaskKind::generic_prediction;
    Category outcome_category = Category::condition;
    Category predictor_category = Category::condition;
    bool allowed = false;
};

/// Immutable after load; safe to share between threads.
class OntologyCatalog {
public:
    const std::string& version() const { return version_; }
    const std::map<std::string, Concept>& concepts() const { return concepts_; }
    const std::vector<RoleRule>& role_rules() const { return rules_; }

    /// Exact-match lookup; nullptr when the URI is not in the catalog.
    const Concept* resolve(std::string_view uri) const;

    /// Rule verdict for a (task, outcome category, predictor category)
    /// triple. Triples without a rule are denied.
    bool rule_allows(TaskKind task, Category outcome, Category predictor) const;

    /// Adds a concept after load-time checks have passed elsewhere; used by
    /// tests that extend a catalog. Throws Error(ONT_DUP_URI).
    void add_concept(Concept c);

private:
    friend Result<OntologyCatalog> load_catalog(std::string_view text);

    std::string version_;
    std::map<std::string, Concept> concepts_;
    std::vector<RoleRule> rules_;
    std::map<std::tuple<TaskKind, Category, Category>, bool> rule_index_;
};

/// Catalog format: `{version, concepts:[{uri,label,category,unit_dimension?,
/// parents[],allowed_roles[],values?[]}], role_rules:[{task_kind,
/// outcome_category,predictor_category,allowed}]}`.
Result<OntologyCatalog> load_catalog(std::string_view text);

/// Concept existence, role compatibility, rule-table verdicts and unit
/// dimension agreement for every data element.
ValidationReport validate_semantics(const ModelDocument& doc, const OntologyCatalog& catalog,
                                    const UnitRegistry& units);

}  // namespace mila
