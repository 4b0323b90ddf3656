#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mila/dataset.hpp"
#include "mila/model.hpp"
#include "mila/ontology.hpp"
#include "mila/query.hpp"
#include "mila/site.hpp"
#include "mila/units.hpp"

namespace mila {

struct RetrievalPlan {
    std::string site_id;
    QueryText query;
    std::vector<HarmonizationAction> harmonization_actions;
    std::vector<OutputColumn> expected_columns;

    bool operator==(const RetrievalPlan&) const = default;
};

enum class StepKind : std::uint8_t { impute, encode, scale };

template <>
struct EnumTraits<StepKind> {
    static constexpr std::array<std::string_view, 3> names{"impute", "encode", "scale"};
};

struct PreprocessStep {
    StepKind kind = StepKind::impute;
    std::string element;
    ImputeValue constant = 0.0;            // impute
    std::vector<std::string> categories;   // encode, one-hot order
    double offset = 0.0;                   // scale
    double factor = 1.0;                   // scale

    bool operator==(const PreprocessStep&) const = default;
};

struct FeatureColumn {
    std::string feature_name;  // local_name, or local_name=category inside a one-hot block
    std::string source_element;
    std::string concept_uri;
    std::size_t index = 0;

    bool operator==(const FeatureColumn&) const = default;
};

struct PreprocessPlan {
    std::vector<PreprocessStep> steps;
    std::vector<FeatureColumn> feature_layout;
    std::string outcome_element;
    std::vector<std::string> classes;  // label index order
    /// Datetime cohort filters: rows lacking a value are excluded.
    std::vector<std::string> required_elements;

    bool operator==(const PreprocessPlan&) const = default;
};

struct TrainingConfig {
    AlgorithmTag algorithm_tag = AlgorithmTag::logistic_regression;
    bool executable = true;
    double learning_rate = 0.1;
    std::uint32_t local_epochs = 1;
    double l2 = 0.0;
    std::size_t num_features = 0;
    std::size_t num_classes = 0;

    bool operator==(const TrainingConfig&) const = default;
};

struct FederationPlan {
    FederationMode mode = FederationMode::federated;
    std::vector<std::string> sites;  // sorted
    std::uint32_t rounds = 1;
    Aggregator aggregator = Aggregator::fedavg;
    std::string weighting = "sample_count";
    std::uint64_t min_local_instances = kDefaultMinLocalInstances;
    std::vector<std::string> privacy_rules;
    std::uint64_t seed = 0;

    bool operator==(const FederationPlan&) const = default;
};

/// Platform-specific model compiled from one document: what every site runs.
struct Plan {
    std::string plan_id;
    std::string model_id;
    std::string model_hash;
    std::map<std::string, RetrievalPlan> retrieval;
    PreprocessPlan preprocess;
    TrainingConfig training;
    FederationPlan federation;
    std::vector<std::string> ontology_refs;

    bool operator==(const Plan&) const = default;
};

struct TransformConfig {
    std::uint64_t k_min = kDefaultMinLocalInstances;
};

/// FED_IDENTIFYING_FIELD for every element mapped to an identifying field
/// at a directive site; FED_TOO_FEW_SITES when a federated directive has
/// fewer than two usable sites.
ValidationReport check_federation(const ModelDocument& doc, const std::vector<SiteCatalog>& sites,
                                  const AvailabilityReport& availability);

/// Numeric and boolean features in declaration order, categorical elements
/// expanded to one-hot blocks in catalog value order; the outcome and
/// datetime cohort filters contribute no features.
std::vector<FeatureColumn> feature_layout(const ModelDocument& doc, const OntologyCatalog& catalog);

/// Compiles a validated document into a Plan. Pure: equal inputs give
/// byte-identical plans.
Result<Plan> transform(const ModelDocument& doc, const OntologyCatalog& catalog,
                       const std::vector<SiteCatalog>& sites, const UnitRegistry& units,
                       const TransformConfig& config = {});

/// Maps a retrieved table into the plan's feature space. Rows with a
/// missing outcome or missing required cohort value are dropped. Throws
/// Error(FS_BAD_VALUE) for cells outside the declared value sets.
LabeledDataset apply_preprocess(const Table& table, const PreprocessPlan& plan, const std::string& site_id);

nlohmann::json to_json(const Plan& plan);
Plan plan_from_json(const nlohmann::json& j);
/// Canonical JSON text (sorted keys, compact).
std::string serialize_plan(const Plan& plan);
std::string plan_hash(const Plan& plan);

nlohmann::json to_json(const PreprocessPlan& p);
nlohmann::json to_json(const TrainingConfig& t);

}  // namespace mila
