#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "mila/diagnostic.hpp"
#include "mila/enum_names.hpp"

namespace mila {

enum class TaskKind : std::uint8_t {
    treatment_recommendation,
    ae_causality,
    treatment_ae_detection,
    future_ae_family,
    generic_prediction,
};
enum class Role : std::uint8_t { predictor, outcome, cohort_filter };
enum class DataType : std::uint8_t { numeric, categorical, boolean, datetime };
enum class FederationMode : std::uint8_t { local, multi_site, federated };
enum class Aggregator : std::uint8_t { fedavg };
enum class AlgorithmTag : std::uint8_t {
    logistic_regression,
    mlp,
    svm_rbf,
    xgboost,
    random_forest,
    decision_tree,
};

template <>
struct EnumTraits<TaskKind> {
    static constexpr std::array<std::string_view, 5> names{
        "treatment_recommendation", "ae_causality", "treatment_ae_detection",
        "future_ae_family", "generic_prediction"};
};
template <>
struct EnumTraits<Role> {
    static constexpr std::array<std::string_view, 3> names{"predictor", "outcome", "cohort_filter"};
};
template <>
struct EnumTraits<DataType> {
    static constexpr std::array<std::string_view, 4> names{"numeric", "categorical", "boolean",
                                                           "datetime"};
};
template <>
struct EnumTraits<FederationMode> {
    static constexpr std::array<std::string_view, 3> names{"local", "multi_site", "federated"};
};
template <>
struct EnumTraits<Aggregator> {
    static constexpr std::array<std::string_view, 1> names{"fedavg"};
};
template <>
struct EnumTraits<AlgorithmTag> {
    static constexpr std::array<std::string_view, 6> names{
        "logistic_regression", "mlp", "svm_rbf", "xgboost", "random_forest", "decision_tree"};
};

/// Human label used in audit tables.
std::string_view task_label(TaskKind kind);

struct TaskSpec {
    TaskKind kind = TaskKind::generic_prediction;
    std::string description;

    bool operator==(const TaskSpec&) const = default;
};

struct DataElementRef {
    std::string local_name;
    std::string concept_uri;
    Role role = Role::predictor;
    DataType expected_datatype = DataType::numeric;
    std::optional<std::string> expected_unit;  // UCUM-style code, numeric elements only

    bool operator==(const DataElementRef&) const = default;
};

struct FederationDirective {
    FederationMode mode = FederationMode::federated;
    std::vector<std::string> site_ids;
    std::uint32_t rounds = 1;
    std::uint32_t min_local_instances = 1;
    Aggregator aggregator = Aggregator::fedavg;
    std::uint64_t seed = 0;

    bool operator==(const FederationDirective&) const = default;
};

/// Numeric imputation constant or a category label.
using ImputeValue = std::variant<double, std::string>;

/// Declared preprocessing for one element: impute, then z = (x - offset) / factor.
struct PreprocessConstant {
    ImputeValue impute_value = 0.0;
    double scale_offset = 0.0;
    double scale_factor = 1.0;

    bool operator==(const PreprocessConstant&) const = default;
};

struct TrainingSpec {
    AlgorithmTag algorithm_tag = AlgorithmTag::logistic_regression;
    bool executable = true;
    double learning_rate = 0.1;
    std::uint32_t local_epochs = 1;
    double l2 = 0.0;
    std::map<std::string, PreprocessConstant> preprocessing;  // keyed by local_name

    bool operator==(const TrainingSpec&) const = default;
};

/// The platform-independent model: what the analysis should compute,
/// with every data element anchored to an ontology concept.
struct ModelDocument {
    std::string id;
    std::string name;
    std::string version;
    TaskSpec task;
    std::vector<DataElementRef> data_elements;
    FederationDirective federation;
    TrainingSpec training;
    std::map<std::string, std::string> metadata;

    bool operator==(const ModelDocument&) const = default;

    /// First element with role=outcome, or nullptr.
    const DataElementRef* outcome() const;
    const DataElementRef* find_element(std::string_view local_name) const;
    /// Pointer to the i-th data element, e.g. "/data_elements/2".
    static std::string element_path(std::size_t index);
    /// Sorted, de-duplicated concept URIs referenced by the document.
    std::vector<std::string> concept_uris() const;
};

class Metamodel;

/// Parses a model document. Structural problems found by the metamodel walk
/// are returned as diagnostics; warnings on a successful parse go to
/// `warnings` when provided. Never throws on bad input.
Result<ModelDocument> parse_model(std::string_view text, std::vector<Diagnostic>* warnings = nullptr);
Result<ModelDocument> parse_model(std::string_view text, const Metamodel& mm,
                                  std::vector<Diagnostic>* warnings = nullptr);

nlohmann::json to_json(const ModelDocument& doc);
/// Canonical serialization: sorted keys, no insignificant whitespace.
std::string serialize_model(const ModelDocument& doc);
/// SHA-256 hex digest of serialize_model(doc).
std::string canonical_hash(const ModelDocument& doc);

/// Escapes one RFC-6901 reference token.
std::string pointer_escape(std::string_view token);

}  // namespace mila
