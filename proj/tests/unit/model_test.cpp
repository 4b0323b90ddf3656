#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "fixtures.hpp"
#include "gen.hpp"
#include "oracles.hpp"

#include "mila/metamodel.hpp"
#include "mila/model.hpp"

namespace mila {
namespace {

using nlohmann::json;
using test::bundle;
using test::Gen;

json bundled_json(const std::string& file) { return test::load_json(test::workspace_dir() / "models" / file); }

bool has_code(const std::vector<Diagnostic>& ds, const std::string& code, const std::string& path = "*") {
    return std::any_of(ds.begin(), ds.end(),
                       [&](const Diagnostic& d) { return d.code == code && (path == "*" || d.element_path == path); });
}

/// Parse plus structural validation, as one list.
std::vector<Diagnostic> structure_of(const json& j) {
    auto r = parse_model(j.dump());
    if (!r) return r.diagnostics();
    return validate_structure(*r).diagnostics;
}

/// Writes `j` with object keys in a random order.
std::string shuffled_dump(const json& j, Gen& g) {
    if (j.is_object()) {
        std::vector<std::string> keys;
        for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
        std::shuffle(keys.begin(), keys.end(), g.engine());
        std::string out = "{";
        for (std::size_t i = 0; i < keys.size(); ++i) {
            if (i) out += ",";
            out += json(keys[i]).dump() + ":" + shuffled_dump(j.at(keys[i]), g);
        }
        return out + "}";
    }
    if (j.is_array()) {
        std::string out = "[";
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (i) out += ",";
            out += shuffled_dump(j[i], g);
        }
        return out + "]";
    }
    return j.dump();
}

void required_pointers(const Metamodel& mm, const json& value, const ElementKind& kind, const std::string& path,
                       std::vector<std::string>& out) {
    for (const auto& f : kind.fields) {
        if (!value.contains(f.name)) continue;
        const auto p = path + "/" + pointer_escape(f.name);
        if (f.required) out.push_back(p);
        const auto& child = value.at(f.name);
        if (f.type == FieldType::object) {
            required_pointers(mm, child, *mm.find(f.element_kind), p, out);
        } else if (f.type == FieldType::object_array) {
            for (std::size_t i = 0; i < child.size(); ++i) {
                required_pointers(mm, child[i], *mm.find(f.element_kind), p + "/" + std::to_string(i), out);
            }
        } else if (f.type == FieldType::object_map) {
            for (auto it = child.begin(); it != child.end(); ++it) {
                required_pointers(mm, it.value(), *mm.find(f.element_kind), p + "/" + pointer_escape(it.key()), out);
            }
        }
    }
}

TEST(ParseModel, TreatmentPredictionShape) {
    const auto& doc = bundle().model("treatment_prediction");
    EXPECT_EQ(doc.name, "Treatment_prediction");
    EXPECT_EQ(doc.task.kind, TaskKind::treatment_recommendation);
    ASSERT_NE(doc.outcome(), nullptr);
    EXPECT_EQ(doc.outcome()->local_name, "treatment_response");
    const auto predictors =
        std::count_if(doc.data_elements.begin(), doc.data_elements.end(),
                      [](const DataElementRef& e) { return e.role == Role::predictor; });
    EXPECT_GE(predictors, 3);
}

TEST(ParseModel, EmptyTextIsSyntaxError) {
    auto r = parse_model("");
    ASSERT_FALSE(r);
    ASSERT_EQ(r.diagnostics().size(), 1u);
    EXPECT_EQ(r.diagnostics()[0].code, "MM_SYNTAX");
    EXPECT_EQ(r.diagnostics()[0].element_path, "");
}

TEST(ParseModel, ZeroRoundsRejectedAtRoundsField) {
    auto j = bundled_json("Treatment_prediction.json");
    j["federation"]["rounds"] = 0;
    const auto ds = structure_of(j);
    EXPECT_TRUE(has_code(ds, "MM_BAD_VALUE", "/federation/rounds"));
}

TEST(ParseModel, BundledModelsPassStructure) {
    ASSERT_EQ(bundle().models.size(), 4u);
    for (const auto& doc : bundle().models) {
        const auto report = validate_structure(doc);
        EXPECT_TRUE(report.pass()) << doc.id << ": " << format_diagnostic(report.diagnostics.front());
    }
}

TEST(ParseModel, TwoOutcomesIsCardinalityError) {
    auto j = bundled_json("AE_prediction.json");
    j["data_elements"][1]["role"] = "outcome";
    EXPECT_TRUE(has_code(structure_of(j), "MM_CARDINALITY", "/data_elements"));
}

TEST(ParseModel, DeletingAnyRequiredFieldFails) {
    const auto& mm = builtin_metamodel();
    for (const auto* file : {"Treatment_prediction.json", "Adverse_Event_causation.json", "Treatment_cause_AE.json",
                             "AE_prediction.json"}) {
        const auto base = bundled_json(file);
        std::vector<std::string> pointers;
        required_pointers(mm, base, *mm.find(mm.root_kind()), "", pointers);
        ASSERT_GT(pointers.size(), 20u);
        for (const auto& p : pointers) {
            SCOPED_TRACE(std::string(file) + " without " + p);
            auto j = base;
            const json::json_pointer ptr(p);
            j.at(ptr.parent_pointer()).erase(ptr.back());
            const auto ds = structure_of(j);
            EXPECT_TRUE(has_errors(ds));
        }
    }
}

TEST(ParseModel, RoundTripIsIdentity) {
    for (const auto& doc : bundle().models) {
        auto again = parse_model(serialize_model(doc));
        ASSERT_TRUE(again);
        EXPECT_EQ(*again, doc);
        EXPECT_EQ(serialize_model(*again), serialize_model(doc));
    }
}

TEST(CanonicalHash, StableAndSensitive) {
    const auto& doc = bundle().model("ae_prediction");
    EXPECT_EQ(canonical_hash(doc), canonical_hash(doc));
    auto renamed = doc;
    renamed.name = "AE_prediction_v2";
    EXPECT_NE(canonical_hash(renamed), canonical_hash(doc));
}

TEST(CanonicalHash, KeyOrderDoesNotMatter) {
    const auto base = bundled_json("Adverse_Event_causation.json");
    const auto expected = canonical_hash(*parse_model(base.dump()));
    test::for_all(17, 50, [&](Gen& g, int i) {
        SCOPED_TRACE(i);
        auto r = parse_model(shuffled_dump(base, g));
        ASSERT_TRUE(r);
        EXPECT_EQ(canonical_hash(*r), expected);
    });
}

TEST(ValidateStructure, PureFunction) {
    auto j = bundled_json("Treatment_cause_AE.json");
    j["data_elements"][0]["expected_datatype"] = "numeric";
    const auto doc = *parse_model(j.dump());
    const auto a = validate_structure(doc);
    const auto b = validate_structure(doc);
    EXPECT_FALSE(a.pass());
    EXPECT_EQ(a, b);
}

/// Random damage to a valid document: dropped keys, wrong types, bad enum
/// values, unknown keys, shuffled roles.
json mutate(json j, Gen& g) {
    const int edits = g.int_in(1, 4);
    for (int e = 0; e < edits; ++e) {
        switch (g.int_in(0, 6)) {
            case 0: j["data_elements"][g.index(j["data_elements"].size())]["role"] =
                        g.pick(std::vector<std::string>{"predictor", "outcome", "cohort_filter", "bogus"});
                break;
            case 1: j["federation"]["rounds"] = g.int_in(-2, 3); break;
            case 2: j["training"]["learning_rate"] = g.coin() ? json("fast") : json(g.uniform(-1.0, 1.0)); break;
            case 3: j["data_elements"][g.index(j["data_elements"].size())].erase("concept_uri"); break;
            case 4: j["task"]["extra_" + g.identifier(3)] = 1; break;
            case 5: j["data_elements"][g.index(j["data_elements"].size())]["expected_datatype"] =
                        g.pick(std::vector<std::string>{"numeric", "categorical", "boolean", "datetime", "text"});
                break;
            default: j["training"]["preprocessing"][g.identifier(4)] = {{"impute_value", 1}}; break;
        }
    }
    return j;
}

TEST(ValidateStructure, DiagnosticPathsResolve) {
    std::vector<json> bases;
    for (const auto* f : {"Treatment_prediction.json", "AE_prediction.json", "Treatment_cause_AE.json"}) {
        bases.push_back(bundled_json(f));
    }
    std::size_t seen = 0;
    test::for_all(23, 300, [&](Gen& g, int i) {
        SCOPED_TRACE(i);
        const auto j = mutate(g.pick(bases), g);
        for (const auto& d : structure_of(j)) {
            ++seen;
            EXPECT_TRUE(test::pointer_resolves(j, d.element_path)) << d.code << " at '" << d.element_path << "'";
        }
    });
    EXPECT_GT(seen, 300u);
}

TEST(ValidateStructure, PassingDocumentsHaveOneOutcome) {
    const auto base = bundled_json("AE_prediction.json");
    int passed = 0;
    test::for_all(29, 300, [&](Gen& g, int) {
        auto j = base;
        for (auto& e : j["data_elements"]) {
            e["role"] = g.pick(std::vector<std::string>{"predictor", "outcome", "predictor"});
        }
        auto r = parse_model(j.dump());
        if (!r || !validate_structure(*r).pass()) return;
        ++passed;
        const auto outcomes = std::count_if(r->data_elements.begin(), r->data_elements.end(),
                                            [](const DataElementRef& e) { return e.role == Role::outcome; });
        EXPECT_EQ(outcomes, 1);
    });
    EXPECT_GT(passed, 0);
}

TEST(ValidateStructure, ExecutableOnlyForLogisticRegression) {
    auto j = bundled_json("AE_prediction.json");
    j["training"]["algorithm_tag"] = "xgboost";
    EXPECT_TRUE(has_code(structure_of(j), "MM_EXECUTABLE", "/training/executable"));
    j["training"]["executable"] = false;
    EXPECT_FALSE(has_errors(structure_of(j)));
}

TEST(ValidateStructure, PreprocessingMustCoverFeatures) {
    auto j = bundled_json("Treatment_prediction.json");
    j["training"]["preprocessing"].erase("age");
    EXPECT_TRUE(has_code(structure_of(j), "MM_MISSING_FIELD", "/training/preprocessing"));
    j = bundled_json("Treatment_prediction.json");
    j["training"]["preprocessing"]["nonexistent"] = {{"impute_value", 0}};
    EXPECT_TRUE(has_code(structure_of(j), "MM_DANGLING_REF"));
}

TEST(ValidateStructure, UnknownTopLevelKeyIsWarningOnly) {
    auto j = bundled_json("Treatment_prediction.json");
    j["comment"] = "draft";
    std::vector<Diagnostic> warnings;
    auto r = parse_model(j.dump(), &warnings);
    ASSERT_TRUE(r);
    ASSERT_EQ(warnings.size(), 1u);
    EXPECT_EQ(warnings[0].severity, Severity::warning);
    EXPECT_EQ(warnings[0].element_path, "/comment");
}

TEST(Metamodel, BuiltinTableIsConsistent) { EXPECT_TRUE(builtin_metamodel().consistency_errors().empty()); }

TEST(Diagnostics, StageFollowsCodePrefix) {
    EXPECT_EQ(make_error("MM_SHAPE", "x").stage, Stage::structure);
    EXPECT_EQ(make_error("SEM_RULE_DENY", "x").stage, Stage::semantics);
    EXPECT_EQ(make_error("AVAIL_COUNT", "x").stage, Stage::availability);
    EXPECT_EQ(make_error("FED_TOO_FEW_SITES", "x").stage, Stage::federation);
    EXPECT_EQ(format_diagnostic(make_error("MM_SHAPE", "bad", "/a")), "error MM_SHAPE /a: bad");
}

}  // namespace
}  // namespace mila
