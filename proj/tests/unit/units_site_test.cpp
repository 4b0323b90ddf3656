#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "fixtures.hpp"
#include "gen.hpp"
#include "oracles.hpp"

#include "mila/site.hpp"
#include "mila/units.hpp"

namespace mila {
namespace {

using nlohmann::json;
using test::bundle;
using test::Gen;

const std::string kOnto = "https://w3id.org/mila/onto#";

UnitRegistry glucose_registry() {
    UnitRegistry r;
    r.add_unit("mmol/L", UnitDimension::mass_concentration);
    r.add_unit("mg/dL", UnitDimension::mass_concentration);
    r.add_unit("Cel", UnitDimension::time);  // dimension label is arbitrary here
    r.add_unit("[degF]", UnitDimension::time);
    r.add_conversion("mmol/L", "mg/dL", 18.0);
    r.add_conversion("Cel", "[degF]", 1.8, 32.0);
    return r;
}

std::string error_code(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return "";
}

TEST(Units, ConfiguredPair) {
    const auto r = glucose_registry();
    EXPECT_EQ(r.convert(5.0, "mmol/L", "mg/dL"), 90.0);
    EXPECT_EQ(r.convert(90.0, "mg/dL", "mmol/L"), 5.0);
    EXPECT_EQ(convert_units(5.0, "mmol/L", "mg/dL", bundle().units), 90.0);
}

TEST(Units, AffineReverseUsesOffset) {
    const auto r = glucose_registry();
    EXPECT_DOUBLE_EQ(r.convert(100.0, "Cel", "[degF]"), 212.0);
    EXPECT_DOUBLE_EQ(r.convert(212.0, "[degF]", "Cel"), 100.0);
    test::for_all(43, 1000, [&](Gen& g, int) {
        // Near the offset the subtraction cancels, so small values are
        // compared on the scale of the offset.
        const double x = g.wide_value();
        EXPECT_LE(test::rel_diff(r.convert(r.convert(x, "Cel", "[degF]"), "[degF]", "Cel"), x, 100.0), 1e-12) << x;
    });
}

TEST(Units, IdentityIsExact) {
    test::for_all(47, 200, [](Gen& g, int) {
        const double x = g.wide_value();
        for (const auto& [code, dim] : bundle().units.units()) EXPECT_EQ(bundle().units.convert(x, code, code), x);
    });
}

TEST(Units, RoundTripWithinTolerance) {
    const auto& reg = bundle().units;
    std::size_t pairs = 0;
    for (const auto& [a, da] : reg.units()) {
        for (const auto& [b, db] : reg.units()) {
            if (a == b || !reg.convertible(a, b)) continue;
            ++pairs;
            test::for_all(53, 1000, [&](Gen& g, int) {
                const double x = g.wide_value();
                const double back = reg.convert(reg.convert(x, a, b), b, a);
                ASSERT_LE(test::rel_diff(back, x), 1e-12) << a << " -> " << b << " -> " << a << " x=" << x;
            });
        }
    }
    EXPECT_GE(pairs, 10u);
}

TEST(Units, AgreesWithPathEnumerationOracle) {
    const auto& reg = bundle().units;
    test::for_all(59, 50, [&](Gen& g, int) {
        const double x = g.wide_value();
        for (const auto& [a, da] : reg.units()) {
            for (const auto& [b, db] : reg.units()) {
                const auto expected = test::oracle_convert(bundle().units_json, a, b, x);
                EXPECT_EQ(reg.convertible(a, b), expected.has_value()) << a << " -> " << b;
                if (expected) {
                    EXPECT_LE(test::rel_diff(reg.convert(x, a, b), *expected), 1e-12) << a << " -> " << b;
                }
            }
        }
    });
}

TEST(Units, DimensionMismatchAlwaysRejected) {
    const auto& reg = bundle().units;
    std::size_t rejected = 0;
    for (const auto& [a, da] : reg.units()) {
        for (const auto& [b, db] : reg.units()) {
            if (da == db) continue;
            EXPECT_FALSE(reg.convertible(a, b));
            EXPECT_EQ(error_code([&] { reg.convert(1.0, a, b); }), "VDL_NO_CONVERSION");
            auto copy = reg;
            EXPECT_EQ(error_code([&] { copy.add_conversion(a, b, 2.0); }), "VDL_CROSS_DIMENSION");
            ++rejected;
        }
    }
    EXPECT_GT(rejected, 100u);
    auto copy = reg;
    EXPECT_EQ(error_code([&] { copy.add_conversion("mg/dL", "furlong", 2.0); }), "VDL_UNKNOWN_UNIT");
    EXPECT_EQ(error_code([&] { copy.add_unit("mg/dL", UnitDimension::pressure); }), "VDL_SYNTAX");
}

TEST(Units, UnreachableSameDimensionRejected) {
    UnitRegistry r;
    r.add_unit("x", UnitDimension::count);
    r.add_unit("y", UnitDimension::count);
    EXPECT_FALSE(r.steps("x", "y").has_value());
    EXPECT_EQ(error_code([&] { r.convert(1.0, "x", "y"); }), "VDL_NO_CONVERSION");
}

TEST(Sites, BundledFourSitesLoad) {
    ASSERT_EQ(bundle().sites.size(), 4u);
    int sql = 0, sparql = 0;
    for (const auto& s : bundle().sites) {
        (s.dialect == Dialect::sql ? sql : sparql)++;
        EXPECT_TRUE(s.fixture.has_value()) << s.site_id;
    }
    EXPECT_EQ(sql, 2);
    EXPECT_EQ(sparql, 2);
}

TEST(Sites, RelationalMappingInSparqlSite) {
    auto j = bundle().site_json[2];
    ASSERT_EQ(j["dialect"], "sparql");
    j["mappings"][kOnto + "Age"] = {{"table", "patients"}, {"column", "age"}, {"datatype", "numeric"}, {"unit", "a"}};
    const auto r = load_site_catalog(j.dump(), &bundle().units);
    ASSERT_FALSE(r);
    EXPECT_EQ(r.diagnostics()[0].code, "VDL_DIALECT_MISMATCH");
}

TEST(Sites, UnknownUnitRejectedAtLoad) {
    auto j = bundle().site_json[0];
    j["mappings"][kOnto + "Age"]["unit"] = "fortnight";
    const auto r = load_site_catalog(j.dump(), &bundle().units);
    ASSERT_FALSE(r);
    EXPECT_EQ(r.diagnostics()[0].code, "VDL_UNKNOWN_UNIT");
}

TEST(Sites, EveryModelConceptIsMappedSomewhere) {
    for (const auto& doc : bundle().models) {
        for (const auto& uri : doc.concept_uris()) {
            const bool mapped = std::any_of(bundle().sites.begin(), bundle().sites.end(),
                                            [&](const SiteCatalog& s) { return s.mapping(uri) != nullptr; });
            EXPECT_TRUE(mapped) << doc.id << " " << uri;
        }
    }
}

TEST(Availability, BundledModelsPassEverywhere) {
    for (const auto& doc : bundle().models) {
        const auto r = check_availability(doc, bundle().sites, bundle().units, 10);
        EXPECT_TRUE(r.pass()) << doc.id;
        EXPECT_EQ(r.per_site.size(), 4u);
    }
}

TEST(Availability, GlucoseInMillimolesBecomesOneAction) {
    auto doc = bundle().model("treatment_prediction");
    doc.federation.site_ids = {"site_c"};
    const auto r = check_availability(doc, bundle().sites, bundle().units, 10);
    ASSERT_TRUE(r.pass());
    ASSERT_EQ(r.actions.size(), 1u);
    const auto& a = r.actions[0];
    EXPECT_EQ(a.site_id, "site_c");
    EXPECT_EQ(a.local_name, "blood_glucose");
    EXPECT_EQ(a.from_unit, "mmol/L");
    EXPECT_EQ(a.to_unit, "mg/dL");
    EXPECT_EQ(a.apply(5.0), 90.0);
}

TEST(Availability, SmallSiteFailsCount) {
    auto j = bundle().site_json[0];
    j["record_count"][kOnto + "BloodGlucose"] = 3;
    auto sites = bundle().sites;
    sites[0] = load_site_catalog(j.dump(), &bundle().units).value();
    const auto r = check_availability(bundle().model("treatment_prediction"), sites, bundle().units, 10);
    ASSERT_FALSE(r.pass());
    const auto ds = r.per_site.at("site_a");
    ASSERT_EQ(ds.size(), 1u);
    EXPECT_EQ(ds[0].code, "AVAIL_COUNT");
    EXPECT_EQ(ds[0].element_path, "/data_elements/2");
    EXPECT_TRUE(r.site_passes("site_b"));
}

TEST(Availability, UnknownSiteReported) {
    auto doc = bundle().model("ae_prediction");
    doc.federation.site_ids.push_back("site_z");
    const auto r = check_availability(doc, bundle().sites, bundle().units, 10);
    ASSERT_EQ(r.per_site.at("site_z").size(), 1u);
    EXPECT_EQ(r.per_site.at("site_z")[0].code, "AVAIL_NO_SITE");
}

/// Random damage to one site's mappings and counts.
json mutate_site(json j, Gen& g) {
    std::vector<std::string> uris;
    for (auto it = j["mappings"].begin(); it != j["mappings"].end(); ++it) uris.push_back(it.key());
    std::vector<std::string> units;
    for (const auto& u : bundle().units_json["units"]) units.push_back(u["code"]);
    const int edits = g.int_in(1, 6);
    for (int e = 0; e < edits; ++e) {
        const auto& uri = g.pick(uris);
        if (!j["mappings"].contains(uri)) continue;
        auto& m = j["mappings"][uri];
        switch (g.int_in(0, 4)) {
            case 0: j["mappings"].erase(uri); break;
            case 1: {
                const auto dt = g.pick(std::vector<std::string>{"numeric", "categorical", "boolean", "datetime"});
                m["datatype"] = dt;
                if (dt != "numeric") m.erase("unit");
                break;
            }
            case 2: j["record_count"][uri] = g.int_in(0, 30); break;
            case 3:
                if (m["datatype"] == "numeric") m["unit"] = g.pick(units);
                break;
            default: m.erase("unit"); break;
        }
    }
    return j;
}

TEST(Availability, MatchesBruteForceOnRandomCatalogs) {
    test::for_all(61, 300, [](Gen& g, int i) {
        SCOPED_TRACE(i);
        const auto idx = g.index(bundle().site_json.size());
        const auto j = mutate_site(bundle().site_json[idx], g);
        const auto site = load_site_catalog(j.dump(), &bundle().units);
        ASSERT_TRUE(site) << format_diagnostic(site.diagnostics().front());
        const auto& doc = bundle().models[g.index(bundle().models.size())];
        const std::uint64_t k_min = static_cast<std::uint64_t>(g.int_in(1, 40));
        auto single = doc;
        single.federation.site_ids = {site->site_id};
        const auto r = check_availability(single, {*site}, bundle().units, k_min);
        std::multiset<std::string> got;
        for (const auto& d : r.per_site.at(site->site_id)) got.insert(d.code + " " + d.element_path);
        EXPECT_EQ(got, test::oracle_availability(doc, j, bundle().units_json, k_min));
    });
}

}  // namespace
}  // namespace mila
