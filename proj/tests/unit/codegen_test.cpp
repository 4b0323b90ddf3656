#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <set>

#include "fixtures.hpp"
#include "gen.hpp"

#include "mila/codegen.hpp"
#include "mila/digest.hpp"

namespace mila {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using test::bundle;
using test::Gen;

std::string error_code(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return "";
}

Template tmpl(std::string body, std::vector<std::string> names) {
    return {"t", "1.0.0", std::move(body), std::move(names)};
}

Plan plan_for(const ModelDocument& doc) {
    return transform(doc, bundle().catalog, bundle().sites, bundle().units).value();
}

ArtifactSet bundled_artifacts(const std::vector<ModelDocument>& docs) {
    ArtifactSet all;
    for (const auto& doc : docs) all.merge(generate_artifacts(plan_for(doc), doc, bundle().templates));
    return all;
}

TEST(Template, DirectSubstitution) {
    EXPECT_EQ(render_template(tmpl("svc {{name}}", {"name"}), {{"name", std::string("treatment")}}), "svc treatment");
    EXPECT_EQ(render_template(tmpl("svc {{ name }}!", {"name"}), {{"name", std::string("x")}}), "svc x!");
}

TEST(Template, MissingBinding) {
    EXPECT_EQ(error_code([] { render_template(tmpl("svc {{name}}", {"name"}), {}); }), "CG_MISSING_BINDING");
    EXPECT_EQ(error_code([] { render_template(tmpl("svc {{other}}", {"name"}), {{"other", std::string("x")}}); }),
              "CG_MISSING_BINDING");
}

TEST(Template, LoopRendersEachItem) {
    const auto t = tmpl("[{% for s in sites %}{{s.id}}:{{s.n}};{% endfor %}] {{model}}", {"sites", "model"});
    const TemplateContext ctx{
        {"sites", std::vector<TemplateItem>{{{"id", "a"}, {"n", "1"}}, {{"id", "b"}, {"n", "2"}}}},
        {"model", std::string("m")},
    };
    EXPECT_EQ(render_template(t, ctx), "[a:1;b:2;] m");
    const TemplateContext none{{"sites", std::vector<TemplateItem>{}}, {"model", std::string("m")}};
    EXPECT_EQ(render_template(t, none), "[] m");
}

TEST(Template, MalformedDirectives) {
    for (const auto* body : {"{% for a in xs %}{% for b in xs %}{% endfor %}{% endfor %}", "{% for a in xs %}open",
                             "{% endfor %}", "{{ unterminated", "{% if xs %}{% endif %}"}) {
        EXPECT_EQ(error_code([&] {
                      render_template(tmpl(body, {"xs"}), {{"xs", std::vector<TemplateItem>{}}});
                  }),
                  "CG_BAD_TEMPLATE")
            << body;
        EXPECT_FALSE(check_template(tmpl(body, {"xs"})).empty()) << body;
    }
}

TEST(Template, BundledTemplatesCheckClean) {
    ASSERT_EQ(bundle().templates.templates.size(), 4u);
    for (const auto& [id, t] : bundle().templates.templates) EXPECT_TRUE(check_template(t).empty()) << id;
    EXPECT_EQ(error_code([] { bundle().templates.at("nope"); }), "CG_MISSING_TEMPLATE");
}

TEST(Template, RenderingIsPure) {
    const auto t = tmpl("{{a}}-{% for x in xs %}<{{x.v}}>{% endfor %}-{{b}}", {"a", "b", "xs"});
    test::for_all(71, 100, [&](Gen& g, int) {
        std::vector<TemplateItem> items(g.index(5));
        for (auto& it : items) it["v"] = g.identifier(g.index(6) + 1);
        const TemplateContext ctx{{"a", g.identifier()}, {"b", g.identifier()}, {"xs", items}};
        EXPECT_EQ(sha256_hex(render_template(t, ctx)), sha256_hex(render_template(t, ctx)));
    });
}

TEST(Templates, MissingDirectory) {
    test::TempDir dir;
    EXPECT_FALSE(load_templates(dir.path() / "absent"));
}

TEST(Artifacts, TreatmentPredictionLayout) {
    const auto& doc = bundle().model("treatment_prediction");
    const auto set = generate_artifacts(plan_for(doc), doc, bundle().templates);
    const std::set<std::string> expected{
        "app/models/Treatment_prediction.json", "app/services/treatment_prediction_service.txt",
        "app/routes/treatment_prediction.txt", "plans/treatment_prediction_plan.json"};
    std::set<std::string> got;
    for (const auto& [path, a] : set.artifacts()) {
        got.insert(path);
        EXPECT_TRUE(is_layout_path(path)) << path;
        EXPECT_EQ(a.content_hash, sha256_hex(a.content));
        EXPECT_EQ(a.trace.model_id, doc.id);
    }
    EXPECT_EQ(got, expected);
    EXPECT_FALSE(is_layout_path("templates/service.tmpl"));
    EXPECT_FALSE(is_layout_path("app/models/../../etc/passwd"));
}

TEST(Artifacts, HeadersCarryDocumentUrisAndHash) {
    for (const auto& doc : bundle().models) {
        const auto set = generate_artifacts(plan_for(doc), doc, bundle().templates);
        for (const auto& [path, a] : set.artifacts()) {
            const auto h = parse_provenance_header(a.content);
            ASSERT_TRUE(h) << path;
            EXPECT_EQ(h->model_id, doc.id);
            EXPECT_EQ(h->model_hash, canonical_hash(doc));
            EXPECT_EQ(h->ontology_uris, doc.concept_uris()) << path;
            EXPECT_EQ(h->template_id, a.trace.template_id);
        }
        const auto* copy = set.find("app/models/" + doc.name + ".json");
        ASSERT_NE(copy, nullptr);
        const auto back = parse_model(strip_provenance_header(copy->content));
        ASSERT_TRUE(back);
        EXPECT_EQ(canonical_hash(*back), canonical_hash(doc));
    }
}

TEST(Artifacts, DuplicateModelIdsCollide) {
    const auto& doc = bundle().model("ae_prediction");
    ArtifactSet set = generate_artifacts(plan_for(doc), doc, bundle().templates);
    auto twin = doc;
    twin.name = "AE_prediction_copy";
    EXPECT_EQ(error_code([&] { set.merge(generate_artifacts(plan_for(twin), twin, bundle().templates)); }),
              "CG_PATH_COLLISION");
}

TEST(Artifacts, RegenerationIsByteIdentical) {
    const auto a = manifest_of(bundled_artifacts(bundle().models));
    const auto b = manifest_of(bundled_artifacts(bundle().models));
    EXPECT_EQ(manifest_hash(a), manifest_hash(b));
    EXPECT_EQ(a.size(), 16u);
}

TEST(Artifacts, MatchesGoldenManifest) {
    const auto got = manifest_json(manifest_of(bundled_artifacts(bundle().models)));
    const auto file = test::workspace_dir() / "goldens/manifest.json";
    if (std::getenv("MILA_UPDATE_GOLDENS")) {
        std::ofstream(file, std::ios::binary) << got;
        return;
    }
    ASSERT_TRUE(fs::exists(file)) << "run with MILA_UPDATE_GOLDENS=1 to create " << file;
    EXPECT_EQ(got, test::slurp(file));
}

TEST(Artifacts, ReformattedSourceGivesSameManifest) {
    std::vector<ModelDocument> reformatted;
    for (const auto& doc : bundle().models) {
        const auto text = json::parse(serialize_model(doc)).dump(7);
        reformatted.push_back(parse_model(text).value());
    }
    EXPECT_EQ(manifest_of(bundled_artifacts(reformatted)), manifest_of(bundled_artifacts(bundle().models)));
}

TEST(WriteArtifacts, EmptySetTouchesNothing) {
    test::TempDir dir;
    const auto root = dir.path() / "out";
    EXPECT_TRUE(write_artifacts(ArtifactSet{}, root).empty());
    EXPECT_FALSE(fs::exists(root));
}

TEST(WriteArtifacts, WritesEveryFileWithItsHash) {
    test::TempDir dir;
    const auto set = bundled_artifacts(bundle().models);
    const auto manifest = write_artifacts(set, dir.path());
    EXPECT_EQ(manifest, manifest_of(set));
    for (const auto& [path, hash] : manifest) EXPECT_EQ(sha256_hex(test::slurp(dir.path() / path)), hash) << path;
    for (const auto& e : fs::recursive_directory_iterator(dir.path())) {
        EXPECT_NE(e.path().extension(), ".tmp") << e.path();
    }
}

TEST(WriteArtifacts, FailureLeavesNoTemporaries) {
    test::TempDir dir;
    std::ofstream(dir.path() / "app") << "not a directory";
    const auto set = bundled_artifacts({bundle().model("ae_prediction")});
    EXPECT_EQ(error_code([&] { write_artifacts(set, dir.path()); }), "CG_IO");
    for (const auto& e : fs::recursive_directory_iterator(dir.path())) {
        EXPECT_NE(e.path().extension(), ".tmp") << e.path();
        EXPECT_FALSE(e.path().string().find("_plan.json") != std::string::npos) << e.path();
    }
}

}  // namespace
}  // namespace mila
