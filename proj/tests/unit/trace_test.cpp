#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "gen.hpp"
#include "oracles.hpp"
#include "run.hpp"

#include "mila/digest.hpp"
#include "mila/trace.hpp"

namespace mila {
namespace {

TraceRecord record_of(const std::string& content, RecordKind kind = RecordKind::artifact) {
    TraceRecord r;
    r.kind = kind;
    r.model_id = "m";
    r.model_hash = std::string(64, 'a');
    r.content_hash = sha256_hex(content);
    r.subject = "s";
    return r;
}

TEST(Ledger, AssignsSequentialIds) {
    Ledger l;
    EXPECT_EQ(l.append(record_of("one"), "one").record_id, 1u);
    const auto& second = l.append(record_of("two"), "two");
    EXPECT_EQ(second.record_id, 2u);
    EXPECT_GT(second.logical_time, l.snapshot()[0].logical_time);
}

TEST(Ledger, RejectsContentHashMismatch) {
    Ledger l;
    try {
        l.append(record_of("one"), "two");
        FAIL() << "expected TA_HASH_MISMATCH";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "TA_HASH_MISMATCH");
    }
    EXPECT_EQ(l.size(), 0u);
}

TEST(Ledger, PrefixNeverChanges) {
    test::for_all(211, 20, [](test::Gen& g, int) {
        Ledger l;
        std::vector<TraceRecord> before;
        const auto n = g.index(30) + 1;
        for (std::size_t i = 0; i < n; ++i) {
            const auto content = g.identifier();
            l.append(record_of(content, g.coin() ? RecordKind::round : RecordKind::artifact), content);
            const auto now = l.snapshot();
            ASSERT_EQ(now.size(), before.size() + 1);
            for (std::size_t k = 0; k < before.size(); ++k) ASSERT_EQ(now[k], before[k]);
            before = now;
        }
    });
}

TEST(Ledger, FileRoundTripAndResume) {
    test::TempDir dir;
    std::filesystem::create_directories(dir.path() / "trace");
    const auto file = dir.path() / "trace" / "ledger.jsonl";
    {
        Ledger l(file);
        l.append(record_of("a"), "a");
        l.append(record_of("b"), "b");
    }
    Ledger resumed(file);
    EXPECT_EQ(resumed.size(), 2u);
    EXPECT_EQ(resumed.append(record_of("c"), "c").record_id, 3u);
    const auto parsed = Ledger::parse(test::slurp(file));
    ASSERT_EQ(parsed.size(), 3u);
    EXPECT_EQ(parsed, resumed.snapshot());
    for (const auto& r : parsed) EXPECT_EQ(record_from_json(to_json(r)), r);
}

TEST(Audit, BundledRunPassesEveryCheck) {
    const auto table = test::bundled_run().audit();
    ASSERT_EQ(table.size(), 4u);
    for (std::size_t i = 0; i < table.size(); ++i) {
        SCOPED_TRACE(table[i].model_id);
        if (i > 0) {
            EXPECT_LT(table[i - 1].model_id, table[i].model_id);
        }
        EXPECT_TRUE(table[i].traced_to_plan);
        EXPECT_TRUE(table[i].traced_to_document);
        EXPECT_TRUE(table[i].ontology_preserved);
        EXPECT_TRUE(table[i].pass);
    }
}

TEST(Audit, EmptyInputsGiveEmptyTable) {
    EXPECT_TRUE(audit({}, {}, {}, {}).empty());
    const auto text = export_table({}, TableFormat::text);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1);
    EXPECT_EQ(export_table({}, TableFormat::csv),
              "model_id,task_label,traced_to_plan,traced_to_document,ontology_preserved,pass\n");
}

TEST(Audit, MissingLedgerFailsEveryRow) {
    const auto& run = test::bundled_run();
    for (const auto& row : audit({}, run.models, run.artifacts, run.sessions)) {
        EXPECT_FALSE(row.traced_to_document);
        EXPECT_FALSE(row.traced_to_plan);
        EXPECT_FALSE(row.pass);
    }
}

int failing_rows(const AuditTable& t) {
    return static_cast<int>(std::count_if(t.begin(), t.end(), [](const AuditRow& r) { return !r.pass; }));
}

const AuditRow& row_for(const AuditTable& t, const std::string& id) {
    return *std::find_if(t.begin(), t.end(), [&](const AuditRow& r) { return r.model_id == id; });
}

TEST(Audit, FlippedArtifactByteBreaksDocumentLink) {
    auto run = test::bundled_run();
    const auto path = "app/services/treatment_prediction_service.txt";
    Artifact a = *run.artifacts.find(path);
    a.content.back() ^= 0x01;
    ArtifactSet patched;
    for (const auto& [p, x] : run.artifacts.artifacts()) patched.add(p == path ? a : x);
    run.artifacts = patched;
    const auto t = run.audit();
    EXPECT_EQ(failing_rows(t), 1);
    EXPECT_FALSE(row_for(t, "treatment_prediction").traced_to_document);
    EXPECT_TRUE(row_for(t, "treatment_prediction").traced_to_plan);
}

TEST(Audit, ChangedHeaderUriBreaksOntology) {
    auto run = test::bundled_run();
    const auto path = "app/routes/treatment_prediction.txt";
    Artifact a = *run.artifacts.find(path);
    const auto& uri = a.trace.ontology_uris.front();
    a.content.replace(a.content.find(uri), uri.size(), uri + "X");
    ArtifactSet patched;
    for (const auto& [p, x] : run.artifacts.artifacts()) patched.add(p == path ? a : x);
    run.artifacts = patched;
    const auto t = run.audit();
    EXPECT_EQ(failing_rows(t), 1);
    EXPECT_FALSE(row_for(t, "treatment_prediction").ontology_preserved);
}

TEST(Audit, DroppedRoundLineBreaksPlanLink) {
    auto run = test::bundled_run();
    auto& s = run.sessions.begin()->second;
    ASSERT_FALSE(s.round_lines.empty());
    s.round_lines.pop_back();
    const auto t = run.audit();
    EXPECT_EQ(failing_rows(t), 1);
    EXPECT_FALSE(row_for(t, run.sessions.begin()->first).traced_to_plan);
    EXPECT_TRUE(row_for(t, run.sessions.begin()->first).traced_to_document);
}

TEST(Audit, BrokenRoundParentBreaksPlanLink) {
    auto run = test::bundled_run();
    auto it = std::find_if(run.ledger.begin(), run.ledger.end(),
                           [](const TraceRecord& r) { return r.kind == RecordKind::round && r.round == 2; });
    ASSERT_NE(it, run.ledger.end());
    it->parent_hash = std::string(64, 'f');
    const auto t = run.audit();
    EXPECT_EQ(failing_rows(t), 1);
    EXPECT_FALSE(row_for(t, it->model_id).traced_to_plan);
}

TEST(Audit, EditedModelBreaksDocumentLink) {
    auto run = test::bundled_run();
    run.models[0].name += "_v2";
    const auto t = run.audit();
    EXPECT_EQ(failing_rows(t), 1);
    EXPECT_FALSE(row_for(t, run.models[0].id).traced_to_document);
}

TEST(Audit, CsvParsesBack) {
    const auto table = test::bundled_run().audit();
    const auto rows = test::parse_csv(export_table(table, TableFormat::csv));
    ASSERT_EQ(rows.size(), table.size() + 1);
    for (std::size_t i = 0; i < table.size(); ++i) {
        const auto& r = rows[i + 1];
        ASSERT_EQ(r.size(), 6u);
        EXPECT_EQ(r[0], table[i].model_id);
        EXPECT_EQ(r[1], table[i].task_label);
        EXPECT_EQ(r[5], "true");
    }
}

TEST(Audit, CsvQuotesAwkwardCells) {
    const AuditTable t{{"a,b", "say \"hi\"", true, false, true, false}};
    const auto rows = test::parse_csv(export_table(t, TableFormat::csv));
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[1][0], "a,b");
    EXPECT_EQ(rows[1][1], "say \"hi\"");
    EXPECT_EQ(rows[1][3], "false");
}

TEST(Audit, TextTableShape) {
    const auto text = export_table(test::bundled_run().audit(), TableFormat::text);
    std::istringstream in(text);
    std::vector<std::string> lines;
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    ASSERT_EQ(lines.size(), 5u);
    EXPECT_EQ(lines[0].rfind("model", 0), 0u);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        EXPECT_NE(lines[i].find("pass"), std::string::npos);
        EXPECT_EQ(lines[i].find("✗"), std::string::npos);
    }
}

TEST(Ledger, EveryParentPrecedesItsChild) {
    const auto& ledger = test::bundled_run().ledger;
    std::map<std::string, std::uint64_t> first_seen;
    for (const auto& r : ledger) {
        if (r.parent_hash) {
            auto it = first_seen.find(*r.parent_hash);
            ASSERT_NE(it, first_seen.end()) << r.record_id;
            EXPECT_LT(it->second, r.record_id);
        }
        first_seen.emplace(r.content_hash, r.record_id);
    }
}

}  // namespace
}  // namespace mila
