#include "mila/cli/commands.hpp"

#include <algorithm>
#include <future>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "mila/codegen.hpp"
#include "mila/digest.hpp"
#include "mila/fedsim.hpp"
#include "mila/io.hpp"
#include "mila/metamodel.hpp"
#include "mila/plan.hpp"
#include "mila/query.hpp"
#include "mila/trace.hpp"

namespace mila::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Context {
    Workspace ws;
    fs::path out;
    OutputFormat format;
    std::uint64_t k_min;
    std::uint64_t seed;
};

Context open_context(const Options& opts) {
    auto config = load_config(opts.workspace);
    if (opts.format) config.format = *opts.format;
    if (opts.k_min) {
        if (*opts.k_min < 1) throw Error("CLI_CONFIG", "--k-min must be at least 1");
        config.k_min = *opts.k_min;
    }
    if (opts.seed) config.seed = *opts.seed;
    if (opts.out) config.output = *opts.out;
    Context ctx{Workspace::load(config), config.output, config.format, config.k_min, config.seed};
    return ctx;
}

std::vector<ModelFile> selected_models(const Context& ctx, const Options& opts) {
    if (opts.models.empty()) return ctx.ws.model_files();
    std::vector<ModelFile> out;
    for (const auto& p : opts.models) out.push_back(ctx.ws.read_model(p));
    return out;
}

json diag_json(const Diagnostic& d) {
    return {{"code", d.code},
            {"severity", to_string(d.severity)},
            {"message", d.message},
            {"element_path", d.element_path},
            {"stage", to_string(d.stage)}};
}

struct Checked {
    ModelFile file;
    std::optional<ModelDocument> doc;
    std::vector<Diagnostic> diagnostics;
    bool pass = false;
};

/// structure -> semantics -> availability -> federation; stops after the
/// first stage that reports an error.
Checked check_model(const Context& ctx, ModelFile file) {
    Checked c{std::move(file), std::nullopt, {}, false};
    auto parsed = parse_model(c.file.text, &c.diagnostics);
    if (!parsed) {
        c.diagnostics = parsed.diagnostics();
        return c;
    }
    const ModelDocument& doc = *parsed;
    auto add = [&](const std::vector<Diagnostic>& ds) {
        c.diagnostics.insert(c.diagnostics.end(), ds.begin(), ds.end());
        return !has_errors(ds);
    };
    if (!add(validate_structure(doc).diagnostics)) return c;
    if (!add(validate_semantics(doc, ctx.ws.catalog, ctx.ws.units).diagnostics)) return c;
    const auto k_min = std::max<std::uint64_t>(ctx.k_min, doc.federation.min_local_instances);
    const auto availability = check_availability(doc, ctx.ws.sites, ctx.ws.units, k_min);
    if (!add(availability.diagnostics())) return c;
    if (!add(check_federation(doc, ctx.ws.sites, availability).diagnostics)) return c;
    c.doc = doc;
    c.pass = true;
    return c;
}

std::vector<Checked> check_all(const Context& ctx, std::vector<ModelFile> files) {
    std::vector<std::future<Checked>> jobs;
    for (auto& f : files) {
        jobs.push_back(std::async(std::launch::async, [&ctx, f = std::move(f)]() mutable {
            return check_model(ctx, std::move(f));
        }));
    }
    std::vector<Checked> out;
    for (auto& j : jobs) out.push_back(j.get());
    return out;
}

void duplicate_ids(std::vector<Checked>& checked) {
    std::map<std::string, std::string> seen;
    for (auto& c : checked) {
        if (!c.doc) continue;
        auto [it, inserted] = seen.emplace(c.doc->id, c.file.display);
        if (!inserted) {
            c.diagnostics.push_back(
                make_error("CLI_DUP_MODEL", "model id '" + c.doc->id + "' is also used by " + it->second, "/id"));
            c.pass = false;
        }
    }
}

std::string short_hash(const std::string& h) { return h.substr(0, 12); }

fs::path ledger_path(const Context& ctx) { return ctx.out / "trace" / "ledger.jsonl"; }

Ledger open_ledger(const Context& ctx) {
    std::error_code ec;
    fs::create_directories(ctx.out / "trace", ec);
    if (ec) throw Error("CLI_IO", "cannot create " + (ctx.out / "trace").string() + ": " + ec.message());
    return Ledger(ledger_path(ctx));
}

TraceRecord record_for(RecordKind kind, const ModelDocument& doc, const std::string& doc_hash) {
    TraceRecord r;
    r.kind = kind;
    r.model_id = doc.id;
    r.model_hash = doc_hash;
    for (std::size_t i = 0; i < doc.data_elements.size(); ++i) r.element_paths.push_back(ModelDocument::element_path(i));
    r.ontology_uris = doc.concept_uris();
    return r;
}

std::string plan_relpath(const std::string& model_id) { return "plans/" + model_id + "_plan.json"; }

/// Loads the plan written by `plan` and refuses it when the model changed since.
Plan load_current_plan(const Context& ctx, const ModelDocument& doc) {
    const auto file = ctx.out / plan_relpath(doc.id);
    if (!fs::exists(file)) {
        throw Error("CLI_MISSING_PLAN", "no plan for " + doc.id + " at " + file.string() + "; run `mila plan` first");
    }
    const auto text = read_text_file(file);
    json j = json::parse(strip_provenance_header(text), nullptr, false);
    if (j.is_discarded()) throw Error("CLI_BAD_PLAN", file.string() + " is not valid JSON", file.string());
    Plan plan = plan_from_json(j);
    const auto current = canonical_hash(doc);
    if (plan.model_hash != current) {
        throw Error("CLI_STALE_PLAN",
                    "plan for " + doc.id + " was built from model " + short_hash(plan.model_hash) +
                        " but the model is now " + short_hash(current) + "; run `mila plan` again",
                    file.string());
    }
    return plan;
}

/// Parses every selected model without the availability stages; commands
/// after `plan` only need the document to check hashes.
std::vector<ModelDocument> parse_models(const Context& ctx, const Options& opts, Outcome& outcome) {
    std::vector<ModelDocument> docs;
    std::ostringstream text;
    json failures = json::array();
    for (auto& f : selected_models(ctx, opts)) {
        auto parsed = parse_model(f.text);
        if (!parsed) {
            text << f.display << ": FAILED\n";
            json diags = json::array();
            for (const auto& d : parsed.diagnostics()) {
                text << "  " << format_diagnostic(d) << '\n';
                diags.push_back(diag_json(d));
            }
            failures.push_back({{"model", f.display}, {"diagnostics", diags}});
            outcome.code = kExitFailed;
            continue;
        }
        docs.push_back(std::move(parsed).value());
    }
    outcome.text += text.str();
    if (!failures.empty()) outcome.report["failures"] = failures;
    return docs;
}

Outcome validate_impl(const Context& ctx, const Options& opts) {
    auto checked = check_all(ctx, selected_models(ctx, opts));
    duplicate_ids(checked);
    Outcome o;
    std::ostringstream text;
    json models = json::array();
    std::size_t passed = 0;
    for (const auto& c : checked) {
        text << c.file.display << ": " << (c.pass ? "ok" : "FAILED") << '\n';
        json diags = json::array();
        for (const auto& d : c.diagnostics) {
            text << "  " << format_diagnostic(d) << '\n';
            diags.push_back(diag_json(d));
        }
        models.push_back({{"model", c.file.display},
                          {"model_id", c.doc ? json(c.doc->id) : json(nullptr)},
                          {"pass", c.pass},
                          {"diagnostics", diags}});
        if (c.pass) ++passed;
    }
    text << passed << " of " << checked.size() << " models valid\n";
    o.code = passed == checked.size() ? kExitOk : kExitFailed;
    o.report = {{"command", "validate"}, {"pass", o.code == kExitOk}, {"models", models}};
    o.text = text.str();
    return o;
}

Outcome plan_impl(const Context& ctx, const Options& opts) {
    auto checked = check_all(ctx, selected_models(ctx, opts));
    duplicate_ids(checked);
    Outcome o;
    std::ostringstream text;
    json plans = json::array();
    const auto templates = ctx.ws.templates();
    std::vector<std::pair<Checked*, Plan>> built;
    for (auto& c : checked) {
        if (!c.pass) {
            text << c.file.display << ": FAILED\n";
            for (const auto& d : c.diagnostics) text << "  " << format_diagnostic(d) << '\n';
            json diags = json::array();
            for (const auto& d : c.diagnostics) diags.push_back(diag_json(d));
            plans.push_back({{"model", c.file.display}, {"pass", false}, {"diagnostics", diags}});
            o.code = kExitFailed;
            continue;
        }
        auto plan = transform(*c.doc, ctx.ws.catalog, ctx.ws.sites, ctx.ws.units, {ctx.k_min});
        if (!plan) {
            text << c.file.display << ": FAILED\n";
            json diags = json::array();
            for (const auto& d : plan.diagnostics()) {
                text << "  " << format_diagnostic(d) << '\n';
                diags.push_back(diag_json(d));
            }
            plans.push_back({{"model", c.file.display}, {"pass", false}, {"diagnostics", diags}});
            o.code = kExitFailed;
            continue;
        }
        built.emplace_back(&c, std::move(plan).value());
    }
    if (o.code != kExitOk) {
        o.report = {{"command", "plan"}, {"pass", false}, {"plans", plans}};
        o.text = text.str();
        return o;
    }

    ArtifactSet files;
    for (const auto& [c, plan] : built) {
        const auto all = generate_artifacts(plan, *c->doc, templates);
        files.add(*all.find(plan_relpath(c->doc->id)));
    }
    write_artifacts(files, ctx.out);

    Ledger ledger = open_ledger(ctx);
    for (const auto& [c, plan] : built) {
        const auto& doc = *c->doc;
        const auto doc_hash = canonical_hash(doc);
        auto v = record_for(RecordKind::validation, doc, doc_hash);
        v.content_hash = doc_hash;
        v.subject = c->file.display;
        ledger.append(v, serialize_model(doc));

        auto p = record_for(RecordKind::plan, doc, doc_hash);
        p.content_hash = plan_hash(plan);
        p.parent_hash = doc_hash;
        p.subject = plan_relpath(doc.id);
        p.ontology_uris = plan.ontology_refs;
        ledger.append(p, serialize_plan(plan));

        text << "planned " << doc.id << " -> " << plan_relpath(doc.id) << " (plan " << short_hash(p.content_hash)
             << ", " << plan.federation.sites.size() << " sites, " << plan.training.num_features << " features)\n";
        plans.push_back({{"model", c->file.display},
                         {"model_id", doc.id},
                         {"pass", true},
                         {"plan_hash", p.content_hash},
                         {"path", plan_relpath(doc.id)}});
    }
    o.report = {{"command", "plan"}, {"pass", true}, {"plans", plans}};
    o.text = text.str();
    return o;
}

Outcome generate_impl(const Context& ctx, const Options& opts) {
    Outcome o;
    const auto docs = parse_models(ctx, opts, o);
    if (o.code != kExitOk) {
        o.report["command"] = "generate";
        o.report["pass"] = false;
        return o;
    }
    const auto templates = ctx.ws.templates();
    ArtifactSet set;
    std::vector<std::pair<const ModelDocument*, Plan>> plans;
    for (const auto& doc : docs) {
        Plan plan = load_current_plan(ctx, doc);
        set.merge(generate_artifacts(plan, doc, templates));
        plans.emplace_back(&doc, std::move(plan));
    }
    const auto manifest = write_artifacts(set, ctx.out);
    if (!manifest.empty()) write_file_atomic(ctx.out / "manifest.json", manifest_json(manifest));

    Ledger ledger = open_ledger(ctx);
    for (const auto& [doc, plan] : plans) {
        const auto phash = plan_hash(plan);
        for (const auto& [path, a] : set.artifacts()) {
            if (a.trace.model_id != doc->id) continue;
            auto r = record_for(RecordKind::artifact, *doc, plan.model_hash);
            r.content_hash = a.content_hash;
            r.parent_hash = phash;
            r.subject = path;
            r.ontology_uris = a.trace.ontology_uris;
            ledger.append(r, a.content);
        }
    }

    std::ostringstream text;
    json files = json::object();
    for (const auto& [path, hash] : manifest) {
        text << short_hash(hash) << "  " << path << '\n';
        files[path] = hash;
    }
    const auto mhash = manifest_hash(manifest);
    text << manifest.size() << " artifacts, manifest " << short_hash(mhash) << '\n';
    o.report = {{"command", "generate"}, {"pass", true}, {"artifacts", files}, {"manifest_hash", mhash}};
    o.text = text.str();
    return o;
}

std::map<std::string, LabeledDataset> fixture_data(const Context& ctx, const Plan& plan) {
    std::map<std::string, LabeledDataset> data;
    for (const auto& site_id : plan.federation.sites) {
        auto site = std::find_if(ctx.ws.sites.begin(), ctx.ws.sites.end(),
                                 [&](const auto& s) { return s.site_id == site_id; });
        if (site == ctx.ws.sites.end()) throw Error("AVAIL_NO_SITE", "site '" + site_id + "' has no catalog");
        const auto& r = plan.retrieval.at(site_id);
        const auto table = execute_fixture_query(r.query, *site, r.harmonization_actions);
        data.emplace(site_id, apply_preprocess(table, plan.preprocess, site_id));
    }
    return data;
}

std::map<std::string, LabeledDataset> synthetic_data(const Plan& plan, std::uint64_t seed) {
    SyntheticSpec spec;
    spec.sites = plan.federation.sites;
    spec.samples_per_site.assign(spec.sites.size(), 60);
    spec.dims = plan.training.num_features;
    spec.classes = plan.training.num_classes;
    for (std::size_t k = 0; k < spec.sites.size(); ++k) spec.class_skew.push_back(0.15 * static_cast<double>(k));
    spec.margin = 4.0;
    spec.test_samples = 0;
    return gen_synthetic(spec, seed).sites;
}

Outcome simulate_impl(const Context& ctx, const Options& opts) {
    Outcome o;
    const auto docs = parse_models(ctx, opts, o);
    if (o.code != kExitOk) {
        o.report["command"] = "simulate";
        o.report["pass"] = false;
        return o;
    }
    std::ostringstream text;
    json sessions = json::array();
    Ledger ledger = open_ledger(ctx);
    for (const auto& doc : docs) {
        const Plan plan = load_current_plan(ctx, doc);
        if (!plan.training.executable) {
            text << "skipped " << doc.id << ": " << enum_name(plan.training.algorithm_tag)
                 << " is carried as metadata only\n";
            sessions.push_back({{"model_id", doc.id}, {"skipped", true}});
            continue;
        }
        const auto data = opts.synthetic ? synthetic_data(plan, ctx.seed) : fixture_data(ctx, plan);
        SessionOptions so;
        so.parallel = true;
        const SessionLog log = run_session(plan, data, so);

        json predictions = {{"experiment_id", log.experiment_id},
                            {"model_id", doc.id},
                            {"final_weights_hash", log.final_weights.hash()},
                            {"classes", plan.preprocess.classes}};
        json per_site = json::object();
        for (const auto& [site, d] : data) {
            const auto pred = predict(log.final_weights, d);
            std::vector<std::size_t> counts(plan.training.num_classes, 0);
            for (int p : pred) ++counts[static_cast<std::size_t>(p)];
            per_site[site] = {{"n", d.size()}, {"predicted_counts", counts}, {"metrics", to_json(evaluate(log.final_weights, d))}};
        }
        predictions["sites"] = per_site;
        const auto predictions_text = predictions.dump(2) + "\n";
        json weights = to_json(log.final_weights);
        weights["experiment_id"] = log.experiment_id;
        weights["model_id"] = doc.id;

        const auto dir = ctx.out / "sessions";
        write_file_atomic(dir / (doc.id + ".jsonl"), log.jsonl());
        write_file_atomic(dir / (doc.id + "_weights.json"), weights.dump(2) + "\n");
        write_file_atomic(dir / (doc.id + "_predictions.json"), predictions_text);

        std::string parent = plan_hash(plan);
        for (const auto& round : log.rounds) {
            const auto line = to_json(round).dump();
            auto r = record_for(RecordKind::round, doc, plan.model_hash);
            r.experiment_id = log.experiment_id;
            r.round = round.round;
            r.content_hash = sha256_hex(line);
            r.parent_hash = parent;
            r.subject = log.experiment_id;
            r.ontology_uris = plan.ontology_refs;
            parent = ledger.append(r, line).content_hash;
        }
        auto p = record_for(RecordKind::prediction, doc, plan.model_hash);
        p.experiment_id = log.experiment_id;
        p.content_hash = sha256_hex(predictions_text);
        p.parent_hash = parent;
        p.subject = "sessions/" + doc.id + "_predictions.json";
        p.ontology_uris = plan.ontology_refs;
        ledger.append(p, predictions_text);

        const auto& last = log.rounds.back().global_metrics;
        char scores[64];
        std::snprintf(scores, sizeof scores, "accuracy %.3f macro-F1 %.3f", last.accuracy, last.macro_f1);
        text << "simulated " << doc.id << ": " << log.rounds.size() << " rounds over " << data.size() << " sites, "
             << scores << ", log " << short_hash(log.hash()) << '\n';
        sessions.push_back({{"model_id", doc.id},
                            {"experiment_id", log.experiment_id},
                            {"rounds", log.rounds.size()},
                            {"session_hash", log.hash()},
                            {"final_weights_hash", log.final_weights.hash()},
                            {"global_metrics", to_json(last)}});
    }
    o.report = {{"command", "simulate"}, {"pass", true}, {"synthetic", opts.synthetic}, {"sessions", sessions}};
    o.text = text.str();
    return o;
}

ArtifactSet read_artifacts(const fs::path& out) {
    ArtifactSet set;
    for (const auto* sub : {"app", "plans"}) {
        const auto dir = out / sub;
        if (!fs::is_directory(dir)) continue;
        std::vector<fs::path> files;
        for (const auto& e : fs::recursive_directory_iterator(dir)) {
            if (e.is_regular_file()) files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            Artifact a;
            a.relative_path = fs::relative(f, out).generic_string();
            a.content = read_text_file(f);
            a.content_hash = sha256_hex(a.content);
            if (auto h = parse_provenance_header(a.content)) {
                a.trace = {h->model_id, h->model_hash, h->template_id, {}, h->ontology_uris, std::nullopt};
            }
            set.add(std::move(a));
        }
    }
    return set;
}

Outcome audit_impl(const Context& ctx, const Options& opts) {
    Outcome o;
    const auto docs = parse_models(ctx, opts, o);
    if (o.code != kExitOk) {
        o.report["command"] = "audit";
        o.report["pass"] = false;
        return o;
    }
    std::vector<TraceRecord> records;
    if (fs::exists(ledger_path(ctx))) records = Ledger::parse(read_text_file(ledger_path(ctx)));
    const auto artifacts = read_artifacts(ctx.out);
    std::map<std::string, SessionArtifacts> sessions;
    for (const auto& doc : docs) {
        SessionArtifacts s;
        const auto log = ctx.out / "sessions" / (doc.id + ".jsonl");
        if (fs::exists(log)) {
            std::istringstream in(read_text_file(log));
            for (std::string line; std::getline(in, line);) {
                if (!line.empty()) s.round_lines.push_back(line);
            }
        }
        const auto pred = ctx.out / "sessions" / (doc.id + "_predictions.json");
        if (fs::exists(pred)) s.predictions = read_text_file(pred);
        sessions.emplace(doc.id, std::move(s));
    }
    const auto table = audit(records, docs, artifacts, sessions);
    const auto rendered = export_table(table, TableFormat::text);
    write_file_atomic(ctx.out / "trace" / "audit.txt", rendered);
    write_file_atomic(ctx.out / "trace" / "audit.csv", export_table(table, TableFormat::csv));

    json rows = json::array();
    bool all = true;
    for (const auto& r : table) {
        rows.push_back({{"model_id", r.model_id},
                        {"task_label", r.task_label},
                        {"traced_to_plan", r.traced_to_plan},
                        {"traced_to_document", r.traced_to_document},
                        {"ontology_preserved", r.ontology_preserved},
                        {"pass", r.pass}});
        all = all && r.pass;
    }
    o.code = all ? kExitOk : kExitFailed;
    o.report = {{"command", "audit"}, {"pass", all}, {"rows", rows}};
    o.text = rendered;
    return o;
}

void clean_outputs(const fs::path& out) {
    std::error_code ec;
    for (const auto* p : {"app", "plans", "sessions", "trace", "manifest.json"}) {
        fs::remove_all(out / p, ec);
        if (ec) throw Error("CLI_IO", "cannot clear " + (out / p).string() + ": " + ec.message());
    }
}

}  // namespace

Outcome cmd_validate(const Options& opts) { return validate_impl(open_context(opts), opts); }
Outcome cmd_plan(const Options& opts) { return plan_impl(open_context(opts), opts); }
Outcome cmd_generate(const Options& opts) { return generate_impl(open_context(opts), opts); }
Outcome cmd_simulate(const Options& opts) { return simulate_impl(open_context(opts), opts); }
Outcome cmd_audit(const Options& opts) { return audit_impl(open_context(opts), opts); }

Outcome cmd_demo(const Options& opts) {
    const Context ctx = open_context(opts);
    clean_outputs(ctx.out);
    Outcome o;
    json stages = json::array();
    using Stage = Outcome (*)(const Context&, const Options&);
    const std::pair<const char*, Stage> chain[] = {{"validate", validate_impl}, {"plan", plan_impl},
                                                   {"generate", generate_impl}, {"simulate", simulate_impl},
                                                   {"audit", audit_impl}};
    for (const auto& [name, fn] : chain) {
        Outcome step = fn(ctx, opts);
        o.text += "== " + std::string(name) + "\n" + step.text;
        stages.push_back(step.report);
        if (step.code != kExitOk) {
            o.code = step.code;
            o.text += "demo stopped: " + std::string(name) + " failed\n";
            break;
        }
    }
    o.report = {{"command", "demo"}, {"pass", o.code == kExitOk}, {"stages", stages}};
    return o;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"mila: model-driven federated pipelines from ontology-anchored model documents"};
    app.require_subcommand(1);
    Options opts;
    std::string format;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--workspace", opts.workspace, "Workspace directory")->envname("MILA_WORKSPACE");
        sub->add_option("--format", format, "Output format")->check(CLI::IsMember({"text", "json"}));
        sub->add_option("--seed", opts.seed, "Seed for synthetic data");
        sub->add_option("--k-min", opts.k_min, "Minimum records per site");
        sub->add_option("--out", opts.out, "Output directory (default: <workspace>/out)");
        sub->add_flag("--synthetic", opts.synthetic, "Simulate on synthetic blobs instead of site fixtures");
    };
    std::map<std::string, Outcome (*)(const Options&)> commands{
        {"validate", cmd_validate}, {"plan", cmd_plan},   {"generate", cmd_generate},
        {"simulate", cmd_simulate}, {"audit", cmd_audit}, {"demo", cmd_demo}};
    const std::map<std::string, std::string> help{
        {"validate", "Check model documents against metamodel, ontology and site catalogs"},
        {"plan", "Compile valid models into per-site plans"},
        {"generate", "Render artifacts from the current plans"},
        {"simulate", "Run federated training sessions from the plans"},
        {"audit", "Check that outputs trace back to their model documents"},
        {"demo", "Run every stage over the workspace"}};
    for (const auto& [name, fn] : commands) {
        auto* sub = app.add_subcommand(name, help.at(name));
        common(sub);
        if (name != "demo") sub->add_option("models", opts.models, "Model files (default: all in the workspace)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kExitOk : kExitEnvironment;
    }
    if (format == "json") opts.format = OutputFormat::json;
    if (format == "text") opts.format = OutputFormat::text;

    const auto* chosen = app.get_subcommands().front();
    try {
        Outcome o = commands.at(chosen->get_name())(opts);
        OutputFormat fmt = opts.format.value_or(OutputFormat::text);
        if (!opts.format) {
            try {
                fmt = load_config(opts.workspace).format;
            } catch (const Error&) {
            }
        }
        if (fmt == OutputFormat::json) {
            out << o.report.dump(2) << '\n';
        } else {
            out << o.text;
        }
        return o.code;
    } catch (const Error& e) {
        static const std::set<std::string> environment{"CLI_CONFIG", "CLI_IO", "CG_IO", "TA_IO", "TA_SYNTAX",
                                                       "CG_MISSING_TEMPLATE"};
        err << "mila: " << e.what() << '\n';
        return environment.contains(e.code()) ? kExitEnvironment : kExitFailed;
    } catch (const std::exception& e) {
        err << "mila: " << e.what() << '\n';
        return kExitEnvironment;
    }
}

}  // namespace mila::cli
