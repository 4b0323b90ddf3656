#include "mila/codegen.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <sstream>
#include <system_error>

#include "mila/digest.hpp"
#include "mila/io.hpp"

namespace mila {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Node {
    enum Kind { text, var, loop } kind = text;
    std::string value{};     // text, or variable name
    std::string field{};     // var inside a loop: item field
    std::string loop_var{};  // loop
    std::string list{};      // loop
    std::vector<Node> body{};
};

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<Node> parse_body(const std::string& body) {
    static const std::regex var_re(R"(([a-z_][a-z0-9_]*)(?:\.([a-z_][a-z0-9_]*))?)");
    static const std::regex for_re(R"(for ([a-z_][a-z0-9_]*) in ([a-z_][a-z0-9_]*))");

    std::vector<Node> top;
    std::vector<Node>* out = &top;
    bool in_loop = false;
    std::size_t pos = 0;
    while (pos < body.size()) {
        const auto var_at = body.find("{{", pos);
        const auto dir_at = body.find("{%", pos);
        const auto next = std::min(var_at, dir_at);
        if (next == std::string::npos) {
            out->push_back({.kind = Node::text, .value = body.substr(pos)});
            break;
        }
        if (next > pos) out->push_back({.kind = Node::text, .value = body.substr(pos, next - pos)});
        const bool is_var = next == var_at;
        const auto close = body.find(is_var ? "}}" : "%}", next + 2);
        if (close == std::string::npos) throw Error("CG_BAD_TEMPLATE", "unterminated tag at offset " + std::to_string(next));
        const auto inner = trim(std::string_view(body).substr(next + 2, close - next - 2));
        pos = close + 2;
        std::smatch m;
        if (is_var) {
            if (!std::regex_match(inner, m, var_re)) throw Error("CG_BAD_TEMPLATE", "bad placeholder '" + inner + "'");
            out->push_back({.kind = Node::var, .value = m[1].str(), .field = m[2].str()});
        } else if (std::regex_match(inner, m, for_re)) {
            if (in_loop) throw Error("CG_BAD_TEMPLATE", "nested loops are not supported");
            top.push_back({.kind = Node::loop, .loop_var = m[1].str(), .list = m[2].str()});
            out = &top.back().body;
            in_loop = true;
        } else if (inner == "endfor") {
            if (!in_loop) throw Error("CG_BAD_TEMPLATE", "endfor without for");
            out = &top;
            in_loop = false;
        } else {
            throw Error("CG_BAD_TEMPLATE", "unknown directive '" + inner + "'");
        }
    }
    if (in_loop) throw Error("CG_BAD_TEMPLATE", "for without endfor");
    return top;
}

void check_declared(const Template& t, const std::vector<Node>& nodes, const std::string& loop_var = {}) {
    auto declared = [&](const std::string& n) {
        return std::find(t.placeholders.begin(), t.placeholders.end(), n) != t.placeholders.end();
    };
    for (const auto& n : nodes) {
        if (n.kind == Node::var) {
            if (!n.field.empty()) {
                if (n.value != loop_var) {
                    throw Error("CG_MISSING_BINDING", "'" + n.value + "." + n.field + "' is not a loop item");
                }
            } else if (!declared(n.value)) {
                throw Error("CG_MISSING_BINDING", "placeholder '" + n.value + "' is not declared for " +
                                                      t.qualified_id());
            }
        } else if (n.kind == Node::loop) {
            if (!declared(n.list)) {
                throw Error("CG_MISSING_BINDING", "list '" + n.list + "' is not declared for " + t.qualified_id());
            }
            check_declared(t, n.body, n.loop_var);
        }
    }
}

const std::string& bound_string(const TemplateContext& ctx, const std::string& name) {
    auto it = ctx.find(name);
    if (it == ctx.end()) throw Error("CG_MISSING_BINDING", "no binding for '" + name + "'");
    const auto* s = std::get_if<std::string>(&it->second);
    if (!s) throw Error("CG_MISSING_BINDING", "'" + name + "' is bound to a list, not a value");
    return *s;
}

void render_nodes(const std::vector<Node>& nodes, const TemplateContext& ctx, const TemplateItem* item,
                  std::string& out) {
    for (const auto& n : nodes) {
        switch (n.kind) {
        case Node::text: out += n.value; break;
        case Node::var:
            if (!n.field.empty()) {
                auto f = item->find(n.field);
                if (f == item->end()) throw Error("CG_MISSING_BINDING", "item has no field '" + n.field + "'");
                out += f->second;
            } else {
                out += bound_string(ctx, n.value);
            }
            break;
        case Node::loop: {
            auto it = ctx.find(n.list);
            if (it == ctx.end()) throw Error("CG_MISSING_BINDING", "no binding for '" + n.list + "'");
            const auto* items = std::get_if<std::vector<TemplateItem>>(&it->second);
            if (!items) throw Error("CG_MISSING_BINDING", "'" + n.list + "' is bound to a value, not a list");
            for (const auto& i : *items) render_nodes(n.body, ctx, &i, out);
            break;
        }
        }
    }
}

std::string number(double x) { return json(x).dump(); }

std::string join(const std::vector<std::string>& items, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += sep;
        out += items[i];
    }
    return out;
}

std::string workflow_name(const std::string& model_id) { return model_id + "_workflow"; }

Artifact make_artifact(std::string path, const Template& t, const std::string& body, const ModelDocument& doc,
                       const std::string& model_hash) {
    ProvenanceHeader h{doc.id, model_hash, t.qualified_id(), doc.concept_uris()};
    Artifact a;
    a.relative_path = std::move(path);
    a.content = provenance_header(h) + body;
    a.content_hash = sha256_hex(a.content);
    a.trace.model_id = doc.id;
    a.trace.model_hash = model_hash;
    a.trace.template_id = t.qualified_id();
    for (std::size_t i = 0; i < doc.data_elements.size(); ++i) a.trace.element_paths.push_back(ModelDocument::element_path(i));
    a.trace.ontology_uris = h.ontology_uris;
    return a;
}

}  // namespace

std::string render_template(const Template& t, const TemplateContext& context) {
    const auto nodes = parse_body(t.body);
    check_declared(t, nodes);
    std::string out;
    render_nodes(nodes, context, nullptr, out);
    return out;
}

std::vector<Diagnostic> check_template(const Template& t) {
    try {
        check_declared(t, parse_body(t.body));
    } catch (const Error& ex) {
        return {ex.diagnostic()};
    }
    return {};
}

const Template& TemplateSet::at(const std::string& id) const {
    auto it = templates.find(id);
    if (it == templates.end()) throw Error("CG_MISSING_TEMPLATE", "template '" + id + "' is not in the manifest");
    return it->second;
}

Result<TemplateSet> load_templates(const fs::path& dir) {
    std::vector<Diagnostic> diags;
    TemplateSet set;
    json manifest;
    try {
        manifest = json::parse(read_text_file(dir / "manifest.json", "CG_IO"));
    } catch (const Error& ex) {
        return std::vector<Diagnostic>{ex.diagnostic()};
    } catch (const json::exception& ex) {
        return std::vector<Diagnostic>{make_error("CG_BAD_TEMPLATE", std::string("manifest: ") + ex.what())};
    }
    try {
        const auto& list = manifest.at("templates");
        for (std::size_t i = 0; i < list.size(); ++i) {
            const auto& e = list[i];
            const auto path = "/templates/" + std::to_string(i);
            Template t;
            t.template_id = e.at("template_id").get<std::string>();
            t.version = e.at("version").get<std::string>();
            t.placeholders = e.at("placeholders").get<std::vector<std::string>>();
            try {
                t.body = read_text_file(dir / e.at("file").get<std::string>(), "CG_IO");
            } catch (const Error& ex) {
                diags.push_back(ex.diagnostic());
                continue;
            }
            for (auto d : check_template(t)) {
                d.element_path = path;
                diags.push_back(std::move(d));
            }
            if (!set.templates.emplace(t.template_id, t).second) {
                diags.push_back(make_error("CG_BAD_TEMPLATE", "duplicate template id '" + t.template_id + "'", path));
            }
        }
    } catch (const json::exception& ex) {
        diags.push_back(make_error("CG_BAD_TEMPLATE", std::string("manifest: ") + ex.what()));
    }
    if (!diags.empty()) return diags;
    return set;
}

void ArtifactSet::add(Artifact a) {
    if (items_.contains(a.relative_path)) {
        throw Error("CG_PATH_COLLISION", "two artifacts target " + a.relative_path, a.relative_path);
    }
    auto key = a.relative_path;
    items_.emplace(std::move(key), std::move(a));
}

void ArtifactSet::merge(const ArtifactSet& other) {
    for (const auto& [path, a] : other.items_) add(a);
}

const Artifact* ArtifactSet::find(const std::string& relative_path) const {
    auto it = items_.find(relative_path);
    return it == items_.end() ? nullptr : &it->second;
}

std::string provenance_header(const ProvenanceHeader& h) {
    return "# mila:model_id=" + h.model_id + "\n# mila:model_hash=" + h.model_hash + "\n# mila:template=" +
           h.template_id + "\n# mila:ontology=" + join(h.ontology_uris, ",") + "\n";
}

std::optional<ProvenanceHeader> parse_provenance_header(std::string_view content) {
    static constexpr std::string_view keys[] = {"model_id", "model_hash", "template", "ontology"};
    std::string values[4];
    for (int i = 0; i < 4; ++i) {
        const auto prefix = "# mila:" + std::string(keys[i]) + "=";
        const auto nl = content.find('\n');
        if (nl == std::string_view::npos || !content.starts_with(prefix)) return std::nullopt;
        values[i] = std::string(content.substr(prefix.size(), nl - prefix.size()));
        content.remove_prefix(nl + 1);
    }
    ProvenanceHeader h{values[0], values[1], values[2], {}};
    std::string_view uris = values[3];
    while (!uris.empty()) {
        const auto comma = uris.find(',');
        h.ontology_uris.emplace_back(uris.substr(0, comma));
        if (comma == std::string_view::npos) break;
        uris.remove_prefix(comma + 1);
    }
    return h;
}

std::string_view strip_provenance_header(std::string_view content) {
    for (int i = 0; i < 4 && content.starts_with("# mila:"); ++i) {
        const auto nl = content.find('\n');
        if (nl == std::string_view::npos) return {};
        content.remove_prefix(nl + 1);
    }
    return content;
}

bool is_layout_path(std::string_view relative_path) {
    static const std::regex layout(R"((app/(models|services|routes)|plans)/[A-Za-z0-9_.-]+)");
    return std::regex_match(relative_path.begin(), relative_path.end(), layout);
}

ArtifactSet generate_artifacts(const Plan& plan, const ModelDocument& doc, const TemplateSet& templates) {
    const auto& model_hash = plan.model_hash;
    ArtifactSet set;

    const auto& model_t = templates.at("model_document");
    set.add(make_artifact("app/models/" + doc.name + ".json", model_t,
                          render_template(model_t, {{"document", to_json(doc).dump(2) + "\n"}}), doc, model_hash));

    const auto& plan_t = templates.at("plan_document");
    set.add(make_artifact("plans/" + doc.id + "_plan.json", plan_t,
                          render_template(plan_t, {{"document", to_json(plan).dump(2) + "\n"}}), doc, model_hash));

    std::vector<TemplateItem> sites;
    for (const auto& [site_id, r] : plan.retrieval) {
        std::vector<std::string> actions;
        for (const auto& a : r.harmonization_actions) actions.push_back(a.local_name + ":" + a.from_unit + "->" + a.to_unit);
        sites.push_back({{"site_id", site_id},
                         {"dialect", std::string(enum_name(r.query.dialect))},
                         {"harmonization", actions.empty() ? "none" : join(actions, ",")}});
    }
    std::vector<TemplateItem> features;
    for (const auto& f : plan.preprocess.feature_layout) {
        features.push_back({{"index", std::to_string(f.index)}, {"name", f.feature_name}, {"concept_uri", f.concept_uri}});
    }
    std::vector<TemplateItem> steps;
    for (const auto& s : plan.preprocess.steps) {
        std::string arg;
        switch (s.kind) {
        case StepKind::impute:
            arg = std::visit([](const auto& v) { return json(v).dump(); }, s.constant);
            break;
        case StepKind::encode: arg = join(s.categories, ","); break;
        case StepKind::scale: arg = "offset=" + number(s.offset) + " factor=" + number(s.factor); break;
        }
        steps.push_back({{"kind", std::string(enum_name(s.kind))}, {"element", s.element}, {"argument", arg}});
    }
    std::vector<TemplateItem> elements;
    for (std::size_t i = 0; i < doc.data_elements.size(); ++i) {
        const auto& e = doc.data_elements[i];
        elements.push_back({{"local_name", e.local_name},
                            {"concept_uri", e.concept_uri},
                            {"role", std::string(enum_name(e.role))},
                            {"datatype", std::string(enum_name(e.expected_datatype))},
                            {"path", ModelDocument::element_path(i)}});
    }

    const auto& tc = plan.training;
    TemplateContext ctx{
        {"model_id", doc.id},
        {"model_name", doc.name},
        {"model_version", doc.version},
        {"task_label", std::string(task_label(doc.task.kind))},
        {"workflow", workflow_name(doc.id)},
        {"plan_id", plan.plan_id},
        {"outcome", plan.preprocess.outcome_element},
        {"classes", join(plan.preprocess.classes, ",")},
        {"algorithm_tag", std::string(enum_name(tc.algorithm_tag))},
        {"executable", tc.executable ? "true" : "false"},
        {"learning_rate", number(tc.learning_rate)},
        {"local_epochs", std::to_string(tc.local_epochs)},
        {"l2", number(tc.l2)},
        {"mode", std::string(enum_name(plan.federation.mode))},
        {"rounds", std::to_string(plan.federation.rounds)},
        {"aggregator", std::string(enum_name(plan.federation.aggregator))},
        {"weighting", plan.federation.weighting},
        {"min_local_instances", std::to_string(plan.federation.min_local_instances)},
        {"privacy_rules", join(plan.federation.privacy_rules, ",")},
        {"route_path", "/models/" + doc.id},
        {"sites", sites},
        {"features", features},
        {"steps", steps},
        {"elements", elements},
    };
    const auto& service_t = templates.at("service");
    set.add(make_artifact("app/services/" + doc.id + "_service.txt", service_t, render_template(service_t, ctx), doc,
                          model_hash));
    const auto& route_t = templates.at("route");
    set.add(make_artifact("app/routes/" + doc.id + ".txt", route_t, render_template(route_t, ctx), doc, model_hash));
    return set;
}

Manifest manifest_of(const ArtifactSet& set) {
    Manifest m;
    for (const auto& [path, a] : set.artifacts()) m.emplace(path, a.content_hash);
    return m;
}

Manifest write_artifacts(const ArtifactSet& set, const fs::path& root) {
    if (set.empty()) return {};
    std::vector<fs::path> temps;
    auto cleanup = [&] {
        std::error_code ignored;
        for (const auto& t : temps) fs::remove(t, ignored);
    };
    // Stage every file first so a failure leaves no half-written set behind.
    for (const auto& [path, a] : set.artifacts()) {
        const fs::path target = root / path;
        std::error_code ec;
        fs::create_directories(target.parent_path(), ec);
        if (ec) {
            cleanup();
            throw Error("CG_IO", "cannot create " + target.parent_path().string() + ": " + ec.message(), path);
        }
        fs::path tmp = target;
        tmp += ".tmp";
        temps.push_back(tmp);
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(a.content.data(), static_cast<std::streamsize>(a.content.size()));
        out.close();
        if (!out) {
            cleanup();
            throw Error("CG_IO", "cannot write " + target.string(), path);
        }
    }
    std::size_t i = 0;
    for (const auto& [path, a] : set.artifacts()) {
        std::error_code ec;
        fs::rename(temps[i], root / path, ec);
        if (ec) {
            cleanup();
            throw Error("CG_IO", "cannot replace " + (root / path).string() + ": " + ec.message(), path);
        }
        ++i;
    }
    return manifest_of(set);
}

std::string manifest_json(const Manifest& m) { return json(m).dump(2) + "\n"; }

std::string manifest_hash(const Manifest& m) { return sha256_hex(json(m).dump()); }

}  // namespace mila
