#include "mila/cli/workspace.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "mila/io.hpp"

namespace mila::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::vector<Diagnostic>& diags, const fs::path& file) {
    const auto& d = diags.front();
    std::string msg = file.string() + ": " + d.code + " " + d.message;
    if (!d.element_path.empty()) msg += " at " + d.element_path;
    if (diags.size() > 1) msg += " (+" + std::to_string(diags.size() - 1) + " more)";
    throw Error("CLI_CONFIG", msg, file.string());
}

}  // namespace

WorkspaceConfig load_config(const fs::path& root) {
    if (!fs::is_directory(root)) throw Error("CLI_CONFIG", "workspace " + root.string() + " is not a directory");
    WorkspaceConfig c;
    c.root = root;
    json j = json::object();
    if (const auto file = root / "mila.json"; fs::exists(file)) {
        j = json::parse(read_text_file(file), nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw Error("CLI_CONFIG", file.string() + " is not a JSON object");
    }
    try {
        c.ontology = root / j.value("ontology", "ontology/catalog.json");
        c.units = root / j.value("units", "ontology/units.json");
        c.sites = root / j.value("sites", "sites");
        c.models = root / j.value("models", "models");
        c.templates = root / j.value("templates", "templates");
        c.output = root / j.value("output", "out");
        c.k_min = j.value("k_min", kDefaultMinLocalInstances);
        c.seed = j.value("seed", std::uint64_t{7});
        const auto format = j.value("format", "text");
        if (format != "text" && format != "json") throw Error("CLI_CONFIG", "format must be text or json");
        c.format = format == "json" ? OutputFormat::json : OutputFormat::text;
    } catch (const json::exception& ex) {
        throw Error("CLI_CONFIG", std::string("mila.json: ") + ex.what());
    }
    if (c.k_min < 1) throw Error("CLI_CONFIG", "k_min must be at least 1");
    return c;
}

Workspace Workspace::load(const WorkspaceConfig& config) {
    Workspace ws{config, {}, {}, {}};
    auto units = load_unit_registry(read_text_file(config.units));
    if (!units) config_error(units.diagnostics(), config.units);
    ws.units = std::move(units).value();

    auto catalog = load_catalog(read_text_file(config.ontology));
    if (!catalog) config_error(catalog.diagnostics(), config.ontology);
    ws.catalog = std::move(catalog).value();

    if (!fs::is_directory(config.sites)) throw Error("CLI_CONFIG", "no site directory at " + config.sites.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(config.sites)) {
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        auto site = load_site_catalog(read_text_file(f), &ws.units);
        if (!site) config_error(site.diagnostics(), f);
        if (std::any_of(ws.sites.begin(), ws.sites.end(), [&](const auto& s) { return s.site_id == site->site_id; })) {
            throw Error("CLI_CONFIG", "site id " + site->site_id + " is declared twice", f.string());
        }
        ws.sites.push_back(std::move(site).value());
    }
    return ws;
}

TemplateSet Workspace::templates() const {
    auto t = load_templates(config.templates);
    if (!t) config_error(t.diagnostics(), config.templates / "manifest.json");
    return std::move(t).value();
}

std::vector<ModelFile> Workspace::model_files() const {
    if (!fs::is_directory(config.models)) throw Error("CLI_CONFIG", "no model directory at " + config.models.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(config.models)) {
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<ModelFile> out;
    for (const auto& f : files) out.push_back(read_model(f));
    return out;
}

ModelFile Workspace::read_model(const fs::path& path) const {
    ModelFile m;
    m.path = path;
    m.text = read_text_file(path);
    std::error_code ec;
    const auto rel = fs::relative(path, config.root, ec);
    m.display = (!ec && !rel.empty() && *rel.begin() != "..") ? rel.generic_string() : path.generic_string();
    return m;
}

}  // namespace mila::cli
