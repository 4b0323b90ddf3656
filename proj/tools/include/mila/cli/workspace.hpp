#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mila/codegen.hpp"
#include "mila/model.hpp"
#include "mila/ontology.hpp"
#include "mila/site.hpp"
#include "mila/units.hpp"

namespace mila::cli {

enum class OutputFormat : std::uint8_t { text, json };

struct WorkspaceConfig {
    std::filesystem::path root;
    std::filesystem::path ontology;
    std::filesystem::path units;
    std::filesystem::path sites;
    std::filesystem::path models;
    std::filesystem::path templates;
    std::filesystem::path output;
    std::uint64_t k_min = kDefaultMinLocalInstances;
    std::uint64_t seed = 7;
    OutputFormat format = OutputFormat::text;
};

/// Reads `<root>/mila.json`; every path in it is relative to `root`.
/// Missing keys fall back to the bundled layout. Throws Error(CLI_CONFIG).
WorkspaceConfig load_config(const std::filesystem::path& root);

struct ModelFile {
    std::filesystem::path path;
    std::string display;  // path relative to the workspace root when possible
    std::string text;
};

/// Catalogs shared by every command. Loading failures are environment
/// errors: they throw Error(CLI_CONFIG | CLI_IO) with the first diagnostic.
struct Workspace {
    WorkspaceConfig config;
    OntologyCatalog catalog;
    UnitRegistry units;
    std::vector<SiteCatalog> sites;

    static Workspace load(const WorkspaceConfig& config);

    TemplateSet templates() const;
    /// `*.json` under the models directory, sorted by file name.
    std::vector<ModelFile> model_files() const;
    ModelFile read_model(const std::filesystem::path& path) const;
};

}  // namespace mila::cli
