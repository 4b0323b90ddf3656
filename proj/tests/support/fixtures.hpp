#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mila/codegen.hpp"
#include "mila/model.hpp"
#include "mila/ontology.hpp"
#include "mila/plan.hpp"
#include "mila/site.hpp"
#include "mila/units.hpp"

namespace mila::test {

std::filesystem::path workspace_dir();
std::string slurp(const std::filesystem::path& p);
nlohmann::json load_json(const std::filesystem::path& p);

/// The bundled workspace, loaded once per process.
struct Bundle {
    OntologyCatalog catalog;
    UnitRegistry units;
    std::vector<SiteCatalog> sites;
    std::vector<ModelDocument> models;  // sorted by file name
    TemplateSet templates;
    nlohmann::json catalog_json;
    nlohmann::json units_json;
    std::vector<nlohmann::json> site_json;

    const SiteCatalog& site(const std::string& id) const;
    const ModelDocument& model(const std::string& id) const;
};

const Bundle& bundle();

ModelDocument load_model(const std::filesystem::path& p);

/// A hand-built plan for sessions over synthetic data.
Plan synthetic_plan(std::vector<std::string> sites, std::size_t dims, std::size_t classes, double learning_rate,
                    std::uint32_t epochs, double l2, std::uint32_t rounds, std::uint64_t seed = 0);

/// Removes itself on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace mila::test
