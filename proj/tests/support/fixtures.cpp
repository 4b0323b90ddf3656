#include "fixtures.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <unistd.h>

namespace mila::test {

namespace fs = std::filesystem;

fs::path workspace_dir() { return MILA_WORKSPACE_DIR; }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nlohmann::json load_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

ModelDocument load_model(const fs::path& p) {
    auto r = parse_model(slurp(p));
    if (!r) throw std::runtime_error(p.string() + ": " + format_diagnostic(r.diagnostics().front()));
    return std::move(r).value();
}

const SiteCatalog& Bundle::site(const std::string& id) const {
    for (const auto& s : sites) {
        if (s.site_id == id) return s;
    }
    throw std::out_of_range("no site " + id);
}

const ModelDocument& Bundle::model(const std::string& id) const {
    for (const auto& m : models) {
        if (m.id == id) return m;
    }
    throw std::out_of_range("no model " + id);
}

const Bundle& bundle() {
    static const Bundle b = [] {
        Bundle out;
        const auto ws = workspace_dir();
        out.catalog_json = load_json(ws / "ontology/catalog.json");
        out.units_json = load_json(ws / "ontology/units.json");
        out.catalog = load_catalog(out.catalog_json.dump()).value();
        out.units = load_unit_registry(out.units_json.dump()).value();
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(ws / "sites")) files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            out.site_json.push_back(load_json(f));
            out.sites.push_back(load_site_catalog(slurp(f), &out.units).value());
        }
        files.clear();
        for (const auto& e : fs::directory_iterator(ws / "models")) files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) out.models.push_back(load_model(f));
        out.templates = load_templates(ws / "templates").value();
        return out;
    }();
    return b;
}

Plan synthetic_plan(std::vector<std::string> sites, std::size_t dims, std::size_t classes, double learning_rate,
                    std::uint32_t epochs, double l2, std::uint32_t rounds, std::uint64_t seed) {
    Plan p;
    p.model_id = "synthetic";
    p.model_hash = std::string(64, '0');
    p.plan_id = "synthetic-000000000000";
    p.training = {AlgorithmTag::logistic_regression, true, learning_rate, epochs, l2, dims, classes};
    std::sort(sites.begin(), sites.end());
    p.federation.sites = std::move(sites);
    p.federation.rounds = rounds;
    p.federation.min_local_instances = 1;
    p.federation.seed = seed;
    for (std::size_t c = 0; c < classes; ++c) p.preprocess.classes.push_back("c" + std::to_string(c));
    return p;
}

TempDir::TempDir() {
    static std::atomic<unsigned> counter{0};
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            ("mila-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + "-" + std::to_string(rd()));
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

}  // namespace mila::test
