#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mila/diagnostic.hpp"
#include "mila/model.hpp"
#include "mila/plan.hpp"

namespace mila {

struct Template {
    std::string template_id;
    std::string version;
    std::string body;
    std::vector<std::string> placeholders;  // names the body may reference

    std::string qualified_id() const { return template_id + "@" + version; }
};

using TemplateItem = std::map<std::string, std::string>;
using TemplateValue = std::variant<std::string, std::vector<TemplateItem>>;
using TemplateContext = std::map<std::string, TemplateValue>;

/// `{{name}}` substitutes a string binding; `{% for x in list %}...{% endfor %}`
/// repeats its body once per list item, exposing `{{x.field}}`. Loops do not
/// nest and there are no conditionals. Throws Error(CG_MISSING_BINDING) for
/// undeclared or unbound names and Error(CG_BAD_TEMPLATE) for malformed
/// directives; nothing is returned on failure.
std::string render_template(const Template& t, const TemplateContext& context);

/// Parse-only check of a template body against its declared placeholders.
std::vector<Diagnostic> check_template(const Template& t);

struct TemplateSet {
    std::map<std::string, Template> templates;

    const Template& at(const std::string& id) const;
};

/// Reads `manifest.json` (`{templates:[{template_id,version,file,placeholders}]}`)
/// and the referenced bodies from `dir`.
Result<TemplateSet> load_templates(const std::filesystem::path& dir);

struct ArtifactTrace {
    std::string model_id;
    std::string model_hash;
    std::string template_id;  // id@version
    std::vector<std::string> element_paths;
    std::vector<std::string> ontology_uris;
    std::optional<std::string> experiment_id;

    bool operator==(const ArtifactTrace&) const = default;
};

struct Artifact {
    std::string relative_path;
    std::string content;
    std::string content_hash;
    ArtifactTrace trace;
};

class ArtifactSet {
public:
    /// Throws Error(CG_PATH_COLLISION) when the path is already taken.
    void add(Artifact a);
    void merge(const ArtifactSet& other);

    const std::map<std::string, Artifact>& artifacts() const { return items_; }
    const Artifact* find(const std::string& relative_path) const;
    bool empty() const { return items_.empty(); }
    std::size_t size() const { return items_.size(); }

private:
    std::map<std::string, Artifact> items_;
};

struct ProvenanceHeader {
    std::string model_id;
    std::string model_hash;
    std::string template_id;
    std::vector<std::string> ontology_uris;

    bool operator==(const ProvenanceHeader&) const = default;
};

std::string provenance_header(const ProvenanceHeader& h);
/// Reads the leading `# mila:` block; nullopt when any of the four lines is
/// missing or out of order.
std::optional<ProvenanceHeader> parse_provenance_header(std::string_view content);
/// Content after the header block.
std::string_view strip_provenance_header(std::string_view content);

/// `app/(models|services|routes)/... | plans/...`
bool is_layout_path(std::string_view relative_path);

/// Model copy, plan copy, service stub and route stub for one model.
ArtifactSet generate_artifacts(const Plan& plan, const ModelDocument& doc, const TemplateSet& templates);

using Manifest = std::map<std::string, std::string>;  // relative path -> sha256

/// Writes every artifact under `root` via temp file + rename. Temporary
/// files are removed on failure and Error(CG_IO) names the failing path.
Manifest write_artifacts(const ArtifactSet& set, const std::filesystem::path& root);

Manifest manifest_of(const ArtifactSet& set);
std::string manifest_json(const Manifest& m);
std::string manifest_hash(const Manifest& m);

}  // namespace mila
