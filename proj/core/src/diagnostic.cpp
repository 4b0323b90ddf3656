#include "mila/diagnostic.hpp"

#include <array>
#include <utility>

namespace mila {

std::string_view to_string(Severity s) {
    return s == Severity::error ? "error" : "warning";
}

std::string_view to_string(Stage s) {
    switch (s) {
    case Stage::structure: return "structure";
    case Stage::semantics: return "semantics";
    case Stage::availability: return "availability";
    case Stage::federation: return "federation";
    case Stage::catalog: return "catalog";
    case Stage::generation: return "generation";
    case Stage::execution: return "execution";
    case Stage::trace: return "trace";
    case Stage::driver: return "driver";
    }
    return "driver";
}

Stage stage_for_code(std::string_view code) {
    static constexpr std::array<std::pair<std::string_view, Stage>, 10> prefixes{{
        {"MM_", Stage::structure},
        {"SEM_", Stage::semantics},
        {"AVAIL_", Stage::availability},
        {"FED_", Stage::federation},
        {"ONT_", Stage::catalog},
        {"VDL_", Stage::catalog},
        {"CG_", Stage::generation},
        {"FS_", Stage::execution},
        {"TA_", Stage::trace},
        {"CLI_", Stage::driver},
    }};
    for (const auto& [prefix, stage] : prefixes) {
        if (code.starts_with(prefix)) return stage;
    }
    return Stage::driver;
}

Diagnostic make_error(std::string code, std::string message, std::string path) {
    Stage stage = stage_for_code(code);
    return Diagnostic{std::move(code), Severity::error, std::move(message), std::move(path), stage};
}

Diagnostic make_warning(std::string code, std::string message, std::string path) {
    Stage stage = stage_for_code(code);
    return Diagnostic{std::move(code), Severity::warning, std::move(message), std::move(path), stage};
}

bool has_errors(const std::vector<Diagnostic>& diags) {
    for (const auto& d : diags) {
        if (d.severity == Severity::error) return true;
    }
    return false;
}

std::string format_diagnostic(const Diagnostic& d) {
    std::string out;
    out += to_string(d.severity);
    out += ' ';
    out += d.code;
    out += ' ';
    out += d.element_path.empty() ? std::string("/") : d.element_path;
    out += ": ";
    out += d.message;
    return out;
}

void ValidationReport::append(const ValidationReport& other) {
    diagnostics.insert(diagnostics.end(), other.diagnostics.begin(), other.diagnostics.end());
}

Error::Error(std::string code, const std::string& message, std::string path)
    : std::runtime_error(code + ": " + message), code_(std::move(code)), path_(std::move(path)) {}

Diagnostic Error::diagnostic() const {
    std::string msg = what();
    const auto prefix = code_ + ": ";
    if (msg.starts_with(prefix)) msg.erase(0, prefix.size());
    return make_error(code_, msg, path_);
}

}  // namespace mila
