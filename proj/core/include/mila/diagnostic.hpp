#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace mila {

enum class Severity : std::uint8_t { error, warning };

/// Pipeline layer that produced a diagnostic. The first four are the
/// validation layers; the rest belong to later stages and loaders.
enum class Stage : std::uint8_t {
    structure,
    semantics,
    availability,
    federation,
    catalog,
    generation,
    execution,
    trace,
    driver,
};

std::string_view to_string(Severity s);
std::string_view to_string(Stage s);

/// Stage implied by a diagnostic code prefix (MM_ -> structure, SEM_ ->
/// semantics, ...). Unknown prefixes map to Stage::driver.
Stage stage_for_code(std::string_view code);

struct Diagnostic {
    std::string code;
    Severity severity = Severity::error;
    std::string message;
    std::string element_path;  // RFC-6901 pointer into the source document
    Stage stage = Stage::structure;

    bool operator==(const Diagnostic&) const = default;
};

/// Builds a diagnostic whose stage is derived from the code prefix.
Diagnostic make_error(std::string code, std::string message, std::string path = "");
Diagnostic make_warning(std::string code, std::string message, std::string path = "");

bool has_errors(const std::vector<Diagnostic>& diags);

/// One line per diagnostic: `severity code path: message`.
std::string format_diagnostic(const Diagnostic& d);

struct ValidationReport {
    std::vector<Diagnostic> diagnostics;

    bool pass() const { return !has_errors(diagnostics); }
    void append(const ValidationReport& other);
    bool operator==(const ValidationReport&) const = default;
};

/// Raised by operations whose failure is a single condition rather than an
/// accumulated report (unit conversion, rendering, training, ledger appends).
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message, std::string path = "");

    const std::string& code() const noexcept { return code_; }
    const std::string& path() const noexcept { return path_; }
    Diagnostic diagnostic() const;

private:
    std::string code_;
    std::string path_;
};

/// Value or accumulated diagnostics. Loaders and the transformation return
/// this so callers can print every problem at once.
template <typename T>
class Result {
public:
    Result(T value) : state_(std::move(value)) {}  // NOLINT(google-explicit-constructor)
    Result(std::vector<Diagnostic> diags) : state_(std::move(diags)) {}  // NOLINT

    bool ok() const { return std::holds_alternative<T>(state_); }
    explicit operator bool() const { return ok(); }

    const T& value() const& { return checked(); }
    T& value() & { return const_cast<T&>(checked()); }
    T&& value() && { return std::move(const_cast<T&>(checked())); }

    const T& operator*() const& { return value(); }
    const T* operator->() const { return &value(); }

    const std::vector<Diagnostic>& diagnostics() const {
        static const std::vector<Diagnostic> none;
        if (auto* d = std::get_if<std::vector<Diagnostic>>(&state_)) return *d;
        return none;
    }

private:
    const T& checked() const {
        if (auto* v = std::get_if<T>(&state_)) return *v;
        const auto& d = std::get<std::vector<Diagnostic>>(state_);
        throw Error(d.empty() ? "INTERNAL" : d.front().code,
                    d.empty() ? "empty result" : d.front().message);
    }

    std::variant<T, std::vector<Diagnostic>> state_;
};

}  // namespace mila
