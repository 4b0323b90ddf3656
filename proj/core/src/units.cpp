#include "mila/units.hpp"

#include <cmath>
#include <deque>
#include <nlohmann/json.hpp>

namespace mila {

void UnitRegistry::add_unit(const std::string& code, UnitDimension dim) {
    auto [it, inserted] = units_.emplace(code, dim);
    if (!inserted && it->second != dim) {
        throw Error("VDL_SYNTAX", "unit '" + code + "' registered with two dimensions");
    }
}

void UnitRegistry::add_conversion(const std::string& from, const std::string& to, double factor, double offset) {
    auto a = dimension(from);
    auto b = dimension(to);
    if (!a) throw Error("VDL_UNKNOWN_UNIT", "unknown unit '" + from + "'");
    if (!b) throw Error("VDL_UNKNOWN_UNIT", "unknown unit '" + to + "'");
    if (*a != *b) {
        throw Error("VDL_CROSS_DIMENSION", "conversion " + from + " -> " + to + " crosses dimensions");
    }
    if (factor == 0.0 || !std::isfinite(factor) || !std::isfinite(offset)) {
        throw Error("VDL_SYNTAX", "conversion " + from + " -> " + to + " needs a finite nonzero factor");
    }
    conversions_.push_back({from, to, {factor, offset}});
}

std::optional<UnitDimension> UnitRegistry::dimension(std::string_view code) const {
    auto it = units_.find(std::string(code));
    if (it == units_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::vector<UnitRegistry::Step>> UnitRegistry::path(std::string_view from, std::string_view to) const {
    auto a = dimension(from);
    auto b = dimension(to);
    if (!a || !b || *a != *b) return std::nullopt;
    if (from == to) return std::vector<Step>{};

    // Breadth-first over units; edges are visited in declaration order so
    // the chosen path is deterministic.
    std::map<std::string, std::pair<std::string, Step>> parent;
    std::deque<std::string> queue{std::string(from)};
    parent.emplace(std::string(from), std::pair{std::string(), Step{0, false}});
    while (!queue.empty()) {
        auto cur = queue.front();
        queue.pop_front();
        if (cur == to) break;
        for (std::size_t i = 0; i < conversions_.size(); ++i) {
            const auto& c = conversions_[i];
            std::string next;
            bool inverse = false;
            if (c.from == cur) {
                next = c.to;
            } else if (c.to == cur) {
                next = c.from;
                inverse = true;
            } else {
                continue;
            }
            if (parent.contains(next)) continue;
            parent.emplace(next, std::pair{cur, Step{i, inverse}});
            queue.push_back(next);
        }
    }
    if (!parent.contains(std::string(to))) return std::nullopt;
    std::vector<Step> steps;
    for (std::string cur(to); cur != from;) {
        const auto& [prev, step] = parent.at(cur);
        steps.push_back(step);
        cur = prev;
    }
    return std::vector<Step>(steps.rbegin(), steps.rend());
}

bool UnitRegistry::convertible(std::string_view from, std::string_view to) const {
    return path(from, to).has_value();
}

std::optional<std::vector<ConversionStep>> UnitRegistry::steps(std::string_view from, std::string_view to) const {
    auto hops = path(from, to);
    if (!hops) return std::nullopt;
    std::vector<ConversionStep> out;
    for (const auto& h : *hops) out.push_back({conversions_[h.conversion].map, h.inverse});
    return out;
}

std::optional<AffineMap> UnitRegistry::composed(std::string_view from, std::string_view to) const {
    auto hops = steps(from, to);
    if (!hops) return std::nullopt;
    AffineMap net;
    for (const auto& s : *hops) {
        AffineMap step = s.inverse ? AffineMap{1.0 / s.map.factor, -s.map.offset / s.map.factor} : s.map;
        net = AffineMap{step.factor * net.factor, step.factor * net.offset + step.offset};
    }
    return net;
}

double UnitRegistry::convert(double value, std::string_view from, std::string_view to) const {
    auto hops = steps(from, to);
    if (!hops) {
        throw Error("VDL_NO_CONVERSION",
                    "no conversion from '" + std::string(from) + "' to '" + std::string(to) + "'");
    }
    for (const auto& s : *hops) value = s.apply(value);
    return value;
}

Result<UnitRegistry> load_unit_registry(std::string_view text) {
    using nlohmann::json;
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        return std::vector<Diagnostic>{make_error("VDL_SYNTAX", "unit registry is not a JSON object", "")};
    }
    UnitRegistry reg;
    std::vector<Diagnostic> diags;
    const auto units = j.value("units", json::array());
    for (std::size_t i = 0; i < units.size(); ++i) {
        const auto path = "/units/" + std::to_string(i);
        try {
            auto dim = enum_parse<UnitDimension>(units[i].at("dimension").get<std::string>());
            if (!dim) {
                diags.push_back(make_error("VDL_SYNTAX", "unknown dimension", path + "/dimension"));
                continue;
            }
            reg.add_unit(units[i].at("code").get<std::string>(), *dim);
        } catch (const json::exception& ex) {
            diags.push_back(make_error("VDL_SYNTAX", ex.what(), path));
        } catch (const Error& ex) {
            diags.push_back(ex.diagnostic());
            diags.back().element_path = path;
        }
    }
    const auto conversions = j.value("conversions", json::array());
    for (std::size_t i = 0; i < conversions.size(); ++i) {
        const auto path = "/conversions/" + std::to_string(i);
        try {
            const auto& c = conversions[i];
            reg.add_conversion(c.at("from").get<std::string>(), c.at("to").get<std::string>(),
                               c.at("factor").get<double>(), c.value("offset", 0.0));
        } catch (const json::exception& ex) {
            diags.push_back(make_error("VDL_SYNTAX", ex.what(), path));
        } catch (const Error& ex) {
            diags.push_back(ex.diagnostic());
            diags.back().element_path = path;
        }
    }
    if (!diags.empty()) return diags;
    return reg;
}

double convert_units(double value, std::string_view from, std::string_view to, const UnitRegistry& registry) {
    return registry.convert(value, from, to);
}

}  // namespace mila
