#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mila/diagnostic.hpp"
#include "mila/enum_names.hpp"

namespace mila {

enum class UnitDimension : std::uint8_t {
    mass_concentration,
    molar_concentration,
    pressure,
    count,
    dimensionless,
    time,
};

template <>
struct EnumTraits<UnitDimension> {
    static constexpr std::array<std::string_view, 6> names{
        "mass_concentration", "molar_concentration", "pressure", "count", "dimensionless", "time"};
};

/// y = factor * x + offset
struct AffineMap {
    double factor = 1.0;
    double offset = 0.0;

    double apply(double x) const { return factor * x + offset; }
    bool operator==(const AffineMap&) const = default;
};

/// One hop of a conversion path. Reverse hops undo the declared map as
/// (y - offset) / factor rather than multiplying by a reciprocal.
struct ConversionStep {
    AffineMap map;
    bool inverse = false;

    double apply(double x) const { return inverse ? (x - map.offset) / map.factor : map.apply(x); }
    bool operator==(const ConversionStep&) const = default;
};

struct UnitConversion {
    std::string from;
    std::string to;
    AffineMap map;
};

/// Unit codes with their dimension and declared affine conversions. Every
/// declared pair is usable in both directions; the reverse direction is
/// evaluated as (y - offset) / factor. Multi-hop paths are composed along
/// the shortest chain of declared pairs.
class UnitRegistry {
public:
    /// Throws Error(VDL_SYNTAX) when the code is already registered with
    /// another dimension.
    void add_unit(const std::string& code, UnitDimension dim);
    /// Throws Error(VDL_UNKNOWN_UNIT | VDL_CROSS_DIMENSION | VDL_SYNTAX).
    void add_conversion(const std::string& from, const std::string& to, double factor, double offset = 0.0);

    std::optional<UnitDimension> dimension(std::string_view code) const;
    bool convertible(std::string_view from, std::string_view to) const;
    /// Hops from `from` to `to`; empty for identical units, nullopt when
    /// no path exists.
    std::optional<std::vector<ConversionStep>> steps(std::string_view from, std::string_view to) const;
    /// Net affine map of the conversion path, if any.
    std::optional<AffineMap> composed(std::string_view from, std::string_view to) const;
    /// Throws Error(VDL_NO_CONVERSION) when the units differ in dimension or no path exists.
    double convert(double value, std::string_view from, std::string_view to) const;

    const std::map<std::string, UnitDimension>& units() const { return units_; }
    const std::vector<UnitConversion>& conversions() const { return conversions_; }

private:
    struct Step {
        std::size_t conversion;
        bool inverse;
    };
    std::optional<std::vector<Step>> path(std::string_view from, std::string_view to) const;

    std::map<std::string, UnitDimension> units_;
    std::vector<UnitConversion> conversions_;
};

/// `{units:[{code,dimension}], conversions:[{from,to,factor,offset?}]}`
Result<UnitRegistry> load_unit_registry(std::string_view text);

double convert_units(double value, std::string_view from, std::string_view to, const UnitRegistry& registry);

}  // namespace mila
