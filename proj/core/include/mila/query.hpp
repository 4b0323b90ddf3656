#pragma once

#include <span>
#include <string>
#include <vector>

#include "mila/model.hpp"
#include "mila/site.hpp"

namespace mila {

struct OutputColumn {
    std::string local_name;
    std::string concept_uri;
    std::string unit;  // the model's expected unit, empty when unitless

    bool operator==(const OutputColumn&) const = default;
};

struct QueryText {
    Dialect dialect = Dialect::sql;
    std::string text;
    std::vector<OutputColumn> output_columns;  // data element declaration order

    bool operator==(const QueryText&) const = default;
};

/// Columns every site's query returns for `doc`, in declaration order.
std::vector<OutputColumn> output_columns_for(const ModelDocument& doc);

/// Emits a single SELECT (sql) or a single basic-graph-pattern SELECT
/// (sparql) joining all elements on the site's patient key. The key is
/// used for joining and ordering only; it is never projected.
/// Throws Error(VDL_EMPTY | VDL_MISSING_MAPPING | VDL_IDENTIFYING).
QueryText generate_query(const ModelDocument& doc, const SiteCatalog& site);

struct Table {
    std::vector<OutputColumn> columns;
    std::vector<std::vector<Value>> rows;

    bool operator==(const Table&) const = default;
};

/// Evaluates a generated query against the site's fixture store and applies
/// the harmonization actions recorded for this site to numeric cells.
/// Rows come back ordered by patient key. Throws Error(VDL_UNSUPPORTED_QUERY)
/// for text outside the generated subset and Error(VDL_NO_FIXTURE).
Table execute_fixture_query(const QueryText& q, const SiteCatalog& site,
                            std::span<const HarmonizationAction> actions = {});

}  // namespace mila
