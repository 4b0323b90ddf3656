#include "mila/plan.hpp"

#include <algorithm>
#include <set>

#include "mila/digest.hpp"

namespace mila {

using nlohmann::json;

namespace {

const std::vector<std::string> kBooleanClasses{"false", "true"};

const std::vector<std::string> kPrivacyRules{
    "exchange:parameter_vectors",
    "exchange:scalar_metrics",
    "retain:row_level_data",
    "exclude:identifying_fields",
};

std::vector<std::string> categories_of(const DataElementRef& e, const OntologyCatalog& catalog) {
    if (e.expected_datatype == DataType::boolean) return kBooleanClasses;
    if (const auto* c = catalog.resolve(e.concept_uri)) return c->values;
    return {};
}

bool is_feature(const DataElementRef& e) {
    return e.role != Role::outcome && e.expected_datatype != DataType::datetime;
}

json impute_json(const ImputeValue& v) {
    return std::visit([](const auto& x) { return json(x); }, v);
}

ImputeValue impute_from(const json& j) {
    if (j.is_string()) return j.get<std::string>();
    return j.get<double>();
}

json columns_json(const std::vector<OutputColumn>& cols) {
    json a = json::array();
    for (const auto& c : cols) a.push_back({{"local_name", c.local_name}, {"concept_uri", c.concept_uri}, {"unit", c.unit}});
    return a;
}

std::vector<OutputColumn> columns_from(const json& a) {
    std::vector<OutputColumn> cols;
    for (const auto& c : a) {
        cols.push_back({c.at("local_name").get<std::string>(), c.at("concept_uri").get<std::string>(),
                        c.at("unit").get<std::string>()});
    }
    return cols;
}

template <typename E>
E parse_enum(const json& j) {
    auto v = enum_parse<E>(j.get<std::string>());
    if (!v) throw Error("CLI_BAD_PLAN", "unknown enum value '" + j.get<std::string>() + "'");
    return *v;
}

}  // namespace

ValidationReport check_federation(const ModelDocument& doc, const std::vector<SiteCatalog>& sites,
                                  const AvailabilityReport& availability) {
    ValidationReport report;
    std::set<std::string> wanted(doc.federation.site_ids.begin(), doc.federation.site_ids.end());
    std::vector<const SiteCatalog*> ordered;
    for (const auto& s : sites) {
        if (wanted.contains(s.site_id)) ordered.push_back(&s);
    }
    std::sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->site_id < b->site_id; });

    std::size_t usable = 0;
    for (const auto* s : ordered) {
        bool clean = availability.site_passes(s->site_id);
        for (std::size_t i = 0; i < doc.data_elements.size(); ++i) {
            const auto* m = s->mapping(doc.data_elements[i].concept_uri);
            if (m && m->identifying) {
                report.diagnostics.push_back(make_error(
                    "FED_IDENTIFYING_FIELD",
                    "site " + s->site_id + " flags " + doc.data_elements[i].concept_uri +
                        " as identifying; it cannot leave the site",
                    ModelDocument::element_path(i)));
                clean = false;
            }
        }
        if (clean) ++usable;
    }
    if (doc.federation.mode == FederationMode::federated && usable < 2) {
        report.diagnostics.push_back(make_error("FED_TOO_FEW_SITES",
                                                "federated training needs at least two usable sites, found " +
                                                    std::to_string(usable),
                                                "/federation/site_ids"));
    }
    return report;
}

std::vector<FeatureColumn> feature_layout(const ModelDocument& doc, const OntologyCatalog& catalog) {
    std::vector<FeatureColumn> layout;
    for (const auto& e : doc.data_elements) {
        if (!is_feature(e)) continue;
        if (e.expected_datatype == DataType::categorical) {
            for (const auto& v : categories_of(e, catalog)) {
                layout.push_back({e.local_name + "=" + v, e.local_name, e.concept_uri, layout.size()});
            }
        } else {
            layout.push_back({e.local_name, e.local_name, e.concept_uri, layout.size()});
        }
    }
    return layout;
}

Result<Plan> transform(const ModelDocument& doc, const OntologyCatalog& catalog,
                       const std::vector<SiteCatalog>& sites, const UnitRegistry& units,
                       const TransformConfig& config) {
    const std::uint64_t k_min = std::max<std::uint64_t>(config.k_min, doc.federation.min_local_instances);
    const auto availability = check_availability(doc, sites, units, k_min);
    auto diags = availability.diagnostics();
    const auto federation = check_federation(doc, sites, availability);
    diags.insert(diags.end(), federation.diagnostics.begin(), federation.diagnostics.end());
    if (has_errors(diags)) return diags;

    Plan plan;
    plan.model_id = doc.id;
    plan.model_hash = canonical_hash(doc);
    plan.plan_id = doc.id + "-" + plan.model_hash.substr(0, 12);
    plan.ontology_refs = doc.concept_uris();

    auto& fp = plan.federation;
    fp.mode = doc.federation.mode;
    fp.sites = doc.federation.site_ids;
    std::sort(fp.sites.begin(), fp.sites.end());
    fp.rounds = doc.federation.mode == FederationMode::federated ? doc.federation.rounds : 1;
    fp.aggregator = doc.federation.aggregator;
    fp.min_local_instances = k_min;
    fp.privacy_rules = kPrivacyRules;
    fp.seed = doc.federation.seed;

    const auto columns = output_columns_for(doc);
    for (const auto& site_id : fp.sites) {
        const auto site = std::find_if(sites.begin(), sites.end(), [&](const auto& s) { return s.site_id == site_id; });
        RetrievalPlan r;
        r.site_id = site_id;
        try {
            r.query = generate_query(doc, *site);
        } catch (const Error& ex) {
            return std::vector<Diagnostic>{ex.diagnostic()};
        }
        for (const auto& a : availability.actions) {
            if (a.site_id == site_id) r.harmonization_actions.push_back(a);
        }
        r.expected_columns = columns;
        plan.retrieval.emplace(site_id, std::move(r));
    }

    auto& pp = plan.preprocess;
    for (const auto& e : doc.data_elements) {
        if (e.role == Role::outcome) {
            pp.outcome_element = e.local_name;
            pp.classes = categories_of(e, catalog);
            continue;
        }
        if (e.expected_datatype == DataType::datetime) {
            pp.required_elements.push_back(e.local_name);
            continue;
        }
        const auto& c = doc.training.preprocessing.at(e.local_name);
        pp.steps.push_back({StepKind::impute, e.local_name, c.impute_value, {}, 0.0, 1.0});
        if (e.expected_datatype == DataType::categorical) {
            pp.steps.push_back({StepKind::encode, e.local_name, 0.0, categories_of(e, catalog), 0.0, 1.0});
        } else if (e.expected_datatype == DataType::numeric) {
            pp.steps.push_back({StepKind::scale, e.local_name, 0.0, {}, c.scale_offset, c.scale_factor});
        }
    }
    pp.feature_layout = feature_layout(doc, catalog);

    auto& tc = plan.training;
    tc.algorithm_tag = doc.training.algorithm_tag;
    tc.executable = doc.training.executable;
    tc.learning_rate = doc.training.learning_rate;
    tc.local_epochs = doc.training.local_epochs;
    tc.l2 = doc.training.l2;
    tc.num_features = pp.feature_layout.size();
    tc.num_classes = pp.classes.size();
    return plan;
}

LabeledDataset apply_preprocess(const Table& table, const PreprocessPlan& plan, const std::string& site_id) {
    std::map<std::string, std::size_t> column;
    for (std::size_t i = 0; i < table.columns.size(); ++i) column[table.columns[i].local_name] = i;
    auto col = [&](const std::string& name) {
        auto it = column.find(name);
        if (it == column.end()) throw Error("FS_BAD_VALUE", "retrieved table lacks column '" + name + "'");
        return it->second;
    };
    auto bad = [&](const std::string& element, const Value& v) {
        return Error("FS_BAD_VALUE", "site " + site_id + ": unexpected value '" + value_to_string(v) + "' for " +
                                         element);
    };

    const std::size_t outcome_col = col(plan.outcome_element);
    std::vector<std::size_t> required;
    for (const auto& r : plan.required_elements) required.push_back(col(r));

    LabeledDataset out;
    out.site_id = site_id;
    out.dims = plan.feature_layout.size();
    std::vector<double> features;
    for (const auto& row : table.rows) {
        const Value& label_cell = row[outcome_col];
        if (std::holds_alternative<std::monostate>(label_cell)) continue;
        if (std::any_of(required.begin(), required.end(),
                        [&](std::size_t c) { return std::holds_alternative<std::monostate>(row[c]); })) {
            continue;
        }
        std::string label = value_to_string(label_cell);
        if (const auto* d = std::get_if<double>(&label_cell); d && (*d == 0.0 || *d == 1.0)) {
            label = *d == 1.0 ? "true" : "false";
        }
        auto cls = std::find(plan.classes.begin(), plan.classes.end(), label);
        if (cls == plan.classes.end()) throw bad(plan.outcome_element, label_cell);

        features.clear();
        Value cell;
        for (const auto& step : plan.steps) {
            switch (step.kind) {
            case StepKind::impute: {
                cell = row[col(step.element)];
                const bool categorical = std::holds_alternative<std::string>(step.constant);
                if (std::holds_alternative<std::monostate>(cell)) {
                    cell = categorical ? Value{std::get<std::string>(step.constant)}
                                       : Value{std::get<double>(step.constant)};
                }
                if (!categorical) {
                    // Booleans enter the feature space as 0/1; numeric cells pass through.
                    if (const auto* b = std::get_if<bool>(&cell)) cell = *b ? 1.0 : 0.0;
                    if (!std::holds_alternative<double>(cell)) throw bad(step.element, cell);
                    const bool next_is_scale = &step != &plan.steps.back() && (&step + 1)->kind == StepKind::scale &&
                                               (&step + 1)->element == step.element;
                    if (!next_is_scale) features.push_back(std::get<double>(cell));
                }
                break;
            }
            case StepKind::encode: {
                const auto* s = std::get_if<std::string>(&cell);
                if (!s) throw bad(step.element, cell);
                auto it = std::find(step.categories.begin(), step.categories.end(), *s);
                if (it == step.categories.end()) throw bad(step.element, cell);
                for (std::size_t k = 0; k < step.categories.size(); ++k) {
                    features.push_back(k == static_cast<std::size_t>(it - step.categories.begin()) ? 1.0 : 0.0);
                }
                break;
            }
            case StepKind::scale:
                features.push_back((std::get<double>(cell) - step.offset) / step.factor);
                break;
            }
        }
        out.push_back(features, static_cast<int>(cls - plan.classes.begin()));
    }
    return out;
}

json to_json(const PreprocessPlan& p) {
    json steps = json::array();
    for (const auto& s : p.steps) {
        json o = {{"kind", enum_name(s.kind)}, {"element", s.element}};
        switch (s.kind) {
        case StepKind::impute: o["constant"] = impute_json(s.constant); break;
        case StepKind::encode: o["categories"] = s.categories; break;
        case StepKind::scale:
            o["offset"] = s.offset;
            o["factor"] = s.factor;
            break;
        }
        steps.push_back(std::move(o));
    }
    json layout = json::array();
    for (const auto& f : p.feature_layout) {
        layout.push_back({{"feature_name", f.feature_name},
                          {"source_element", f.source_element},
                          {"concept_uri", f.concept_uri},
                          {"index", f.index}});
    }
    return {{"steps", steps},
            {"feature_layout", layout},
            {"outcome_element", p.outcome_element},
            {"classes", p.classes},
            {"required_elements", p.required_elements}};
}

json to_json(const TrainingConfig& t) {
    return {{"algorithm_tag", enum_name(t.algorithm_tag)},
            {"executable", t.executable},
            {"learning_rate", t.learning_rate},
            {"local_epochs", t.local_epochs},
            {"l2", t.l2},
            {"num_features", t.num_features},
            {"num_classes", t.num_classes}};
}

json to_json(const Plan& plan) {
    json retrieval = json::object();
    for (const auto& [site_id, r] : plan.retrieval) {
        json actions = json::array();
        for (const auto& a : r.harmonization_actions) {
            json steps = json::array();
            for (const auto& s : a.steps) {
                steps.push_back({{"factor", s.map.factor}, {"offset", s.map.offset}, {"inverse", s.inverse}});
            }
            actions.push_back({{"site_id", a.site_id},
                               {"local_name", a.local_name},
                               {"concept_uri", a.concept_uri},
                               {"from_unit", a.from_unit},
                               {"to_unit", a.to_unit},
                               {"steps", steps},
                               {"net", {{"factor", a.net.factor}, {"offset", a.net.offset}}}});
        }
        retrieval[site_id] = {{"site_id", r.site_id},
                              {"query",
                               {{"dialect", enum_name(r.query.dialect)},
                                {"text", r.query.text},
                                {"output_columns", columns_json(r.query.output_columns)}}},
                              {"harmonization_actions", actions},
                              {"expected_columns", columns_json(r.expected_columns)}};
    }
    const auto& f = plan.federation;
    return {{"plan_id", plan.plan_id},
            {"model_id", plan.model_id},
            {"model_hash", plan.model_hash},
            {"retrieval", retrieval},
            {"preprocess", to_json(plan.preprocess)},
            {"training", to_json(plan.training)},
            {"federation",
             {{"mode", enum_name(f.mode)},
              {"sites", f.sites},
              {"rounds", f.rounds},
              {"aggregator", enum_name(f.aggregator)},
              {"weighting", f.weighting},
              {"min_local_instances", f.min_local_instances},
              {"privacy_rules", f.privacy_rules},
              {"seed", f.seed}}},
            {"ontology_refs", plan.ontology_refs}};
}

Plan plan_from_json(const json& j) {
    try {
        Plan plan;
        plan.plan_id = j.at("plan_id").get<std::string>();
        plan.model_id = j.at("model_id").get<std::string>();
        plan.model_hash = j.at("model_hash").get<std::string>();
        for (const auto& [site_id, r] : j.at("retrieval").items()) {
            RetrievalPlan rp;
            rp.site_id = r.at("site_id").get<std::string>();
            rp.query.dialect = parse_enum<Dialect>(r.at("query").at("dialect"));
            rp.query.text = r.at("query").at("text").get<std::string>();
            rp.query.output_columns = columns_from(r.at("query").at("output_columns"));
            for (const auto& a : r.at("harmonization_actions")) {
                HarmonizationAction h;
                h.site_id = a.at("site_id").get<std::string>();
                h.local_name = a.at("local_name").get<std::string>();
                h.concept_uri = a.at("concept_uri").get<std::string>();
                h.from_unit = a.at("from_unit").get<std::string>();
                h.to_unit = a.at("to_unit").get<std::string>();
                for (const auto& s : a.at("steps")) {
                    h.steps.push_back({{s.at("factor").get<double>(), s.at("offset").get<double>()},
                                       s.at("inverse").get<bool>()});
                }
                h.net = {a.at("net").at("factor").get<double>(), a.at("net").at("offset").get<double>()};
                rp.harmonization_actions.push_back(std::move(h));
            }
            rp.expected_columns = columns_from(r.at("expected_columns"));
            plan.retrieval.emplace(site_id, std::move(rp));
        }

        const auto& p = j.at("preprocess");
        for (const auto& s : p.at("steps")) {
            PreprocessStep step;
            step.kind = parse_enum<StepKind>(s.at("kind"));
            step.element = s.at("element").get<std::string>();
            if (step.kind == StepKind::impute) step.constant = impute_from(s.at("constant"));
            if (step.kind == StepKind::encode) step.categories = s.at("categories").get<std::vector<std::string>>();
            if (step.kind == StepKind::scale) {
                step.offset = s.at("offset").get<double>();
                step.factor = s.at("factor").get<double>();
            }
            plan.preprocess.steps.push_back(std::move(step));
        }
        for (const auto& f : p.at("feature_layout")) {
            plan.preprocess.feature_layout.push_back(
                {f.at("feature_name").get<std::string>(), f.at("source_element").get<std::string>(),
                 f.at("concept_uri").get<std::string>(), f.at("index").get<std::size_t>()});
        }
        plan.preprocess.outcome_element = p.at("outcome_element").get<std::string>();
        plan.preprocess.classes = p.at("classes").get<std::vector<std::string>>();
        plan.preprocess.required_elements = p.at("required_elements").get<std::vector<std::string>>();

        const auto& t = j.at("training");
        plan.training.algorithm_tag = parse_enum<AlgorithmTag>(t.at("algorithm_tag"));
        plan.training.executable = t.at("executable").get<bool>();
        plan.training.learning_rate = t.at("learning_rate").get<double>();
        plan.training.local_epochs = t.at("local_epochs").get<std::uint32_t>();
        plan.training.l2 = t.at("l2").get<double>();
        plan.training.num_features = t.at("num_features").get<std::size_t>();
        plan.training.num_classes = t.at("num_classes").get<std::size_t>();

        const auto& f = j.at("federation");
        plan.federation.mode = parse_enum<FederationMode>(f.at("mode"));
        plan.federation.sites = f.at("sites").get<std::vector<std::string>>();
        plan.federation.rounds = f.at("rounds").get<std::uint32_t>();
        plan.federation.aggregator = parse_enum<Aggregator>(f.at("aggregator"));
        plan.federation.weighting = f.at("weighting").get<std::string>();
        plan.federation.min_local_instances = f.at("min_local_instances").get<std::uint64_t>();
        plan.federation.privacy_rules = f.at("privacy_rules").get<std::vector<std::string>>();
        plan.federation.seed = f.at("seed").get<std::uint64_t>();
        plan.ontology_refs = j.at("ontology_refs").get<std::vector<std::string>>();
        return plan;
    } catch (const json::exception& ex) {
        throw Error("CLI_BAD_PLAN", std::string("malformed plan: ") + ex.what());
    }
}

std::string serialize_plan(const Plan& plan) { return to_json(plan).dump(); }

std::string plan_hash(const Plan& plan) { return sha256_hex(serialize_plan(plan)); }

}  // namespace mila
