#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace mila::test {

using nlohmann::json;

DenseModel dense_from(const Weights& w) {
    DenseModel m;
    m.W.assign(w.classes, std::vector<double>(w.dims));
    for (std::size_t c = 0; c < w.classes; ++c) {
        for (std::size_t d = 0; d < w.dims; ++d) m.W[c][d] = w.w[c * w.dims + d];
    }
    m.b = w.b;
    return m;
}

Weights weights_from(const DenseModel& m) {
    const std::size_t C = m.W.size();
    const std::size_t D = C ? m.W[0].size() : 0;
    Weights w(C, D);
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t d = 0; d < D; ++d) w.w[c * D + d] = m.W[c][d];
    }
    w.b = m.b;
    return w;
}

namespace {

std::vector<double> probabilities(const DenseModel& m, const double* x) {
    const std::size_t C = m.W.size();
    std::vector<double> z(C);
    for (std::size_t c = 0; c < C; ++c) {
        z[c] = m.b[c];
        for (std::size_t d = 0; d < m.W[c].size(); ++d) z[c] += m.W[c][d] * x[d];
    }
    const double top = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (auto& v : z) {
        v = std::exp(v - top);
        sum += v;
    }
    for (auto& v : z) v /= sum;
    return z;
}

}  // namespace

double oracle_loss(const DenseModel& m, const LabeledDataset& data, double l2) {
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto p = probabilities(m, data.row(i));
        total -= std::log(p[static_cast<std::size_t>(data.y[i])]);
    }
    double sq = 0.0;
    for (const auto& row : m.W) {
        for (double v : row) sq += v * v;
    }
    return total / static_cast<double>(data.size()) + 0.5 * l2 * sq;
}

DenseModel oracle_gradient(const DenseModel& m, const LabeledDataset& data, double l2) {
    DenseModel g;
    g.W.assign(m.W.size(), std::vector<double>(m.W.empty() ? 0 : m.W[0].size(), 0.0));
    g.b.assign(m.b.size(), 0.0);
    const double n = static_cast<double>(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double* x = data.row(i);
        const auto p = probabilities(m, x);
        for (std::size_t c = 0; c < p.size(); ++c) {
            const double r = p[c] - (static_cast<int>(c) == data.y[i] ? 1.0 : 0.0);
            for (std::size_t d = 0; d < g.W[c].size(); ++d) g.W[c][d] += r * x[d] / n;
            g.b[c] += r / n;
        }
    }
    for (std::size_t c = 0; c < g.W.size(); ++c) {
        for (std::size_t d = 0; d < g.W[c].size(); ++d) g.W[c][d] += l2 * m.W[c][d];
    }
    return g;
}

DenseModel oracle_gd(DenseModel m, const LabeledDataset& data, double lr, int steps, double l2) {
    for (int s = 0; s < steps; ++s) {
        const auto g = oracle_gradient(m, data, l2);
        for (std::size_t c = 0; c < m.W.size(); ++c) {
            for (std::size_t d = 0; d < m.W[c].size(); ++d) m.W[c][d] -= lr * g.W[c][d];
            m.b[c] -= lr * g.b[c];
        }
    }
    return m;
}

double oracle_accuracy(const DenseModel& m, const LabeledDataset& data) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto p = probabilities(m, data.row(i));
        const auto best = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
        hits += best == data.y[i];
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

std::vector<double> finite_difference(const std::function<double(const std::vector<double>&)>& f,
                                      std::vector<double> x, double h) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = f(x);
        x[i] = keep - h;
        const double down = f(x);
        x[i] = keep;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

double rel_diff(double a, double b, double floor) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

bool oracle_rule_allows(const json& catalog, std::string_view task, std::string_view outcome_category,
                        std::string_view predictor_category) {
    for (const auto& r : catalog.at("role_rules")) {
        if (r.at("task_kind") == task && r.at("outcome_category") == outcome_category &&
            r.at("predictor_category") == predictor_category) {
            return r.at("allowed").get<bool>();
        }
    }
    return false;
}

bool oracle_has_cycle(const std::map<std::string, std::vector<std::string>>& parents) {
    std::map<std::string, int> indegree;
    std::map<std::string, std::vector<std::string>> children;
    for (const auto& [node, ps] : parents) {
        indegree.try_emplace(node, 0);
        for (const auto& p : ps) {
            indegree.try_emplace(p, 0);
            ++indegree[node];
            children[p].push_back(node);
        }
    }
    std::deque<std::string> ready;
    for (const auto& [node, deg] : indegree) {
        if (deg == 0) ready.push_back(node);
    }
    std::size_t seen = 0;
    while (!ready.empty()) {
        const auto n = ready.front();
        ready.pop_front();
        ++seen;
        for (const auto& c : children[n]) {
            if (--indegree[c] == 0) ready.push_back(c);
        }
    }
    return seen != indegree.size();
}

namespace {

struct Hop {
    double factor;
    double offset;
    bool inverse;
};

void all_paths(const json& conversions, const std::string& at, const std::string& to, std::set<std::string>& visited,
               std::vector<Hop>& current, std::optional<std::vector<Hop>>& best) {
    if (at == to) {
        if (!best || current.size() < best->size()) best = current;
        return;
    }
    for (const auto& c : conversions) {
        const auto from = c.at("from").get<std::string>();
        const auto dest = c.at("to").get<std::string>();
        const double f = c.at("factor").get<double>();
        const double o = c.value("offset", 0.0);
        for (const bool inverse : {false, true}) {
            const auto& src = inverse ? dest : from;
            const auto& dst = inverse ? from : dest;
            if (src != at || visited.contains(dst)) continue;
            visited.insert(dst);
            current.push_back({f, o, inverse});
            all_paths(conversions, dst, to, visited, current, best);
            current.pop_back();
            visited.erase(dst);
        }
    }
}

std::optional<std::string> dimension_of(const json& units, const std::string& code) {
    for (const auto& u : units.at("units")) {
        if (u.at("code") == code) return u.at("dimension").get<std::string>();
    }
    return std::nullopt;
}

}  // namespace

std::optional<double> oracle_convert(const json& units, const std::string& from, const std::string& to, double x) {
    const auto df = dimension_of(units, from);
    const auto dt = dimension_of(units, to);
    if (!df || !dt || *df != *dt) return std::nullopt;
    if (from == to) return x;
    std::set<std::string> visited{from};
    std::vector<Hop> current;
    std::optional<std::vector<Hop>> best;
    all_paths(units.at("conversions"), from, to, visited, current, best);
    if (!best) return std::nullopt;
    for (const auto& h : *best) x = h.inverse ? (x - h.offset) / h.factor : h.factor * x + h.offset;
    return x;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char ch = text[i];
        if (quoted) {
            if (ch == '"' && i + 1 < text.size() && text[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                field += ch;
            }
            continue;
        }
        any = true;
        if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            row.push_back(std::move(field));
            field.clear();
        } else if (ch == '\n' || ch == '\r') {
            if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            row.push_back(std::move(field));
            field.clear();
            rows.push_back(std::move(row));
            row.clear();
            any = false;
        } else {
            field += ch;
        }
    }
    if (any || !field.empty() || !row.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::multiset<std::string> oracle_availability(const ModelDocument& doc, const json& site, const json& units,
                                               std::uint64_t k_min) {
    std::multiset<std::string> out;
    const auto& mappings = site.at("mappings");
    const auto counts = site.value("record_count", json::object());
    for (std::size_t i = 0; i < doc.data_elements.size(); ++i) {
        const auto& e = doc.data_elements[i];
        const auto path = "/data_elements/" + std::to_string(i);
        if (!mappings.contains(e.concept_uri)) {
            out.insert("AVAIL_MISSING " + path);
            continue;
        }
        const auto& m = mappings.at(e.concept_uri);
        if (m.at("datatype").get<std::string>() != enum_name(e.expected_datatype)) out.insert("AVAIL_TYPE " + path);
        const std::uint64_t n = counts.value(e.concept_uri, std::uint64_t{0});
        if (n < k_min) out.insert("AVAIL_COUNT " + path);
        if (e.expected_datatype != DataType::numeric || !e.expected_unit) continue;
        if (!m.contains("unit")) {
            out.insert("AVAIL_UNIT " + path);
            continue;
        }
        if (!oracle_convert(units, m.at("unit").get<std::string>(), *e.expected_unit, 1.0)) {
            out.insert("AVAIL_UNIT " + path);
        }
    }
    return out;
}

bool pointer_resolves(const json& doc, const std::string& pointer) {
    try {
        (void)doc.at(json::json_pointer(pointer));
        return true;
    } catch (const json::exception&) {
        return false;
    }
}

}  // namespace mila::test
