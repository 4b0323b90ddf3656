#include "mila/fedsim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "mila/digest.hpp"

namespace mila {

using nlohmann::json;

namespace {

void require_dims(const Weights& w, const LabeledDataset& data) {
    if (data.dims != w.dims) {
        throw Error("FS_DIM_MISMATCH", "site " + data.site_id + " has " + std::to_string(data.dims) +
                                           " features, weights expect " + std::to_string(w.dims));
    }
    if (data.x.size() != data.size() * data.dims) throw Error("FS_DIM_MISMATCH", "feature matrix is ragged");
    for (int y : data.y) {
        if (y < 0 || static_cast<std::size_t>(y) >= w.classes) {
            throw Error("FS_DIM_MISMATCH", "label " + std::to_string(y) + " outside [0, C)");
        }
    }
}

/// Softmax probabilities for one sample into `p`; returns log-sum-exp.
double softmax(const Weights& w, const double* x, std::vector<double>& p) {
    p.resize(w.classes);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < w.classes; ++c) {
        double z = w.b[c];
        for (std::size_t d = 0; d < w.dims; ++d) z += w.at(c, d) * x[d];
        p[c] = z;
        top = std::max(top, z);
    }
    double sum = 0.0;
    for (auto& z : p) {
        z = std::exp(z - top);
        sum += z;
    }
    for (auto& z : p) z /= sum;
    return top + std::log(sum);
}

double squared_norm(const std::vector<double>& v) {
    return std::inner_product(v.begin(), v.end(), v.begin(), 0.0);
}

std::vector<std::size_t> apportion(std::size_t n, const std::vector<double>& proportions) {
    std::vector<std::size_t> counts(proportions.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < proportions.size(); ++c) {
        const double exact = proportions[c] * static_cast<double>(n);
        counts[c] = static_cast<std::size_t>(std::floor(exact));
        assigned += counts[c];
        remainders.emplace_back(exact - std::floor(exact), c);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++counts[remainders[i % remainders.size()].second];
    return counts;
}

LabeledDataset draw_blobs(const std::string& site_id, const std::vector<std::size_t>& counts, std::size_t dims,
                          double centre, std::mt19937_64& rng) {
    std::normal_distribution<double> noise(0.0, 1.0);
    LabeledDataset out;
    out.site_id = site_id;
    out.dims = dims;
    std::vector<int> labels;
    for (std::size_t c = 0; c < counts.size(); ++c) labels.insert(labels.end(), counts[c], static_cast<int>(c));
    std::shuffle(labels.begin(), labels.end(), rng);
    std::vector<double> x(dims);
    for (int label : labels) {
        for (std::size_t d = 0; d < dims; ++d) {
            x[d] = noise(rng) + (d == static_cast<std::size_t>(label) ? centre : 0.0);
        }
        out.push_back(x, label);
    }
    return out;
}

/// A site as seen by the simulation: owns its rows and answers requests
/// with parameters or aggregate counts only.
class Client {
public:
    Client(const LabeledDataset& data, const TrainingConfig& config) : data_(data), config_(config) {}

    const std::string& site_id() const { return data_.site_id; }

    ClientUpdate train(const Weights& global) const {
        return local_train(global, data_, config_.learning_rate, config_.local_epochs, config_.l2);
    }

    std::vector<std::uint64_t> confusion(const Weights& global) const { return evaluate(global, data_).confusion; }

private:
    const LabeledDataset& data_;
    const TrainingConfig& config_;
};

class Coordinator {
public:
    Coordinator(Weights initial, std::string experiment_id, std::string model_id, std::string plan_hash,
                std::vector<std::string>* trace)
        : global_(std::move(initial)),
          experiment_id_(std::move(experiment_id)),
          model_id_(std::move(model_id)),
          plan_hash_(std::move(plan_hash)),
          trace_(trace) {}

    const Weights& global() const { return global_; }

    void receive(ClientUpdate u) {
        if (trace_) {
            trace_->push_back(json{{"site_id", u.site_id},
                                   {"n_samples", u.n_samples},
                                   {"local_loss", u.local_loss},
                                   {"weights", u.weights.flat()}}
                                  .dump());
        }
        updates_.push_back(std::move(u));
    }

    void commit(std::uint32_t round) {
        const std::string prev = global_.hash();
        global_ = aggregate(updates_);
        current_ = RoundLog{};
        current_.experiment_id = experiment_id_;
        current_.model_id = model_id_;
        current_.plan_hash = plan_hash_;
        current_.round = round;
        current_.prev_global_hash = prev;
        current_.global_weights_hash = global_.hash();
        for (const auto& u : updates_) current_.losses[u.site_id] = u.local_loss;
        updates_.clear();
    }

    void receive_confusion(const std::string& site_id, std::vector<std::uint64_t> confusion) {
        if (trace_) trace_->push_back(json{{"site_id", site_id}, {"confusion", confusion}}.dump());
        current_.site_metrics[site_id] = metrics_from_confusion(global_.classes, std::move(confusion));
    }

    RoundLog finish_round() {
        std::vector<std::uint64_t> pooled(global_.classes * global_.classes, 0);
        for (const auto& [site, m] : current_.site_metrics) {
            current_.site_ids.push_back(site);
            for (std::size_t i = 0; i < pooled.size(); ++i) pooled[i] += m.confusion[i];
        }
        current_.global_metrics = metrics_from_confusion(global_.classes, std::move(pooled));
        return std::move(current_);
    }

private:
    Weights global_;
    std::string experiment_id_;
    std::string model_id_;
    std::string plan_hash_;
    std::vector<std::string>* trace_;
    std::vector<ClientUpdate> updates_;
    RoundLog current_;
};

}  // namespace

std::vector<double> Weights::flat() const {
    std::vector<double> out(w);
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

Weights Weights::from_flat(std::size_t c, std::size_t d, std::span<const double> values) {
    if (values.size() != c * d + c) throw Error("FS_DIM_MISMATCH", "flat weight vector has the wrong length");
    Weights out(c, d);
    std::copy(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(c * d), out.w.begin());
    std::copy(values.begin() + static_cast<std::ptrdiff_t>(c * d), values.end(), out.b.begin());
    return out;
}

bool Weights::finite() const {
    auto ok = [](double v) { return std::isfinite(v); };
    return std::all_of(w.begin(), w.end(), ok) && std::all_of(b.begin(), b.end(), ok);
}

std::string Weights::hash() const {
    const auto values = flat();
    return sha256_hex(std::span<const double>(values));
}

json to_json(const Weights& w) { return {{"classes", w.classes}, {"dims", w.dims}, {"values", w.flat()}}; }

Weights weights_from_json(const json& j) {
    const auto values = j.at("values").get<std::vector<double>>();
    return Weights::from_flat(j.at("classes").get<std::size_t>(), j.at("dims").get<std::size_t>(), values);
}

Weights init_global(std::size_t dims, std::size_t classes, std::uint64_t seed, InitSpec spec) {
    Weights out(classes, dims);
    if (spec.scheme == InitScheme::zeros) return out;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-spec.a, spec.a);
    for (auto& v : out.w) v = u(rng);
    for (auto& v : out.b) v = u(rng);
    return out;
}

double loss(const Weights& w, const LabeledDataset& data, double l2) {
    require_dims(w, data);
    std::vector<double> p;
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double lse = softmax(w, data.row(i), p);
        double z = w.b[data.y[i]];
        for (std::size_t d = 0; d < w.dims; ++d) z += w.at(data.y[i], d) * data.row(i)[d];
        total += lse - z;
    }
    const double n = static_cast<double>(std::max<std::size_t>(data.size(), 1));
    return total / n + 0.5 * l2 * squared_norm(w.w);
}

Weights gradient(const Weights& w, const LabeledDataset& data, double l2) {
    require_dims(w, data);
    Weights g(w.classes, w.dims);
    std::vector<double> p;
    for (std::size_t i = 0; i < data.size(); ++i) {
        softmax(w, data.row(i), p);
        p[data.y[i]] -= 1.0;
        const double* x = data.row(i);
        for (std::size_t c = 0; c < w.classes; ++c) {
            for (std::size_t d = 0; d < w.dims; ++d) g.at(c, d) += p[c] * x[d];
            g.b[c] += p[c];
        }
    }
    const double n = static_cast<double>(std::max<std::size_t>(data.size(), 1));
    for (std::size_t k = 0; k < g.w.size(); ++k) g.w[k] = g.w[k] / n + l2 * w.w[k];
    for (auto& v : g.b) v /= n;
    return g;
}

ClientUpdate local_train(const Weights& w0, const LabeledDataset& data, double learning_rate, std::uint32_t epochs,
                         double l2) {
    require_dims(w0, data);
    Weights w = w0;
    for (std::uint32_t e = 0; e < epochs; ++e) {
        const Weights g = gradient(w, data, l2);
        for (std::size_t k = 0; k < w.w.size(); ++k) w.w[k] -= learning_rate * g.w[k];
        for (std::size_t k = 0; k < w.b.size(); ++k) w.b[k] -= learning_rate * g.b[k];
        if (!w.finite()) {
            throw Error("FS_NONFINITE", "site " + data.site_id + " diverged at epoch " + std::to_string(e + 1));
        }
    }
    ClientUpdate u{data.site_id, data.size(), std::move(w), 0.0};
    u.local_loss = loss(u.weights, data, l2);
    if (!std::isfinite(u.local_loss)) throw Error("FS_NONFINITE", "site " + data.site_id + " produced a non-finite loss");
    return u;
}

Weights aggregate(std::span<const ClientUpdate> updates) {
    if (updates.empty()) throw Error("FS_EMPTY", "no client updates to aggregate");
    std::vector<const ClientUpdate*> sorted;
    for (const auto& u : updates) sorted.push_back(&u);
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->site_id < b->site_id; });
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        if (sorted[i]->site_id == sorted[i - 1]->site_id) {
            throw Error("FS_DUP_SITE", "two updates from site " + sorted[i]->site_id);
        }
    }
    const auto& first = sorted.front()->weights;
    std::uint64_t total = 0;
    for (const auto* u : sorted) {
        if (u->weights.classes != first.classes || u->weights.dims != first.dims) {
            throw Error("FS_DIM_MISMATCH", "update from " + u->site_id + " has different dimensions");
        }
        total += u->n_samples;
    }
    if (total == 0) throw Error("FS_EMPTY", "updates carry no samples");

    const std::size_t len = first.w.size() + first.b.size();
    std::vector<double> sum(len, 0.0);
    std::vector<double> lo(len, std::numeric_limits<double>::infinity());
    std::vector<double> hi(len, -std::numeric_limits<double>::infinity());
    for (const auto* u : sorted) {
        const double weight = static_cast<double>(u->n_samples) / static_cast<double>(total);
        const auto values = u->weights.flat();
        for (std::size_t k = 0; k < len; ++k) {
            sum[k] += weight * values[k];
            lo[k] = std::min(lo[k], values[k]);
            hi[k] = std::max(hi[k], values[k]);
        }
    }
    // Rounding can push a convex combination a hair outside its inputs.
    for (std::size_t k = 0; k < len; ++k) sum[k] = std::clamp(sum[k], lo[k], hi[k]);
    return Weights::from_flat(first.classes, first.dims, sum);
}

std::uint64_t Metrics::total() const { return std::accumulate(confusion.begin(), confusion.end(), std::uint64_t{0}); }

Metrics metrics_from_confusion(std::size_t classes, std::vector<std::uint64_t> confusion) {
    Metrics m;
    m.classes = classes;
    m.confusion = std::move(confusion);
    m.precision.assign(classes, 0.0);
    m.recall.assign(classes, 0.0);
    const std::uint64_t total = m.total();
    std::uint64_t correct = 0;
    double f1_sum = 0.0;
    double weighted = 0.0;
    std::size_t counted = 0;
    for (std::size_t c = 0; c < classes; ++c) {
        std::uint64_t actual = 0;
        std::uint64_t predicted = 0;
        for (std::size_t k = 0; k < classes; ++k) {
            actual += m.confusion[c * classes + k];
            predicted += m.confusion[k * classes + c];
        }
        const std::uint64_t tp = m.confusion[c * classes + c];
        correct += tp;
        m.precision[c] = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
        m.recall[c] = actual ? static_cast<double>(tp) / static_cast<double>(actual) : 0.0;
        const double pr = m.precision[c] + m.recall[c];
        const double f1 = pr > 0.0 ? 2.0 * m.precision[c] * m.recall[c] / pr : 0.0;
        if (actual == 0 && predicted == 0) continue;
        f1_sum += f1;
        weighted += f1 * static_cast<double>(actual);
        ++counted;
    }
    m.accuracy = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
    m.macro_f1 = counted ? f1_sum / static_cast<double>(counted) : 0.0;
    m.weighted_f1 = total ? weighted / static_cast<double>(total) : 0.0;
    return m;
}

std::vector<int> predict(const Weights& w, const LabeledDataset& data) {
    require_dims(w, data);
    std::vector<int> out;
    out.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        std::size_t best = 0;
        double best_z = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < w.classes; ++c) {
            double z = w.b[c];
            for (std::size_t d = 0; d < w.dims; ++d) z += w.at(c, d) * data.row(i)[d];
            if (z > best_z) {
                best_z = z;
                best = c;
            }
        }
        out.push_back(static_cast<int>(best));
    }
    return out;
}

Metrics evaluate(const Weights& w, const LabeledDataset& data) {
    const auto pred = predict(w, data);
    std::vector<std::uint64_t> confusion(w.classes * w.classes, 0);
    for (std::size_t i = 0; i < pred.size(); ++i) ++confusion[static_cast<std::size_t>(data.y[i]) * w.classes + pred[i]];
    return metrics_from_confusion(w.classes, std::move(confusion));
}

json to_json(const Metrics& m) {
    return {{"accuracy", m.accuracy},   {"macro_f1", m.macro_f1}, {"weighted_f1", m.weighted_f1},
            {"precision", m.precision}, {"recall", m.recall},     {"confusion", m.confusion}};
}

SyntheticData gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
    if (spec.classes < 2 || spec.classes > spec.dims) {
        throw Error("FS_DIM_MISMATCH", "synthetic blobs need 2 <= classes <= dims");
    }
    if (spec.samples_per_site.size() != spec.sites.size()) {
        throw Error("FS_DIM_MISMATCH", "samples_per_site must list one count per site");
    }
    std::mt19937_64 rng(seed);
    const double centre = spec.margin * std::sqrt(2.0);
    const std::vector<double> uniform(spec.classes, 1.0 / static_cast<double>(spec.classes));

    SyntheticData out;
    for (std::size_t k = 0; k < spec.sites.size(); ++k) {
        const double s = k < spec.class_skew.size() ? spec.class_skew[k] : 0.0;
        std::vector<double> p(spec.classes);
        for (std::size_t c = 0; c < spec.classes; ++c) p[c] = (1.0 - s) * uniform[c] + (c == k % spec.classes ? s : 0.0);
        out.sites.emplace(spec.sites[k],
                          draw_blobs(spec.sites[k], apportion(spec.samples_per_site[k], p), spec.dims, centre, rng));
    }
    out.test = draw_blobs("test", apportion(spec.test_samples, uniform), spec.dims, centre, rng);
    return out;
}

std::vector<std::size_t> label_counts(const LabeledDataset& data, std::size_t classes) {
    std::vector<std::size_t> counts(classes, 0);
    for (int y : data.y) ++counts[static_cast<std::size_t>(y)];
    return counts;
}

Weights train_centralized(Weights w, const LabeledDataset& data, double learning_rate, std::uint32_t steps,
                          double l2) {
    for (std::uint32_t s = 0; s < steps; ++s) {
        const Weights g = gradient(w, data, l2);
        for (std::size_t k = 0; k < w.w.size(); ++k) w.w[k] -= learning_rate * g.w[k];
        for (std::size_t k = 0; k < w.b.size(); ++k) w.b[k] -= learning_rate * g.b[k];
    }
    return w;
}

json to_json(const RoundLog& r) {
    json losses = json::object();
    for (const auto& [s, l] : r.losses) losses[s] = l;
    json sites = json::object();
    for (const auto& [s, m] : r.site_metrics) sites[s] = to_json(m);
    return {{"experiment_id", r.experiment_id},
            {"model_id", r.model_id},
            {"plan_hash", r.plan_hash},
            {"round", r.round},
            {"site_ids", r.site_ids},
            {"losses", losses},
            {"metrics", {{"sites", sites}, {"global", to_json(r.global_metrics)}}},
            {"prev_global_hash", r.prev_global_hash},
            {"global_weights_hash", r.global_weights_hash}};
}

std::string SessionLog::jsonl() const {
    std::string out;
    for (const auto& r : rounds) out += to_json(r).dump() + "\n";
    return out;
}

std::string SessionLog::hash() const { return sha256_hex(jsonl()); }

std::string experiment_id(const std::string& model_id, const std::string& plan_hash, std::uint64_t seed) {
    return model_id + "-" + plan_hash.substr(0, 12) + "-" + std::to_string(seed);
}

SessionLog run_session(const Plan& plan, const std::map<std::string, LabeledDataset>& site_data,
                       const SessionOptions& options) {
    const auto& tc = plan.training;
    if (!tc.executable) {
        throw Error("FS_NOT_EXECUTABLE",
                    "algorithm " + std::string(enum_name(tc.algorithm_tag)) + " has no in-process trainer");
    }
    std::vector<Client> clients;
    for (const auto& site : plan.federation.sites) {
        auto it = site_data.find(site);
        if (it == site_data.end() || it->second.size() < plan.federation.min_local_instances) {
            const auto n = it == site_data.end() ? 0 : it->second.size();
            throw Error("FS_INSUFFICIENT_DATA", "site " + site + " holds " + std::to_string(n) + " usable rows, needs " +
                                                    std::to_string(plan.federation.min_local_instances));
        }
        if (it->second.dims != tc.num_features) {
            throw Error("FS_DIM_MISMATCH", "site " + site + " data does not match the plan's feature layout");
        }
        clients.emplace_back(it->second, tc);
    }

    const auto hash = plan_hash(plan);
    SessionLog log;
    log.experiment_id = experiment_id(plan.model_id, hash, plan.federation.seed);
    log.initial = init_global(tc.num_features, tc.num_classes, plan.federation.seed, options.init);
    Coordinator coordinator(log.initial, log.experiment_id, plan.model_id, hash, options.coordinator_trace);

    std::vector<std::size_t> order(clients.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 schedule(options.schedule_seed.value_or(0));

    for (std::uint32_t t = 1; t <= plan.federation.rounds; ++t) {
        if (options.schedule_seed) std::shuffle(order.begin(), order.end(), schedule);
        const Weights broadcast = coordinator.global();

        std::vector<std::optional<ClientUpdate>> updates(clients.size());
        std::vector<std::exception_ptr> failures(clients.size());
        auto work = [&](std::size_t i) {
            try {
                updates[i] = clients[i].train(broadcast);
            } catch (...) {
                failures[i] = std::current_exception();
            }
        };
        if (options.parallel) {
            std::vector<std::jthread> threads;
            for (std::size_t i : order) threads.emplace_back(work, i);
        } else {
            for (std::size_t i : order) work(i);
        }
        for (std::size_t i : order) {
            if (failures[i]) std::rethrow_exception(failures[i]);
            coordinator.receive(std::move(*updates[i]));
        }
        coordinator.commit(t);

        for (std::size_t i : order) coordinator.receive_confusion(clients[i].site_id(), clients[i].confusion(coordinator.global()));
        log.rounds.push_back(coordinator.finish_round());
    }
    log.final_weights = coordinator.global();
    return log;
}

}  // namespace mila
