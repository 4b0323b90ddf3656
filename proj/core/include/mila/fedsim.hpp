#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mila/dataset.hpp"
#include "mila/plan.hpp"

namespace mila {

/// Multinomial logistic regression parameters: logits = W x + b.
struct Weights {
    std::size_t classes = 0;   // C
    std::size_t dims = 0;      // D
    std::vector<double> w;     // C x D, row-major
    std::vector<double> b;     // C

    Weights() = default;
    Weights(std::size_t c, std::size_t d) : classes(c), dims(d), w(c * d, 0.0), b(c, 0.0) {}

    double& at(std::size_t c, std::size_t d) { return w[c * dims + d]; }
    double at(std::size_t c, std::size_t d) const { return w[c * dims + d]; }

    /// W row-major, then b.
    std::vector<double> flat() const;
    static Weights from_flat(std::size_t c, std::size_t d, std::span<const double> values);
    bool finite() const;
    std::string hash() const;

    bool operator==(const Weights&) const = default;
};

nlohmann::json to_json(const Weights& w);
Weights weights_from_json(const nlohmann::json& j);

enum class InitScheme : std::uint8_t { zeros, uniform };

struct InitSpec {
    InitScheme scheme = InitScheme::zeros;
    double a = 0.0;  // uniform bound
};

Weights init_global(std::size_t dims, std::size_t classes, std::uint64_t seed, InitSpec spec = {});

/// Mean softmax cross-entropy over the samples plus (l2/2)||W||^2; the
/// bias is not regularized.
double loss(const Weights& w, const LabeledDataset& data, double l2);
/// Analytic gradient of `loss`, same layout as the weights.
Weights gradient(const Weights& w, const LabeledDataset& data, double l2);

struct ClientUpdate {
    std::string site_id;
    std::uint64_t n_samples = 0;
    Weights weights;
    double local_loss = 0.0;
};

/// E full-batch gradient steps from w0. Throws Error(FS_DIM_MISMATCH) and
/// Error(FS_NONFINITE).
ClientUpdate local_train(const Weights& w0, const LabeledDataset& data, double learning_rate,
                         std::uint32_t epochs, double l2);

/// Sample-count-weighted mean of the client weights, summed in site_id
/// order. Throws Error(FS_EMPTY | FS_DIM_MISMATCH | FS_DUP_SITE).
Weights aggregate(std::span<const ClientUpdate> updates);

struct Metrics {
    std::size_t classes = 0;
    std::vector<std::uint64_t> confusion;  // C x C, row = actual, column = predicted
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    double weighted_f1 = 0.0;
    std::vector<double> precision;
    std::vector<double> recall;

    std::uint64_t total() const;
};

/// Derives every score from a confusion matrix. Classes with neither
/// actual nor predicted samples are left out of the macro mean.
Metrics metrics_from_confusion(std::size_t classes, std::vector<std::uint64_t> confusion);
/// Predictions are the argmax of the logits (lowest index on ties).
Metrics evaluate(const Weights& w, const LabeledDataset& data);
std::vector<int> predict(const Weights& w, const LabeledDataset& data);

nlohmann::json to_json(const Metrics& m);

struct SyntheticSpec {
    std::vector<std::string> sites;
    std::vector<std::size_t> samples_per_site;  // one entry per site
    std::size_t dims = 2;
    std::size_t classes = 2;
    std::vector<double> class_skew;  // per site in [0,1]; empty means 0 everywhere
    /// Distance from each class centre to the pairwise decision boundary, in sigma.
    double margin = 4.0;
    std::size_t test_samples = 400;
};

struct SyntheticData {
    std::map<std::string, LabeledDataset> sites;
    LabeledDataset test;
};

/// Gaussian blobs with unit variance centred at margin*sqrt(2)*e_c. Site k
/// draws labels from (1-s) * uniform + s * onehot(k mod C); counts are
/// apportioned by largest remainder. Requires classes <= dims.
SyntheticData gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

/// Label histogram of a dataset, used by tests and reports.
std::vector<std::size_t> label_counts(const LabeledDataset& data, std::size_t classes);

/// Centralized full-batch GD on one dataset: the oracle the federated
/// session is compared with.
Weights train_centralized(Weights w, const LabeledDataset& data, double learning_rate, std::uint32_t steps,
                          double l2);

struct RoundLog {
    std::string experiment_id;
    std::string model_id;
    std::string plan_hash;
    std::uint32_t round = 0;
    std::vector<std::string> site_ids;
    std::map<std::string, double> losses;
    std::map<std::string, Metrics> site_metrics;
    Metrics global_metrics;
    std::string prev_global_hash;
    std::string global_weights_hash;
};

nlohmann::json to_json(const RoundLog& r);

struct SessionLog {
    std::string experiment_id;
    std::vector<RoundLog> rounds;
    Weights initial;
    Weights final_weights;

    /// One JSON object per round, newline separated.
    std::string jsonl() const;
    std::string hash() const;
};

struct SessionOptions {
    InitSpec init{};
    /// Run each round's client work on separate threads.
    bool parallel = false;
    /// Shuffle the order in which clients are contacted each round.
    std::optional<std::uint64_t> schedule_seed;
    /// Records what crossed into the coordinator, for privacy checks.
    std::vector<std::string>* coordinator_trace = nullptr;
};

std::string experiment_id(const std::string& model_id, const std::string& plan_hash, std::uint64_t seed);

/// Synchronous FedAvg over the plan's sites. Raw rows stay with the
/// clients; the coordinator only sees weights, sample counts and
/// confusion matrices. Throws Error(FS_NOT_EXECUTABLE | FS_INSUFFICIENT_DATA
/// | FS_DIM_MISMATCH | FS_NONFINITE).
SessionLog run_session(const Plan& plan, const std::map<std::string, LabeledDataset>& site_data,
                       const SessionOptions& options = {});

}  // namespace mila
