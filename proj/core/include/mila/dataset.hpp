#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace mila {

/// Post-preprocessing feature matrix owned by one site.
struct LabeledDataset {
    std::string site_id;
    std::size_t dims = 0;       // D
    std::vector<double> x;      // n x D, row-major
    std::vector<int> y;         // labels in [0, C)

    std::size_t size() const { return y.size(); }
    const double* row(std::size_t i) const { return x.data() + i * dims; }
    void push_back(const std::vector<double>& features, int label) {
        x.insert(x.end(), features.begin(), features.end());
        y.push_back(label);
    }
};

/// Row-wise concatenation; every part must share `dims`.
LabeledDataset concatenate(const std::vector<const LabeledDataset*>& parts, std::string site_id = "pooled");

}  // namespace mila
