#include "mila/dataset.hpp"

#include "mila/diagnostic.hpp"

namespace mila {

LabeledDataset concatenate(const std::vector<const LabeledDataset*>& parts, std::string site_id) {
    LabeledDataset out;
    out.site_id = std::move(site_id);
    if (parts.empty()) return out;
    out.dims = parts.front()->dims;
    for (const auto* p : parts) {
        if (p->dims != out.dims) throw Error("FS_DIM_MISMATCH", "cannot concatenate datasets of different width");
        out.x.insert(out.x.end(), p->x.begin(), p->x.end());
        out.y.insert(out.y.end(), p->y.begin(), p->y.end());
    }
    return out;
}

}  // namespace mila
