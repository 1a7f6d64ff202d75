#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "volume.hpp"

namespace uafuse {

/// Dice overlap 2|P n T| / (|P| + |T|) for one class; 1.0 when both masks
/// are empty.
inline double dice(const GridI& pred, const GridI& truth, std::int32_t cls) {
    if (pred.dims != truth.dims) throw std::invalid_argument("dice: grids have different dims");
    std::int64_t p = 0, t = 0, both = 0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const bool in_p = pred.data[i] == cls;
        const bool in_t = truth.data[i] == cls;
        p += in_p;
        t += in_t;
        both += in_p && in_t;
    }
    if (p + t == 0) return 1.0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(p + t);
}

struct DiceReport {
    std::vector<double> per_class; // foreground classes 1..C-1
    double mean_foreground = 0.0;
};

inline DiceReport dice_report(const GridI& pred, const GridI& truth, int num_classes) {
    DiceReport r;
    double sum = 0;
    for (std::int32_t cls = 1; cls < num_classes; ++cls) {
        r.per_class.push_back(dice(pred, truth, cls));
        sum += r.per_class.back();
    }
    r.mean_foreground = r.per_class.empty() ? 0.0 : sum / static_cast<double>(r.per_class.size());
    return r;
}

} // namespace uafuse
