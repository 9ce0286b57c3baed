#include "rangan/windowing.hpp"

namespace rangan {

WindowSet slide(const KpiFrame& frame, int window_size, int stride) {
    if (window_size < 1) throw ContractError("slide: window_size must be >= 1");
    if (stride < 1) throw ContractError("slide: stride must be >= 1");
    frame.validate();

    WindowSet set;
    set.window_size = window_size;
    set.stride = stride;
    set.feature_count = frame.feature_count();

    const std::size_t t = frame.size();
    const std::size_t w = static_cast<std::size_t>(window_size);
    if (t < w) return set;  // too short: empty set, not an error

    const std::size_t s = static_cast<std::size_t>(stride);
    const std::size_t n = (t - w) / s + 1;
    const std::size_t f = set.feature_count;
    set.windows.reserve(n * w * f);
    set.window_labels.reserve(n);
    set.origin_index.reserve(n);

    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t origin = i * s;
        set.origin_index.push_back(origin);
        const double* row = frame.features.data() + origin * f;
        set.windows.insert(set.windows.end(), row, row + w * f);
        std::uint8_t label = 0;
        if (frame.has_labels()) {
            for (std::size_t r = origin; r < origin + w; ++r)
                if (frame.labels[r]) {
                    label = 1;
                    break;
                }
        }
        set.window_labels.push_back(label);
    }
    return set;
}

}  // namespace rangan
