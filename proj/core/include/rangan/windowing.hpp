#pragma once

#include <cstdint>
#include <vector>

#include "rangan/frame.hpp"

namespace rangan {

/// Overlapping fixed-length segments of a KpiFrame. Window i covers source
/// rows [origin_index[i], origin_index[i] + window_size) and is stored
/// flattened (row-major w x F) at row i of `windows`. A window is labeled
/// anomalous iff any source row in its range is.
struct WindowSet {
    int window_size = 0;
    int stride = 1;
    std::size_t feature_count = 0;
    std::vector<double> windows;             // N x (w * F), row-major
    std::vector<std::uint8_t> window_labels; // N
    std::vector<std::size_t> origin_index;   // N

    std::size_t count() const { return origin_index.size(); }
    std::size_t window_len() const {
        return static_cast<std::size_t>(window_size) * feature_count;
    }
    const double* window(std::size_t i) const { return windows.data() + i * window_len(); }
};

/// Fig-1 style sliding segmentation: N = floor((T - w) / s) + 1 when T >= w,
/// else an empty set. The trailing remainder shorter than w is dropped.
WindowSet slide(const KpiFrame& frame, int window_size, int stride);

}  // namespace rangan
