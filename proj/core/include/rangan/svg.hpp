#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace rangan {

/// Standalone SVG 1.1 line chart of per-window anomaly scores: one polyline
/// over the window index, one shaded rect per maximal run of anomalous
/// windows, and a dashed threshold line. Throws ContractError on an empty
/// trace or mismatched label length.
std::string render_score_svg(std::span<const double> scores,
                             std::span<const std::uint8_t> labels, double threshold);

}  // namespace rangan
