#include "rangan/frame.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace rangan {
namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    cells.push_back(cur);
    return cells;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

}  // namespace

void KpiFrame::validate() const {
    const std::size_t t = timestamps.size();
    const std::size_t f = feature_names.size();
    if (features.size() != t * f)
        throw ContractError("KpiFrame: features size " + std::to_string(features.size()) +
                            " != T*F = " + std::to_string(t * f));
    if (!labels.empty() && labels.size() != t)
        throw ContractError("KpiFrame: labels length != T");
    for (std::uint8_t l : labels)
        if (l > 1) throw ContractError("KpiFrame: labels must be 0 or 1");
    for (std::size_t i = 1; i < t; ++i)
        if (timestamps[i] <= timestamps[i - 1])
            throw ContractError("KpiFrame: timestamps must be strictly increasing");
}

KpiFrame KpiFrame::select(const std::vector<std::string>& names) const {
    KpiFrame out;
    out.timestamps = timestamps;
    out.labels = labels;
    out.feature_names = names;
    std::vector<std::size_t> idx;
    for (const auto& n : names) {
        auto it = std::find(feature_names.begin(), feature_names.end(), n);
        if (it == feature_names.end())
            throw ConfigError("kpi include-list names unknown feature '" + n + "'");
        idx.push_back(static_cast<std::size_t>(it - feature_names.begin()));
    }
    out.features.resize(size() * names.size());
    for (std::size_t t = 0; t < size(); ++t)
        for (std::size_t j = 0; j < idx.size(); ++j)
            out.features[t * names.size() + j] = at(t, idx[j]);
    return out;
}

KpiFrame load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");

    std::string line;
    long lineno = 0;
    if (!std::getline(in, line)) throw ParseError("empty file '" + path + "'", 1);
    ++lineno;
    auto header = split_line(line);
    if (header.empty() || trim(header[0]) != "timestamp")
        throw ParseError("first column must be 'timestamp'", lineno);
    const bool labeled = header.size() >= 2 && trim(header.back()) == "label";
    const std::size_t f = header.size() - 1 - (labeled ? 1 : 0);
    if (f == 0) throw ParseError("no KPI columns", lineno);

    KpiFrame frame;
    for (std::size_t i = 1; i <= f; ++i) frame.feature_names.push_back(trim(header[i]));

    std::vector<double> prev_row(f, 0.0);
    bool have_prev = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto cells = split_line(line);
        if (cells.size() != header.size())
            throw ParseError("expected " + std::to_string(header.size()) + " cells, got " +
                                 std::to_string(cells.size()),
                             lineno);
        const std::string ts = trim(cells[0]);
        std::int64_t t = 0;
        auto [p, ec] = std::from_chars(ts.data(), ts.data() + ts.size(), t);
        if (ec != std::errc{} || p != ts.data() + ts.size())
            throw ParseError("non-integer timestamp '" + ts + "'", lineno);
        if (!frame.timestamps.empty() && t <= frame.timestamps.back())
            throw ParseError("timestamps not strictly increasing at " + std::to_string(t), lineno);
        frame.timestamps.push_back(t);

        for (std::size_t i = 0; i < f; ++i) {
            const std::string cell = trim(cells[i + 1]);
            double v;
            if (cell.empty()) {
                v = have_prev ? prev_row[i] : 0.0;  // forward-fill, zero for leading gaps
            } else {
                char* end = nullptr;
                errno = 0;
                v = std::strtod(cell.c_str(), &end);
                if (errno != 0 || end != cell.c_str() + cell.size() || !std::isfinite(v))
                    throw ParseError("non-numeric KPI cell '" + cell + "' in column '" +
                                         frame.feature_names[i] + "'",
                                     lineno);
            }
            frame.features.push_back(v);
            prev_row[i] = v;
        }
        have_prev = true;

        if (labeled) {
            const std::string cell = trim(cells.back());
            if (cell != "0" && cell != "1")
                throw ParseError("label must be 0 or 1, got '" + cell + "'", lineno);
            frame.labels.push_back(cell == "1" ? 1 : 0);
        }
    }
    frame.validate();
    return frame;
}

void save_csv(const KpiFrame& frame, const std::string& path) {
    frame.validate();
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write '" + path + "'");
    out << "timestamp";
    for (const auto& n : frame.feature_names) out << "," << n;
    if (frame.has_labels()) out << ",label";
    out << "\n";
    char buf[40];
    for (std::size_t t = 0; t < frame.size(); ++t) {
        out << frame.timestamps[t];
        for (std::size_t f = 0; f < frame.feature_count(); ++f) {
            std::snprintf(buf, sizeof buf, "%.17g", frame.at(t, f));
            out << "," << buf;
        }
        if (frame.has_labels()) out << "," << static_cast<int>(frame.labels[t]);
        out << "\n";
    }
}

NormalizationParams fit_minmax(const KpiFrame& frame) {
    if (frame.size() == 0) throw ContractError("fit_minmax: empty frame");
    const std::size_t f = frame.feature_count();
    NormalizationParams p;
    p.min.assign(f, 0.0);
    p.max.assign(f, 0.0);
    for (std::size_t j = 0; j < f; ++j) {
        double lo = frame.at(0, j), hi = frame.at(0, j);
        for (std::size_t t = 1; t < frame.size(); ++t) {
            lo = std::min(lo, frame.at(t, j));
            hi = std::max(hi, frame.at(t, j));
        }
        p.min[j] = lo;
        p.max[j] = hi;
    }
    return p;
}

KpiFrame apply_minmax(const KpiFrame& frame, const NormalizationParams& params) {
    if (params.min.size() != frame.feature_count())
        throw DimensionError("apply_minmax: params fitted for " +
                             std::to_string(params.min.size()) + " features, frame has " +
                             std::to_string(frame.feature_count()));
    KpiFrame out = frame;
    for (std::size_t j = 0; j < frame.feature_count(); ++j) {
        const double range = params.max[j] - params.min[j];
        for (std::size_t t = 0; t < frame.size(); ++t) {
            double v = range > 0.0 ? (frame.at(t, j) - params.min[j]) / range : 0.0;
            out.at(t, j) = std::clamp(v, 0.0, 1.0);
        }
    }
    return out;
}

std::pair<KpiFrame, KpiFrame> split(const KpiFrame& frame, double train_fraction) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ContractError("split: train_fraction must lie in (0, 1)");
    const std::size_t t_train =
        static_cast<std::size_t>(train_fraction * static_cast<double>(frame.size()));
    const std::size_t f = frame.feature_count();
    KpiFrame a, b;
    a.feature_names = b.feature_names = frame.feature_names;
    a.timestamps.assign(frame.timestamps.begin(), frame.timestamps.begin() + t_train);
    b.timestamps.assign(frame.timestamps.begin() + t_train, frame.timestamps.end());
    a.features.assign(frame.features.begin(), frame.features.begin() + t_train * f);
    b.features.assign(frame.features.begin() + t_train * f, frame.features.end());
    if (frame.has_labels()) {
        a.labels.assign(frame.labels.begin(), frame.labels.begin() + t_train);
        b.labels.assign(frame.labels.begin() + t_train, frame.labels.end());
    }
    return {std::move(a), std::move(b)};
}

}  // namespace rangan
