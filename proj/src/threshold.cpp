#include "crisisfilter/threshold.hpp"

#include <array>
#include <stdexcept>
#include <string>

namespace crisisfilter {

ThresholdCurve tune_threshold(std::span<const AnnotatedPair> pairs, int d_min, int d_max)
{
    if (pairs.empty()) {
        throw std::invalid_argument("tune_threshold: no annotated pairs");
    }
    if (d_min < 0 || d_min > d_max || d_max > 64) {
        throw std::invalid_argument("tune_threshold: need 0 <= d_min <= d_max <= 64");
    }

    // Histograms by distance; accuracy(d) = same(<= d) + different(> d).
    std::array<long long, 65> same{};
    std::array<long long, 65> diff{};
    for (const auto& p : pairs) {
        if (p.distance < 0 || p.distance > 64) {
            throw std::invalid_argument("tune_threshold: pair distance out of range: " + std::to_string(p.distance));
        }
        (p.is_same ? same : diff)[p.distance] += 1;
    }
    long long same_le = 0;
    long long diff_le = 0;
    long long diff_total = 0;
    for (auto c : diff) {
        diff_total += c;
    }
    for (int d = 0; d < d_min; ++d) {
        same_le += same[d];
        diff_le += diff[d];
    }

    ThresholdCurve out;
    long long best_correct = -1;
    const double n = static_cast<double>(pairs.size());
    for (int d = d_min; d <= d_max; ++d) {
        same_le += same[d];
        diff_le += diff[d];
        const long long correct = same_le + (diff_total - diff_le);
        out.curve.push_back({d, static_cast<double>(correct) / n});
        if (correct > best_correct) {
            best_correct = correct;
            out.best_d = d;
        }
    }
    return out;
}

}  // namespace crisisfilter
