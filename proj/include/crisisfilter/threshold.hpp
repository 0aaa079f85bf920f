#pragma once

#include <span>
#include <vector>

namespace crisisfilter {

/// A hash pair with a same/different judgment.
struct AnnotatedPair {
    int distance = 0;  // 0..64
    bool is_same = false;
};

struct ThresholdPoint {
    int d;
    double accuracy;
};

struct ThresholdCurve {
    std::vector<ThresholdPoint> curve;
    int best_d = 0;
};

/// accuracy(d) = fraction of pairs classified correctly by "duplicate iff
/// distance <= d", for every d in [d_min, d_max]. best_d is the smallest
/// maximizer.
ThresholdCurve tune_threshold(std::span<const AnnotatedPair> pairs, int d_min, int d_max);

}  // namespace crisisfilter
