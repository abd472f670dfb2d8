#pragma once

#include <cstdint>

#include "scn/types.hpp"

namespace scn {

/// Running per-dimension mean / variance (Welford), used to standardize
/// observations. Population variance; with count <= 1 normalization is the identity.
class ObsNormalizer {
public:
    ObsNormalizer() = default;
    explicit ObsNormalizer(int dim);
    ObsNormalizer(std::int64_t count, Vec mean, Vec m2);

    int dim() const { return static_cast<int>(mean_.size()); }
    std::int64_t count() const { return count_; }
    const Vec& mean() const { return mean_; }
    const Vec& m2() const { return m2_; }
    Vec variance() const;

    void update(const Vec& x);
    /// Folds another accumulator into this one (Chan et al. pairwise update).
    void merge(const ObsNormalizer& other);

    /// (x - mean) / sqrt(var + 1e-8), statistics untouched.
    Vec apply(const Vec& x) const;
    /// Updates the statistics first when `training` is set, then standardizes.
    Vec normalize(const Vec& x, bool training);

    bool operator==(const ObsNormalizer&) const;

private:
    std::int64_t count_ = 0;
    Vec mean_;
    Vec m2_;
};

}  // namespace scn
