#include "scn/normalizer.hpp"

#include <cmath>
#include <string>

namespace scn {

ObsNormalizer::ObsNormalizer(int dim) : mean_(Vec::Zero(dim)), m2_(Vec::Zero(dim))
{
    if (dim <= 0)
        throw ConfigError("normalizer: dimension must be positive");
}

ObsNormalizer::ObsNormalizer(std::int64_t count, Vec mean, Vec m2)
    : count_(count), mean_(std::move(mean)), m2_(std::move(m2))
{
    if (count_ < 0 || mean_.size() != m2_.size())
        throw ConfigError("normalizer: inconsistent state");
}

Vec ObsNormalizer::variance() const
{
    if (count_ == 0)
        return Vec::Zero(mean_.size());
    return m2_ / static_cast<double>(count_);
}

void ObsNormalizer::update(const Vec& x)
{
    if (x.size() != mean_.size())
        throw ConfigError("normalizer: expected observation of size " + std::to_string(mean_.size()));
    ++count_;
    const Vec delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += (delta.array() * (x - mean_).array()).matrix();
}

void ObsNormalizer::merge(const ObsNormalizer& other)
{
    if (other.count_ == 0)
        return;
    if (other.mean_.size() != mean_.size())
        throw ConfigError("normalizer: cannot merge accumulators of different dimension");
    if (count_ == 0) {
        *this = other;
        return;
    }
    const double na = static_cast<double>(count_);
    const double nb = static_cast<double>(other.count_);
    const double n = na + nb;
    const Vec delta = other.mean_ - mean_;
    mean_ += delta * (nb / n);
    m2_ += other.m2_ + (delta.array().square() * (na * nb / n)).matrix();
    count_ += other.count_;
}

Vec ObsNormalizer::apply(const Vec& x) const
{
    if (x.size() != mean_.size())
        throw ConfigError("normalizer: expected observation of size " + std::to_string(mean_.size()));
    if (count_ <= 1)
        return x;
    return ((x - mean_).array() / (variance().array() + 1e-8).sqrt()).matrix();
}

Vec ObsNormalizer::normalize(const Vec& x, bool training)
{
    if (training)
        update(x);
    return apply(x);
}

bool ObsNormalizer::operator==(const ObsNormalizer& o) const
{
    return count_ == o.count_ && mean_ == o.mean_ && m2_ == o.m2_;
}

}  // namespace scn
