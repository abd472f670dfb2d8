#include "scn/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "scn/types.hpp"

namespace scn {

Curve curve_from_table(const CsvTable& table, const std::string& x, const std::string& y)
{
    Curve c{table.column_values(x), table.column_values(y)};
    for (std::size_t i = 1; i < c.x.size(); ++i)
        if (c.x[i] < c.x[i - 1])
            throw ConfigError("curve: column '" + x + "' is not sorted");
    return c;
}

double interpolate(const Curve& c, double x)
{
    if (c.x.empty())
        throw ConfigError("interpolate: empty curve");
    if (x <= c.x.front())
        return c.y.front();
    if (x >= c.x.back())
        return c.y.back();
    const auto it = std::upper_bound(c.x.begin(), c.x.end(), x);
    const auto hi = static_cast<std::size_t>(it - c.x.begin());
    const std::size_t lo = hi - 1;
    if (c.x[lo] == x)
        return c.y[lo];
    const double w = (x - c.x[lo]) / (c.x[hi] - c.x[lo]);
    return c.y[lo] + w * (c.y[hi] - c.y[lo]);
}

std::vector<double> resample(const Curve& c, const std::vector<double>& grid)
{
    std::vector<double> out;
    out.reserve(grid.size());
    for (double x : grid)
        out.push_back(interpolate(c, x));
    return out;
}

std::vector<double> common_grid(const std::vector<Curve>& curves, int points)
{
    if (curves.empty())
        throw ConfigError("common_grid: no curves");
    if (points < 1)
        throw ConfigError("common_grid: need at least one point");
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (const auto& c : curves) {
        if (c.x.empty())
            throw ConfigError("common_grid: empty curve");
        lo = std::max(lo, c.x.front());
        hi = std::min(hi, c.x.back());
    }
    if (hi < lo)
        throw ConfigError("common_grid: curves do not overlap");
    if (points == 1 || hi == lo)
        return {lo};
    std::vector<double> grid(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i)
        grid[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (points - 1);
    grid.back() = hi;
    return grid;
}

Stat mean_std(const std::vector<double>& values)
{
    if (values.empty())
        throw ConfigError("mean_std: no values");
    Stat s;
    s.n = static_cast<int>(values.size());
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / s.n;
    if (s.n > 1) {
        double ss = 0.0;
        for (double v : values)
            ss += (v - s.mean) * (v - s.mean);
        s.std = std::sqrt(ss / (s.n - 1));
    }
    return s;
}

Band aggregate_curves(const std::string& label, const std::vector<Curve>& curves, int points)
{
    Band b;
    b.label = label;
    b.x = common_grid(curves, points);
    std::vector<std::vector<double>> ys;
    for (const auto& c : curves)
        ys.push_back(resample(c, b.x));
    for (std::size_t i = 0; i < b.x.size(); ++i) {
        std::vector<double> col;
        for (const auto& y : ys)
            col.push_back(y[i]);
        const Stat s = mean_std(col);
        b.mean.push_back(s.mean);
        b.std.push_back(s.std);
    }
    return b;
}

double percent_improvement(double a, double b)
{
    if (a == b)
        return 0.0;
    if (b == 0.0)
        return a > b ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    return (a - b) / std::abs(b) * 100.0;
}

double shifted_ratio(double value, double reference, double random)
{
    return (value - random) / (reference - random);
}

TextTable summary_table(const std::vector<VariantValues>& variants, const std::string& reference, Metric metric)
{
    if (variants.empty())
        throw ConfigError("aggregate: no variants");
    const VariantValues* ref = nullptr;
    for (const auto& v : variants)
        if (v.label == reference)
            ref = &v;
    const std::string metric_name = metric == Metric::average ? "average_reward" : "final_reward";
    TextTable t;
    t.schema = "scn-summary/1";
    t.columns = {"variant", "metric", "n", "mean", "std", "improvement_of_" + reference + "_pct"};
    const double ref_mean = ref ? mean_std(ref->values).mean : std::numeric_limits<double>::quiet_NaN();
    for (const auto& v : variants) {
        const Stat s = mean_std(v.values);
        t.rows.push_back({v.label, metric_name, std::to_string(s.n), format_double(s.mean), format_double(s.std),
                          format_double(ref ? percent_improvement(ref_mean, s.mean)
                                            : std::numeric_limits<double>::quiet_NaN())});
    }
    return t;
}

}  // namespace scn
