#pragma once

#include <string>
#include <vector>

#include "scn/csv.hpp"

namespace scn {

struct Curve {
    std::vector<double> x;
    std::vector<double> y;
};

/// Extracts (x, y) columns; x must be non-decreasing.
Curve curve_from_table(const CsvTable& table, const std::string& x = "timesteps", const std::string& y = "reward");

/// Piecewise-linear interpolation, clamped to the end values outside the data range.
double interpolate(const Curve& c, double x);
std::vector<double> resample(const Curve& c, const std::vector<double>& grid);

/// `points` evenly spaced x values over the range shared by every curve.
std::vector<double> common_grid(const std::vector<Curve>& curves, int points = 100);

struct Stat {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation; 0 for a single value
    int n = 0;
};

Stat mean_std(const std::vector<double>& values);

/// Mean and std across curves after resampling onto a shared grid.
struct Band {
    std::string label;
    std::vector<double> x;
    std::vector<double> mean;
    std::vector<double> std;
};

Band aggregate_curves(const std::string& label, const std::vector<Curve>& curves, int points = 100);

/// (a - b) / |b| * 100. Zero when a == b; infinite when b == 0 and a != b.
double percent_improvement(double a, double b);

/// (value - random) / (reference - random): performance as a fraction of the
/// reference after removing the random-policy baseline.
double shifted_ratio(double value, double reference, double random);

enum class Metric { average, final };

struct VariantValues {
    std::string label;
    std::vector<double> values;  // one per seed
};

/// One row per variant: label, n, mean, std, and percent improvement of
/// `reference` over the variant.
TextTable summary_table(const std::vector<VariantValues>& variants, const std::string& reference, Metric metric);

}  // namespace scn
