#pragma once

#include <vector>

namespace paneliv {

// Standard normal CDF and upper tail.
double normal_cdf(double z);
double normal_sf(double z);

// Upper-tail probabilities used for test p-values.
double chi2_sf(double x, double df);
double f_sf(double x, double df1, double df2);

// Kolmogorov-Smirnov sup distance between the empirical CDF of `sample`
// and the Uniform(0,1) CDF.  Values outside [0,1] are clamped.
double ks_uniform_distance(std::vector<double> sample);

// Sample quantile (linear interpolation), q in [0,1].
double quantile(std::vector<double> sample, double q);

}  // namespace paneliv
