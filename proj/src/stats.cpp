#include "paneliv/stats.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>

#include "paneliv/errors.hpp"

namespace paneliv {

double normal_cdf(double z) {
    static const boost::math::normal dist;
    return boost::math::cdf(dist, z);
}

double normal_sf(double z) {
    static const boost::math::normal dist;
    return boost::math::cdf(boost::math::complement(dist, z));
}

double chi2_sf(double x, double df) {
    if (df <= 0) throw ConfigError("chi2_sf: df must be positive");
    if (x <= 0) return 1.0;
    boost::math::chi_squared dist(df);
    return boost::math::cdf(boost::math::complement(dist, x));
}

double f_sf(double x, double df1, double df2) {
    if (df1 <= 0 || df2 <= 0) throw ConfigError("f_sf: degrees of freedom must be positive");
    if (x <= 0) return 1.0;
    boost::math::fisher_f dist(df1, df2);
    return boost::math::cdf(boost::math::complement(dist, x));
}

double ks_uniform_distance(std::vector<double> sample) {
    if (sample.empty()) throw ConfigError("ks_uniform_distance: empty sample");
    for (double& v : sample) v = std::clamp(v, 0.0, 1.0);
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double hi = (static_cast<double>(i) + 1.0) / n - sample[i];
        const double lo = sample[i] - static_cast<double>(i) / n;
        d = std::max(d, std::max(hi, lo));
    }
    return d;
}

double quantile(std::vector<double> sample, double q) {
    if (sample.empty()) throw ConfigError("quantile: empty sample");
    if (q < 0.0 || q > 1.0) throw ConfigError("quantile: q outside [0,1]");
    std::sort(sample.begin(), sample.end());
    const double pos = q * static_cast<double>(sample.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= sample.size()) return sample.back();
    const double frac = pos - static_cast<double>(lo);
    return sample[lo] * (1.0 - frac) + sample[lo + 1] * frac;
}

}  // namespace paneliv
