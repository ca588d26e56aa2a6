#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "paneliv/cfiv.hpp"
#include "paneliv/dgp.hpp"
#include "paneliv/dyngmm.hpp"
#include "paneliv/eventstudy.hpp"
#include "paneliv/linfe.hpp"
#include "paneliv/survival.hpp"

namespace paneliv {

// Every report embeds this block so a reader can tell exactly which
// statistical conventions produced the numbers.
nlohmann::json conventions_json(double alpha);

// %.12g rendering used for all CSV numbers; absent values print as "nan".
std::string format_double(double v);

// 64-bit FNV-1a, used to fingerprint effective configurations.
std::uint64_t fnv1a(const std::string& s);

nlohmann::json coefficient_table(const std::vector<std::string>& names,
                                 const Eigen::VectorXd& coef, const Eigen::MatrixXd& cov);

nlohmann::json to_json(const FEOLSFit& fit, const ClusteredCov& cov);
nlohmann::json to_json(const FTestResult& f);
nlohmann::json to_json(const CFIVResult& r);
nlohmann::json to_json(const NaivePoissonResult& r);
nlohmann::json to_json(const BootstrapResult& r);
nlohmann::json to_json(const EventCurve& c);
nlohmann::json to_json(const SurvivalCurve& c);
nlohmann::json to_json(const SurvivalComparison& c);
nlohmann::json to_json(const GMMFit& fit, const HansenResult* hansen,
                       const std::vector<ARTestResult>& ar);
nlohmann::json to_json(const MCReport& r);

void write_event_curve_csv(std::ostream& out, const EventCurve& c);
void write_survival_csv(std::ostream& out, const std::vector<SurvivalCurve>& curves);
void write_bootstrap_csv(std::ostream& out, const BootstrapResult& r);
void write_mc_draws_csv(std::ostream& out, const MCReport& r);
void write_coefficients_csv(std::ostream& out, const std::vector<std::string>& names,
                            const Eigen::VectorXd& coef, const Eigen::MatrixXd& cov);

}  // namespace paneliv
