#pragma once

#include <string>
#include <vector>

#include "paneliv/eventstudy.hpp"
#include "paneliv/survival.hpp"

namespace paneliv {

// Self-contained SVG documents; no timestamps or external references, so
// identical inputs render byte-identical files.
std::string svg_event_curve(const EventCurve& curve, const std::string& title);
std::string svg_survival_curves(const std::vector<SurvivalCurve>& curves, const std::string& title);

}  // namespace paneliv
