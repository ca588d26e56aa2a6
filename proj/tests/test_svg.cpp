#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>

#include "paneliv/errors.hpp"
#include "paneliv/survival.hpp"
#include "paneliv/svg.hpp"

using namespace paneliv;

namespace {

EventCurve toy_curve() {
    EventCurve c;
    c.points.push_back(EventCurvePoint{-2, 0.3, 0.5, 10, -1.1, 1.7});
    c.points.push_back(EventCurvePoint{-1, -0.2, 0.5, 10, -1.6, 1.2});
    c.points.push_back(EventCurvePoint{0, -20.0, 0.8, 10, -21.8, -18.2});
    c.points.push_back(EventCurvePoint{1, 0.1, 0.5, 10, -1.3, 1.5});
    return c;
}

}  // namespace

TEST_CASE("event curve drawing has a band, a zero line, and the mean path") {
    const std::string svg = svg_event_curve(toy_curve(), "abnormal values");
    CHECK(svg.rfind("<svg ", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg.find("<polygon") != std::string::npos);       // confidence band
    CHECK(svg.find("<polyline") != std::string::npos);      // mean path
    CHECK(svg.find("stroke-dasharray") != std::string::npos);  // zero reference line
    CHECK(svg.find("abnormal values") != std::string::npos);
    CHECK(svg.find("event time") != std::string::npos);
}

TEST_CASE("drawings are byte-deterministic and carry no timestamps") {
    const std::string a = svg_event_curve(toy_curve(), "t");
    const std::string b = svg_event_curve(toy_curve(), "t");
    CHECK(a == b);
    for (const char* needle : {"date", "Date", "time=", "generated", "Generated"})
        CHECK(a.find(needle) == std::string::npos);
}

TEST_CASE("the zero reference stays in frame even for an all-positive curve") {
    EventCurve c;
    c.points.push_back(EventCurvePoint{0, 5.0, 0.1, 3, 4.0, 6.0});
    c.points.push_back(EventCurvePoint{1, 6.0, 0.1, 3, 5.0, 7.0});
    const std::string svg = svg_event_curve(c, "positive");
    // The vertical scale is anchored at zero so departures read against the
    // no-abnormal-value baseline.
    CHECK(svg.find("stroke-dasharray") != std::string::npos);
}

TEST_CASE("survival drawing steps each curve down from one") {
    const SurvivalCurve a = kaplan_meier({1.0, 2.0, 3.0}, {1, 1, 1}, "treated");
    const SurvivalCurve b = kaplan_meier({2.0, 4.0, 6.0}, {1, 1, 0}, "control");
    const std::string svg = svg_survival_curves({a, b}, "survival");
    CHECK(svg.rfind("<svg ", 0) == 0);
    CHECK(svg.find("treated") != std::string::npos);
    CHECK(svg.find("control") != std::string::npos);
    // One polyline per curve, distinct colors.
    std::size_t count = 0;
    for (std::size_t pos = svg.find("<polyline"); pos != std::string::npos;
         pos = svg.find("<polyline", pos + 1))
        ++count;
    CHECK(count == 2);
    CHECK(svg.find("#08519c") != std::string::npos);
    CHECK(svg.find("#a63603") != std::string::npos);
    // Unlabeled curves get a fallback legend entry.
    const SurvivalCurve anon = kaplan_meier({1.0}, {1});
    CHECK(svg_survival_curves({anon}, "t").find("group 1") != std::string::npos);
}

TEST_CASE("empty inputs are rejected") {
    CHECK_THROWS_AS(svg_event_curve(EventCurve{}, "t"), DataError);
    CHECK_THROWS_AS(svg_survival_curves({}, "t"), DataError);
    SurvivalCurve empty;
    CHECK_THROWS_AS(svg_survival_curves({empty}, "t"), DataError);
}
