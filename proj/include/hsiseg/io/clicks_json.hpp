#pragma once

#include <hsiseg/types.hpp>

#include <json.hpp>

#include <string>

namespace hsiseg::io {

/// {"row": r, "col": c, "polarity": "positive" | "negative"}; polarity defaults to positive.
inline Click click_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("row") || !j.contains("col"))
    fail(Errc::invalid_argument, "click needs 'row' and 'col'");
  const auto& r = j.at("row");
  const auto& c = j.at("col");
  if (!r.is_number_integer() || !c.is_number_integer())
    fail(Errc::invalid_argument, "click coordinates must be integers");
  if (r.get<long long>() < 0 || c.get<long long>() < 0) fail(Errc::out_of_range, "click coordinates must be >= 0");
  Click click{r.get<std::size_t>(), c.get<std::size_t>(), Polarity::positive};
  const auto& pol = j.contains("polarity") ? j.at("polarity") : nlohmann::json("positive");
  if (pol == "negative") click.polarity = Polarity::negative;
  else if (pol != "positive") fail(Errc::invalid_argument, "polarity must be 'positive' or 'negative'");
  return click;
}

/// A list of clicks, or an object with a "clicks" list.
inline ClickSet clicks_from_json(const nlohmann::json& j) {
  const auto& list = j.is_object() && j.contains("clicks") ? j.at("clicks") : j;
  if (!list.is_array()) fail(Errc::format, "clicks must be a JSON list");
  ClickSet clicks;
  for (const auto& c : list) clicks.add(click_from_json(c));
  return clicks;
}

inline nlohmann::json to_json(const Click& c) {
  return {{"row", c.row}, {"col", c.col}, {"polarity", c.polarity == Polarity::positive ? "positive" : "negative"}};
}

}  // namespace hsiseg::io
