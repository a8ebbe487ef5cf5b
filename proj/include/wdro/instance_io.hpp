#pragma once

// JSON form of a raw dual-program instance, read by `wdro solve`:
//
//   {
//     "samples":  [{"x": [..], "y": 0|1}, ...],
//     "r0": 0.1,
//     "theta_radius": 10,                     optional, default 10
//     "support": {"0": {"box": {"lower": [..], "upper": [..]} | null,
//                       "points": [[..], ...]},
//                 "1": {...}}                 optional, default class boxes + atoms
//   }

#include "json.hpp"
#include "wdro/reformulation.hpp"

namespace wdro {

ProblemData problem_from_json(const nlohmann::json& j);
nlohmann::json problem_to_json(const ProblemData& data);

}  // namespace wdro
