#pragma once

#include "hsi/controller.hpp"
#include "hsi/geom.hpp"
#include "hsi/planner.hpp"

#include <json.hpp>

namespace hsi::json_io {

using nlohmann::json;

/// Rows serialise as [[x, y], ...].
json to_json(const Matrix2Xr& m);
Matrix2Xr matrix_from_json(const json& j);

json to_json(const Point2& p);
Point2 point_from_json(const json& j);

/// Dense matrices serialise row-major as an array of rows.
json to_json(const Eigen::MatrixXd& m);

json to_json(const geom::Polygon& p);
geom::Polygon polygon_from_json(const json& j);

json to_json(const controller::PlanStep& s);
controller::PlanStep plan_step_from_json(const json& j);

json to_json(const planner::Plan& p);

}  // namespace hsi::json_io
