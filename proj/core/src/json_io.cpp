#include "hsi/json_io.hpp"

#include <cmath>

namespace hsi::json_io {

json to_json(const Matrix2Xr& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back({m(i, 0), m(i, 1)});
  return out;
}

Matrix2Xr matrix_from_json(const json& j) {
  if (!j.is_array()) throw InvalidInput("expected an array of [x, y] pairs");
  Matrix2Xr m(static_cast<Eigen::Index>(j.size()), 2);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& row = j[i];
    if (!row.is_array() || row.size() != 2 || !row[0].is_number() || !row[1].is_number())
      throw InvalidInput("row " + std::to_string(i) + " is not an [x, y] pair");
    m(static_cast<Eigen::Index>(i), 0) = row[0].get<double>();
    m(static_cast<Eigen::Index>(i), 1) = row[1].get<double>();
  }
  return m;
}

json to_json(const Point2& p) { return {p.x(), p.y()}; }

Point2 point_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw InvalidInput("expected an [x, y] pair");
  return {j[0].get<double>(), j[1].get<double>()};
}

json to_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) {
      const double v = m(i, k);
      if (std::isfinite(v))
        row.push_back(v);
      else
        row.push_back(nullptr);  // infeasible entries
    }
    out.push_back(std::move(row));
  }
  return out;
}

json to_json(const geom::Polygon& p) {
  json out = json::array();
  for (const auto& v : p.vertices()) out.push_back(to_json(v));
  return out;
}

geom::Polygon polygon_from_json(const json& j) {
  if (!j.is_array()) throw InvalidShape("polygon must be an array of vertices");
  std::vector<Point2> v;
  for (const auto& p : j) v.push_back(point_from_json(p));
  return geom::Polygon(std::move(v));
}

json to_json(const controller::PlanStep& s) {
  return {{"z", to_json(s.z)}, {"s", s.scale}, {"theta", s.rotation}, {"c", to_json(s.centroid)}, {"mode", s.mode}};
}

controller::PlanStep plan_step_from_json(const json& j) {
  controller::PlanStep s;
  s.z = matrix_from_json(j.at("z"));
  s.scale = j.at("s").get<double>();
  s.rotation = j.at("theta").get<double>();
  s.centroid = point_from_json(j.at("c"));
  s.mode = j.at("mode").get<int>();
  return s;
}

json to_json(const planner::Plan& p) {
  json steps = json::array();
  for (const auto& s : p.steps) steps.push_back(to_json(s));
  json hid = json::array();
  for (const auto& h : p.hid_states) {
    json verts = json::array();
    for (const auto& v : h.vertices) verts.push_back(to_json(v));
    hid.push_back({{"shape", verts}, {"s", h.scale}, {"theta", h.rotation}, {"c", to_json(h.centroid)}});
  }
  json controls = json::array();
  for (const auto& u : p.controls) controls.push_back(std::vector<double>(u.data(), u.data() + u.size()));
  return {{"steps", steps},         {"hid_states", hid},       {"controls", controls},
          {"mode_costs", to_json(p.mode_costs)}, {"hid_cost", p.hid_cost}, {"total_cost", p.total_cost}};
}

}  // namespace hsi::json_io
