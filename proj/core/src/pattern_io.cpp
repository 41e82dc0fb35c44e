#include "cdpforge/pattern_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace cdpforge {
namespace {

using nlohmann::json;

const char* kind_name(PlaneKind kind) {
  switch (kind) {
    case PlaneKind::theta: return "theta";
    case PlaneKind::mask: return "mask";
    case PlaneKind::amplitude: return "amplitude";
  }
  return "mask";
}

PlaneKind parse_kind(const std::string& name) {
  if (name == "theta") return PlaneKind::theta;
  if (name == "mask") return PlaneKind::mask;
  if (name == "amplitude") return PlaneKind::amplitude;
  throw FormatError("unknown plane kind '" + name + "'");
}

std::size_t positive_field(const json& doc, const char* key) {
  if (!doc.contains(key) || !doc[key].is_number_integer() || doc[key].get<long long>() < 1) {
    throw FormatError(std::string("field '") + key + "' must be a positive integer");
  }
  return doc[key].get<std::size_t>();
}

}  // namespace

std::string serialize(const PlaneStack& stack) {
  if (stack.planes.empty()) throw FormatError("cannot serialize an empty plane stack");
  const Shape shape = stack.planes.front().shape();
  json data = json::array();
  for (const auto& plane : stack.planes) {
    require_same_shape(shape, plane.shape(), "serialize");
    for (double v : plane) data.push_back(v);
  }
  json doc;
  doc["height"] = shape.height;
  doc["width"] = shape.width;
  doc["count"] = stack.planes.size();
  doc["kind"] = kind_name(stack.kind);
  doc["data"] = std::move(data);
  return doc.dump();
}

PlaneStack parse_plane_stack(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw FormatError("plane file must be a JSON object");
  for (const auto& [key, _] : doc.items()) {
    if (key != "height" && key != "width" && key != "count" && key != "kind" && key != "data") {
      throw FormatError("unknown field '" + key + "'");
    }
  }
  const std::size_t height = positive_field(doc, "height");
  const std::size_t width = positive_field(doc, "width");
  const std::size_t count = positive_field(doc, "count");
  if (!doc.contains("kind") || !doc["kind"].is_string()) throw FormatError("field 'kind' missing");
  if (!doc.contains("data") || !doc["data"].is_array()) throw FormatError("field 'data' missing");

  PlaneStack stack;
  stack.kind = parse_kind(doc["kind"].get<std::string>());
  const auto& data = doc["data"];
  const std::size_t plane_size = height * width;
  if (data.size() != plane_size * count) {
    throw FormatError("data length " + std::to_string(data.size()) + " != height*width*count " +
                      std::to_string(plane_size * count));
  }
  stack.planes.reserve(count);
  for (std::size_t t = 0; t < count; ++t) {
    Real2D plane(height, width);
    for (std::size_t i = 0; i < plane_size; ++i) {
      const auto& v = data[t * plane_size + i];
      if (!v.is_number()) throw FormatError("data entries must be numbers");
      const double x = v.get<double>();
      if (!std::isfinite(x)) throw FormatError("data entries must be finite");
      if (stack.kind == PlaneKind::mask && (x < 0.0 || x > 1.0)) {
        throw FormatError("mask entries must lie in [0,1]");
      }
      if (stack.kind == PlaneKind::amplitude && x < 0.0) {
        throw FormatError("amplitude entries must be nonnegative");
      }
      plane[i] = x;
    }
    stack.planes.push_back(std::move(plane));
  }
  return stack;
}

void write_plane_stack(const std::filesystem::path& path, const PlaneStack& stack) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  out << serialize(stack) << '\n';
  if (!out) throw FormatError("failed writing '" + path.string() + "'");
}

PlaneStack read_plane_stack(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_plane_stack(buf.str());
}

PlaneStack to_stack(const PatternParams& params) { return {PlaneKind::theta, params.thetas}; }
PlaneStack to_stack(const PatternSet& patterns) { return {PlaneKind::mask, patterns.masks}; }
PlaneStack to_stack(const MeasurementSet& meas) { return {PlaneKind::amplitude, meas.amps}; }

PatternSet to_pattern_set(const PlaneStack& stack) {
  switch (stack.kind) {
    case PlaneKind::theta: return patterns_from_params(PatternParams{stack.planes});
    case PlaneKind::mask: return PatternSet{stack.planes};
    case PlaneKind::amplitude: break;
  }
  throw FormatError("expected a theta or mask file, got amplitudes");
}

PatternParams to_pattern_params(const PlaneStack& stack) {
  if (stack.kind != PlaneKind::theta) throw FormatError("expected a theta file");
  return PatternParams{stack.planes};
}

}  // namespace cdpforge
