#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "cdpforge/forward_model.hpp"

namespace cdpforge {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// On-disk plane stack:
//   {"height":H,"width":W,"count":T,"kind":K,"data":[row-major reals, plane by plane]}
// kind is "theta" (unconstrained parameters), "mask" (values in [0,1]) or
// "amplitude" (measurement magnitudes, >= 0).
enum class PlaneKind { theta, mask, amplitude };

struct PlaneStack {
  PlaneKind kind = PlaneKind::mask;
  std::vector<Real2D> planes;
};

std::string serialize(const PlaneStack& stack);
/// Throws FormatError on malformed documents or out-of-range values.
PlaneStack parse_plane_stack(const std::string& text);

void write_plane_stack(const std::filesystem::path& path, const PlaneStack& stack);
PlaneStack read_plane_stack(const std::filesystem::path& path);

PlaneStack to_stack(const PatternParams& params);
PlaneStack to_stack(const PatternSet& patterns);
PlaneStack to_stack(const MeasurementSet& meas);

/// Masks from either a theta file (sigmoid applied) or a mask file.
PatternSet to_pattern_set(const PlaneStack& stack);
/// Throws FormatError unless the stack holds thetas.
PatternParams to_pattern_params(const PlaneStack& stack);

}  // namespace cdpforge
