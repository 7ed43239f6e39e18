#pragma once

// Procedural stand-ins for scanned object categories.

#include "crn/geometry.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace crn {

enum class ShapeKind { BoxFrame, Table, Chair, CylinderLamp, PlaneWing };

inline constexpr std::array<ShapeKind, 5> kAllShapeKinds{ShapeKind::BoxFrame, ShapeKind::Table, ShapeKind::Chair,
                                                         ShapeKind::CylinderLamp, ShapeKind::PlaneWing};

std::string_view to_string(ShapeKind kind);
ShapeKind parse_shape_kind(std::string_view text);

struct SynthShape {
    PointCloud cloud;
    std::string category;
};

// Uniform surface samples of a randomly parameterized primitive assembly,
// centered and scaled into [-0.5, 0.5]^3. Requires n >= 64.
SynthShape synth_shape(ShapeKind kind, Index n, std::uint64_t seed);

}  // namespace crn
