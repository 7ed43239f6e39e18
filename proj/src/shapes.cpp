#include "crn/shapes.hpp"

#include "crn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace crn {

std::string_view to_string(ShapeKind kind) {
    switch (kind) {
        case ShapeKind::BoxFrame: return "box-frame";
        case ShapeKind::Table: return "table";
        case ShapeKind::Chair: return "chair";
        case ShapeKind::CylinderLamp: return "cylinder-lamp";
        case ShapeKind::PlaneWing: return "plane-wing";
    }
    return "box-frame";
}

ShapeKind parse_shape_kind(std::string_view text) {
    for (ShapeKind k : kAllShapeKinds) {
        if (to_string(k) == text) return k;
    }
    throw ValueError("unknown shape kind '" + std::string(text) + "'");
}

namespace {

using Vec3 = Eigen::Vector3d;

// Axis-aligned box surface or capped cylinder surface.
struct Primitive {
    enum class Type { Box, Cylinder } type;
    Vec3 center;
    Vec3 half;          // box half extents
    double radius = 0;  // cylinder
    double half_len = 0;
    int axis = 2;

    double area() const {
        if (type == Type::Box) {
            return 8.0 * (half.x() * half.y() + half.y() * half.z() + half.x() * half.z());
        }
        return 2.0 * std::numbers::pi * radius * (2.0 * half_len) + 2.0 * std::numbers::pi * radius * radius;
    }

    Vec3 sample(std::mt19937_64& rng) const {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        if (type == Type::Box) {
            const double axy = half.x() * half.y(), ayz = half.y() * half.z(), axz = half.x() * half.z();
            const double pick = u(rng) * (axy + ayz + axz);
            const double sgn = u(rng) < 0.5 ? -1.0 : 1.0;
            Vec3 p(2 * u(rng) - 1, 2 * u(rng) - 1, 2 * u(rng) - 1);
            if (pick < axy) {
                p.z() = sgn;
            } else if (pick < axy + ayz) {
                p.x() = sgn;
            } else {
                p.y() = sgn;
            }
            return center + p.cwiseProduct(half);
        }
        const double side = 2.0 * radius * (2.0 * half_len);
        const double caps = 2.0 * radius * radius;
        const double theta = 2.0 * std::numbers::pi * u(rng);
        double r = radius, t;
        if (u(rng) * (side + caps) < side) {
            t = (2 * u(rng) - 1) * half_len;
        } else {
            r = radius * std::sqrt(u(rng));
            t = u(rng) < 0.5 ? -half_len : half_len;
        }
        Vec3 local;
        const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
        local[axis] = t;
        local[a1] = r * std::cos(theta);
        local[a2] = r * std::sin(theta);
        return center + local;
    }
};

Primitive box(Vec3 c, Vec3 h) { return {Primitive::Type::Box, c, h}; }

Primitive cylinder(Vec3 c, double r, double half_len, int axis) {
    Primitive p{Primitive::Type::Cylinder, c, Vec3::Zero()};
    p.radius = r;
    p.half_len = half_len;
    p.axis = axis;
    return p;
}

std::vector<Primitive> assemble(ShapeKind kind, std::mt19937_64& rng) {
    auto range = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    std::vector<Primitive> parts;
    switch (kind) {
        case ShapeKind::BoxFrame: {
            const Vec3 h(range(0.3, 0.5), range(0.2, 0.45), range(0.25, 0.5));
            const double t = range(0.02, 0.05);
            for (int s1 : {-1, 1}) {
                for (int s2 : {-1, 1}) {
                    parts.push_back(box({0, s1 * h.y(), s2 * h.z()}, {h.x(), t, t}));
                    parts.push_back(box({s1 * h.x(), 0, s2 * h.z()}, {t, h.y(), t}));
                    parts.push_back(box({s1 * h.x(), s2 * h.y(), 0}, {t, t, h.z()}));
                }
            }
            break;
        }
        case ShapeKind::Table: {
            const double w = range(0.35, 0.5), d = range(0.25, 0.45), top = range(0.02, 0.05);
            const double height = range(0.3, 0.45), leg = range(0.02, 0.06);
            parts.push_back(box({0, height, 0}, {w, top, d}));
            for (int sx : {-1, 1}) {
                for (int sz : {-1, 1}) {
                    parts.push_back(box({sx * (w - leg), 0, sz * (d - leg)}, {leg, height - top, leg}));
                }
            }
            break;
        }
        case ShapeKind::Chair: {
            const double w = range(0.2, 0.3), d = range(0.2, 0.3), seat_h = range(0.2, 0.3);
            const double leg = range(0.015, 0.04), back_h = range(0.25, 0.4), t = range(0.02, 0.04);
            parts.push_back(box({0, seat_h, 0}, {w, t, d}));
            for (int sx : {-1, 1}) {
                for (int sz : {-1, 1}) {
                    parts.push_back(box({sx * (w - leg), seat_h / 2, sz * (d - leg)}, {leg, seat_h / 2, leg}));
                }
            }
            parts.push_back(box({0, seat_h + back_h, -d + t}, {w, back_h, t}));
            break;
        }
        case ShapeKind::CylinderLamp: {
            const double base_r = range(0.12, 0.25), base_h = range(0.02, 0.05);
            const double pole_r = range(0.015, 0.035), pole_h = range(0.3, 0.5);
            const double shade_r = range(0.15, 0.3), shade_h = range(0.1, 0.2);
            parts.push_back(cylinder({0, base_h, 0}, base_r, base_h, 1));
            parts.push_back(cylinder({0, 2 * base_h + pole_h, 0}, pole_r, pole_h, 1));
            parts.push_back(cylinder({0, 2 * base_h + 2 * pole_h + shade_h, 0}, shade_r, shade_h, 1));
            break;
        }
        case ShapeKind::PlaneWing: {
            const double body_r = range(0.04, 0.08), body_l = range(0.4, 0.5);
            const double span = range(0.35, 0.5), chord = range(0.08, 0.15), t = range(0.01, 0.02);
            const double wing_x = range(-0.05, 0.1);
            parts.push_back(cylinder({0, 0, 0}, body_r, body_l, 0));
            parts.push_back(box({wing_x, 0, 0}, {chord, t, span}));
            parts.push_back(box({-body_l + chord / 2, 0, 0}, {chord / 2, t, span * 0.35}));
            parts.push_back(box({-body_l + chord / 2, chord, 0}, {chord / 2, chord, t}));
            break;
        }
    }
    return parts;
}

}  // namespace

SynthShape synth_shape(ShapeKind kind, Index n, std::uint64_t seed) {
    if (n < 64) throw ContractError("synth_shape: need at least 64 points, got " + std::to_string(n));
    std::mt19937_64 rng(seed);
    const auto parts = assemble(kind, rng);
    std::vector<double> cumulative;
    double total = 0.0;
    for (const auto& p : parts) cumulative.push_back(total += p.area());

    PointCloud cloud(static_cast<Eigen::Index>(n), 3);
    std::uniform_real_distribution<double> u(0.0, total);
    for (Index i = 0; i < n; ++i) {
        const double r = u(rng);
        const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
        const auto which = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), parts.size() - 1);
        cloud.row(static_cast<Eigen::Index>(i)) = parts[which].sample(rng).transpose();
    }

    const Eigen::RowVector3d lo = cloud.colwise().minCoeff(), hi = cloud.colwise().maxCoeff();
    const Eigen::RowVector3d mid = 0.5 * (lo + hi);
    const double extent = (hi - lo).maxCoeff();
    cloud.rowwise() -= mid;
    if (extent > 0) cloud /= extent;
    // Guard the half-open bound against rounding.
    cloud = cloud.cwiseMax(-0.5).cwiseMin(0.5);
    return {std::move(cloud), std::string(to_string(kind))};
}

}  // namespace crn
