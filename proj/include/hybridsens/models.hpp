#pragma once

#include <array>
#include <cmath>
#include <optional>

#include "hybridsens/model.hpp"

namespace hybridsens {

enum class BallCost { None, Velocity, Acceleration, Position };

/// Point mass dropped from height rho = [h0] onto q = 0.
struct BallConfig {
    double h0 = 1.0;
    double gravity = 9.81;
    double restitution = 1.0;
    double mass = 1.0;
    BallCost running_cost = BallCost::None;
    bool terminal_position = false;
};

ModelDefinition build_bouncing_ball(const BallConfig& cfg = {});

enum class FiveBarCost { None, Y2Velocity, Y2Acceleration };

/// Planar five-bar linkage with two springs and a ground contact on point 2.
/// Coordinates are q = [x1, y1, x2, y2, x3, y3]; rho = [L01, L02] are the
/// spring rest lengths (anchor A to point 3, anchor B to point 2).
struct FiveBarConfig {
    std::array<double, 4> bar_mass{1.0, 1.5, 1.5, 1.0};  // bars A-1, 1-2, 2-3, 3-B
    double k1 = 100.0;
    double k2 = 100.0;
    double L01 = std::sqrt(5.0);
    double L02 = std::sqrt(4.25);
    double LA1 = std::sqrt(2.0);
    double L21 = std::sqrt(3.25);
    double L32 = std::sqrt(3.25);
    double LB3 = std::sqrt(2.0);
    std::array<double, 2> qA{-0.5, 0.0};
    std::array<double, 2> qB{0.5, 0.0};
    std::array<double, 6> q0{-1.5, -1.0, 0.0, -2.0, 1.5, -1.0};
    std::array<double, 6> v0{0, 0, 0, 0, 0, 0};
    double ground = -2.35;
    double gravity = 9.81;
    double restitution = 1.0;
    FiveBarCost running_cost = FiveBarCost::Y2Velocity;
};

ModelDefinition build_five_bar(const FiveBarConfig& cfg = {});

enum class PendulumCost { None, Height, Multiplier };

/// Point pendulum in Cartesian coordinates q = [x, y], pivot at the origin,
/// constraint x^2 + y^2 - L^2. rho = [L], or [L, d] when a peg at (0, -d)
/// shortens the string for x > 0 (regime 1).
struct PendulumConfig {
    double mass = 1.0;
    double gravity = 9.81;
    double length = 1.0;
    double theta0 = 0.5;  // angle from the downward vertical
    double omega0 = 0.0;
    std::optional<double> wall_x;
    double restitution = 1.0;
    std::optional<double> peg_depth;
    PendulumCost running_cost = PendulumCost::None;
};

ModelDefinition build_pendulum(const PendulumConfig& cfg = {});

}  // namespace hybridsens
