#pragma once

#include <skewsplat/camera.hpp>
#include <skewsplat/raster.hpp>
#include <skewsplat/scene.hpp>

#include <random>
#include <vector>

namespace skewsplat::testing {

struct RandomSceneOptions {
    int n_min = 3;
    int n_max = 6;
    int width = 8;
    int height = 8;
    int sh_degree = 1;
    /// beta = dir = 0 and equal opacity logits.
    bool symmetric = false;
    /// Typical |beta| * sigma.
    double skew_strength = 1.5;
    /// Typical splat standard deviation in pixels.
    double px_scale_min = 0.8;
    double px_scale_max = 3.0;
};

struct TestScene {
    Scene scene;
    CameraView view;
};

/// A random camera looking at the origin and primitives spread over its frustum.
TestScene random_scene(std::mt19937_64& rng, const RandomSceneOptions& opt = {});

Vec4 random_unit_quaternion(std::mt19937_64& rng);

/// Result of a central finite-difference check of render_backward.
struct FdReport {
    int total = 0;
    int passed = 0;
    double worst_rel = 0.0;
    /// Largest relative error among coordinates above the floor, passing or not.
    double max_rel = 0.0;
    double max_abs_grad = 0.0;
    std::vector<int> failures_per_group = std::vector<int>(8, 0);

    double pass_fraction() const { return total == 0 ? 1.0 : double(passed) / total; }
};

struct FdOptions {
    double rel_tol = 1e-3;
    double abs_floor = 1e-8;
    double step_small = 1e-4;  // positions, scales, opacities, colors
    double step_large = 1e-3;  // quaternion, beta, dir
    RenderConfig render;
};

/// Checks d/dtheta of L = sum (render - target)^2 for every packed parameter.
FdReport check_gradients(const Scene& scene, const CameraView& view, const Image& target,
                         const FdOptions& opt = {});

}  // namespace skewsplat::testing
