#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lulc/vit/config.hpp"

namespace lulc::train {

enum class Precision { f32, f64 };

struct GradcheckOptions {
    Precision precision = Precision::f32;
    std::size_t batch_size = 2;
    double step = 1e-4;
    std::uint64_t seed = 0;
    // Defaults to 1e-3 (f32) or 1e-5 (f64) when not positive.
    double threshold = 0.0;

    double effective_threshold() const;
};

struct TensorCheck {
    std::string name;
    std::size_t numel = 0;
    // ||g_autodiff - g_fd|| / max(||g_autodiff||, ||g_fd||, 1e-6 * global norm).
    double relative_error = 0.0;
    double autodiff_norm = 0.0;
};

struct GradcheckReport {
    std::vector<TensorCheck> tensors;
    double max_relative_error = 0.0;
    std::string worst_parameter;
    double threshold = 0.0;
    double seconds = 0.0;

    bool passed() const { return !tensors.empty() && max_relative_error < threshold; }
};

// Cross-entropy of an eval-mode forward on a seeded random batch. Autodiff
// gradients are taken at the requested precision; the reference is the central
// difference of the same loss evaluated in 64-bit on identical weights, for
// every element of every parameter tensor.
GradcheckReport gradcheck(const vit::ViTConfig& config, const GradcheckOptions& options);

}  // namespace lulc::train
