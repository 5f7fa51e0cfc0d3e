#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "leafarea/common.hpp"

namespace leafarea {

/// C x (H*W) feature tensor; column index y * W + x.
struct FeatureMap {
    int height = 0, width = 0;
    Eigen::MatrixXd data;
    std::vector<std::string> channel_semantics;

    int channels() const { return static_cast<int>(data.rows()); }
    int pixels() const { return height * width; }
    double& at(int c, int x, int y) { return data(c, y * width + x); }
    void validate() const;
};

/// Soft or binary mask with values in [0, 1]; index y * W + x.
struct InstanceMask {
    int height = 0, width = 0;
    Eigen::RowVectorXd values;

    void validate() const;
};

enum class Activation { Relu, LeakyRelu };
enum class LossKind { L1, Mse, Huber };

inline constexpr double kLeakySlope = 0.01;

Activation parse_activation(const std::string& name);
const char* activation_name(Activation a);
LossKind parse_loss(const std::string& name);
const char* loss_name(LossKind k);

struct AreaHeadParams {
    std::vector<Eigen::MatrixXd> conv_weights;  // layer k: C_k x C_{k+1}
    std::vector<Eigen::VectorXd> norm_scale;    // gamma per output channel
    std::vector<Eigen::VectorXd> norm_shift;    // beta per output channel
    Eigen::VectorXd pred_weight;                // C_n
    Activation activation = Activation::LeakyRelu;
    int norm_groups = 1;
    bool identity_mode = false;  // skip group normalization altogether
    LossKind loss = LossKind::L1;
    double huber_delta = 1.0;
    double norm_eps = 1e-5;

    int n_layers() const { return static_cast<int>(conv_weights.size()); }
    void validate() const;
};

/// Layer widths {C_0, ..., C_n}; weights drawn from N(0, 1 / C_in) with the
/// given seed, gamma = 1, beta = 0.
AreaHeadParams random_area_head(const std::vector<int>& widths, std::uint64_t seed);

struct AreaHeadOutput {
    double area = 0;             // cm^2
    Eigen::RowVectorXd map;      // per-pixel contribution
};

/// F0 = features * mask; F_{k+1} = act(GroupNorm(W_k^T F_k)); map =
/// relu(w_pred^T F_n); area = sum(map). Group statistics are taken over the
/// mask support and pixels outside it stay exactly zero.
AreaHeadOutput area_head_forward(const FeatureMap& features, const InstanceMask& mask,
                                 const AreaHeadParams& params);

/// gt must be >= 0; the -1 placeholder is a caller error.
double area_loss(double pred, double gt, LossKind kind, double huber_delta = 1.0);
double area_loss_derivative(double pred, double gt, LossKind kind, double huber_delta = 1.0);

struct AreaHeadGradients {
    std::vector<Eigen::MatrixXd> conv_weights;
    std::vector<Eigen::VectorXd> norm_scale;
    std::vector<Eigen::VectorXd> norm_shift;
    Eigen::VectorXd pred_weight;
};

struct LossAndGradients {
    double loss = 0;
    double area = 0;
    AreaHeadGradients grads;
};

LossAndGradients area_head_backward(const FeatureMap& features, const InstanceMask& mask,
                                    const AreaHeadParams& params, double gt);

struct GradCheckResult {
    double max_rel_error = 0;
    std::size_t checked = 0;
    std::size_t excluded = 0;  // steps that crossed an activation or loss kink
    std::string worst_parameter;
};

/// Central differences with step h against the analytic gradient of every
/// weight. Relative error is |a - n| / max(|a|, |n|, 1e-6).
GradCheckResult grad_check(const AreaHeadParams& params, const FeatureMap& features,
                           const InstanceMask& mask, double gt, double h = 1e-4);

AreaHeadParams load_area_head(const std::filesystem::path& path);
void save_area_head(const AreaHeadParams& params, const std::filesystem::path& path);
std::string area_head_to_json(const AreaHeadParams& params);
AreaHeadParams area_head_from_json(const std::string& text);

/// .npy (float32/float64, C order, shape (C,H,W) or (H,W)) or raw
/// little-endian float32 with an explicit C,H,W shape.
FeatureMap load_features(const std::filesystem::path& path,
                         const std::optional<std::vector<int>>& shape = std::nullopt);

/// 8-bit PNG scaled by 1/255, or a .npy array of shape (H,W).
InstanceMask load_instance_mask(const std::filesystem::path& path);

}  // namespace leafarea
