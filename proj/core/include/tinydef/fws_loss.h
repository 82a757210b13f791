// Focaler-Wise-SIoU box regression loss.
//
//   L_IoU  = 1 - clip(|IoU - d| / (u - d), 0, 1)
//   L_SIoU = L_IoU + (Dist + Shape) / 2
//   L      = L_SIoU * gamma(beta),   beta = (1 - IoU) / EMA[1 - IoU]
//   gamma(beta) = beta / (delta * alpha^(beta - delta))
//
// Gradients are taken with respect to the predicted box (cx, cy, w, h). At the
// measure-zero kinks (focaler clip corners, min/max ties, |0|) the zero
// subgradient is used.
#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace tinydef {

struct BoxCWH {
  double cx = 0.0;
  double cy = 0.0;
  double w = 1.0;
  double h = 1.0;

  // Throws ContractViolation unless w, h > 0 and everything is finite.
  void validate() const;
  bool operator==(const BoxCWH&) const = default;
};

struct Corners {
  double x1, y1, x2, y2;
};

Corners cwh_to_corners(const BoxCWH& b);
BoxCWH corners_to_cwh(const Corners& c);

double iou(const BoxCWH& bp, const BoxCWH& bt);

struct FocalerConfig {
  double d = 0.0;
  double u = 0.95;
  void validate() const;
};

double focaler_normalize(double iou_raw, const FocalerConfig& cfg);

struct SiouConfig {
  double theta = 4.0;
  double eps_angle = 1e-4;
  // false: only the height term is raised to theta; true: theta applies to
  // both the width and the height term.
  bool symmetric_shape_exponent = false;
  // false: the stabilizer inside the arcsin is eps_angle times the squared
  // diagonal of the enclosing box, which keeps the loss scale-invariant;
  // true: eps_angle is added as an absolute constant.
  bool absolute_angle_eps = false;
  void validate() const;
};

struct SiouTerms {
  double angle = 0.0;
  double dist = 0.0;
  double shape = 0.0;
};

SiouTerms siou_terms(const BoxCWH& bp, const BoxCWH& bt, const SiouConfig& cfg);
double siou_core_loss(const BoxCWH& bp, const BoxCWH& bt,
                      const FocalerConfig& fcfg, const SiouConfig& scfg);

using Grad4 = std::array<double, 4>;  // d/d(cx, cy, w, h) of the prediction

struct CoreLossEval {
  double value = 0.0;
  Grad4 grad{};
  double iou_raw = 0.0;
  Grad4 iou_grad{};
};

CoreLossEval siou_core_loss_grad(const BoxCWH& bp, const BoxCWH& bt,
                                 const FocalerConfig& fcfg,
                                 const SiouConfig& scfg);

enum class ModulationForm {
  kGamma,           // L_SIoU * gamma(beta)
  kLiteralProduct,  // L_SIoU * beta * beta^delta
};

struct WiseConfig {
  double alpha = 1.9;
  double delta = 3.0;
  bool detach_modulation = true;
  ModulationForm form = ModulationForm::kGamma;
  void validate() const;
};

double wise_gamma(double beta, const WiseConfig& cfg);

// Single-writer running mean of the IoU loss. The first update copies the
// sample (warm start).
struct WiseState {
  double ema_mean = 0.0;
  double momentum = 1e-2;
  bool initialized = false;
};

WiseState ema_update(WiseState state, double l_iou);

struct FwsConfig {
  FocalerConfig focaler;
  SiouConfig siou;
  WiseConfig wise;
  void validate() const;
};

struct FwsResult {
  double loss = 0.0;
  Grad4 grad{};
  WiseState state;
  double iou_raw = 0.0;
  double core_loss = 0.0;
  double beta = 0.0;
  double modulation = 0.0;
};

// beta uses the running mean as it stands before this sample (after the warm
// start if the state is fresh); the returned state includes this sample.
FwsResult fws_loss(const BoxCWH& bp, const BoxCWH& bt, const WiseState& state,
                   const FwsConfig& cfg);

// --- regression demo ------------------------------------------------------

struct BoxPair {
  BoxCWH pred;
  BoxCWH target;
};

// Targets in normalized [0, 1] coordinates with extents in [0.05, 0.3];
// predictions are jittered copies with IoU >= min_iou.
std::vector<BoxPair> make_regress_pairs(int count, std::uint64_t seed,
                                        double min_iou = 0.1);

struct RegressConfig {
  int steps = 2000;
  double lr = 1e-4;  // tuned on normalized boxes; larger steps oscillate
  double min_extent = 1e-4;
  FwsConfig loss;
};

struct RegressStep {
  int step = 0;
  double mean_loss = 0.0;
  double mean_iou = 0.0;
  double ema_mean = 0.0;
  double mean_gamma = 0.0;
};

struct RegressReport {
  std::vector<RegressStep> trajectory;
  std::vector<BoxPair> final_pairs;
  double initial_mean_iou = 0.0;
  double final_mean_iou = 0.0;
  bool diverged = false;
  int divergence_step = -1;
  WiseState state;
};

// Plain gradient descent on every prediction with one shared Wise state. A run
// where the mean loss rises for 10 consecutive steps is flagged, not aborted.
RegressReport regress_demo(std::vector<BoxPair> pairs, const RegressConfig& cfg,
                           WiseState state = {});

}  // namespace tinydef
