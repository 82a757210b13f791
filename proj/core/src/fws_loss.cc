#include "tinydef/fws_loss.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "tinydef/random_init.h"
#include "tinydef/tensor.h"

namespace tinydef {

namespace {

// Forward-mode derivative carrier over the four prediction coordinates.
struct Dual {
  double v = 0.0;
  Grad4 d{};

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT: constants lift implicitly
  Dual(double value, const Grad4& grad) : v(value), d(grad) {}
};

Dual operator+(const Dual& a, const Dual& b) {
  Dual r(a.v + b.v);
  for (int i = 0; i < 4; ++i) r.d[i] = a.d[i] + b.d[i];
  return r;
}
Dual operator-(const Dual& a, const Dual& b) {
  Dual r(a.v - b.v);
  for (int i = 0; i < 4; ++i) r.d[i] = a.d[i] - b.d[i];
  return r;
}
Dual operator-(const Dual& a) { return Dual(0.0) - a; }
Dual operator*(const Dual& a, const Dual& b) {
  Dual r(a.v * b.v);
  for (int i = 0; i < 4; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
  return r;
}
Dual operator/(const Dual& a, const Dual& b) {
  Dual r(a.v / b.v);
  for (int i = 0; i < 4; ++i) {
    r.d[i] = (a.d[i] * b.v - a.v * b.d[i]) / (b.v * b.v);
  }
  return r;
}
// Chain rule for a scalar function with derivative `slope` at a.v.
Dual chain(const Dual& a, double value, double slope) {
  Dual r(value);
  for (int i = 0; i < 4; ++i) r.d[i] = slope * a.d[i];
  return r;
}
Dual exp(const Dual& a) {
  const double e = std::exp(a.v);
  return chain(a, e, e);
}
Dual sqrt(const Dual& a) {
  const double s = std::sqrt(a.v);
  return chain(a, s, 0.5 / s);
}
Dual sin(const Dual& a) { return chain(a, std::sin(a.v), std::cos(a.v)); }
Dual asin(const Dual& a) {
  return chain(a, std::asin(a.v), 1.0 / std::sqrt(1.0 - a.v * a.v));
}
Dual pow(const Dual& a, double p) {
  return chain(a, std::pow(a.v, p),
               a.v == 0.0 && p > 1.0 ? 0.0 : p * std::pow(a.v, p - 1.0));
}
Dual abs(const Dual& a) {
  const double s = a.v > 0.0 ? 1.0 : (a.v < 0.0 ? -1.0 : 0.0);
  return chain(a, std::abs(a.v), s);
}
// Ties take the zero subgradient.
Dual min(const Dual& a, const Dual& b) {
  if (a.v < b.v) return a;
  if (b.v < a.v) return b;
  return Dual(a.v);
}
Dual max(const Dual& a, const Dual& b) {
  if (a.v > b.v) return a;
  if (b.v > a.v) return b;
  return Dual(a.v);
}

double value_of(double x) { return x; }
double value_of(const Dual& x) { return x.v; }


// clip(x, lo, hi) with zero slope on and beyond the bounds.
template <class T>
T clip(const T& x, double lo, double hi) {
  if (value_of(x) <= lo) return T(lo);
  if (value_of(x) >= hi) return T(hi);
  return x;
}

template <class T>
struct CornersT {
  T x1, y1, x2, y2;
};

template <class T>
CornersT<T> corners_of(const T& cx, const T& cy, const T& w, const T& h) {
  return {cx - w * 0.5, cy - h * 0.5, cx + w * 0.5, cy + h * 0.5};
}

template <class T>
T iou_impl(const CornersT<T>& p, const CornersT<T>& t) {
  using std::max;
  using std::min;
  const T iw = max(T(0.0), min(p.x2, t.x2) - max(p.x1, t.x1));
  const T ih = max(T(0.0), min(p.y2, t.y2) - max(p.y1, t.y1));
  const T inter = iw * ih;
  // Areas come from the corners so that identical boxes give inter == area
  // bit for bit and IoU is exactly 1.
  const T area_p = (p.x2 - p.x1) * (p.y2 - p.y1);
  const T area_t = (t.x2 - t.x1) * (t.y2 - t.y1);
  return inter / (area_p + area_t - inter);
}

template <class T>
T focaler_impl(const T& iou_raw, const FocalerConfig& cfg) {
  using std::abs;
  return clip(abs(iou_raw - cfg.d) / (cfg.u - cfg.d), 0.0, 1.0);
}

template <class T>
struct SiouTermsT {
  T angle, dist, shape;
};

template <class T>
T shape_term(const T& a, const T& b, double exponent) {
  using std::abs;
  using std::exp;
  using std::max;
  using std::pow;
  const T omega = abs(a - b) / max(a, b);
  const T base = T(1.0) - exp(-omega);
  return exponent == 1.0 ? base : pow(base, exponent);
}

template <class T>
SiouTermsT<T> siou_impl(const T& cx, const T& cy, const T& w, const T& h,
                        const BoxCWH& bt, const SiouConfig& cfg) {
  using std::abs;
  using std::asin;
  using std::exp;
  using std::max;
  using std::min;
  using std::sin;
  using std::sqrt;
  const CornersT<T> p = corners_of(cx, cy, w, h);
  const CornersT<T> t = corners_of(T(bt.cx), T(bt.cy), T(bt.w), T(bt.h));

  const T w_box = max(p.x2, t.x2) - min(p.x1, t.x1);
  const T h_box = max(p.y2, t.y2) - min(p.y1, t.y1);
  const T dx = abs(cx - bt.cx);
  const T dy = abs(cy - bt.cy);

  const T eps = cfg.absolute_angle_eps
                    ? T(cfg.eps_angle)
                    : (w_box * w_box + h_box * h_box) * cfg.eps_angle;
  const T sigma = sqrt(dx * dx + dy * dy + eps);
  const T phi = asin(min(dx, dy) / sigma);
  const T angle = sin(phi * 2.0) - 2.0;
  const T dist = T(2.0) - exp(angle * dx / w_box) - exp(angle * dy / h_box);

  const double w_exp = cfg.symmetric_shape_exponent ? cfg.theta : 1.0;
  const T shape = shape_term(w, T(bt.w), w_exp) + shape_term(h, T(bt.h), cfg.theta);
  return {angle, dist, shape};
}

template <class T>
struct CoreT {
  T loss;
  T iou_raw;
};

template <class T>
CoreT<T> core_impl(const T& cx, const T& cy, const T& w, const T& h,
                   const BoxCWH& bt, const FocalerConfig& fcfg,
                   const SiouConfig& scfg) {
  const CornersT<T> p = corners_of(cx, cy, w, h);
  const CornersT<T> t = corners_of(T(bt.cx), T(bt.cy), T(bt.w), T(bt.h));
  const T raw = iou_impl(p, t);
  const T l_iou = T(1.0) - focaler_impl(raw, fcfg);
  const SiouTermsT<T> s = siou_impl(cx, cy, w, h, bt, scfg);
  return {l_iou + (s.dist + s.shape) * 0.5, raw};
}

template <class T>
T gamma_impl(const T& beta, const WiseConfig& cfg) {
  using std::exp;
  return beta / (exp((beta - cfg.delta) * std::log(cfg.alpha)) * cfg.delta);
}

template <class T>
T modulation_impl(const T& beta, const WiseConfig& cfg) {
  using std::exp;
  using std::pow;
  if (cfg.form == ModulationForm::kGamma) return gamma_impl(beta, cfg);
  if (value_of(beta) <= 0.0) return T(0.0);
  return pow(beta, 1.0 + cfg.delta);
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ContractViolation(what);
}

Dual seed(double v, int slot) {
  Dual d(v);
  d.d[slot] = 1.0;
  return d;
}

}  // namespace

void BoxCWH::validate() const {
  require(std::isfinite(cx) && std::isfinite(cy) && std::isfinite(w) &&
              std::isfinite(h),
          "box coordinates must be finite");
  require(w > 0.0 && h > 0.0, "box extents must be positive");
}

Corners cwh_to_corners(const BoxCWH& b) {
  return {b.cx - b.w / 2, b.cy - b.h / 2, b.cx + b.w / 2, b.cy + b.h / 2};
}

BoxCWH corners_to_cwh(const Corners& c) {
  return {(c.x1 + c.x2) / 2, (c.y1 + c.y2) / 2, c.x2 - c.x1, c.y2 - c.y1};
}

double iou(const BoxCWH& bp, const BoxCWH& bt) {
  bp.validate();
  bt.validate();
  return iou_impl(corners_of(bp.cx, bp.cy, bp.w, bp.h),
                  corners_of(bt.cx, bt.cy, bt.w, bt.h));
}

void FocalerConfig::validate() const {
  require(0.0 <= d && d < u && u <= 1.0, "focaler bounds need 0 <= d < u <= 1");
}

double focaler_normalize(double iou_raw, const FocalerConfig& cfg) {
  cfg.validate();
  return focaler_impl(iou_raw, cfg);
}

void SiouConfig::validate() const {
  require(theta >= 1.0, "siou theta must be >= 1");
  require(eps_angle > 0.0, "siou eps_angle must be > 0");
}

SiouTerms siou_terms(const BoxCWH& bp, const BoxCWH& bt,
                     const SiouConfig& cfg) {
  bp.validate();
  bt.validate();
  cfg.validate();
  const auto s = siou_impl(bp.cx, bp.cy, bp.w, bp.h, bt, cfg);
  return {s.angle, s.dist, s.shape};
}

double siou_core_loss(const BoxCWH& bp, const BoxCWH& bt,
                      const FocalerConfig& fcfg, const SiouConfig& scfg) {
  bp.validate();
  bt.validate();
  fcfg.validate();
  scfg.validate();
  return core_impl(bp.cx, bp.cy, bp.w, bp.h, bt, fcfg, scfg).loss;
}

CoreLossEval siou_core_loss_grad(const BoxCWH& bp, const BoxCWH& bt,
                                 const FocalerConfig& fcfg,
                                 const SiouConfig& scfg) {
  bp.validate();
  bt.validate();
  fcfg.validate();
  scfg.validate();
  const auto r = core_impl(seed(bp.cx, 0), seed(bp.cy, 1), seed(bp.w, 2),
                           seed(bp.h, 3), bt, fcfg, scfg);
  return {r.loss.v, r.loss.d, r.iou_raw.v, r.iou_raw.d};
}

void WiseConfig::validate() const {
  require(alpha > 1.0, "wise alpha must be > 1");
  require(delta > 0.0, "wise delta must be > 0");
}

double wise_gamma(double beta, const WiseConfig& cfg) {
  cfg.validate();
  require(beta >= 0.0, "wise_gamma needs beta >= 0");
  return beta / (cfg.delta * std::pow(cfg.alpha, beta - cfg.delta));
}

WiseState ema_update(WiseState state, double l_iou) {
  require(state.momentum > 0.0 && state.momentum <= 1.0,
          "ema momentum must lie in (0, 1]");
  if (!state.initialized) {
    state.ema_mean = l_iou;
    state.initialized = true;
  } else {
    state.ema_mean =
        (1.0 - state.momentum) * state.ema_mean + state.momentum * l_iou;
  }
  return state;
}

void FwsConfig::validate() const {
  focaler.validate();
  siou.validate();
  wise.validate();
}

FwsResult fws_loss(const BoxCWH& bp, const BoxCWH& bt, const WiseState& state,
                   const FwsConfig& cfg) {
  bp.validate();
  bt.validate();
  cfg.validate();

  const CoreLossEval core = siou_core_loss_grad(bp, bt, cfg.focaler, cfg.siou);
  const double l_iou = 1.0 - core.iou_raw;
  const WiseState warm = state.initialized ? state : ema_update(state, l_iou);
  // A zero running mean only happens after a perfect warm-start sample.
  const double ema = std::max(warm.ema_mean, 1e-12);

  FwsResult r;
  r.core_loss = core.value;
  r.iou_raw = core.iou_raw;
  r.beta = l_iou > 0.0 ? l_iou / ema : 0.0;
  r.modulation = modulation_impl(r.beta, cfg.wise);
  r.loss = core.value * r.modulation;

  if (cfg.wise.detach_modulation) {
    for (int i = 0; i < 4; ++i) r.grad[i] = r.modulation * core.grad[i];
  } else {
    // beta = (1 - IoU) / ema with ema held fixed.
    Dual beta(r.beta);
    if (l_iou > 0.0) {
      for (int i = 0; i < 4; ++i) beta.d[i] = -core.iou_grad[i] / ema;
    }
    const Dual mod = modulation_impl(beta, cfg.wise);
    for (int i = 0; i < 4; ++i) {
      r.grad[i] = mod.v * core.grad[i] + core.value * mod.d[i];
    }
  }
  r.state = ema_update(state, l_iou);
  return r;
}

std::vector<BoxPair> make_regress_pairs(int count, std::uint64_t seed_value,
                                        double min_iou) {
  require(count >= 0, "make_regress_pairs: count must be >= 0");
  Rng rng = make_rng(seed_value, 0x5e6e55);
  std::vector<BoxPair> pairs;
  pairs.reserve(count);
  while (static_cast<int>(pairs.size()) < count) {
    BoxCWH t{uniform(rng, 0.2, 0.8), uniform(rng, 0.2, 0.8),
             uniform(rng, 0.05, 0.3), uniform(rng, 0.05, 0.3)};
    BoxCWH p{t.cx + uniform(rng, -0.5, 0.5) * t.w,
             t.cy + uniform(rng, -0.5, 0.5) * t.h,
             t.w * std::exp(uniform(rng, -0.7, 0.7)),
             t.h * std::exp(uniform(rng, -0.7, 0.7))};
    if (iou(p, t) >= min_iou) pairs.push_back({p, t});
  }
  return pairs;
}

RegressReport regress_demo(std::vector<BoxPair> pairs,
                           const RegressConfig& cfg, WiseState state) {
  require(cfg.lr > 0.0, "regress_demo: lr must be > 0");
  require(cfg.steps >= 0, "regress_demo: steps must be >= 0");
  cfg.loss.validate();

  auto mean_iou = [](const std::vector<BoxPair>& ps) {
    if (ps.empty()) return 0.0;
    double s = 0.0;
    for (const auto& p : ps) s += iou(p.pred, p.target);
    return s / static_cast<double>(ps.size());
  };

  RegressReport report;
  report.initial_mean_iou = mean_iou(pairs);
  const double n = std::max<double>(1.0, static_cast<double>(pairs.size()));
  int rising = 0;
  double prev_loss = 0.0;
  for (int step = 0; step < cfg.steps; ++step) {
    RegressStep rec;
    rec.step = step;
    for (auto& pair : pairs) {
      const FwsResult r = fws_loss(pair.pred, pair.target, state, cfg.loss);
      state = r.state;
      rec.mean_loss += r.loss;
      rec.mean_iou += r.iou_raw;
      rec.mean_gamma += r.modulation;
      pair.pred.cx -= cfg.lr * r.grad[0];
      pair.pred.cy -= cfg.lr * r.grad[1];
      pair.pred.w = std::max(cfg.min_extent, pair.pred.w - cfg.lr * r.grad[2]);
      pair.pred.h = std::max(cfg.min_extent, pair.pred.h - cfg.lr * r.grad[3]);
    }
    rec.mean_loss /= n;
    rec.mean_iou /= n;
    rec.mean_gamma /= n;
    rec.ema_mean = state.ema_mean;
    if (step > 0 && rec.mean_loss > prev_loss) {
      if (++rising >= 10 && !report.diverged) {
        report.diverged = true;
        report.divergence_step = step;
      }
    } else {
      rising = 0;
    }
    prev_loss = rec.mean_loss;
    report.trajectory.push_back(rec);
  }
  report.final_mean_iou = mean_iou(pairs);
  report.final_pairs = std::move(pairs);
  report.state = state;
  return report;
}

}  // namespace tinydef
