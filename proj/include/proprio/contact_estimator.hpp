#pragma once

#include <array>
#include <cmath>
#include <optional>

#include "proprio/plane.hpp"

namespace proprio {

/// Weights and sigmoid shapes for the position/force contact fusion.
/// Defaults are the reference parameter set; scenario files may override.
struct ContactConfig {
    double k_pos = 0.40;
    double k_force = 0.60;
    double sigma_pos = 1.28;   // 1/m
    double p_mid = 0.01;       // m
    double sigma_force = 0.78; // 1/force-unit
    double f_mid = 5.00;       // force-units

    void validate() const {
        if (std::abs(k_pos + k_force - 1.0) > 1e-9 || k_pos < 0.0 || k_force < 0.0)
            throw std::invalid_argument("contact weights must be nonnegative and sum to 1");
        if (sigma_pos <= 0.0 || sigma_force <= 0.0)
            throw std::invalid_argument("contact sigmas must be > 0");
    }
};

struct ContactBelief {
    double prob = 0.0;
    double prob_pos = 0.0;
    double prob_force = 0.0;
    int leg = -1;
};

/// Logistic 1/(1+e^-a), overflow-safe for |a| well past 700.
inline double sigmoid(double a) {
    if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
    const double e = std::exp(a);
    return e / (1.0 + e);
}

/// Position evidence: 1 - sigmoid(sigma_pos * (|dist| - p_mid)) with the
/// absolute normalized foot-to-plane distance. Monotonically non-increasing
/// in |dist|.
inline double contact_prob_position(const Vec3& foot_pos, const PlaneParams& plane,
                                    const ContactConfig& cfg) {
    const double dist = std::abs(plane.signed_distance(foot_pos));
    return 1.0 - sigmoid(cfg.sigma_pos * (dist - cfg.p_mid));
}

/// Force evidence: sigmoid(sigma_force * (F - f_mid)), increasing in F.
inline double contact_prob_force(double force, const ContactConfig& cfg) {
    return sigmoid(cfg.sigma_force * (force - cfg.f_mid));
}

/// Convex combination of the two evidence channels.
inline ContactBelief fuse_contact(double prob_pos, double prob_force, const ContactConfig& cfg,
                                  int leg = -1) {
    return ContactBelief{cfg.k_pos * prob_pos + cfg.k_force * prob_force, prob_pos, prob_force,
                         leg};
}

/// Full per-leg evaluation. Without a support plane the position channel is
/// uninformative (0.5) and fusion degrades to force-dominated detection.
inline ContactBelief estimate_contact(const Vec3& foot_pos, double force,
                                      const std::optional<PlaneParams>& plane,
                                      const ContactConfig& cfg, int leg = -1) {
    const double pp = plane ? contact_prob_position(foot_pos, *plane, cfg) : 0.5;
    return fuse_contact(pp, contact_prob_force(force, cfg), cfg, leg);
}

/// Binary contact with a +-band hysteresis around the threshold, shared by
/// gait gating and the KF noise adaptation.
class ContactHysteresis {
  public:
    explicit ContactHysteresis(double threshold = 0.5, double band = 0.05)
        : threshold_(threshold), band_(band) {}

    bool update(int leg, double prob) {
        bool& state = in_contact_[leg];
        if (prob >= threshold_ + band_)
            state = true;
        else if (prob <= threshold_ - band_)
            state = false;
        return state;
    }

    bool state(int leg) const { return in_contact_[leg]; }
    void set_state(int leg, bool in_contact) { in_contact_[leg] = in_contact; }

  private:
    double threshold_;
    double band_;
    std::array<bool, 4> in_contact_{};
};

}  // namespace proprio
