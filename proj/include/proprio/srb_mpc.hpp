#pragma once

#include <algorithm>
#include <optional>
#include <vector>

#include "proprio/plane.hpp"
#include "proprio/qp_solver.hpp"
#include "proprio/safety_cbf.hpp"

namespace proprio {

struct MpcConfig {
    int horizon = 10;
    double dt = 0.025;
    Eigen::Matrix<double, 12, 1> q_weights =
        (Eigen::Matrix<double, 12, 1>() << 20, 20, 1, 50, 50, 80, 1, 1, 1, 5, 5, 10).finished();
    double r_weight = 1e-5;
    double f_min = 0.0;
    double f_max = 500.0;
    double friction_mu = 0.5;
    double mass = 12.0;
    Vec3 inertia_diag{0.07, 0.26, 0.28};
    bool cbf_all_steps = true;

    void validate() const {
        if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
        if (dt <= 0.0) throw std::invalid_argument("dt must be > 0");
        if ((q_weights.array() < 0.0).any() || r_weight < 0.0)
            throw std::invalid_argument("weights must be >= 0");
        if (!(f_min >= 0.0 && f_min < f_max)) throw std::invalid_argument("need 0 <= f_min < f_max");
        if (friction_mu <= 0.0) throw std::invalid_argument("mu must be > 0");
    }
};

/// 12-dim SRB state, stacked as (roll, pitch, yaw, p, omega, v); pitch is
/// positive nose-up (see euler_to_rot).
struct MpcState {
    Vec3 euler = Vec3::Zero();
    Vec3 p = Vec3::Zero();
    Vec3 omega = Vec3::Zero();
    Vec3 v = Vec3::Zero();

    Eigen::Matrix<double, 12, 1> stacked() const {
        Eigen::Matrix<double, 12, 1> x;
        x << euler, p, omega, v;
        return x;
    }

    static MpcState from_stacked(const Eigen::Matrix<double, 12, 1>& x) {
        MpcState s;
        s.euler = x.segment<3>(0);
        s.p = x.segment<3>(3);
        s.omega = x.segment<3>(6);
        s.v = x.segment<3>(9);
        return s;
    }
};

/// Per-leg stance flags over the horizon plus the generating gait timing.
struct GaitSchedule {
    std::vector<std::array<bool, 4>> stance;
    double period = 0.6;
    double duty = 0.65;

    void validate() const {
        for (const auto& step : stance)
            if (!step[0] && !step[1] && !step[2] && !step[3])
                throw std::invalid_argument("gait schedule leaves zero stance legs at a step");
    }
};

struct SrbDynamics {
    Eigen::Matrix<double, 12, 12> a;
    Eigen::Matrix<double, 12, 12> b;
    Eigen::Matrix<double, 12, 1> c;
};

/// Forward-Euler discretization of the yaw-linearized single-rigid-body
/// model: Euler rates from omega through the reference yaw, forces to
/// acceleration through 1/m, torques through the yaw-rotated inertia, and
/// gravity in the constant term.
inline SrbDynamics linearize_dynamics(const MpcState& state, double yaw_ref,
                                      const std::array<Vec3, 4>& foot_positions,
                                      const MpcConfig& cfg) {
    SrbDynamics dyn;
    dyn.a.setIdentity();
    dyn.b.setZero();
    dyn.c.setZero();

    const Mat3 rz = rot_z(yaw_ref);
    Mat3 rate_map = rz.transpose();
    rate_map.row(1) *= -1.0;  // nose-up pitch convention
    dyn.a.block<3, 3>(0, 6) = rate_map * cfg.dt;
    dyn.a.block<3, 3>(3, 9) = Mat3::Identity() * cfg.dt;

    const Mat3 inertia_w = rz * cfg.inertia_diag.asDiagonal() * rz.transpose();
    const Mat3 inertia_inv = inertia_w.inverse();
    for (int i = 0; i < 4; ++i) {
        const Vec3 r = foot_positions[i] - state.p;
        dyn.b.block<3, 3>(6, 3 * i) = inertia_inv * skew(r) * cfg.dt;
        dyn.b.block<3, 3>(9, 3 * i) = Mat3::Identity() * (cfg.dt / cfg.mass);
    }
    dyn.c(11) = -kGravity * cfg.dt;
    return dyn;
}

/// Friction pyramid and normal-force bound directions in the support-plane
/// frame, expressed over world-frame forces. pyramid * u <= 0 encodes
/// |f_t| <= mu f_n; normal. u carries the f_min/f_max bounds.
struct FrictionCone {
    Mat3 rotation;                        // world -> plane frame (rows t1, t2, n)
    Eigen::Matrix<double, 4, 3> pyramid;  // rows over world-frame force
    Vec3 normal;

    bool satisfied(const Vec3& f, double f_min, double f_max, double tol = 1e-9) const {
        const double fn = normal.dot(f);
        return (pyramid * f).maxCoeff() <= tol && fn >= f_min - tol && fn <= f_max + tol;
    }
};

inline FrictionCone friction_cone_rows(double yaw, const PlaneParams& plane, double mu) {
    const Vec3 n = plane.normal().normalized();
    const Vec3 heading{std::cos(yaw), std::sin(yaw), 0.0};
    Vec3 t1 = heading - n * n.dot(heading);
    if (t1.norm() < 1e-9) t1 = Vec3{-std::sin(yaw), std::cos(yaw), 0.0} -
                               n * n.dot(Vec3{-std::sin(yaw), std::cos(yaw), 0.0});
    t1.normalize();
    const Vec3 t2 = n.cross(t1);

    FrictionCone cone;
    cone.rotation.row(0) = t1.transpose();
    cone.rotation.row(1) = t2.transpose();
    cone.rotation.row(2) = n.transpose();
    cone.normal = n;
    cone.pyramid.row(0) = (t1 - mu * n).transpose();
    cone.pyramid.row(1) = (-t1 - mu * n).transpose();
    cone.pyramid.row(2) = (t2 - mu * n).transpose();
    cone.pyramid.row(3) = (-t2 - mu * n).transpose();
    return cone;
}

/// Condensed QP over stance-leg forces, with the bookkeeping needed to
/// recover the predicted state trajectory.
struct CondensedMpc {
    QpProblem qp;
    MatX su;         // 12N x nv, maps forces to stacked X[1..N]
    VecX free_state; // 12N, response to x0 and gravity alone
    std::vector<std::array<int, 4>> var_offset;  // -1 for swing legs
    int horizon = 0;
    int num_vars = 0;
};

/// Builds the condensed CBF-MPC QP: states eliminated through the dynamics,
/// swing-leg forces eliminated (fixed to zero), cone/bound rows per stance
/// leg and step, and CBF rows mapped into force-variable space.
inline CondensedMpc assemble_qp(const MpcState& x0, const std::vector<MpcState>& ref,
                                const GaitSchedule& gait, const std::vector<CbfRow>& cbf_rows,
                                const MpcConfig& cfg, const PlaneParams& plane,
                                const std::array<Vec3, 4>& foot_positions) {
    cfg.validate();
    gait.validate();
    const int n_steps = cfg.horizon;
    if (static_cast<int>(ref.size()) != n_steps)
        throw DimensionMismatch("reference trajectory length != horizon");
    if (static_cast<int>(gait.stance.size()) < n_steps)
        throw DimensionMismatch("gait schedule shorter than horizon");

    CondensedMpc out;
    out.horizon = n_steps;
    out.var_offset.assign(n_steps, {-1, -1, -1, -1});
    int nv = 0;
    for (int k = 0; k < n_steps; ++k)
        for (int leg = 0; leg < 4; ++leg)
            if (gait.stance[k][leg]) {
                out.var_offset[k][leg] = nv;
                nv += 3;
            }
    out.num_vars = nv;

    const SrbDynamics dyn = linearize_dynamics(x0, ref.front().euler.z(), foot_positions, cfg);

    // Powers of A and the gravity response.
    std::vector<Eigen::Matrix<double, 12, 12>> a_pow(n_steps + 1);
    a_pow[0].setIdentity();
    for (int k = 1; k <= n_steps; ++k) a_pow[k] = dyn.a * a_pow[k - 1];

    out.su = MatX::Zero(12 * n_steps, nv);
    out.free_state = VecX::Zero(12 * n_steps);
    Eigen::Matrix<double, 12, 1> drift = Eigen::Matrix<double, 12, 1>::Zero();
    for (int k = 0; k < n_steps; ++k) {
        drift = dyn.a * drift + dyn.c;
        out.free_state.segment<12>(12 * k) = a_pow[k + 1] * x0.stacked() + drift;
        for (int j = 0; j <= k; ++j) {
            for (int leg = 0; leg < 4; ++leg) {
                const int off = out.var_offset[j][leg];
                if (off < 0) continue;
                out.su.block<12, 3>(12 * k, off) =
                    a_pow[k - j] * dyn.b.block<12, 3>(0, 3 * leg);
            }
        }
    }

    // Cost over X[1..N] and u[0..N-1].
    VecX q_stack(12 * n_steps);
    VecX ref_stack(12 * n_steps);
    for (int k = 0; k < n_steps; ++k) {
        q_stack.segment<12>(12 * k) = cfg.q_weights;
        ref_stack.segment<12>(12 * k) = ref[k].stacked();
    }
    out.qp.hessian = 2.0 * (out.su.transpose() * q_stack.asDiagonal() * out.su);
    out.qp.hessian.diagonal().array() += 2.0 * cfg.r_weight;
    out.qp.gradient =
        2.0 * out.su.transpose() * q_stack.cwiseProduct(out.free_state - ref_stack);
    out.qp.hessian = 0.5 * (out.qp.hessian + out.qp.hessian.transpose());

    // Cone and bound rows act on the force variables directly.
    const FrictionCone cone = friction_cone_rows(ref.front().euler.z(), plane, cfg.friction_mu);
    std::vector<Eigen::RowVectorXd> rows;
    std::vector<double> lo, hi;
    const auto add_row = [&](const Eigen::RowVectorXd& r, double l, double u) {
        rows.push_back(r);
        lo.push_back(l);
        hi.push_back(u);
    };
    for (int k = 0; k < n_steps; ++k) {
        for (int leg = 0; leg < 4; ++leg) {
            const int off = out.var_offset[k][leg];
            if (off < 0) continue;
            for (int face = 0; face < 4; ++face) {
                Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(nv);
                r.segment<3>(off) = cone.pyramid.row(face);
                add_row(r, -kInf, 0.0);
            }
            Eigen::RowVectorXd rn = Eigen::RowVectorXd::Zero(nv);
            rn.segment<3>(off) = cone.normal.transpose();
            add_row(rn, -kInf, cfg.f_max);
            Eigen::RowVectorXd rn2 = -rn;
            add_row(rn2, -kInf, -cfg.f_min);
        }
    }

    // CBF rows: coeffs . z >= bound over [X[0]..X[N]] becomes a row over the
    // force variables; X[0] and gravity terms fold into the bound.
    for (const CbfRow& row : cbf_rows) {
        Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(nv);
        double bound = row.bound;
        for (const auto& [idx, value] : row.coeffs) {
            const int step = idx / 12;
            const int dim = idx % 12;
            if (step == 0) {
                bound -= value * x0.stacked()(dim);
            } else {
                const int si = 12 * (step - 1) + dim;
                if (si >= 12 * n_steps)
                    throw DimensionMismatch("CBF row references step beyond horizon");
                r += value * out.su.row(si);
                bound -= value * out.free_state(si);
            }
        }
        // coeffs . z >= bound  ->  bound <= r u <= inf.
        Eigen::RowVectorXd rr = r;
        add_row(rr, bound, kInf);
    }

    const int m = static_cast<int>(rows.size());
    out.qp.constraints = MatX::Zero(m, nv);
    out.qp.lower = VecX::Zero(m);
    out.qp.upper = VecX::Zero(m);
    for (int i = 0; i < m; ++i) {
        out.qp.constraints.row(i) = rows[i];
        out.qp.lower(i) = lo[i];
        out.qp.upper(i) = hi[i];
    }
    out.qp.check_dims();
    return out;
}

struct MpcResult {
    QpStatus status = QpStatus::kMaxIterations;
    std::vector<std::array<Vec3, 4>> forces;  // per step, per leg (zeros for swing)
    std::vector<MpcState> predicted;          // X[1..N]
    double objective = 0.0;
    double kkt_residual = 0.0;
    int iterations = 0;
    int active_cbf_rows = 0;
    int dropped_cbf_steps = 0;        // horizon steps whose CBF rows were dropped
    bool zero_velocity_fallback = false;
};

/// Wraps assembly, the QP solve, warm starting and the infeasibility
/// fallback (drop far-horizon CBF rows first; never the k=0 rows; command
/// zero velocity if even those cannot be satisfied).
class MpcController {
  public:
    explicit MpcController(MpcConfig cfg, QpSettings qp_settings = make_default_settings())
        : cfg_(std::move(cfg)), qp_settings_(qp_settings) {}

    static QpSettings make_default_settings() {
        QpSettings st;
        st.eps_abs = 1e-7;
        st.eps_rel = 1e-7;
        st.max_iter = 2000;
        return st;
    }

    const MpcConfig& config() const { return cfg_; }

    MpcResult solve(const MpcState& x0, const std::vector<MpcState>& ref,
                    const GaitSchedule& gait, std::vector<CbfRow> cbf_rows,
                    const PlaneParams& plane, const std::array<Vec3, 4>& foot_positions) {
        int max_step = 0;
        for (const CbfRow& row : cbf_rows) max_step = std::max(max_step, row.step);

        MpcResult result;
        while (true) {
            CondensedMpc mpc = assemble_qp(x0, ref, gait, cbf_rows, cfg_, plane, foot_positions);
            const bool can_warm = warm_x_.size() == mpc.num_vars &&
                                  warm_y_.size() == mpc.qp.num_rows();
            const QpSolution sol =
                solve_qp(mpc.qp, qp_settings_, can_warm ? &warm_x_ : nullptr,
                         can_warm ? &warm_y_ : nullptr);

            if (sol.status == QpStatus::kSolved || sol.status == QpStatus::kMaxIterations) {
                warm_x_ = sol.x;
                warm_y_ = sol.y;
                fill_result(result, mpc, sol, static_cast<int>(cbf_rows.size()));
                return result;
            }

            // Infeasible: drop the farthest-horizon CBF rows and retry.
            if (max_step > 0) {
                const int drop = max_step;
                std::erase_if(cbf_rows, [&](const CbfRow& r) { return r.step >= drop; });
                ++result.dropped_cbf_steps;
                --max_step;
                continue;
            }
            result.status = sol.status;
            result.zero_velocity_fallback = true;
            return result;
        }
    }

  private:
    void fill_result(MpcResult& result, const CondensedMpc& mpc, const QpSolution& sol,
                     int num_cbf_rows) const {
        result.status = sol.status;
        result.objective = sol.objective;
        result.kkt_residual = sol.kkt_residual();
        result.iterations = sol.iterations;
        result.active_cbf_rows = num_cbf_rows;
        result.forces.assign(mpc.horizon, {Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()});
        for (int k = 0; k < mpc.horizon; ++k)
            for (int leg = 0; leg < 4; ++leg) {
                const int off = mpc.var_offset[k][leg];
                if (off >= 0) result.forces[k][leg] = sol.x.segment<3>(off);
            }
        const VecX x_stack = mpc.free_state + mpc.su * sol.x;
        result.predicted.resize(mpc.horizon);
        for (int k = 0; k < mpc.horizon; ++k)
            result.predicted[k] =
                MpcState::from_stacked(x_stack.segment<12>(12 * k));
    }

    MpcConfig cfg_;
    QpSettings qp_settings_;
    VecX warm_x_;
    VecX warm_y_;
};

}  // namespace proprio
