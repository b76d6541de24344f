#pragma once

#include <limits>
#include <vector>

#include "proprio/common.hpp"

namespace proprio {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Convex QP: min 0.5 x'Hx + g'x  s.t.  lower <= A x <= upper.
/// Equality rows use lower == upper.
struct QpProblem {
    MatX hessian;
    VecX gradient;
    MatX constraints;  // m x n, may have m == 0
    VecX lower;
    VecX upper;

    int num_vars() const { return static_cast<int>(gradient.size()); }
    int num_rows() const { return static_cast<int>(constraints.rows()); }

    void check_dims() const {
        const int n = num_vars();
        if (hessian.rows() != n || hessian.cols() != n)
            throw DimensionMismatch("hessian dims");
        if (constraints.size() > 0 && constraints.cols() != n)
            throw DimensionMismatch("constraint cols");
        if (lower.size() != constraints.rows() || upper.size() != constraints.rows())
            throw DimensionMismatch("bound sizes");
    }

    /// Symmetry within 1e-9 and PSD within 1e-9 (eigenvalue check; intended
    /// for tests and assembly-time validation, not the solve hot path).
    void validate() const {
        check_dims();
        if ((hessian - hessian.transpose()).cwiseAbs().maxCoeff() > 1e-9)
            throw std::invalid_argument("hessian not symmetric");
        Eigen::SelfAdjointEigenSolver<MatX> eig(hessian);
        if (eig.eigenvalues().minCoeff() < -1e-9)
            throw std::invalid_argument("hessian not PSD");
    }
};

enum class QpStatus { kSolved, kMaxIterations, kPrimalInfeasible, kDualInfeasible };

struct QpSolution {
    QpStatus status = QpStatus::kMaxIterations;
    VecX x;
    VecX y;  // row multipliers: y > 0 at upper bounds, y < 0 at lower bounds
    double objective = 0.0;
    double kkt_stationarity = 0.0;
    double kkt_primal = 0.0;
    double kkt_complementarity = 0.0;
    int iterations = 0;
    bool polished = false;

    double kkt_residual() const {
        return std::max({kkt_stationarity, kkt_primal, kkt_complementarity});
    }
};

struct QpSettings {
    double rho = 0.1;
    double rho_eq_scale = 1e3;
    double sigma = 1e-6;
    double alpha = 1.6;
    double eps_abs = 1e-9;
    double eps_rel = 1e-9;
    double eps_infeasible = 1e-8;
    int max_iter = 4000;
    int check_interval = 25;
    bool scaling = true;
    int ruiz_iters = 10;
    bool adaptive_rho = true;
    bool polish = true;
    double polish_reg = 1e-9;
    int refine_steps = 3;
};

namespace detail {

struct QpWork {
    // Scaled problem data.
    MatX p;
    VecX q;
    MatX a;
    VecX l, u;
    // Scalings: x = d .* x_scaled, y = (e .* y_scaled) / c.
    VecX d, e;
    double c = 1.0;
    VecX rho;
    Eigen::LDLT<MatX> kkt;

    void factor(double sigma) {
        MatX m = p;
        m.diagonal().array() += sigma;
        if (a.rows() > 0) m.noalias() += a.transpose() * rho.asDiagonal() * a;
        kkt.compute(m);
    }
};

/// Modified Ruiz equilibration with cost normalization.
inline void ruiz_scale(QpWork& w, int iters) {
    const int n = static_cast<int>(w.q.size());
    const int m = static_cast<int>(w.a.rows());
    w.d = VecX::Ones(n);
    w.e = VecX::Ones(m);
    w.c = 1.0;
    for (int it = 0; it < iters; ++it) {
        VecX dj(n), ei(m);
        for (int j = 0; j < n; ++j) {
            double norm = w.p.col(j).cwiseAbs().maxCoeff();
            if (m > 0) norm = std::max(norm, w.a.col(j).cwiseAbs().maxCoeff());
            dj(j) = norm > 1e-12 ? 1.0 / std::sqrt(norm) : 1.0;
        }
        for (int i = 0; i < m; ++i) {
            const double norm = w.a.row(i).cwiseAbs().maxCoeff();
            ei(i) = norm > 1e-12 ? 1.0 / std::sqrt(norm) : 1.0;
        }
        w.p = dj.asDiagonal() * w.p * dj.asDiagonal();
        w.q = dj.asDiagonal() * w.q;
        if (m > 0) {
            w.a = ei.asDiagonal() * w.a * dj.asDiagonal();
            for (int i = 0; i < m; ++i) {
                if (std::isfinite(w.l(i))) w.l(i) *= ei(i);
                if (std::isfinite(w.u(i))) w.u(i) *= ei(i);
            }
        }
        w.d = w.d.cwiseProduct(dj);
        w.e = w.e.cwiseProduct(ei);

        double col_mean = 0.0;
        for (int j = 0; j < n; ++j) col_mean += w.p.col(j).cwiseAbs().maxCoeff();
        col_mean = n > 0 ? col_mean / n : 0.0;
        const double q_norm = w.q.cwiseAbs().maxCoeff();
        const double gamma_den = std::max(col_mean, q_norm);
        const double gamma = gamma_den > 1e-12 ? 1.0 / gamma_den : 1.0;
        w.p *= gamma;
        w.q *= gamma;
        w.c *= gamma;
    }
}

struct KktResiduals {
    double stationarity = 0.0;
    double primal = 0.0;
    double complementarity = 0.0;
    double dual_sign = 0.0;
};

inline KktResiduals kkt_residuals(const QpProblem& qp, const VecX& x, const VecX& y) {
    KktResiduals r;
    VecX stat = qp.hessian * x + qp.gradient;
    if (qp.num_rows() > 0) stat.noalias() += qp.constraints.transpose() * y;
    r.stationarity = stat.size() > 0 ? stat.cwiseAbs().maxCoeff() : 0.0;
    for (int i = 0; i < qp.num_rows(); ++i) {
        const double ax = qp.constraints.row(i).dot(x);
        r.primal = std::max({r.primal, qp.lower(i) - ax, ax - qp.upper(i)});
        if (y(i) > 0.0) {
            if (std::isfinite(qp.upper(i)))
                r.complementarity = std::max(r.complementarity, y(i) * std::abs(qp.upper(i) - ax));
            else
                r.dual_sign = std::max(r.dual_sign, y(i));
        } else if (y(i) < 0.0) {
            if (std::isfinite(qp.lower(i)))
                r.complementarity = std::max(r.complementarity, -y(i) * std::abs(ax - qp.lower(i)));
            else
                r.dual_sign = std::max(r.dual_sign, -y(i));
        }
    }
    r.primal = std::max(r.primal, 0.0);
    r.complementarity = std::max(r.complementarity, r.dual_sign);
    return r;
}

/// Equality-KKT solve on the active set with iterative refinement; returns
/// false when the polished point is worse or inconsistent.
inline bool polish(const QpProblem& qp, const QpSettings& st, QpSolution& sol) {
    const int n = qp.num_vars();
    std::vector<int> active;
    std::vector<double> active_rhs;
    std::vector<int> active_side;  // -1 lower, +1 upper, 0 equality
    for (int i = 0; i < qp.num_rows(); ++i) {
        const bool eq = qp.upper(i) - qp.lower(i) <= 1e-14;
        if (eq) {
            active.push_back(i);
            active_rhs.push_back(qp.upper(i));
            active_side.push_back(0);
        } else if (sol.y(i) < -1e-11 && std::isfinite(qp.lower(i))) {
            active.push_back(i);
            active_rhs.push_back(qp.lower(i));
            active_side.push_back(-1);
        } else if (sol.y(i) > 1e-11 && std::isfinite(qp.upper(i))) {
            active.push_back(i);
            active_rhs.push_back(qp.upper(i));
            active_side.push_back(+1);
        }
    }
    const int k = static_cast<int>(active.size());
    MatX kkt = MatX::Zero(n + k, n + k);
    kkt.topLeftCorner(n, n) = qp.hessian;
    kkt.topLeftCorner(n, n).diagonal().array() += st.polish_reg;
    for (int j = 0; j < k; ++j) {
        kkt.block(n + j, 0, 1, n) = qp.constraints.row(active[j]);
        kkt.block(0, n + j, n, 1) = qp.constraints.row(active[j]).transpose();
        kkt(n + j, n + j) = -st.polish_reg;
    }
    VecX rhs(n + k);
    rhs.head(n) = -qp.gradient;
    for (int j = 0; j < k; ++j) rhs(n + j) = active_rhs[j];

    Eigen::LDLT<MatX> fact(kkt);
    if (fact.info() != Eigen::Success) return false;
    VecX t = fact.solve(rhs);
    // Refine against the unregularized KKT system.
    MatX kkt0 = kkt;
    kkt0.topLeftCorner(n, n).diagonal().array() -= st.polish_reg;
    for (int j = 0; j < k; ++j) kkt0(n + j, n + j) = 0.0;
    for (int step = 0; step < st.refine_steps; ++step) {
        const VecX resid = rhs - kkt0 * t;
        t += fact.solve(resid);
    }

    VecX x = t.head(n);
    VecX y = VecX::Zero(qp.num_rows());
    bool sign_ok = true;
    for (int j = 0; j < k; ++j) {
        const double mult = t(n + j);
        if (active_side[j] == -1 && mult > 1e-8) sign_ok = false;
        if (active_side[j] == +1 && mult < -1e-8) sign_ok = false;
        y(active[j]) = mult;
    }
    if (!sign_ok || !x.allFinite() || !y.allFinite()) return false;

    const KktResiduals res = kkt_residuals(qp, x, y);
    const double new_max = std::max({res.stationarity, res.primal, res.complementarity});
    const double old_max =
        std::max({sol.kkt_stationarity, sol.kkt_primal, sol.kkt_complementarity});
    if (new_max >= old_max) return false;

    sol.x = x;
    sol.y = y;
    sol.kkt_stationarity = res.stationarity;
    sol.kkt_primal = res.primal;
    sol.kkt_complementarity = res.complementarity;
    sol.polished = true;
    return true;
}

}  // namespace detail

/// ADMM (operator-splitting) QP solver with Ruiz equilibration, adaptive
/// step size, infeasibility certificates and an active-set polish step.
/// Deterministic for identical inputs.
inline QpSolution solve_qp(const QpProblem& qp, const QpSettings& st = {},
                           const VecX* x_warm = nullptr, const VecX* y_warm = nullptr) {
    qp.check_dims();
    const int n = qp.num_vars();
    const int m = qp.num_rows();

    QpSolution sol;
    sol.x = VecX::Zero(n);
    sol.y = VecX::Zero(m);

    if (m == 0) {
        MatX h = qp.hessian;
        h.diagonal().array() += 1e-12;
        sol.x = h.ldlt().solve(-qp.gradient);
        sol.status = QpStatus::kSolved;
        const detail::KktResiduals res = detail::kkt_residuals(qp, sol.x, sol.y);
        sol.kkt_stationarity = res.stationarity;
        sol.objective = 0.5 * sol.x.dot(qp.hessian * sol.x) + qp.gradient.dot(sol.x);
        return sol;
    }

    detail::QpWork w;
    w.p = qp.hessian;
    w.q = qp.gradient;
    w.a = qp.constraints;
    w.l = qp.lower;
    w.u = qp.upper;
    if (st.scaling) {
        detail::ruiz_scale(w, st.ruiz_iters);
    } else {
        w.d = VecX::Ones(n);
        w.e = VecX::Ones(m);
        w.c = 1.0;
    }

    w.rho = VecX::Constant(m, st.rho);
    for (int i = 0; i < m; ++i)
        if (w.u(i) - w.l(i) <= 1e-14) w.rho(i) *= st.rho_eq_scale;
    w.factor(st.sigma);

    // Scaled iterates.
    VecX x = VecX::Zero(n), z = VecX::Zero(m), y = VecX::Zero(m);
    if (x_warm && x_warm->size() == n) x = w.d.cwiseInverse().cwiseProduct(*x_warm);
    if (y_warm && y_warm->size() == m) y = w.c * w.e.cwiseInverse().cwiseProduct(*y_warm);
    if (m > 0) z = (w.a * x).cwiseMax(w.l).cwiseMin(w.u);

    VecX x_prev_check = x, y_prev_check = y;
    int rho_updates = 0;

    const auto unscale_x = [&](const VecX& xs) { return w.d.cwiseProduct(xs).eval(); };
    const auto unscale_y = [&](const VecX& ys) {
        return (w.e.cwiseProduct(ys) / w.c).eval();
    };

    for (int iter = 1; iter <= st.max_iter; ++iter) {
        const VecX rhs = st.sigma * x - w.q + w.a.transpose() * (w.rho.cwiseProduct(z) - y);
        const VecX x_tilde = w.kkt.solve(rhs);
        const VecX z_tilde = w.a * x_tilde;
        const VecX x_next = st.alpha * x_tilde + (1.0 - st.alpha) * x;
        const VecX z_relaxed = st.alpha * z_tilde + (1.0 - st.alpha) * z;
        const VecX z_next =
            (z_relaxed + y.cwiseQuotient(w.rho)).cwiseMax(w.l).cwiseMin(w.u);
        y += w.rho.cwiseProduct(z_relaxed - z_next);
        x = x_next;
        z = z_next;
        sol.iterations = iter;

        if (iter % st.check_interval != 0 && iter != st.max_iter) continue;

        const VecX xu = unscale_x(x);
        const VecX yu = unscale_y(y);
        const VecX zu = w.e.cwiseInverse().cwiseProduct(z);
        const VecX ax = qp.constraints * xu;
        const double r_prim = (ax - zu).cwiseAbs().maxCoeff();
        VecX dual_vec = qp.hessian * xu + qp.gradient + qp.constraints.transpose() * yu;
        const double r_dual = dual_vec.cwiseAbs().maxCoeff();
        const double eps_prim =
            st.eps_abs + st.eps_rel * std::max(ax.cwiseAbs().maxCoeff(), zu.cwiseAbs().maxCoeff());
        const double eps_dual =
            st.eps_abs +
            st.eps_rel * std::max({(qp.hessian * xu).cwiseAbs().maxCoeff(),
                                   qp.gradient.cwiseAbs().maxCoeff(),
                                   (qp.constraints.transpose() * yu).cwiseAbs().maxCoeff()});
        if (r_prim <= eps_prim && r_dual <= eps_dual) {
            sol.status = QpStatus::kSolved;
            sol.x = xu;
            sol.y = yu;
            break;
        }

        // Infeasibility certificates from the iterate deltas.
        const VecX dy = unscale_y(y) - unscale_y(y_prev_check);
        const double dy_norm = dy.cwiseAbs().maxCoeff();
        if (dy_norm > 1e-12) {
            bool cert = (qp.constraints.transpose() * dy).cwiseAbs().maxCoeff() <=
                        st.eps_infeasible * dy_norm;
            double support = 0.0;
            for (int i = 0; i < m && cert; ++i) {
                if (dy(i) > 0.0) {
                    if (!std::isfinite(qp.upper(i))) {
                        if (dy(i) > st.eps_infeasible * dy_norm) cert = false;
                    } else {
                        support += qp.upper(i) * dy(i);
                    }
                } else if (dy(i) < 0.0) {
                    if (!std::isfinite(qp.lower(i))) {
                        if (-dy(i) > st.eps_infeasible * dy_norm) cert = false;
                    } else {
                        support += qp.lower(i) * dy(i);
                    }
                }
            }
            if (cert && support < -st.eps_infeasible * dy_norm) {
                sol.status = QpStatus::kPrimalInfeasible;
                sol.x = unscale_x(x);
                sol.y = unscale_y(y);
                return sol;
            }
        }
        const VecX dx = unscale_x(x) - unscale_x(x_prev_check);
        const double dx_norm = dx.cwiseAbs().maxCoeff();
        if (dx_norm > 1e-12) {
            bool cert = (qp.hessian * dx).cwiseAbs().maxCoeff() <= st.eps_infeasible * dx_norm &&
                        qp.gradient.dot(dx) < -st.eps_infeasible * dx_norm;
            const VecX adx = qp.constraints * dx;
            for (int i = 0; i < m && cert; ++i) {
                if (std::isfinite(qp.upper(i)) && adx(i) > st.eps_infeasible * dx_norm) cert = false;
                if (std::isfinite(qp.lower(i)) && adx(i) < -st.eps_infeasible * dx_norm)
                    cert = false;
            }
            if (cert) {
                sol.status = QpStatus::kDualInfeasible;
                sol.x = unscale_x(x);
                sol.y = unscale_y(y);
                return sol;
            }
        }
        x_prev_check = x;
        y_prev_check = y;

        if (st.adaptive_rho && rho_updates < 10 && iter < st.max_iter) {
            const double prim_rel = r_prim / std::max(
                1e-12, std::max(ax.cwiseAbs().maxCoeff(), zu.cwiseAbs().maxCoeff()));
            const double dual_rel =
                r_dual / std::max(1e-12, std::max({(qp.hessian * xu).cwiseAbs().maxCoeff(),
                                                   qp.gradient.cwiseAbs().maxCoeff(),
                                                   (qp.constraints.transpose() * yu)
                                                       .cwiseAbs()
                                                       .maxCoeff()}));
            const double ratio = std::sqrt(prim_rel / std::max(dual_rel, 1e-16));
            if (ratio > 5.0 || ratio < 0.2) {
                w.rho *= std::clamp(ratio, 1e-4, 1e4);
                w.rho = w.rho.cwiseMax(1e-6).cwiseMin(1e6);
                w.factor(st.sigma);
                ++rho_updates;
            }
        }
    }

    if (sol.status != QpStatus::kSolved) {
        sol.x = unscale_x(x);
        sol.y = unscale_y(y);
    }

    detail::KktResiduals res = detail::kkt_residuals(qp, sol.x, sol.y);
    sol.kkt_stationarity = res.stationarity;
    sol.kkt_primal = res.primal;
    sol.kkt_complementarity = res.complementarity;
    if (st.polish) detail::polish(qp, st, sol);
    if (sol.status == QpStatus::kMaxIterations && sol.kkt_residual() <= 1e-8)
        sol.status = QpStatus::kSolved;
    sol.objective = 0.5 * sol.x.dot(qp.hessian * sol.x) + qp.gradient.dot(sol.x);
    return sol;
}

}  // namespace proprio
