#include "swarm_nmpc/ocp.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

namespace swarm_nmpc {

namespace {

void require_symmetric(const Mat& M, const std::string& name) {
    if (M.rows() != M.cols()) throw std::invalid_argument(name + " must be square");
    const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
    if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        throw std::invalid_argument(name + " must be symmetric");
    }
}

double min_eigenvalue(const Mat& M) {
    Eigen::SelfAdjointEigenSolver<Mat> es(M);
    return es.eigenvalues().minCoeff();
}

double max_singular_value(const Mat& M) {
    Eigen::SelfAdjointEigenSolver<Mat> es(M);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

FhocpConfig make_fhocp_config(Mat Q, Mat R, Mat P, double h, double horizon,
                              double eps_psi, double eps_omega, Mat K,
                              int rollout_substeps) {
    require_symmetric(Q, "Q");
    require_symmetric(R, "R");
    require_symmetric(P, "P");
    if (min_eigenvalue(Q) < -1e-10) throw std::invalid_argument("Q must be positive semi-definite");
    if (min_eigenvalue(R) <= 0.0) throw std::invalid_argument("R must be positive definite");
    if (min_eigenvalue(P) <= 0.0) throw std::invalid_argument("P must be positive definite");
    if (!(h > 0.0) || !(horizon > h)) throw std::invalid_argument("requires 0 < h < T_p");
    const double segs = horizon / h;
    if (std::abs(segs - std::lround(segs)) > 1e-9 * segs) {
        throw std::invalid_argument("T_p must be an integer multiple of h");
    }
    if (!(eps_omega > 0.0) || !(eps_psi > eps_omega)) {
        throw std::invalid_argument("requires eps_psi > eps_omega > 0");
    }
    if (K.rows() != R.rows() || K.cols() != Q.rows()) {
        throw std::invalid_argument("K must be input_dim x state_dim");
    }
    if (rollout_substeps < 1) throw std::invalid_argument("rollout_substeps must be >= 1");

    FhocpConfig cfg;
    cfg.Q = std::move(Q);
    cfg.R = std::move(R);
    cfg.P = std::move(P);
    cfg.h = h;
    cfg.horizon = horizon;
    cfg.eps_psi = eps_psi;
    cfg.eps_omega = eps_omega;
    cfg.K = std::move(K);
    cfg.rollout_substeps = rollout_substeps;
    return cfg;
}

double running_cost(const FhocpConfig& cfg, const Vec& e, const Vec& u) {
    if (e.size() != cfg.state_dim() || u.size() != cfg.input_dim()) {
        throw std::invalid_argument("running_cost: dimension mismatch");
    }
    return e.dot(cfg.Q * e) + u.dot(cfg.R * u);
}

double terminal_cost(const FhocpConfig& cfg, const Vec& e) {
    if (e.size() != cfg.state_dim()) {
        throw std::invalid_argument("terminal_cost: dimension mismatch");
    }
    return e.dot(cfg.P * e);
}

Vec terminal_controller(const FhocpConfig& cfg, const Vec& e, double input_bound) {
    Vec u = cfg.K * e;
    const double norm = u.norm();
    if (norm > input_bound) u *= input_bound / norm;
    return u;
}

CostConstants compute_cost_constants(const FhocpConfig& cfg, double lipschitz_g,
                                     double error_norm_bound) {
    if (!(lipschitz_g > 0.0)) throw std::invalid_argument("lipschitz_g must be > 0");
    if (!(error_norm_bound > 0.0)) throw std::invalid_argument("error_norm_bound must be > 0");
    CostConstants c;
    const double sup_psi = std::sqrt(cfg.eps_psi / min_eigenvalue(cfg.P));
    c.lipschitz_running = 2.0 * max_singular_value(cfg.Q) * error_norm_bound;
    c.lipschitz_terminal = 2.0 * max_singular_value(cfg.P) * sup_psi;
    c.rho = std::min(min_eigenvalue(cfg.Q), min_eigenvalue(cfg.R));
    const double l = lipschitz_g;
    const double tail = std::expm1(l * (cfg.horizon - cfg.h));
    c.xi = (std::expm1(l * cfg.h) / l) *
           ((c.lipschitz_terminal + c.lipschitz_running / l) * tail + c.lipschitz_terminal);
    return c;
}

DisturbanceBoundReport check_disturbance_bound(const FhocpConfig& cfg, double lipschitz_g,
                                               double w_bound, const CostConstants& constants) {
    const double l = lipschitz_g;
    const double denom = (constants.lipschitz_terminal / l) * std::expm1(l * cfg.h) *
                         std::exp(l * (cfg.horizon - cfg.h));
    DisturbanceBoundReport rep;
    rep.rhs = (cfg.eps_psi - cfg.eps_omega) / denom;
    rep.satisfied = w_bound <= rep.rhs;
    return rep;
}

namespace {

// State with V(e) = level on the ellipsoid boundary: e = L^{-T} (sqrt(level) v)
// for unit v, where P = L L^T.
Vec on_level_set(const Eigen::LLT<Mat>& llt, double level, const Vec& unit_dir) {
    const Vec y = std::sqrt(level) * unit_dir;
    return llt.matrixU().solve(y);
}

}  // namespace

TerminalRegionReport verify_terminal_region(const FhocpConfig& cfg, const ErrorDynamics& ed,
                                            double input_bound, int samples,
                                            std::uint64_t seed) {
    if (samples < 1) throw std::invalid_argument("verify_terminal_region: samples >= 1");
    const int n = cfg.state_dim();
    Eigen::LLT<Mat> llt(cfg.P);
    if (llt.info() != Eigen::Success) {
        throw std::invalid_argument("verify_terminal_region: P not positive definite");
    }
    Rng rng(seed);
    const int substeps = 50;
    const double dt = cfg.h / substeps;

    TerminalRegionReport rep;
    rep.worst_input_margin = std::numeric_limits<double>::infinity();
    rep.worst_decrease_value = -std::numeric_limits<double>::infinity();
    rep.worst_reach_value = -std::numeric_limits<double>::infinity();
    rep.worst_invariance_value = -std::numeric_limits<double>::infinity();

    const auto feedback_rollout = [&](Vec e, double& min_v, double& max_v) {
        min_v = terminal_cost(cfg, e);
        max_v = min_v;
        for (int k = 0; k < substeps; ++k) {
            const Vec u = terminal_controller(cfg, e, input_bound);
            e = rk4_step([&](const Vec& s) { return ed.eval(s, u); }, e, dt);
            const double v = terminal_cost(cfg, e);
            min_v = std::min(min_v, v);
            max_v = std::max(max_v, v);
        }
    };

    for (int k = 0; k < samples; ++k) {
        const Vec dir = rng.unit_vector(n);
        // boundary and interior of Psi for (a) and (b); boundary for (c)
        const double level = (k % 4 == 0) ? cfg.eps_psi : cfg.eps_psi * rng.next_unit();
        const Vec e = on_level_set(llt, std::max(level, 1e-300), dir);

        const Vec u = terminal_controller(cfg, e, input_bound);
        rep.worst_input_margin =
            std::min(rep.worst_input_margin, input_bound - (cfg.K * e).norm());
        const Vec grad_v = 2.0 * (cfg.P * e);
        const double decrease = grad_v.dot(ed.eval(e, u)) + running_cost(cfg, e, u);
        rep.worst_decrease_value = std::max(rep.worst_decrease_value, decrease);

        const Vec e_boundary = on_level_set(llt, cfg.eps_psi, dir);
        double min_v = 0.0, max_v = 0.0;
        feedback_rollout(e_boundary, min_v, max_v);
        rep.worst_reach_value = std::max(rep.worst_reach_value, min_v);

        const Vec e_omega = on_level_set(llt, cfg.eps_omega, dir);
        feedback_rollout(e_omega, min_v, max_v);
        rep.worst_invariance_value = std::max(rep.worst_invariance_value, max_v);
    }

    const double tol = 1e-9;
    rep.input_admissible = rep.worst_input_margin >= -tol * input_bound;
    rep.decrease_holds = rep.worst_decrease_value <= tol;
    rep.reaches_omega = rep.worst_reach_value <= cfg.eps_omega * (1.0 + tol);
    rep.omega_invariant = rep.worst_invariance_value <= cfg.eps_omega * (1.0 + tol);
    return rep;
}

bool solve_care(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, Mat& P_out) {
    const int n = static_cast<int>(A.rows());
    Mat Rinv = R.inverse();
    Mat H(2 * n, 2 * n);
    H.topLeftCorner(n, n) = A;
    H.topRightCorner(n, n) = -B * Rinv * B.transpose();
    H.bottomLeftCorner(n, n) = -Q;
    H.bottomRightCorner(n, n) = -A.transpose();

    Eigen::ComplexEigenSolver<Mat> es(H);
    if (es.info() != Eigen::Success) return false;

    Eigen::MatrixXcd X1(n, n), X2(n, n);
    int found = 0;
    for (int i = 0; i < 2 * n && found < n; ++i) {
        if (es.eigenvalues()[i].real() < -1e-9) {
            X1.col(found) = es.eigenvectors().col(i).head(n);
            X2.col(found) = es.eigenvectors().col(i).tail(n);
            ++found;
        }
    }
    if (found != n) return false;  // eigenvalues on or right of the imaginary axis

    Eigen::FullPivLU<Eigen::MatrixXcd> lu(X1);
    if (!lu.isInvertible()) return false;
    Mat P = (X2 * lu.inverse()).real();
    P = 0.5 * (P + P.transpose());

    // residual and definiteness check
    const Mat residual = A.transpose() * P + P * A - P * B * Rinv * B.transpose() * P + Q;
    const double scale = std::max(1.0, P.cwiseAbs().maxCoeff());
    if (residual.cwiseAbs().maxCoeff() > 1e-6 * scale) return false;
    if (min_eigenvalue(P) <= 0.0) return false;
    P_out = P;
    return true;
}

namespace {

Mat jacobian_state(const ErrorDynamics& ed, const Vec& e0, const Vec& u0) {
    const int n = ed.state_dim();
    const double step = 1e-6;
    Mat A(n, n);
    for (int j = 0; j < n; ++j) {
        Vec ep = e0, em = e0;
        ep[j] += step;
        em[j] -= step;
        A.col(j) = (ed.eval(ep, u0) - ed.eval(em, u0)) / (2.0 * step);
    }
    return A;
}

Mat jacobian_input(const ErrorDynamics& ed, const Vec& e0, const Vec& u0) {
    const int n = ed.state_dim();
    const int m = ed.input_dim();
    const double step = 1e-6;
    Mat B(n, m);
    for (int j = 0; j < m; ++j) {
        Vec up = u0, um = u0;
        up[j] += step;
        um[j] -= step;
        B.col(j) = (ed.eval(e0, up) - ed.eval(e0, um)) / (2.0 * step);
    }
    return B;
}

}  // namespace

TerminalDesign design_terminal_ingredients(const ErrorDynamics& ed, const Mat& Q, const Mat& R,
                                           double input_bound, double h,
                                           int samples, std::uint64_t seed) {
    TerminalDesign out;
    const int n = ed.state_dim();
    const Vec e0 = Vec::Zero(n);
    const Vec u0 = Vec::Zero(ed.input_dim());
    const Mat A = jacobian_state(ed, e0, u0);
    const Mat B = jacobian_input(ed, e0, u0);

    Mat Q_lqr = Q;
    if (min_eigenvalue(Q_lqr) < 1e-9) Q_lqr += 1e-6 * Mat::Identity(n, n);

    Mat P_care;
    if (!solve_care(A, B, Q_lqr, R, P_care)) return out;  // stabilizable stays false

    out.K = -(R.inverse() * B.transpose() * P_care);
    // Scaling the Riccati solution up gives the decrease inequality a strict
    // margin at linear order, which the bisection then trades against the
    // nonlinear remainder.
    out.P = 1.5 * P_care;

    const Mat Acl = A + B * out.K;
    Eigen::EigenSolver<Mat> acl_eig(Acl);
    for (int i = 0; i < n; ++i) {
        if (acl_eig.eigenvalues()[i].real() >= -1e-9) return out;
    }
    out.stabilizable = true;

    // largest level at which the feedback certifies decrease and admissibility
    const double sat_norm = input_bound / std::max(out.K.norm(), 1e-12);
    double hi = min_eigenvalue(out.P) * sat_norm * sat_norm;
    double lo = 0.0;
    const auto passes = [&](double eps_psi) {
        FhocpConfig cfg = make_fhocp_config(Q, R, out.P, h, 2.0 * h, eps_psi,
                                            0.5 * eps_psi, out.K, 10);
        const TerminalRegionReport rep =
            verify_terminal_region(cfg, ed, input_bound, samples, seed);
        return rep.input_admissible && rep.decrease_holds;
    };
    if (!passes(hi * 1e-6)) return TerminalDesign{};  // not even tiny levels pass
    double good = hi * 1e-6;
    for (int it = 0; it < 40; ++it) {
        const double mid = 0.5 * (good + hi);
        if (passes(mid)) {
            good = mid;
        } else {
            hi = mid;
        }
    }
    out.eps_psi = 0.9 * good;

    // pick Omega from what the feedback actually reaches within one period
    FhocpConfig probe = make_fhocp_config(Q, R, out.P, h, 2.0 * h, out.eps_psi,
                                          0.5 * out.eps_psi, out.K, 10);
    for (double frac : {0.5, 0.25, 0.1, 0.05}) {
        probe.eps_omega = frac * out.eps_psi;
        const TerminalRegionReport rep =
            verify_terminal_region(probe, ed, input_bound, samples, seed);
        if (rep.all_ok()) {
            out.eps_omega = probe.eps_omega;
            return out;
        }
    }
    out.stabilizable = false;  // levels exist but one-period reach failed
    return out;
}

}  // namespace swarm_nmpc
