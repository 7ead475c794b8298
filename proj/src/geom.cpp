#include "swarm_nmpc/geom.hpp"

namespace swarm_nmpc {

Ball::Ball(Vec c, double r) : center(std::move(c)), radius(r) {
    if (!(radius >= 0.0)) {
        throw std::invalid_argument("Ball: radius must be non-negative, got " +
                                    std::to_string(r));
    }
}

bool Ball::contained_in(const Ball& other, double tol) const {
    if (dim() != other.dim()) {
        throw std::invalid_argument("Ball::contained_in: dimension mismatch");
    }
    return (center - other.center).norm() + radius <= other.radius + tol;
}

Ball ball_minkowski_sum(const Ball& a, const Ball& b) {
    if (a.dim() != b.dim()) {
        throw std::invalid_argument("ball_minkowski_sum: dimension mismatch");
    }
    return Ball(a.center + b.center, a.radius + b.radius);
}

std::optional<Ball> ball_pontryagin_diff(const Ball& a, const Ball& b) {
    if (a.dim() != b.dim()) {
        throw std::invalid_argument("ball_pontryagin_diff: dimension mismatch");
    }
    if (!b.center.isZero(0.0)) {
        throw std::invalid_argument(
            "ball_pontryagin_diff: only origin-centered erosion is supported");
    }
    if (a.radius < b.radius) {
        return std::nullopt;  // over-erosion: empty set, not an error
    }
    return Ball(a.center, a.radius - b.radius);
}

Interval::Interval(double l, double h) : lo(l), hi(h) {
    if (!(lo <= hi)) {
        throw std::invalid_argument("Interval: requires lo <= hi");
    }
}

MaybeInterval interval_minkowski_sum(const MaybeInterval& a, const MaybeInterval& b) {
    if (!a || !b) return std::nullopt;
    return Interval(a->lo + b->lo, a->hi + b->hi);
}

MaybeInterval interval_pontryagin_diff(const MaybeInterval& a, const MaybeInterval& b) {
    if (!b) {
        throw std::logic_error("interval_pontryagin_diff: erosion by the empty set");
    }
    if (!a) return std::nullopt;
    const double lo = a->lo - b->lo;
    const double hi = a->hi - b->hi;
    if (lo > hi) return std::nullopt;
    return Interval(lo, hi);
}

namespace {

bool same_set(const MaybeInterval& a, const MaybeInterval& b) {
    if (!a && !b) return true;
    if (!a || !b) return false;
    return *a == *b;
}

}  // namespace

SetIdentityReport interval_set_identity_check(const Interval& s1, const Interval& s2,
                                              const Interval& s3) {
    SetIdentityReport rep;
    rep.lhs = interval_minkowski_sum(interval_pontryagin_diff(s1, s2),
                                     interval_pontryagin_diff(s2, s3));
    const MaybeInterval s1_plus_s2 = interval_minkowski_sum(s1, s2);
    rep.rhs_stated =
        interval_pontryagin_diff(s1_plus_s2, interval_minkowski_sum(s3, s3));
    rep.rhs_proof =
        interval_pontryagin_diff(s1_plus_s2, interval_minkowski_sum(s2, s3));
    rep.stated_holds = same_set(rep.lhs, rep.rhs_stated);
    rep.proof_holds = same_set(rep.lhs, rep.rhs_proof);
    return rep;
}

}  // namespace swarm_nmpc
