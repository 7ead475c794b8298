#pragma once

#include "swarm_nmpc/types.hpp"

#include <optional>
#include <vector>

namespace swarm_nmpc {

/// Euclidean-norm ball B(center, radius). Workspace, obstacles and agent
/// bodies are all balls; the constraint-tightening algebra stays exact on
/// them. A zero radius denotes the degenerate single-point ball that can
/// result from erosion; scenario entities are validated to be strictly
/// positive separately.
struct Ball {
    Vec center;
    double radius = 0.0;

    Ball() = default;
    Ball(Vec c, double r);

    int dim() const { return static_cast<int>(center.size()); }

    /// Region containment: this subset of other, i.e.
    /// ||c_this - c_other|| + r_this <= r_other + tol.
    bool contained_in(const Ball& other, double tol = 0.0) const;
};

/// B(c1,r1) (+) B(c2,r2) = B(c1+c2, r1+r2); exact for norm balls.
Ball ball_minkowski_sum(const Ball& a, const Ball& b);

/// Erosion of a by an origin-centered ball b: B(c1, r1 - r2) when r1 >= r2,
/// empty (nullopt) otherwise. A nonzero b.center is rejected: the tightening
/// sets are origin-centered by construction, so general erosion is never
/// needed and supporting it would cost exactness.
std::optional<Ball> ball_pontryagin_diff(const Ball& a, const Ball& b);

/// Closed 1-D interval [lo, hi]; the exact oracle for set-algebra property
/// tests. An std::optional<Interval> that is nullopt denotes the empty set.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    Interval() = default;
    Interval(double l, double h);

    double width() const { return hi - lo; }
    bool operator==(const Interval& o) const { return lo == o.lo && hi == o.hi; }
};

using MaybeInterval = std::optional<Interval>;

MaybeInterval interval_minkowski_sum(const MaybeInterval& a, const MaybeInterval& b);

/// [a,b] erosion by [c,d] = [a-c, b-d], empty when the subtrahend is wider.
/// Erosion BY the empty set is not representable as an interval and is never
/// needed here; it throws.
MaybeInterval interval_pontryagin_diff(const MaybeInterval& a, const MaybeInterval& b);

/// Evaluates both candidate right-hand sides of the set identity
///   (S1 - S2) (+) (S2 - S3) = ?
/// against the exact left-hand side: the form with (S3 (+) S3) as printed in
/// the identity's statement, and the form with (S2 (+) S3) that its proof
/// actually derives. Both are reported; neither is assumed correct.
struct SetIdentityReport {
    MaybeInterval lhs;
    MaybeInterval rhs_stated;  // (S1 (+) S2) - (S3 (+) S3)
    MaybeInterval rhs_proof;   // (S1 (+) S2) - (S2 (+) S3)
    bool stated_holds = false;
    bool proof_holds = false;
};

SetIdentityReport interval_set_identity_check(const Interval& s1, const Interval& s2,
                                              const Interval& s3);

}  // namespace swarm_nmpc
