#pragma once

#include "airfuse/types.hpp"

namespace airfuse::predicates {

/// Floating-point value of det[b-a, c-a, d-a] (six times the signed volume).
/// Positive when d lies on the side of plane abc toward which (b-a)x(c-a) points.
double orient_value(const Point3& a, const Point3& b, const Point3& c, const Point3& d);

/// Exact sign of orient_value (floating filter, rational fallback).
int orient(const Point3& a, const Point3& b, const Point3& c, const Point3& d);

/// Exact in-sphere sign: > 0 when e is strictly inside the circumsphere of
/// the positively oriented tetrahedron abcd, < 0 outside, 0 on it.
int insphere(const Point3& a, const Point3& b, const Point3& c, const Point3& d, const Point3& e);

/// insphere with symbolic perturbation: never 0 when e differs from a..d
/// and abcd is not flat. Ties are broken by lexicographic (x, y, z) order of
/// the five points, so the decision only depends on the point coordinates.
int insphere_perturbed(const Point3& a, const Point3& b, const Point3& c, const Point3& d, const Point3& e);

/// For e in the plane of triangle abc: > 0 if e is inside abc's circumcircle,
/// < 0 outside. Cocircular ties are perturbed like insphere_perturbed.
int incircle_coplanar_perturbed(const Point3& a, const Point3& b, const Point3& c, const Point3& e);

/// Exact test whether three points lie on a common line.
bool collinear(const Point3& a, const Point3& b, const Point3& c);

/// Strict lexicographic (x, y, z) order used by the perturbation rules.
bool lex_less(const Point3& a, const Point3& b);

}  // namespace airfuse::predicates
