#include "airfuse/predicates.hpp"

#include <gmpxx.h>

#include <algorithm>
#include <array>
#include <cmath>

namespace airfuse::predicates {
namespace {

constexpr double kEpsilon = 0x1p-53;
constexpr double kOrientBound = (7.0 + 56.0 * kEpsilon) * kEpsilon;
constexpr double kInsphereBound = (16.0 + 224.0 * kEpsilon) * kEpsilon;

struct Q3 {
    mpq_class x, y, z;
};

Q3 exact(const Point3& p) { return {mpq_class(p.x()), mpq_class(p.y()), mpq_class(p.z())}; }
Q3 operator-(const Q3& a, const Q3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
Q3 operator+(const Q3& a, const Q3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
Q3 cross(const Q3& a, const Q3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
mpq_class dot(const Q3& a, const Q3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

int sign_of(const mpq_class& q) {
    const int s = sgn(q);
    return s > 0 ? 1 : (s < 0 ? -1 : 0);
}

int orient_exact(const Q3& a, const Q3& b, const Q3& c, const Q3& d) {
    return sign_of(dot(cross(b - a, c - a), d - a));
}

// Negated lifted 4x4 determinant, translated to e.
int insphere_exact(const Q3& a, const Q3& b, const Q3& c, const Q3& d, const Q3& e) {
    const Q3 ae = a - e, be = b - e, ce = c - e, de = d - e;
    const mpq_class ab = ae.x * be.y - be.x * ae.y;
    const mpq_class bc = be.x * ce.y - ce.x * be.y;
    const mpq_class cd = ce.x * de.y - de.x * ce.y;
    const mpq_class da = de.x * ae.y - ae.x * de.y;
    const mpq_class ac = ae.x * ce.y - ce.x * ae.y;
    const mpq_class bd = be.x * de.y - de.x * be.y;
    const mpq_class abc = ae.z * bc - be.z * ac + ce.z * ab;
    const mpq_class bcd = be.z * cd - ce.z * bd + de.z * bc;
    const mpq_class cda = ce.z * da + de.z * ac + ae.z * cd;
    const mpq_class dab = de.z * ab + ae.z * bd + be.z * da;
    const mpq_class det = (dot(de, de) * abc - dot(ce, ce) * dab) + (dot(be, be) * cda - dot(ae, ae) * bcd);
    return -sign_of(det);
}

}  // namespace

double orient_value(const Point3& a, const Point3& b, const Point3& c, const Point3& d) {
    const Vec3 u = b - a, v = c - a, w = d - a;
    return w.z() * (u.x() * v.y() - u.y() * v.x()) + w.x() * (u.y() * v.z() - u.z() * v.y()) +
           w.y() * (u.z() * v.x() - u.x() * v.z());
}

int orient(const Point3& a, const Point3& b, const Point3& c, const Point3& d) {
    const Vec3 u = b - a, v = c - a, w = d - a;
    const double uxvy = u.x() * v.y(), uyvx = u.y() * v.x();
    const double uyvz = u.y() * v.z(), uzvy = u.z() * v.y();
    const double uzvx = u.z() * v.x(), uxvz = u.x() * v.z();
    const double det = w.z() * (uxvy - uyvx) + w.x() * (uyvz - uzvy) + w.y() * (uzvx - uxvz);
    const double permanent = (std::abs(uxvy) + std::abs(uyvx)) * std::abs(w.z()) +
                             (std::abs(uyvz) + std::abs(uzvy)) * std::abs(w.x()) +
                             (std::abs(uzvx) + std::abs(uxvz)) * std::abs(w.y());
    const double bound = kOrientBound * permanent;
    if (det > bound)
        return 1;
    if (-det > bound)
        return -1;
    return orient_exact(exact(a), exact(b), exact(c), exact(d));
}

int insphere(const Point3& a, const Point3& b, const Point3& c, const Point3& d, const Point3& e) {
    const double aex = a.x() - e.x(), aey = a.y() - e.y(), aez = a.z() - e.z();
    const double bex = b.x() - e.x(), bey = b.y() - e.y(), bez = b.z() - e.z();
    const double cex = c.x() - e.x(), cey = c.y() - e.y(), cez = c.z() - e.z();
    const double dex = d.x() - e.x(), dey = d.y() - e.y(), dez = d.z() - e.z();

    const double aexbey = aex * bey, bexaey = bex * aey;
    const double bexcey = bex * cey, cexbey = cex * bey;
    const double cexdey = cex * dey, dexcey = dex * cey;
    const double dexaey = dex * aey, aexdey = aex * dey;
    const double aexcey = aex * cey, cexaey = cex * aey;
    const double bexdey = bex * dey, dexbey = dex * bey;
    const double ab = aexbey - bexaey, bc = bexcey - cexbey, cd = cexdey - dexcey;
    const double da = dexaey - aexdey, ac = aexcey - cexaey, bd = bexdey - dexbey;

    const double abc = aez * bc - bez * ac + cez * ab;
    const double bcd = bez * cd - cez * bd + dez * bc;
    const double cda = cez * da + dez * ac + aez * cd;
    const double dab = dez * ab + aez * bd + bez * da;

    const double alift = aex * aex + aey * aey + aez * aez;
    const double blift = bex * bex + bey * bey + bez * bez;
    const double clift = cex * cex + cey * cey + cez * cez;
    const double dlift = dex * dex + dey * dey + dez * dez;
    const double det = (dlift * abc - clift * dab) + (blift * cda - alift * bcd);

    using std::abs;
    const double permanent =
        ((abs(cexdey) + abs(dexcey)) * abs(bez) + (abs(dexbey) + abs(bexdey)) * abs(cez) +
         (abs(bexcey) + abs(cexbey)) * abs(dez)) * alift +
        ((abs(dexaey) + abs(aexdey)) * abs(cez) + (abs(aexcey) + abs(cexaey)) * abs(dez) +
         (abs(cexdey) + abs(dexcey)) * abs(aez)) * blift +
        ((abs(aexbey) + abs(bexaey)) * abs(dez) + (abs(bexdey) + abs(dexbey)) * abs(aez) +
         (abs(dexaey) + abs(aexdey)) * abs(bez)) * clift +
        ((abs(bexcey) + abs(cexbey)) * abs(aez) + (abs(cexaey) + abs(aexcey)) * abs(bez) +
         (abs(aexbey) + abs(bexaey)) * abs(cez)) * dlift;
    const double bound = kInsphereBound * permanent;
    if (det > bound)
        return -1;
    if (-det > bound)
        return 1;
    return insphere_exact(exact(a), exact(b), exact(c), exact(d), exact(e));
}

bool lex_less(const Point3& a, const Point3& b) {
    return std::lexicographical_compare(a.data(), a.data() + 3, b.data(), b.data() + 3);
}

int insphere_perturbed(const Point3& a, const Point3& b, const Point3& c, const Point3& d, const Point3& e) {
    const int s = insphere(a, b, c, d, e);
    if (s != 0)
        return s;
    // Cospherical: the leading non-vanishing monomial of the perturbed
    // determinant belongs to the lexicographically largest point.
    std::array<const Point3*, 5> pts{&a, &b, &c, &d, &e};
    std::sort(pts.begin(), pts.end(), [](const Point3* p, const Point3* q) { return lex_less(*p, *q); });
    for (int i = 4; i >= 0; --i) {
        const Point3* p = pts[i];
        int o = 0;
        if (p == &e)
            return -1;
        if (p == &d)
            o = orient(a, b, c, e);
        else if (p == &c)
            o = orient(a, b, e, d);
        else if (p == &b)
            o = orient(a, e, c, d);
        else
            o = orient(e, b, c, d);
        if (o != 0)
            return o;
    }
    return -1;
}

int incircle_coplanar_perturbed(const Point3& a, const Point3& b, const Point3& c, const Point3& e) {
    const Q3 qa = exact(a), qb = exact(b), qc = exact(c), qe = exact(e);
    const Q3 normal = cross(qb - qa, qc - qa);
    // The sphere through a, b, c and a point off the plane cuts the plane in
    // the circumcircle of abc.
    const int s = insphere_exact(qa, qb, qc, qa + normal, qe);
    if (s != 0)
        return s;
    auto in_plane_orient = [&](const Q3& p, const Q3& q, const Q3& r) {
        return sign_of(dot(cross(q - p, r - p), normal));
    };
    std::array<const Point3*, 4> pts{&a, &b, &c, &e};
    std::sort(pts.begin(), pts.end(), [](const Point3* p, const Point3* q) { return lex_less(*p, *q); });
    for (int i = 3; i >= 0; --i) {
        const Point3* p = pts[i];
        int o = 0;
        if (p == &e)
            return -1;
        if (p == &c)
            o = in_plane_orient(qa, qb, qe);
        else if (p == &b)
            o = in_plane_orient(qa, qe, qc);
        else
            o = in_plane_orient(qe, qb, qc);
        if (o != 0)
            return o;
    }
    return -1;
}

bool collinear(const Point3& a, const Point3& b, const Point3& c) {
    const Q3 n = cross(exact(b) - exact(a), exact(c) - exact(a));
    return sgn(n.x) == 0 && sgn(n.y) == 0 && sgn(n.z) == 0;
}

}  // namespace airfuse::predicates
