#pragma once

// SE(3) poses, the 5-point parallel-jaw control-point representation, and
// the distance kernels shared by losses and metrics.
//
// Conventions, fixed for all file formats:
//   - quaternions are (w,x,y,z), unit norm, active right-handed rotations
//   - poses serialize as 7 numbers [qw,qx,qy,qz,tx,ty,tz]
//   - gripper frame: +z approach (palm toward fingertips), y closing axis

#include <array>
#include <cmath>
#include <stdexcept>

namespace artgrasp {

constexpr double kPi = 3.14159265358979323846264338327950288;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }

    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm2() const { return dot(*this); }
    double norm() const { return std::sqrt(norm2()); }
    double norm_inf() const {
        return std::fmax(std::fabs(x), std::fmax(std::fabs(y), std::fabs(z)));
    }
    Vec3 normalized() const {
        double n = norm();
        if (n < 1e-300) throw std::invalid_argument("cannot normalize zero vector");
        return *this / n;
    }
    Vec3 cwise_max(const Vec3& o) const {
        return {std::fmax(x, o.x), std::fmax(y, o.y), std::fmax(z, o.z)};
    }
    Vec3 cwise_abs() const { return {std::fabs(x), std::fabs(y), std::fabs(z)}; }
    bool finite() const {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
    }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

// Row-major 3x3 matrix; only what rigid transforms need.
struct Mat3 {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    static Mat3 identity() { return {}; }

    static Mat3 from_columns(const Vec3& c0, const Vec3& c1, const Vec3& c2) {
        Mat3 r;
        r.m = {c0.x, c1.x, c2.x, c0.y, c1.y, c2.y, c0.z, c1.z, c2.z};
        return r;
    }

    double operator()(int r, int c) const { return m[3 * r + c]; }
    double& operator()(int r, int c) { return m[3 * r + c]; }

    Vec3 col(int c) const { return {m[c], m[3 + c], m[6 + c]}; }
    Vec3 row(int r) const { return {m[3 * r], m[3 * r + 1], m[3 * r + 2]}; }

    Vec3 operator*(const Vec3& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
                m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }

    Mat3 operator*(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double s = 0;
                for (int k = 0; k < 3; ++k) s += (*this)(i, k) * o(k, j);
                r(i, j) = s;
            }
        return r;
    }

    Mat3 transposed() const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
        return r;
    }

    double det() const {
        return m[0] * (m[4] * m[8] - m[5] * m[7]) -
               m[1] * (m[3] * m[8] - m[5] * m[6]) +
               m[2] * (m[3] * m[7] - m[4] * m[6]);
    }
};

struct Quat {
    double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

    Quat() = default;
    Quat(double w_, double x_, double y_, double z_) : w(w_), x(x_), y(y_), z(z_) {
        normalize();
    }

    static Quat identity() { return {}; }

    static Quat from_axis_angle(const Vec3& axis, double angle) {
        Vec3 a = axis.normalized();
        double h = 0.5 * angle;
        double s = std::sin(h);
        return Quat(std::cos(h), a.x * s, a.y * s, a.z * s);
    }

    static Quat from_matrix(const Mat3& r) {
        // Shepperd's method, stable for all rotation matrices
        double tr = r(0, 0) + r(1, 1) + r(2, 2);
        double qw, qx, qy, qz;
        if (tr > 0) {
            double s = std::sqrt(tr + 1.0) * 2;
            qw = 0.25 * s;
            qx = (r(2, 1) - r(1, 2)) / s;
            qy = (r(0, 2) - r(2, 0)) / s;
            qz = (r(1, 0) - r(0, 1)) / s;
        } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
            double s = std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2)) * 2;
            qw = (r(2, 1) - r(1, 2)) / s;
            qx = 0.25 * s;
            qy = (r(0, 1) + r(1, 0)) / s;
            qz = (r(0, 2) + r(2, 0)) / s;
        } else if (r(1, 1) > r(2, 2)) {
            double s = std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2)) * 2;
            qw = (r(0, 2) - r(2, 0)) / s;
            qx = (r(0, 1) + r(1, 0)) / s;
            qy = 0.25 * s;
            qz = (r(1, 2) + r(2, 1)) / s;
        } else {
            double s = std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1)) * 2;
            qw = (r(1, 0) - r(0, 1)) / s;
            qx = (r(0, 2) + r(2, 0)) / s;
            qy = (r(1, 2) + r(2, 1)) / s;
            qz = 0.25 * s;
        }
        return Quat(qw, qx, qy, qz);
    }

    void normalize() {
        double n = std::sqrt(w * w + x * x + y * y + z * z);
        if (n < 1e-300 || !std::isfinite(n))
            throw std::invalid_argument("degenerate quaternion");
        w /= n; x /= n; y /= n; z /= n;
        if (w < 0) { w = -w; x = -x; y = -y; z = -z; }  // canonical sign
    }

    double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

    Quat conjugate() const {
        Quat q;
        q.w = w; q.x = -x; q.y = -y; q.z = -z;
        return q;
    }

    Quat operator*(const Quat& o) const {
        return Quat(w * o.w - x * o.x - y * o.y - z * o.z,
                    w * o.x + x * o.w + y * o.z - z * o.y,
                    w * o.y - x * o.z + y * o.w + z * o.x,
                    w * o.z + x * o.y - y * o.x + z * o.w);
    }

    Vec3 rotate(const Vec3& v) const {
        // v' = v + 2w(q x v) + 2 q x (q x v)
        Vec3 qv{x, y, z};
        Vec3 t = qv.cross(v) * 2.0;
        return v + t * w + qv.cross(t);
    }

    Mat3 to_matrix() const {
        Mat3 r;
        double xx = x * x, yy = y * y, zz = z * z;
        double xy = x * y, xz = x * z, yz = y * z;
        double wx = w * x, wy = w * y, wz = w * z;
        r.m = {1 - 2 * (yy + zz), 2 * (xy - wz),     2 * (xz + wy),
               2 * (xy + wz),     1 - 2 * (xx + zz), 2 * (yz - wx),
               2 * (xz - wy),     2 * (yz + wx),     1 - 2 * (xx + yy)};
        return r;
    }

    // geodesic angle to another rotation, in radians; the asin form stays
    // accurate near identity where acos(dot) bottoms out around 3e-8
    double angle_to(const Quat& o) const {
        double d = w * o.w + x * o.x + y * o.y + z * o.z;
        double s = d < 0 ? -1.0 : 1.0;
        double dw = w - s * o.w, dx = x - s * o.x, dy = y - s * o.y, dz = z - s * o.z;
        double half = 0.5 * std::sqrt(dw * dw + dx * dx + dy * dy + dz * dz);
        return 4.0 * std::asin(std::fmin(1.0, half));
    }

    double angle() const { return angle_to(identity()); }
};

struct Pose {
    Quat rotation;
    Vec3 translation;

    Pose() = default;
    Pose(const Quat& q, const Vec3& t) : rotation(q), translation(t) {}

    static Pose identity() { return {}; }

    static Pose from_translation(const Vec3& t) { return {Quat::identity(), t}; }

    Vec3 apply(const Vec3& p) const { return rotation.rotate(p) + translation; }
    Vec3 apply_direction(const Vec3& d) const { return rotation.rotate(d); }
};

// result applies b first, then a
inline Pose compose(const Pose& a, const Pose& b) {
    return {a.rotation * b.rotation, a.rotation.rotate(b.translation) + a.translation};
}

inline Pose inverse(const Pose& p) {
    Quat qi = p.rotation.conjugate();
    return {qi, qi.rotate(-p.translation)};
}

inline Vec3 transform_point(const Pose& p, const Vec3& x) { return p.apply(x); }

// Builds a rotation whose +z is `approach` and whose y is `closing`
// projected orthogonal to it. Throws if the two are (near) parallel.
inline Quat rotation_from_approach_closing(const Vec3& approach, const Vec3& closing) {
    Vec3 z = approach.normalized();
    Vec3 y = closing - z * closing.dot(z);
    double n = y.norm();
    if (n < 1e-9) throw std::invalid_argument("approach and closing axes are parallel");
    y = y / n;
    Vec3 x = y.cross(z);
    return Quat::from_matrix(Mat3::from_columns(x, y, z));
}

// Gram-Schmidt on the first two rotation-matrix columns (the 6-number
// rotation encoding used by the pose maps).
inline Quat rotation_from_two_columns(const Vec3& c0_raw, const Vec3& c1_raw) {
    Vec3 c0 = c0_raw.normalized();
    Vec3 c1 = c1_raw - c0 * c0.dot(c1_raw);
    double n = c1.norm();
    if (n < 1e-9) throw std::invalid_argument("degenerate rotation columns");
    c1 = c1 / n;
    Vec3 c2 = c0.cross(c1);
    return Quat::from_matrix(Mat3::from_columns(c0, c1, c2));
}

// 5 gripper keypoints: palm origin, left/right finger base, left/right fingertip.
using ControlPoints = std::array<Vec3, 5>;

struct GripperModel {
    double aperture = 0.08;       // finger-to-finger opening, meters
    double finger_length = 0.05;  // meters
    double palm_depth = 0.06;     // palm origin to finger base, meters

    GripperModel() = default;
    GripperModel(double ap, double fl, double pd)
        : aperture(ap), finger_length(fl), palm_depth(pd) {
        if (ap <= 0 || fl <= 0 || pd <= 0)
            throw std::invalid_argument("gripper dimensions must be positive");
    }

    // canonical template in the gripper frame; left finger at +y
    ControlPoints control_points() const {
        double hy = 0.5 * aperture;
        double zb = palm_depth;
        double zt = palm_depth + finger_length;
        return {Vec3{0, 0, 0}, Vec3{0, hy, zb}, Vec3{0, -hy, zb},
                Vec3{0, hy, zt}, Vec3{0, -hy, zt}};
    }

    double reach() const { return palm_depth + finger_length; }
};

inline ControlPoints grasp_control_points(const Pose& g, const GripperModel& gripper) {
    ControlPoints canonical = gripper.control_points();
    ControlPoints out;
    for (int i = 0; i < 5; ++i) out[i] = g.apply(canonical[i]);
    return out;
}

inline ControlPoints scale_control_points(const ControlPoints& cp, double s) {
    ControlPoints out;
    for (int i = 0; i < 5; ++i) out[i] = cp[i] * s;
    return out;
}

// mean over the 5 points of the per-point L1 norm of the difference
inline double control_point_distance(const ControlPoints& a, const ControlPoints& b) {
    double sum = 0.0;
    for (int i = 0; i < 5; ++i) {
        Vec3 d = a[i] - b[i];
        sum += std::fabs(d.x) + std::fabs(d.y) + std::fabs(d.z);
    }
    return sum / 5.0;
}

} // namespace artgrasp
