//! Bloch-vector kinematics for `dM/dt = M × ω(t)`.

use crate::scalar::Real;

pub type Vec3<T> = [T; 3];

#[inline]
pub fn cross<T: Real>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm<T: Real>(a: Vec3<T>) -> T {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

#[inline]
fn axpy<T: Real>(a: T, x: Vec3<T>, y: Vec3<T>) -> Vec3<T> {
    [y[0] + a * x[0], y[1] + a * x[1], y[2] + a * x[2]]
}

/// Exact rotation generated by a constant `ω = angle · axis` held for unit time
/// under `dM/dt = M × ω`, i.e. a rotation by `-angle` about `axis` (unit).
pub fn rotate<T: Real>(m: Vec3<T>, axis: Vec3<T>, angle: T) -> Vec3<T> {
    let (s, c) = (-angle).sin_cos();
    let kxv = cross(axis, m);
    let kdv = axis[0] * m[0] + axis[1] * m[1] + axis[2] * m[2];
    let one_c = T::one() - c;
    [
        m[0] * c + kxv[0] * s + axis[0] * kdv * one_c,
        m[1] * c + kxv[1] * s + axis[1] * kdv * one_c,
        m[2] * c + kxv[2] * s + axis[2] * kdv * one_c,
    ]
}

/// Classic fixed-step RK4 from `t0` over `n_steps` steps of size `h`.
pub fn rk4<T: Real, W: Fn(T) -> Vec3<T>>(mut m: Vec3<T>, omega: W, t0: T, h: T, n_steps: usize) -> Vec3<T> {
    let half = h / T::lit(2.0);
    let sixth = h / T::lit(6.0);
    let two = T::lit(2.0);
    for i in 0..n_steps {
        let t = t0 + h * T::lit(i as f64);
        let w0 = omega(t);
        let wm = omega(t + half);
        let w1 = omega(t + h);
        let k1 = cross(m, w0);
        let k2 = cross(axpy(half, k1, m), wm);
        let k3 = cross(axpy(half, k2, m), wm);
        let k4 = cross(axpy(h, k3, m), w1);
        m = [
            m[0] + sixth * (k1[0] + two * k2[0] + two * k3[0] + k4[0]),
            m[1] + sixth * (k1[1] + two * k2[1] + two * k3[1] + k4[1]),
            m[2] + sixth * (k1[2] + two * k2[2] + two * k3[2] + k4[2]),
        ];
    }
    m
}
