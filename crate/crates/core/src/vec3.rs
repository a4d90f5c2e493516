//! Small fixed-size vector math over `[T; 3]`.

use crate::Real;

#[inline]
pub fn add<T: Real>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub<T: Real>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale<T: Real>(a: [T; 3], s: T) -> [T; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn neg<T: Real>(a: [T; 3]) -> [T; 3] {
    [-a[0], -a[1], -a[2]]
}

#[inline]
pub fn dot<T: Real>(a: [T; 3], b: [T; 3]) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross<T: Real>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm2<T: Real>(a: [T; 3]) -> T {
    dot(a, a)
}

#[inline]
pub fn norm<T: Real>(a: [T; 3]) -> T {
    norm2(a).sqrt()
}

#[inline]
pub fn dist2<T: Real>(a: [T; 3], b: [T; 3]) -> T {
    norm2(sub(a, b))
}

#[inline]
pub fn dist<T: Real>(a: [T; 3], b: [T; 3]) -> T {
    dist2(a, b).sqrt()
}

/// Unit vector along `a`; returns `None` when the norm is not positive.
#[inline]
pub fn normalized<T: Real>(a: [T; 3]) -> Option<[T; 3]> {
    let n = norm(a);
    if n > T::zero() {
        Some(scale(a, T::one() / n))
    } else {
        None
    }
}

#[inline]
pub fn lerp<T: Real>(a: [T; 3], b: [T; 3], t: T) -> [T; 3] {
    add(scale(a, T::one() - t), scale(b, t))
}

/// a + b * s
#[inline]
pub fn add_scaled<T: Real>(a: [T; 3], b: [T; 3], s: T) -> [T; 3] {
    [a[0] + b[0] * s, a[1] + b[1] * s, a[2] + b[2] * s]
}

/// Column-major application of the 3x3 matrix with columns c0, c1, c2.
#[inline]
pub fn mat_cols_mul<T: Real>(c0: [T; 3], c1: [T; 3], c2: [T; 3], v: [T; 3]) -> [T; 3] {
    [
        c0[0] * v[0] + c1[0] * v[1] + c2[0] * v[2],
        c0[1] * v[0] + c1[1] * v[1] + c2[1] * v[2],
        c0[2] * v[0] + c1[2] * v[1] + c2[2] * v[2],
    ]
}

/// Transpose application: rows are c0, c1, c2.
#[inline]
pub fn mat_cols_tmul<T: Real>(c0: [T; 3], c1: [T; 3], c2: [T; 3], v: [T; 3]) -> [T; 3] {
    [dot(c0, v), dot(c1, v), dot(c2, v)]
}

/// Any unit vector orthogonal to `a` (`a` need not be unit). Deterministic.
pub fn any_orthogonal<T: Real>(a: [T; 3]) -> [T; 3] {
    let probe = if a[0].abs() <= a[1].abs() && a[0].abs() <= a[2].abs() {
        [T::one(), T::zero(), T::zero()]
    } else if a[1].abs() <= a[2].abs() {
        [T::zero(), T::one(), T::zero()]
    } else {
        [T::zero(), T::zero(), T::one()]
    };
    normalized(cross(a, probe)).expect("zero vector has no orthogonal")
}

/// Rotate `v` about unit axis `k` by `angle` (Rodrigues).
pub fn rotate_about<T: Real>(v: [T; 3], k: [T; 3], angle: T) -> [T; 3] {
    let (s, c) = (angle.sin(), angle.cos());
    let kxv = cross(k, v);
    let kdv = dot(k, v);
    add(
        add(scale(v, c), scale(kxv, s)),
        scale(k, kdv * (T::one() - c)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_right_handed() {
        let x = [1.0, 0.0, 0.0];
        let y = [0.0, 1.0, 0.0];
        assert_eq!(cross(x, y), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn rotate_quarter_turn() {
        let v = rotate_about([1.0, 0.0, 0.0], [0.0, 0.0, 1.0], std::f64::consts::FRAC_PI_2);
        assert!((v[0]).abs() < 1e-12 && (v[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_probe() {
        let cases: [[f64; 3]; 3] = [[1.0, 2.0, 3.0], [0.0, 0.0, 1.0], [-2.0, 0.1, 0.0]];
        for a in cases {
            let o = any_orthogonal(a);
            assert!(dot(a, o).abs() < 1e-12);
            assert!((norm(o) - 1.0).abs() < 1e-12);
        }
    }
}
