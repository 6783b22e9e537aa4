//! Special functions and quadrature rules.

use alloc::vec;
use alloc::vec::Vec;

use crate::c64;

/// `exp(i x)`.
#[inline]
pub fn cis(x: f64) -> c64 {
    let (s, c) = libm::sincos(x);
    c64::new(c, s)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes in ascending order.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Newton iteration from the Tricomi initial guess
        let mut z = libm::cos(core::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_p(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_p(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Legendre polynomial `P_n(z)` and its derivative.
fn legendre_p(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Spherical Bessel functions of the first kind `j_0(x) ..= j_nmax(x)`.
///
/// Upward recurrence where it is stable (`x > nmax`), Miller's downward
/// recurrence otherwise.
pub fn spherical_jn(nmax: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; nmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let (s, c) = libm::sincos(x);
    let j0 = s / x;
    let j1 = s / (x * x) - c / x;
    if x.abs() > nmax as f64 {
        out[0] = j0;
        if nmax >= 1 {
            out[1] = j1;
        }
        for n in 1..nmax {
            out[n + 1] = (2 * n + 1) as f64 / x * out[n] - out[n - 1];
        }
        return out;
    }
    let start = nmax + 20 + libm::sqrt(40.0 * (nmax as f64 + x.abs())) as usize;
    let mut jp1 = 0.0;
    let mut jn = 1e-300;
    let mut tmp = vec![0.0; start + 1];
    tmp[start] = jn;
    for n in (1..=start).rev() {
        let jm1 = (2 * n + 1) as f64 / x * jn - jp1;
        jp1 = jn;
        jn = jm1;
        tmp[n - 1] = jn;
        if jn.abs() > 1e250 {
            for t in tmp[n - 1..].iter_mut() {
                *t *= 1e-250;
            }
            jp1 *= 1e-250;
            jn *= 1e-250;
        }
    }
    let scale = if j0.abs() >= j1.abs() { j0 / tmp[0] } else { j1 / tmp[1] };
    for n in 0..=nmax {
        out[n] = tmp[n] * scale;
    }
    out
}
