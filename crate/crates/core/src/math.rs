//! Small numerical kernels shared by the closed-form evaluators.

use num_complex::Complex64;

pub type C64 = Complex64;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// `e^w - 1` without cancellation for small `|w|`.
pub fn expm1(w: C64) -> C64 {
    let e = w.re.exp_m1();
    let (s, c) = w.im.sin_cos();
    let half = (0.5 * w.im).sin();
    C64::new(e * c - 2.0 * half * half, (e + 1.0) * s)
}

/// `∫_0^t e^{z s} ds`, continuous through `z = 0`.
pub fn exp_integral(z: C64, t: f64) -> C64 {
    let w = z * t;
    if w.norm() < 1e-4 {
        t * (1.0 + w / 2.0 + w * w / 6.0 + w * w * w / 24.0)
    } else {
        t * expm1(w) / w
    }
}

/// `∫_0^t s^n e^{z s} ds`.
pub fn moment_integral(n: u32, z: C64, t: f64) -> C64 {
    let w = z * t;
    if w.norm() < 2.0 {
        // power series in w; converges quickly in this disc
        let mut sum = C64::new(0.0, 0.0);
        let mut wm = C64::new(1.0, 0.0);
        let mut fact = 1.0;
        for m in 0..80u32 {
            let term = wm / (fact * f64::from(n + m + 1));
            sum += term;
            if term.norm() < 1e-18 * sum.norm() {
                break;
            }
            wm *= w;
            fact *= f64::from(m + 1);
        }
        sum * t.powi(n as i32 + 1)
    } else {
        let ezt = (z * t).exp();
        let mut p = exp_integral(z, t);
        for k in 1..=n {
            p = (t.powi(k as i32) * ezt - f64::from(k) * p) / z;
        }
        p
    }
}

/// `∫_0^s e^{w u} sinh(a u) du / sinh(a s)`, with the `a → 0` limit
/// `∫_0^s u e^{w u} du / s` built in.
pub fn sinh_weighted_integral(w: C64, a: f64, s: f64) -> C64 {
    if s <= 0.0 {
        return C64::new(0.0, 0.0);
    }
    let x = a * s;
    if x.abs() < 1e-3 {
        let p1 = moment_integral(1, w, s);
        let p3 = moment_integral(3, w, s);
        let sinh_over_a = s * (1.0 + x * x / 6.0 + x.powi(4) / 120.0);
        (p1 + a * a / 6.0 * p3) / sinh_over_a
    } else {
        (exp_integral(w + a, s) - exp_integral(w - a, s)) / (2.0 * x.sinh())
    }
}

/// Bose–Einstein occupation `1/(e^{ν/T} - 1)`; zero at `T <= 0`.
pub fn bose_occupation(nu: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        0.0
    } else {
        1.0 / (nu / temperature).exp_m1()
    }
}

pub fn max_abs_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn norm2(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_moment(n: u32, z: C64, t: f64) -> C64 {
        // composite Simpson, fine enough to check 1e-9
        let m = 20_000;
        let h = t / m as f64;
        let f = |s: f64| s.powi(n as i32) * (z * s).exp();
        let mut acc = f(0.0) + f(t);
        for i in 1..m {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn expm1_small_and_large() {
        let w = C64::new(1e-12, -2e-12);
        assert!((expm1(w) - w).norm() < 1e-23);
        let w = C64::new(0.3, 2.0);
        assert!((expm1(w) - (w.exp() - 1.0)).norm() < 1e-14);
    }

    #[test]
    fn exp_integral_branches_agree() {
        let t = 3.0;
        for &z in &[C64::new(0.0, 0.0), C64::new(1e-9, 3e-9), C64::new(-0.2, 1.7)] {
            let got = exp_integral(z, t);
            let want = brute_moment(0, z, t);
            assert!((got - want).norm() < 1e-9, "{z}: {got} vs {want}");
        }
        // the series branch agrees with the direct formula at its edge
        let z = C64::new(0.3e-4, 0.9e-4) / t;
        let direct = t * expm1(z * t) / (z * t);
        assert!((exp_integral(z, t) - direct).norm() < 1e-12 * t);
    }

    #[test]
    fn moments_both_branches() {
        for &(z, t) in &[(C64::new(0.01, 0.3), 4.0), (C64::new(-0.001, 2.3), 9.0)] {
            for n in 0..4 {
                let got = moment_integral(n, z, t);
                let want = brute_moment(n, z, t);
                assert!((got - want).norm() < 1e-8 * want.norm().max(1.0), "n={n} z={z}");
            }
        }
    }

    #[test]
    fn sinh_weighted_limit_is_continuous() {
        let w = C64::new(0.0, 1.3);
        let s = 7.0;
        let zero = sinh_weighted_integral(w, 0.0, s);
        let limit = moment_integral(1, w, s) / s;
        assert!((zero - limit).norm() < 1e-15);
        let tiny = sinh_weighted_integral(w, 1e-13, s);
        assert!((tiny - zero).norm() < 1e-12);
        // the two branches meet at a*s = 1e-3
        let lo = sinh_weighted_integral(w, 0.999e-3 / s, s);
        let hi = sinh_weighted_integral(w, 1.001e-3 / s, s);
        assert!((lo - hi).norm() < 1e-9);
    }

    #[test]
    fn bose_limits() {
        assert_eq!(bose_occupation(1.0, 0.0), 0.0);
        let n = bose_occupation(1.0, 200.0);
        assert!((n - 199.5004).abs() < 1e-3);
    }
}
