//! Globally adaptive Gauss–Kronrod (7/15) quadrature for complex integrands.

use crate::error::{Error, Result};
use crate::math::C64;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Number of equal panels the interval is split into before adapting.
    /// Oscillatory integrands want roughly one panel per period.
    pub initial_panels: usize,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            initial_panels: 1,
            max_intervals: 200_000,
        }
    }
}

impl QuadOptions {
    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_panels(mut self, panels: usize) -> Self {
        self.initial_panels = panels.max(1);
        self
    }
}

struct Segment {
    a: f64,
    b: f64,
    value: C64,
    error: f64,
}

fn gk15<F: FnMut(f64) -> C64>(f: &mut F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += pair * WGK[j];
        if j % 2 == 1 {
            gauss += pair * WG[j / 2];
        }
    }
    Segment {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).norm(),
    }
}

/// Integrates `f` over `[a, b]` to the requested tolerance.
pub fn integrate<F: FnMut(f64) -> C64>(mut f: F, a: f64, b: f64, opts: QuadOptions) -> Result<C64> {
    if a == b {
        return Ok(C64::new(0.0, 0.0));
    }
    let panels = opts.initial_panels.max(1);
    let width = (b - a) / panels as f64;
    let mut segments: Vec<Segment> = (0..panels)
        .map(|i| {
            let lo = a + width * i as f64;
            let hi = if i + 1 == panels { b } else { lo + width };
            gk15(&mut f, lo, hi)
        })
        .collect();

    loop {
        let total: C64 = segments.iter().map(|s| s.value).sum();
        let err: f64 = segments.iter().map(|s| s.error).sum();
        if err <= opts.abs_tol.max(opts.rel_tol * total.norm()) {
            return Ok(total);
        }
        if segments.len() >= opts.max_intervals {
            return Err(Error::Integration(format!(
                "quadrature did not converge: estimated error {err:.3e} on |I| = {:.3e}",
                total.norm()
            )));
        }
        // bisect the worst segment
        let (worst, _) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("at least one segment");
        let s = segments.swap_remove(worst);
        let mid = 0.5 * (s.a + s.b);
        if mid <= s.a || mid >= s.b {
            return Err(Error::Integration("interval collapsed below machine precision".into()));
        }
        segments.push(gk15(&mut f, s.a, mid));
        segments.push(gk15(&mut f, mid, s.b));
    }
}

pub fn integrate_real<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, opts: QuadOptions) -> Result<f64> {
    integrate(|x| C64::new(f(x), 0.0), a, b, opts).map(|v| v.re)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let v = integrate_real(|x| 3.0 * x * x, 0.0, 2.0, QuadOptions::default()).unwrap();
        assert!((v - 8.0).abs() < 1e-13);
    }

    #[test]
    fn oscillatory_complex() {
        let t = 200.0;
        let nu = 1.3;
        let opts = QuadOptions::default().with_panels(100);
        let v = integrate(|s| (C64::new(0.0, nu * s)).exp(), 0.0, t, opts).unwrap();
        let want = (C64::new(0.0, nu * t).exp() - 1.0) / C64::new(0.0, nu);
        assert!((v - want).norm() < 1e-10);
    }

    #[test]
    fn peaked_integrand_adapts() {
        let v = integrate_real(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, QuadOptions::default()).unwrap();
        let want = 2.0 / 1e-2 * (1.0f64 / 1e-2).atan();
        assert!((v - want).abs() < 1e-8 * want);
    }
}
