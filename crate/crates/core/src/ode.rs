//! Dormand–Prince 5(4) integrator for complex state vectors.

use crate::error::{Error, Result};
use crate::math::C64;

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    /// Upper bound on the step; oscillatory drives should set this to a
    /// fraction of their fastest period.
    pub max_step: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_steps: 2_000_000,
            max_step: f64::INFINITY,
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth minus fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combine(y: &[C64], h: f64, terms: &[(f64, &[C64])], out: &mut [C64]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = C64::new(0.0, 0.0);
        for (c, k) in terms {
            acc += k[i] * *c;
        }
        *o = y[i] + acc * h;
    }
}

/// Integrates `dy/dt = rhs(t, y)` from `t0` to `t1`, writing the result into
/// `y`. `rhs(t, y, dy)` must fill `dy`. `on_step(t, y)` runs after every
/// accepted step and may abort the integration by returning an error.
pub fn integrate<R, O>(mut rhs: R, y: &mut [C64], t0: f64, t1: f64, opts: OdeOptions, mut on_step: O) -> Result<usize>
where
    R: FnMut(f64, &[C64], &mut [C64]),
    O: FnMut(f64, &[C64]) -> Result<()>,
{
    let n = y.len();
    let span = t1 - t0;
    if span <= 0.0 {
        return Ok(0);
    }
    let mut k = vec![vec![C64::new(0.0, 0.0); n]; 7];
    let mut tmp = vec![C64::new(0.0, 0.0); n];
    let mut y5 = vec![C64::new(0.0, 0.0); n];

    let mut t = t0;
    let mut h = (span * 1e-3).min(opts.max_step).max(1e-12);
    rhs(t, y, &mut k[0]);
    let mut steps = 0usize;
    let mut factor_prev: f64 = 1.0;

    while t < t1 {
        if steps >= opts.max_steps {
            return Err(Error::Integration(format!("ODE step budget exhausted at t = {t}")));
        }
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        {
            let (k0, rest) = k.split_at_mut(1);
            combine(y, h, &[(A21, &k0[0])], &mut tmp);
            rhs(t + C2 * h, &tmp, &mut rest[0]);
        }
        {
            let (done, rest) = k.split_at_mut(2);
            combine(y, h, &[(A31, &done[0]), (A32, &done[1])], &mut tmp);
            rhs(t + C3 * h, &tmp, &mut rest[0]);
        }
        {
            let (done, rest) = k.split_at_mut(3);
            combine(y, h, &[(A41, &done[0]), (A42, &done[1]), (A43, &done[2])], &mut tmp);
            rhs(t + C4 * h, &tmp, &mut rest[0]);
        }
        {
            let (done, rest) = k.split_at_mut(4);
            combine(
                y,
                h,
                &[(A51, &done[0]), (A52, &done[1]), (A53, &done[2]), (A54, &done[3])],
                &mut tmp,
            );
            rhs(t + C5 * h, &tmp, &mut rest[0]);
        }
        {
            let (done, rest) = k.split_at_mut(5);
            combine(
                y,
                h,
                &[(A61, &done[0]), (A62, &done[1]), (A63, &done[2]), (A64, &done[3]), (A65, &done[4])],
                &mut tmp,
            );
            rhs(t + h, &tmp, &mut rest[0]);
        }
        {
            let (done, rest) = k.split_at_mut(6);
            combine(
                y,
                h,
                &[(B1, &done[0]), (B3, &done[2]), (B4, &done[3]), (B5, &done[4]), (B6, &done[5])],
                &mut y5,
            );
            rhs(t + h, &y5, &mut rest[0]);
        }

        let mut err = 0.0f64;
        for i in 0..n {
            let e = (k[0][i] * E1 + k[2][i] * E3 + k[3][i] * E4 + k[4][i] * E5 + k[5][i] * E6 + k[6][i] * E7) * h;
            let scale = opts.abs_tol + opts.rel_tol * y[i].norm().max(y5[i].norm());
            err = err.max(e.norm() / scale);
        }

        if err <= 1.0 {
            t = if last { t1 } else { t + h };
            y.copy_from_slice(&y5);
            k.swap(0, 6);
            steps += 1;
            on_step(t, y)?;
            // PI step-size control
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.7 / 5.0) * factor_prev.powf(0.4 / 5.0)).clamp(0.2, 5.0)
            };
            factor_prev = err.max(1e-4);
            h = (h * factor).min(opts.max_step);
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            if h < 1e-14 * span {
                return Err(Error::Integration(format!("step size underflow at t = {t}")));
            }
        }
    }
    Ok(steps)
}
