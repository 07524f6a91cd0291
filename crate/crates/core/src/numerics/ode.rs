//! Dormand–Prince 5(4) with adaptive step control for complex state vectors.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// `dy/dt = f(t, y)` over a complex state.
pub trait ComplexSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[Complex64], dy: &mut [Complex64]);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; chosen automatically when `None`.
    pub h0: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
}

impl StepControl {
    pub fn with_rtol(rtol: f64) -> Self {
        Self {
            rtol,
            atol: rtol * 1e-3,
            h0: None,
            h_max: f64::INFINITY,
            max_steps: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
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
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct Workspace {
    k: [Vec<Complex64>; 7],
    stage: Vec<Complex64>,
    y_new: Vec<Complex64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        let z = vec![Complex64::default(); n];
        Self {
            k: std::array::from_fn(|_| z.clone()),
            stage: z.clone(),
            y_new: z,
        }
    }
}

fn rms_norm(y: &[Complex64], scale: impl Fn(usize) -> f64) -> f64 {
    let n = y.len() as f64;
    (y.iter()
        .enumerate()
        .map(|(i, v)| v.norm_sqr() / scale(i).powi(2))
        .sum::<f64>()
        / n)
        .sqrt()
}

fn initial_step<S: ComplexSystem>(
    sys: &S,
    t0: f64,
    y0: &[Complex64],
    f0: &[Complex64],
    ctl: &StepControl,
) -> f64 {
    let sc = |i: usize| ctl.atol + ctl.rtol * y0[i].norm();
    let d0 = rms_norm(y0, sc);
    let d1 = rms_norm(f0, sc);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let y1: Vec<Complex64> = y0.iter().zip(f0).map(|(y, f)| y + f * h0).collect();
    let mut f1 = vec![Complex64::default(); y0.len()];
    sys.rhs(t0 + h0, &y1, &mut f1);
    let diff: Vec<Complex64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms_norm(&diff, sc) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(ctl.h_max)
}

/// Integrates from `t0` through every time in `outputs` (non-decreasing,
/// all `>= t0`), calling `observe` with the state at each. Steps are clipped
/// to land exactly on output times.
pub fn integrate<S: ComplexSystem>(
    sys: &S,
    t0: f64,
    y0: &[Complex64],
    outputs: &[f64],
    ctl: &StepControl,
    mut observe: impl FnMut(f64, &[Complex64]),
) -> Result<(Vec<Complex64>, StepStats)> {
    let n = sys.dim();
    if y0.len() != n {
        return Err(Error::Integration(format!(
            "state has {} components, system expects {n}",
            y0.len()
        )));
    }
    if !(ctl.rtol > 0.0 && ctl.atol > 0.0) {
        return Err(Error::Integration("tolerances must be positive".into()));
    }
    if outputs.windows(2).any(|w| w[1] < w[0]) || outputs.first().is_some_and(|&t| t < t0) {
        return Err(Error::Integration(
            "output times must be sorted and start at or after t0".into(),
        ));
    }

    let mut ws = Workspace::new(n);
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut stats = StepStats::default();
    sys.rhs(t, &y, &mut ws.k[0]);
    stats.evaluations += 1;
    let mut h = match ctl.h0 {
        Some(h) => h,
        None => {
            stats.evaluations += 1;
            initial_step(sys, t0, &y, &ws.k[0], ctl)
        }
    };

    for &t_out in outputs {
        while t < t_out {
            if stats.accepted + stats.rejected >= ctl.max_steps {
                return Err(Error::Integration(format!(
                    "step limit {} reached at t = {t}",
                    ctl.max_steps
                )));
            }
            let remaining = t_out - t;
            let landing = h >= remaining * (1.0 - 1e-12);
            let h_try = if landing { remaining } else { h };
            if h_try <= 1e-14 * t.abs().max(1.0) && !landing {
                return Err(Error::Integration(format!(
                    "step size underflow at t = {t}"
                )));
            }

            let err = dopri_step(sys, t, &y, h_try, &mut ws, ctl);
            stats.evaluations += 6;
            if !err.is_finite() {
                return Err(Error::Integration(format!("non-finite state at t = {t}")));
            }
            if err <= 1.0 {
                t = if landing { t_out } else { t + h_try };
                std::mem::swap(&mut y, &mut ws.y_new);
                // FSAL: the last stage is the derivative at the new point.
                ws.k.swap(0, 6);
                stats.accepted += 1;
                let factor = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                h = (h_try * factor).min(ctl.h_max);
                if landing {
                    // Do not let a short landing step shrink the next step.
                    h = h.max(h_try);
                }
            } else {
                stats.rejected += 1;
                h = h_try * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            }
        }
        observe(t, &y);
    }
    Ok((y, stats))
}

fn combine(out: &mut [Complex64], y: &[Complex64], h: f64, terms: &[(f64, &[Complex64])]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = Complex64::default();
        for (c, k) in terms {
            acc += k[i] * *c;
        }
        *o = y[i] + acc * h;
    }
}

/// One trial step; leaves the candidate in `ws.y_new`, its derivative in
/// `ws.k[6]`, and returns the scaled error norm.
fn dopri_step<S: ComplexSystem>(
    sys: &S,
    t: f64,
    y: &[Complex64],
    h: f64,
    ws: &mut Workspace,
    ctl: &StepControl,
) -> f64 {
    let Workspace { k, stage, y_new } = ws;
    let [k1, k2, k3, k4, k5, k6, k7] = k;

    combine(stage, y, h, &[(A21, k1)]);
    sys.rhs(t + C2 * h, stage, k2);
    combine(stage, y, h, &[(A31, k1), (A32, k2)]);
    sys.rhs(t + C3 * h, stage, k3);
    combine(stage, y, h, &[(A41, k1), (A42, k2), (A43, k3)]);
    sys.rhs(t + C4 * h, stage, k4);
    combine(stage, y, h, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]);
    sys.rhs(t + C5 * h, stage, k5);
    combine(
        stage,
        y,
        h,
        &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)],
    );
    sys.rhs(t + h, stage, k6);
    combine(
        y_new,
        y,
        h,
        &[(B1, k1), (B3, k3), (B4, k4), (B5, k5), (B6, k6)],
    );
    sys.rhs(t + h, y_new, k7);

    let mut sum = 0.0;
    for i in 0..y.len() {
        let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
        let sc = ctl.atol + ctl.rtol * y[i].norm().max(y_new[i].norm());
        sum += e.norm_sqr() / (sc * sc);
    }
    (sum / y.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    struct Rotor {
        freqs: Vec<f64>,
    }

    impl ComplexSystem for Rotor {
        fn dim(&self) -> usize {
            self.freqs.len()
        }
        fn rhs(&self, _t: f64, y: &[Complex64], dy: &mut [Complex64]) {
            for ((d, v), w) in dy.iter_mut().zip(y).zip(&self.freqs) {
                *d = Complex64::new(0.0, -w) * v;
            }
        }
    }

    /// Two-level Rabi oscillation: a' = -g b, b' = g a.
    struct Rabi(f64);

    impl ComplexSystem for Rabi {
        fn dim(&self) -> usize {
            2
        }
        fn rhs(&self, _t: f64, y: &[Complex64], dy: &mut [Complex64]) {
            dy[0] = -y[1] * self.0;
            dy[1] = y[0] * self.0;
        }
    }

    #[test]
    fn phase_rotation_matches_exact() {
        let sys = Rotor {
            freqs: vec![0.0, 1.0, -7.5, 40.0],
        };
        let y0 = vec![Complex64::new(1.0, 0.0); 4];
        let outs: Vec<f64> = (1..=10).map(|i| 0.5 * i as f64).collect();
        let ctl = StepControl::with_rtol(1e-10);
        let mut worst: f64 = 0.0;
        integrate(&sys, 0.0, &y0, &outs, &ctl, |t, y| {
            for (v, w) in y.iter().zip(&sys.freqs) {
                let exact = Complex64::from_polar(1.0, -w * t);
                worst = worst.max((v - exact).norm());
            }
        })
        .unwrap();
        assert!(worst < 1e-7, "worst error {worst}");
    }

    #[test]
    fn rabi_conserves_norm() {
        let sys = Rabi(1.3);
        let y0 = [Complex64::new(1.0, 0.0), Complex64::default()];
        let outs: Vec<f64> = (0..=100).map(|i| 0.1 * i as f64).collect();
        let ctl = StepControl::with_rtol(1e-9);
        let (y, stats) = integrate(&sys, 0.0, &y0, &outs, &ctl, |t, y| {
            let norm = y[0].norm_sqr() + y[1].norm_sqr();
            assert!((norm - 1.0).abs() < 1e-8, "norm drift {norm} at {t}");
        })
        .unwrap();
        assert_relative_eq!(y[0].re, (1.3f64 * 10.0).cos(), epsilon = 1e-7);
        assert!(stats.accepted > 10);
    }

    #[test]
    fn output_at_start_returns_initial_state() {
        let sys = Rabi(1.0);
        let y0 = [Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)];
        let mut seen = Vec::new();
        integrate(
            &sys,
            0.0,
            &y0,
            &[0.0],
            &StepControl::with_rtol(1e-8),
            |t, y| seen.push((t, y.to_vec())),
        )
        .unwrap();
        assert_eq!(seen[0].0, 0.0);
        assert_eq!(seen[0].1, y0.to_vec());
    }

    #[test]
    fn rejects_bad_inputs() {
        let sys = Rabi(1.0);
        let y0 = [Complex64::new(1.0, 0.0)];
        assert!(integrate(
            &sys,
            0.0,
            &y0,
            &[1.0],
            &StepControl::with_rtol(1e-8),
            |_, _| {}
        )
        .is_err());
        let y0 = [Complex64::new(1.0, 0.0), Complex64::default()];
        assert!(integrate(
            &sys,
            0.0,
            &y0,
            &[1.0, 0.5],
            &StepControl::with_rtol(1e-8),
            |_, _| {}
        )
        .is_err());
        let mut ctl = StepControl::with_rtol(1e-12);
        ctl.max_steps = 3;
        assert!(matches!(
            integrate(&sys, 0.0, &y0, &[100.0], &ctl, |_, _| {}),
            Err(Error::Integration(_))
        ));
    }
}
