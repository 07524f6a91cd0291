//! Closed-form rates, survival probability, amplitudes and emission line.
//!
//! Rates are in units of `Gamma0`, times in `1/Gamma0`, frequencies as
//! detunings `nu = (omega - Omega)/Gamma0`. The line centre of an atom at
//! height `zeta` sits at `u = r zeta`; spectral quantities only ever see the
//! difference `u - nu`.
//!
//! Global phases (rest mass, transition frequency, mode propagation) cancel
//! from every observable here and are not carried.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{HeightDensity, MixtureSpec, SuperpositionSpec};
use crate::numerics::quadrature::{Integrator, QuadratureMethod};

/// Heights at or below this are behind the Rindler horizon.
pub const HORIZON: f64 = -1.0;

fn check_height(zeta: f64) -> Result<()> {
    if zeta.is_nan() || zeta <= HORIZON {
        Err(Error::Horizon {
            zeta,
            limit: HORIZON,
        })
    } else {
        Ok(())
    }
}

fn check_time(s: f64) -> Result<()> {
    if s.is_nan() || s < 0.0 {
        Err(Error::Domain(format!("time must be non-negative, got {s}")))
    } else {
        Ok(())
    }
}

/// Decay rate of an atom localised at `zeta`: `1 + zeta`.
pub fn local_rate(zeta: f64) -> Result<f64> {
    check_height(zeta)?;
    Ok(1.0 + zeta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateMethod {
    ClosedForm,
    Quadrature,
}

/// Which rate observable to evaluate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateMode {
    /// `∫ density · (1 + zeta)`, the short-time rate.
    ShortTime,
    /// `-dP/ds` at time `s`: `∫ density · (1 + zeta) e^{-(1+zeta) s}`.
    TimeResolved { s: f64 },
}

fn check_normalised(density: &HeightDensity, integrator: &Integrator) -> Result<()> {
    let mass = integrator.integrate_density(|_| 1.0, density)?;
    if (mass - 1.0).abs() > 1e-10 {
        return Err(Error::Contract(format!(
            "density integrates to {mass}, not 1"
        )));
    }
    Ok(())
}

/// Short-time total rate. Exact Gaussian moments for the analytic kinds.
pub fn total_rate(density: &HeightDensity) -> Result<f64> {
    check_height(density.support().0)?;
    Ok(1.0 + density.mean())
}

/// Total rate by quadrature, for either observable.
pub fn rate(density: &HeightDensity, mode: RateMode, integrator: &Integrator) -> Result<f64> {
    check_height(density.support().0)?;
    check_normalised(density, integrator)?;
    match mode {
        RateMode::ShortTime => integrator.integrate_density(|z| 1.0 + z, density),
        RateMode::TimeResolved { s } => {
            check_time(s)?;
            integrator.integrate_density(|z| (1.0 + z) * (-(1.0 + z) * s).exp(), density)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateResult {
    pub gamma_sup: f64,
    pub gamma_cl: f64,
    #[serde(rename = "gammaQ_inv")]
    pub gamma_q_inv: f64,
    pub method: RateMethod,
}

fn check_matched(sup: &SuperpositionSpec, mix: &MixtureSpec) -> Result<()> {
    if sup.matched_mixture() != *mix {
        return Err(Error::Contract(
            "superposition and mixture must share z1, z2, delta and theta".into(),
        ));
    }
    Ok(())
}

/// Relative rate difference between a superposition and its matched mixture,
///
/// ```text
/// (1/4) (zeta2 - zeta1) cos(phi) sin(4 theta) / (cos(phi) sin(2 theta) + e^{(zeta2-zeta1)^2 / 4 delta^2})
/// ```
///
/// evaluated with the overlap factor in the numerator so it never overflows.
pub fn quantum_correction(sup: &SuperpositionSpec, mix: &MixtureSpec) -> Result<f64> {
    sup.validate()?;
    check_matched(sup, mix)?;
    let e = sup.overlap();
    let cos_phi = sup.phi.cos();
    let num = 0.25 * (sup.z2 - sup.z1) * cos_phi * (4.0 * sup.theta).sin() * e;
    Ok(num / (1.0 + cos_phi * (2.0 * sup.theta).sin() * e))
}

/// `∫ (1 + zeta)(|psi_sup|^2 - P_cl) dzeta` by quadrature.
///
/// The adaptive path integrates the pointwise density excess directly. The
/// Gauss–Hermite path integrates each Gaussian component of the excess
/// about the packet midpoint; the constant part of `1 + zeta` drops out
/// because both densities are normalised.
pub fn quantum_correction_quadrature(
    sup: &SuperpositionSpec,
    integrator: &Integrator,
) -> Result<f64> {
    sup.validate()?;
    match integrator.spec().method {
        QuadratureMethod::Adaptive => {
            let (lo, hi) = sup.support();
            integrator.adaptive(|z| (1.0 + z) * sup.density_excess(z), lo, hi)
        }
        QuadratureMethod::GaussHermite => {
            let rule = integrator.rule();
            let m = sup.midpoint();
            let (c, s) = (sup.theta.cos(), sup.theta.sin());
            let k = sup.interference();
            let moment = |centre: f64| rule.packet_expectation(centre, sup.delta, |z| z - m);
            let bracket = moment(m) - c * c * moment(sup.z1) - s * s * moment(sup.z2);
            Ok(k * bracket / (1.0 + k))
        }
    }
}

/// Closed-form rate comparison; all lengths dimensionless.
pub fn compare_rates(sup: &SuperpositionSpec) -> Result<RateResult> {
    let mix = sup.matched_mixture();
    let gamma_sup = total_rate(&HeightDensity::superposition(*sup)?)?;
    let gamma_cl = total_rate(&HeightDensity::mixture(mix)?)?;
    Ok(RateResult {
        gamma_sup,
        gamma_cl,
        gamma_q_inv: quantum_correction(sup, &mix)?,
        method: RateMethod::ClosedForm,
    })
}

pub fn compare_rates_quadrature(
    sup: &SuperpositionSpec,
    integrator: &Integrator,
) -> Result<RateResult> {
    let sup_density = HeightDensity::superposition(*sup)?;
    let mix_density = HeightDensity::mixture(sup.matched_mixture())?;
    Ok(RateResult {
        gamma_sup: rate(&sup_density, RateMode::ShortTime, integrator)?,
        gamma_cl: rate(&mix_density, RateMode::ShortTime, integrator)?,
        gamma_q_inv: quantum_correction_quadrature(sup, integrator)?,
        method: RateMethod::Quadrature,
    })
}

/// Probability of still being excited at time `s`.
pub fn survival_probability(
    density: &HeightDensity,
    s: f64,
    integrator: &Integrator,
) -> Result<f64> {
    check_time(s)?;
    check_height(density.support().0)?;
    integrator.integrate_density(|z| (-(1.0 + z) * s).exp(), density)
}

/// `|alpha(zeta, s)|^2 / |psi(zeta)|^2 = e^{-(1+zeta) s}`.
pub fn excited_amplitude_sq(zeta: f64, s: f64) -> Result<f64> {
    check_height(zeta)?;
    check_time(s)?;
    Ok((-(1.0 + zeta) * s).exp())
}

/// `|beta_k(zeta, s)|^2 / (g_k^2 |psi(zeta)|^2)`: the photon amplitude of a
/// mode at detuning `nu` emitted by an atom at `zeta`, at time `s`.
pub fn photon_amplitude_sq(zeta: f64, nu: f64, s: f64, r: f64) -> Result<f64> {
    check_height(zeta)?;
    check_time(s)?;
    let gamma = 1.0 + zeta;
    let offset = r * zeta - nu;
    let decay = (-0.5 * gamma * s).exp();
    let bracket = 1.0 - 2.0 * decay * (offset * s).cos() + decay * decay;
    Ok(bracket / (0.25 * gamma * gamma + offset * offset))
}

/// Emission line of an atom localised at `zeta`, per unit detuning.
#[inline]
pub fn lorentzian_line(zeta: f64, nu: f64, r: f64) -> f64 {
    let gamma = 1.0 + zeta;
    let offset = r * zeta - nu;
    gamma / (2.0 * PI * (0.25 * gamma * gamma + offset * offset))
}

/// Exact area of [`lorentzian_line`] over `[nu_lo, nu_hi]`; infinite limits allowed.
pub fn lorentzian_area(zeta: f64, r: f64, nu_lo: f64, nu_hi: f64) -> f64 {
    let half = 0.5 * (1.0 + zeta);
    let u = r * zeta;
    (((nu_hi - u) / half).atan() - ((nu_lo - u) / half).atan()) / PI
}

/// Sampled emission line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub nu_grid: Vec<f64>,
    pub p_values: Vec<f64>,
    pub total_mass: f64,
    /// Set when the grid captured less than [`MIN_CAPTURED_MASS`] of the line.
    pub mass_warning: bool,
}

pub const MIN_CAPTURED_MASS: f64 = 0.9;

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

impl SpectrumResult {
    pub fn from_samples(nu_grid: Vec<f64>, p_values: Vec<f64>) -> Self {
        let total_mass = trapezoid(&nu_grid, &p_values);
        Self {
            nu_grid,
            p_values,
            total_mass,
            mass_warning: total_mass < MIN_CAPTURED_MASS,
        }
    }

    /// Grid point with the largest density.
    pub fn peak(&self) -> (f64, f64) {
        let (i, p) = self
            .p_values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("spectrum is never empty");
        (self.nu_grid[i], *p)
    }

    /// Detunings of interior local maxima, in increasing order.
    pub fn local_maxima(&self) -> Vec<f64> {
        let p = &self.p_values;
        (1..p.len().saturating_sub(1))
            .filter(|&i| p[i] > p[i - 1] && p[i] >= p[i + 1])
            .map(|i| self.nu_grid[i])
            .collect()
    }

    /// Full width at half maximum of the main peak, with linear
    /// interpolation between grid points. `None` if either half-maximum
    /// crossing lies off the grid.
    pub fn fwhm(&self) -> Option<f64> {
        let p = &self.p_values;
        let x = &self.nu_grid;
        let (imax, _) = p.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
        let half = 0.5 * p[imax];
        let left = (1..=imax).rev().find(|&i| p[i - 1] < half)?;
        let right = (imax..p.len() - 1).find(|&i| p[i + 1] < half)?;
        let lerp = |i: usize, j: usize| x[i] + (half - p[i]) * (x[j] - x[i]) / (p[j] - p[i]);
        Some(lerp(right, right + 1) - lerp(left - 1, left))
    }

    pub fn max_abs_difference(&self, other: &SpectrumResult) -> f64 {
        self.p_values
            .iter()
            .zip(&other.p_values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `nu,p` CSV with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("nu,p\n");
        for (nu, p) in self.nu_grid.iter().zip(&self.p_values) {
            out.push_str(&format!(
                "{},{}\n",
                crate::io::fmt17(*nu),
                crate::io::fmt17(*p)
            ));
        }
        out
    }
}

/// Emission line density at a single detuning.
pub fn spectrum_at(
    density: &HeightDensity,
    nu: f64,
    r: f64,
    integrator: &Integrator,
) -> Result<f64> {
    integrator.integrate_density(|z| lorentzian_line(z, nu, r), density)
}

/// Emission line of a height distribution sampled on `nu_grid`.
pub fn spectrum(
    density: &HeightDensity,
    nu_grid: &[f64],
    r: f64,
    integrator: &Integrator,
) -> Result<SpectrumResult> {
    if nu_grid.len() < 2 || nu_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid(
            "nu_grid",
            "needs at least two strictly increasing detunings",
        ));
    }
    if !(r.is_finite() && r >= 1.0) {
        return Err(Error::invalid(
            "r",
            format!("frequency ratio must be >= 1, got {r}"),
        ));
    }
    check_height(density.support().0)?;
    let p_values = nu_grid
        .par_iter()
        .map(|&nu| spectrum_at(density, nu, r, integrator))
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectrumResult::from_samples(nu_grid.to_vec(), p_values))
}

/// Uniform grid of `n` detunings over `[lo, hi]`.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && hi > lo);
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect()
}

/// Two-packet clock moving with spreads `sigma_z`, `sigma_v`, in the
/// notation of the post-Newtonian quantum-clock literature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KhandelwalParams {
    pub sigma_z: f64,
    pub sigma_v: f64,
    pub p_bar: f64,
    /// Weight of the first packet.
    pub alpha_w: f64,
    pub phi: f64,
    pub t: f64,
    pub m: f64,
}

impl KhandelwalParams {
    /// Minimum-uncertainty packets: `sigma_v = hbar / (m sigma_z)`.
    pub fn minimum_uncertainty(
        sigma_z: f64,
        m: f64,
        hbar: f64,
        alpha_w: f64,
        phi: f64,
        t: f64,
    ) -> Self {
        Self {
            sigma_z,
            sigma_v: hbar / (m * sigma_z),
            p_bar: 0.0,
            alpha_w,
            phi,
            t,
            m,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma_z", self.sigma_z),
            ("sigma_v", self.sigma_v),
            ("m", self.m),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(
                    name,
                    format!("must be finite and positive, got {v}"),
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.alpha_w) {
            return Err(Error::invalid(
                "alpha_w",
                format!("must lie in [0, 1], got {}", self.alpha_w),
            ));
        }
        if !(self.t.is_finite() && self.t >= 0.0) {
            return Err(Error::invalid("t", "must be finite and non-negative"));
        }
        if !(self.phi.is_finite() && self.p_bar.is_finite()) {
            return Err(Error::invalid("phi", "phase and momentum must be finite"));
        }
        Ok(())
    }

    fn overlap(&self, dz: f64) -> f64 {
        let x = dz / (2.0 * self.sigma_z);
        (-x * x).exp()
    }

    /// `(N - 1) / 2N` without forming `N - 1` by subtraction.
    fn coherence_weight(&self, dz: f64) -> f64 {
        let amp = (self.alpha_w * (1.0 - self.alpha_w)).sqrt() * self.overlap(dz);
        self.phi.cos() * amp / (1.0 + 2.0 * self.phi.cos() * amp)
    }
}

/// Terms of the coherent time correction `T_coh(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TcohTerms {
    /// `((z2-z1)/2 sigma_z)^2 sigma_v^2/c^2`
    pub kinetic: f64,
    /// `-g (z2-z1)(1 - 2 alpha)/c^2`
    pub gravitational: f64,
    /// Factor multiplying `tan(phi)` in the momentum term.
    pub momentum_coefficient: f64,
    /// `(N-1)/2N`
    pub coherence_weight: f64,
    /// Each bracket term times `(N-1)/2N · t`. The momentum entry has the
    /// `tan(phi)` pole cancelled against `cos(phi)` in the weight.
    pub weighted: [f64; 3],
    pub total: f64,
}

pub fn khandelwal_tcoh_full(
    kp: &KhandelwalParams,
    z1: f64,
    z2: f64,
    g: f64,
    c: f64,
    hbar: f64,
) -> Result<TcohTerms> {
    kp.validate()?;
    let dz = z2 - z1;
    let v2 = (kp.sigma_v / c).powi(2);
    let kinetic = (dz / (2.0 * kp.sigma_z)).powi(2) * v2;
    let gravitational = -g * dz / (c * c) * (1.0 - 2.0 * kp.alpha_w);
    let momentum_coefficient = -2.0 / hbar * v2 * dz * (kp.p_bar - kp.m * g * kp.t);
    let weight = kp.coherence_weight(dz);

    let amp = (kp.alpha_w * (1.0 - kp.alpha_w)).sqrt() * kp.overlap(dz);
    let n = 1.0 + 2.0 * kp.phi.cos() * amp;
    let momentum_weighted = amp * kp.phi.sin() / n * momentum_coefficient * kp.t;

    let weighted = [
        weight * kinetic * kp.t,
        weight * gravitational * kp.t,
        momentum_weighted,
    ];
    Ok(TcohTerms {
        kinetic,
        gravitational,
        momentum_coefficient,
        coherence_weight: weight,
        weighted,
        total: weighted.iter().sum(),
    })
}

/// Rate correction with the kinetic and momentum terms dropped:
/// `T_coh(t) / t = (N-1)/2N · g (z2-z1)(2 alpha - 1)/c^2`.
pub fn khandelwal_tcoh_reduced(
    kp: &KhandelwalParams,
    z1: f64,
    z2: f64,
    g: f64,
    c: f64,
) -> Result<f64> {
    kp.validate()?;
    let dz = z2 - z1;
    let root = (kp.alpha_w * (1.0 - kp.alpha_w)).sqrt();
    let e = kp.overlap(dz);
    let cos_phi = kp.phi.cos();
    Ok(g * cos_phi * root * (2.0 * kp.alpha_w - 1.0) * dz * e
        / (c * c * (2.0 * cos_phi * root * e + 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quadrature::QuadratureSpec;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8};

    fn gh() -> Integrator {
        Integrator::new(QuadratureSpec::gauss_hermite(64)).unwrap()
    }

    #[test]
    fn local_rate_law() {
        assert_eq!(local_rate(0.0).unwrap(), 1.0);
        assert_relative_eq!(local_rate(0.01).unwrap(), 1.01);
        // 9.2 mm at Earth gravity
        let zeta = 9.80665 * 9.163e-3 / (299_792_458.0f64).powi(2);
        assert_relative_eq!(zeta, 1e-18, max_relative = 1e-3);
        assert!(matches!(local_rate(-1.0), Err(Error::Horizon { .. })));
    }

    #[test]
    fn total_rate_examples() {
        let sym = HeightDensity::mixture(MixtureSpec::new(-0.02, 0.02, 0.01, FRAC_PI_4).unwrap())
            .unwrap();
        assert_relative_eq!(total_rate(&sym).unwrap(), 1.0, epsilon = 1e-16);
        let upper =
            HeightDensity::mixture(MixtureSpec::new(0.0, 0.02, 0.01, FRAC_PI_2).unwrap()).unwrap();
        assert_relative_eq!(total_rate(&upper).unwrap(), 1.02, max_relative = 1e-15);
    }

    #[test]
    fn closed_form_rate_matches_quadrature() {
        let sup = SuperpositionSpec::new(0.0, 0.02, 0.01, FRAC_PI_8, 0.0).unwrap();
        let d = HeightDensity::superposition(sup).unwrap();
        let closed = total_rate(&d).unwrap();
        for integ in [
            gh(),
            Integrator::new(QuadratureSpec::adaptive(1e-14, 1e-300)).unwrap(),
        ] {
            let q = rate(&d, RateMode::ShortTime, &integ).unwrap();
            assert_relative_eq!(q, closed, max_relative = 1e-12);
        }
    }

    #[test]
    fn quantum_correction_zeros() {
        let base = |theta, phi| SuperpositionSpec::new(-0.01, 0.013, 0.008, theta, phi).unwrap();
        for theta in [0.0, FRAC_PI_4, FRAC_PI_2] {
            let s = base(theta, 0.3);
            assert!(quantum_correction(&s, &s.matched_mixture()).unwrap().abs() < 1e-15);
        }
        let s = base(0.3, FRAC_PI_2);
        assert!(quantum_correction(&s, &s.matched_mixture()).unwrap().abs() < 1e-15);
    }

    #[test]
    fn quantum_correction_reference_value() {
        // theta = pi/8, phi = 0, separation = 2 delta, delta = 0.01:
        // 0.25 * 0.02 / (sin(pi/4) + e) = 1.45969...e-3
        let s = SuperpositionSpec::new(0.0, 0.02, 0.01, FRAC_PI_8, 0.0).unwrap();
        let q = quantum_correction(&s, &s.matched_mixture()).unwrap();
        let hand = 0.005 / (0.5f64.sqrt() + 1.0f64.exp());
        assert_relative_eq!(q, hand, max_relative = 1e-14);
        assert!((q - 1.4597e-3).abs() < 1e-4 * 1.4597e-3);
    }

    #[test]
    fn quantum_correction_rejects_mismatch() {
        let s = SuperpositionSpec::new(0.0, 0.02, 0.01, FRAC_PI_8, 0.0).unwrap();
        let mut m = s.matched_mixture();
        m.delta *= 1.01;
        assert!(matches!(
            quantum_correction(&s, &m),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn quantum_correction_vanishes_for_distant_packets() {
        let mut last = f64::INFINITY;
        for sep in [2.0, 6.0, 12.0, 40.0, 200.0] {
            let s = SuperpositionSpec::new(0.0, sep * 0.01, 0.01, FRAC_PI_8, 0.0).unwrap();
            let q = quantum_correction(&s, &s.matched_mixture()).unwrap().abs();
            let bound = 0.25 * sep * 0.01 * 2.0 * s.overlap();
            assert!(q <= bound);
            assert!(q < last);
            last = q;
        }
        assert_eq!(last, 0.0);
    }

    #[test]
    fn quadrature_routes_agree_with_closed_form() {
        let s = SuperpositionSpec::new(0.0, 0.02, 0.01, FRAC_PI_8, 0.0).unwrap();
        let closed = quantum_correction(&s, &s.matched_mixture()).unwrap();
        let via_gh = quantum_correction_quadrature(&s, &gh()).unwrap();
        let adaptive = Integrator::new(QuadratureSpec::adaptive(1e-13, 1e-30)).unwrap();
        let via_gk = quantum_correction_quadrature(&s, &adaptive).unwrap();
        assert_relative_eq!(via_gh, closed, max_relative = 1e-13);
        assert_relative_eq!(via_gk, closed, max_relative = 1e-11);
    }

    #[test]
    fn survival_examples() {
        let integ = gh();
        let d = HeightDensity::mixture(MixtureSpec::new(-0.1, 0.2, 0.02, 0.7).unwrap()).unwrap();
        assert_relative_eq!(
            survival_probability(&d, 0.0, &integ).unwrap(),
            1.0,
            max_relative = 1e-14
        );
        let point = HeightDensity::localized(0.0).unwrap();
        for s in [0.1, 1.0, 3.0] {
            assert_relative_eq!(
                survival_probability(&point, s, &integ).unwrap(),
                (-s).exp(),
                max_relative = 1e-13
            );
        }
        assert!(matches!(
            survival_probability(&d, -0.1, &integ),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn survival_of_symmetric_mixture_against_adaptive_quadrature() {
        let adaptive = Integrator::new(QuadratureSpec::adaptive(1e-13, 1e-300)).unwrap();
        let s: f64 = 1.0;
        let width: f64 = 0.02;
        let closed = |h: f64| (-s).exp() * (h * s).cosh() * (width * width * s * s / 4.0).exp();

        // Packets centred on -+0.5 reach below the horizon guard, so the raw
        // density is integrated directly.
        let m = MixtureSpec::new(-0.5, 0.5, width, FRAC_PI_4).unwrap();
        assert!(HeightDensity::mixture(m).is_err());
        let oracle = adaptive
            .adaptive(|z| m.density(z) * (-(1.0 + z) * s).exp(), -0.8, 0.8)
            .unwrap();
        assert_relative_eq!(oracle, closed(0.5), max_relative = 1e-12);

        let d =
            HeightDensity::mixture(MixtureSpec::new(-0.2, 0.2, width, FRAC_PI_4).unwrap()).unwrap();
        assert_relative_eq!(
            survival_probability(&d, s, &gh()).unwrap(),
            closed(0.2),
            max_relative = 1e-12
        );
    }

    #[test]
    fn survival_slope_is_total_rate() {
        let d = HeightDensity::superposition(
            SuperpositionSpec::new(0.0, 0.02, 0.01, FRAC_PI_8, 0.0).unwrap(),
        )
        .unwrap();
        let integ = gh();
        let h = 1e-5;
        let slope = (survival_probability(&d, h, &integ).unwrap()
            - survival_probability(&d, 0.0, &integ).unwrap())
            / h;
        let slope_c = (survival_probability(&d, 2.0 * h, &integ).unwrap() - 1.0) / (2.0 * h);
        let richardson = 2.0 * slope - slope_c;
        assert_relative_eq!(-richardson, total_rate(&d).unwrap(), max_relative = 1e-8);
        let exact = rate(&d, RateMode::TimeResolved { s: 0.0 }, &integ).unwrap();
        assert_relative_eq!(exact, total_rate(&d).unwrap(), max_relative = 1e-13);
    }

    #[test]
    fn amplitude_examples() {
        assert_eq!(excited_amplitude_sq(0.0, 0.0).unwrap(), 1.0);
        assert_relative_eq!(
            excited_amplitude_sq(0.0, 2f64.ln()).unwrap(),
            0.5,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            excited_amplitude_sq(1.0, 1.0).unwrap(),
            (-2.0f64).exp(),
            max_relative = 1e-15
        );
        assert!(excited_amplitude_sq(-1.5, 1.0).is_err());
        assert_eq!(photon_amplitude_sq(0.0, 0.0, 0.0, 1e3).unwrap(), 0.0);
        assert_relative_eq!(
            photon_amplitude_sq(0.0, 0.0, 50.0, 1e3).unwrap(),
            4.0,
            max_relative = 1e-10
        );
        let peak = photon_amplitude_sq(0.0, 0.0, 60.0, 1e3).unwrap();
        assert_relative_eq!(
            photon_amplitude_sq(0.0, 0.5, 60.0, 1e3).unwrap(),
            0.5 * peak,
            max_relative = 1e-10
        );
    }

    #[test]
    fn photon_amplitude_reaches_stationary_lorentzian() {
        for zeta in [0.0, 0.2, 0.5] {
            let r = 1e3;
            let s = 50.0 / (1.0 + zeta);
            let got = photon_amplitude_sq(zeta, r * zeta, s, r).unwrap();
            let gamma = 1.0 + zeta;
            assert_relative_eq!(got, 4.0 / (gamma * gamma), max_relative = 1e-3);
        }
    }

    #[test]
    fn lorentzian_area_is_one() {
        for zeta in [0.0, 0.3, -0.2, 1e-17] {
            assert_eq!(
                lorentzian_area(zeta, 1.5e17, f64::NEG_INFINITY, f64::INFINITY),
                1.0
            );
        }
        let numeric = crate::numerics::quadrature::adaptive_integrate(
            |nu| lorentzian_line(0.2, nu, 10.0),
            -1e4,
            1e4,
            1e-13,
            1e-300,
            1000,
        )
        .unwrap()
        .value;
        assert_relative_eq!(
            numeric,
            lorentzian_area(0.2, 10.0, -1e4, 1e4),
            max_relative = 1e-12
        );
    }

    #[test]
    fn point_mass_spectrum_is_shifted_lorentzian() {
        let integ = gh();
        let grid = uniform_grid(-60.0, 60.0, 12001);
        let flat = spectrum(&HeightDensity::localized(0.0).unwrap(), &grid, 1e3, &integ).unwrap();
        assert_eq!(flat.peak().0.abs(), 0.0);
        assert_relative_eq!(flat.fwhm().unwrap(), 1.0, max_relative = 1e-4);
        assert!(flat.total_mass > 0.99 && flat.total_mass < 1.0001);

        let zeta0 = 0.01;
        let r = 1e3;
        let grid = uniform_grid(r * zeta0 - 60.0, r * zeta0 + 60.0, 12001);
        let shifted =
            spectrum(&HeightDensity::localized(zeta0).unwrap(), &grid, r, &integ).unwrap();
        assert!((shifted.peak().0 - r * zeta0).abs() < 1e-9);
        assert_relative_eq!(shifted.fwhm().unwrap(), 1.0 + zeta0, max_relative = 1e-4);
    }

    #[test]
    fn narrow_grid_sets_warning() {
        let integ = Integrator::new(QuadratureSpec::adaptive(1e-10, 1e-15)).unwrap();
        let grid = uniform_grid(-1.0, 1.0, 101);
        let s = spectrum(&HeightDensity::localized(0.0).unwrap(), &grid, 1e3, &integ).unwrap();
        assert!(s.mass_warning);
        assert!(spectrum(
            &HeightDensity::localized(0.0).unwrap(),
            &[0.0, 0.0],
            1e3,
            &integ
        )
        .is_err());
    }

    #[test]
    fn spectrum_csv_header_and_digits() {
        let s = SpectrumResult::from_samples(vec![0.0, 1.0], vec![0.5, 1.0 / 3.0]);
        let csv = s.to_csv();
        assert!(csv.starts_with("nu,p\n"));
        let second: f64 = csv
            .lines()
            .nth(2)
            .unwrap()
            .split(',')
            .nth(1)
            .unwrap()
            .parse()
            .unwrap();
        assert_eq!(second, 1.0 / 3.0);
    }

    #[test]
    fn tcoh_momentum_term_vanishes_at_free_fall_momentum() {
        let m = 1.66e-27;
        let g = 9.80665;
        let t = 1e-8;
        let kp = KhandelwalParams {
            sigma_z: 0.01,
            sigma_v: 1e-5,
            p_bar: m * g * t,
            alpha_w: 0.5,
            phi: 0.0,
            t,
            m,
        };
        let terms =
            khandelwal_tcoh_full(&kp, 0.0, 0.02, g, 299_792_458.0, 1.054_571_817e-34).unwrap();
        assert_eq!(terms.momentum_coefficient, 0.0);
        assert_eq!(terms.weighted[2], 0.0);
    }

    #[test]
    fn tcoh_finite_at_quadrature_phase() {
        let kp = KhandelwalParams::minimum_uncertainty(
            0.01,
            1.66e-27,
            1.054_571_817e-34,
            0.3,
            FRAC_PI_2,
            1e-8,
        );
        let terms = khandelwal_tcoh_full(&kp, 0.0, 0.01, 9.8, 3e8, 1.054_571_817e-34).unwrap();
        assert!(terms.total.is_finite());
        assert!(terms.weighted[2].is_finite() && terms.weighted[2] != 0.0);
        assert!(terms.weighted[1].abs() < 1e-30);
    }

    #[test]
    fn reduced_tcoh_equals_quantum_correction() {
        let (g, c) = (9.80665, 299_792_458.0);
        let theta = FRAC_PI_8;
        let delta = 0.01 * c * c / g;
        let kp = KhandelwalParams {
            sigma_z: delta,
            sigma_v: 1.0,
            p_bar: 0.0,
            alpha_w: theta.cos().powi(2),
            phi: 0.0,
            t: 1.0,
            m: 1.0,
        };
        let reduced = khandelwal_tcoh_reduced(&kp, 0.0, 2.0 * delta, g, c).unwrap();
        let s = SuperpositionSpec::new(0.0, 0.02, 0.01, theta, 0.0).unwrap();
        let q = quantum_correction(&s, &s.matched_mixture()).unwrap();
        assert_relative_eq!(reduced, q, max_relative = 1e-12);
        let full = khandelwal_tcoh_full(&kp, 0.0, 2.0 * delta, g, c, 1.0).unwrap();
        assert_relative_eq!(full.weighted[1], q * kp.t, max_relative = 1e-12);
    }
}
