//! Wigner–Weisskopf time-domain oracle.
//!
//! A single excited atom at fixed height `zeta` coupled to a finite set of
//! field modes, integrated without any Markov or single-pole step. Used to
//! check the exponential decay law and the Lorentzian line it predicts.
//!
//! Frame: amplitudes rotate with the shifted atomic frequency, so the mode
//! at detuning `nu_j` carries phase `(nu_j - r zeta) s`. The largest angular
//! rate in the system is therefore the half-width of the mode window.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::SpectrumResult;
use crate::error::{Error, Result};
use crate::io::fmt17;
use crate::numerics::ode::{integrate, ComplexSystem, StepControl, StepStats};

/// Minimum distance from the line centre to either window edge, in linewidths.
pub const MIN_LINE_MARGIN: f64 = 25.0;
/// Largest allowed mode spacing; keeps the recurrence time `2 pi / dnu`
/// beyond a hundred lifetimes.
pub const MAX_MODE_SPACING: f64 = 0.05;
/// Start of the exponential fit window; excludes the quadratic short-time region.
pub const FIT_START: f64 = 0.5;
pub const FIT_END: f64 = 5.0;
/// Fraction of the recurrence time treated as physical.
pub const RECURRENCE_FRACTION: f64 = 0.8;
pub const UNITARITY_TOLERANCE: f64 = 1e-6;
/// Sampling interval of the recorded trajectory.
pub const OUTPUT_STEP: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeGrid {
    pub nu_min: f64,
    pub nu_max: f64,
    pub n_modes: usize,
}

impl ModeGrid {
    pub fn new(nu_min: f64, nu_max: f64, n_modes: usize) -> Result<Self> {
        let grid = Self {
            nu_min,
            nu_max,
            n_modes,
        };
        if !(nu_min.is_finite() && nu_max.is_finite() && nu_max > nu_min) {
            return Err(Error::Config(format!(
                "mode window [{nu_min}, {nu_max}] is empty"
            )));
        }
        if n_modes < 2 {
            return Err(Error::Config("need at least two modes".into()));
        }
        if grid.spacing() > MAX_MODE_SPACING {
            return Err(Error::Config(format!(
                "mode spacing {} exceeds {MAX_MODE_SPACING}",
                grid.spacing()
            )));
        }
        Ok(grid)
    }

    /// `n_modes` modes over `centre ± half_width`.
    pub fn centered(centre: f64, half_width: f64, n_modes: usize) -> Result<Self> {
        Self::new(centre - half_width, centre + half_width, n_modes)
    }

    pub fn spacing(&self) -> f64 {
        (self.nu_max - self.nu_min) / (self.n_modes - 1) as f64
    }

    pub fn detunings(&self) -> Vec<f64> {
        let dnu = self.spacing();
        (0..self.n_modes)
            .map(|j| self.nu_min + dnu * j as f64)
            .collect()
    }

    pub fn recurrence_time(&self) -> f64 {
        2.0 * PI / self.spacing()
    }

    /// Checks the window against the line of an atom at `zeta`.
    pub fn validate_for(&self, zeta: f64, r: f64) -> Result<()> {
        Self::new(self.nu_min, self.nu_max, self.n_modes)?;
        let u = r * zeta;
        let margin = MIN_LINE_MARGIN * (1.0 + zeta);
        if u - self.nu_min < margin || self.nu_max - u < margin {
            return Err(Error::Config(format!(
                "mode window [{}, {}] must contain the line centre {u} with margin {margin}",
                self.nu_min, self.nu_max
            )));
        }
        if r + self.nu_min <= 0.0 {
            return Err(Error::Config("mode window reaches zero frequency".into()));
        }
        Ok(())
    }
}

/// Atom plus discretised field.
///
/// State layout: index 0 is the excited amplitude, `1..=n` the one-photon
/// amplitudes. Equations of motion:
///
/// ```text
/// a'   = -Σ g_j b_j
/// b_j' = -i (nu_j - u) b_j + g_j a
/// ```
///
/// Couplings `g_j^2 = (1+zeta) (r+nu_j)/(r(1+zeta)) dnu/2pi` carry the
/// linear frequency dependence of the dipole coupling and put the golden-rule
/// rate at exactly `1 + zeta`.
#[derive(Debug, Clone)]
pub struct WignerWeisskopf {
    zeta: f64,
    r: f64,
    nu: Vec<f64>,
    detuning: Vec<f64>,
    coupling: Vec<f64>,
}

impl WignerWeisskopf {
    pub fn new(zeta: f64, r: f64, grid: &ModeGrid) -> Result<Self> {
        if !(zeta > -1.0) {
            return Err(Error::Horizon { zeta, limit: -1.0 });
        }
        if !(r.is_finite() && r >= 1.0) {
            return Err(Error::invalid(
                "r",
                format!("frequency ratio must be >= 1, got {r}"),
            ));
        }
        grid.validate_for(zeta, r)?;
        let nu = grid.detunings();
        let u = r * zeta;
        let dnu = grid.spacing();
        let coupling = nu
            .iter()
            .map(|&v| ((1.0 + zeta) * (r + v) / (r * (1.0 + zeta)) * dnu / (2.0 * PI)).sqrt())
            .collect();
        let detuning = nu.iter().map(|&v| v - u).collect();
        Ok(Self {
            zeta,
            r,
            nu,
            detuning,
            coupling,
        })
    }

    /// Multiplies every coupling by `scale`; zero decouples the atom.
    pub fn with_coupling_scale(mut self, scale: f64) -> Self {
        self.coupling.iter_mut().for_each(|g| *g *= scale);
        self
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    pub fn coupling(&self) -> &[f64] {
        &self.coupling
    }

    /// `2 pi g(u)^2 / dnu` with the coupling evaluated at the line centre.
    /// Unaffected by [`Self::with_coupling_scale`].
    pub fn golden_rule_rate(&self) -> f64 {
        (self.r + self.r * self.zeta) / self.r
    }

    pub fn initial_state(&self) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.nu.len() + 1];
        y[0] = Complex64::new(1.0, 0.0);
        y
    }
}

impl ComplexSystem for WignerWeisskopf {
    fn dim(&self) -> usize {
        self.nu.len() + 1
    }

    fn rhs(&self, _t: f64, y: &[Complex64], dy: &mut [Complex64]) {
        let a = y[0];
        let b = &y[1..];
        let mut da = Complex64::new(0.0, 0.0);
        for ((db, &bj), (&g, &d)) in dy[1..]
            .iter_mut()
            .zip(b)
            .zip(self.coupling.iter().zip(&self.detuning))
        {
            da -= g * bj;
            *db = Complex64::new(d * bj.im, -d * bj.re) + g * a;
        }
        dy[0] = da;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRun {
    pub zeta: f64,
    pub r: f64,
    pub mode_spacing: f64,
    pub recurrence_time: f64,
    pub s_max: f64,
    pub times: Vec<f64>,
    pub alpha_sq: Vec<f64>,
    pub nu: Vec<f64>,
    pub beta_sq_final: Vec<f64>,
    /// Least-squares decay rate of `ln |alpha|^2`; `None` when the fit
    /// window holds fewer than two samples.
    pub fitted_rate: Option<f64>,
    /// RMS residual of that fit in `ln |alpha|^2`.
    pub fit_residual: Option<f64>,
    /// Largest `|alpha|^2 + Σ|beta|^2 - 1` over the recorded times.
    pub norm_error: f64,
    pub steps: usize,
}

impl OracleRun {
    /// Upper end of the physically meaningful time range.
    pub fn physical_horizon(&self) -> f64 {
        self.s_max.min(RECURRENCE_FRACTION * self.recurrence_time)
    }

    pub fn trajectory_csv(&self) -> String {
        let mut out = String::from("s,alpha_sq\n");
        for (s, a) in self.times.iter().zip(&self.alpha_sq) {
            out.push_str(&format!("{},{}\n", fmt17(*s), fmt17(*a)));
        }
        out
    }

    pub fn final_spectrum_csv(&self) -> String {
        let mut out = String::from("nu,beta_sq\n");
        for (nu, b) in self.nu.iter().zip(&self.beta_sq_final) {
            out.push_str(&format!("{},{}\n", fmt17(*nu), fmt17(*b)));
        }
        out
    }
}

fn fit_decay(times: &[f64], alpha_sq: &[f64], lo: f64, hi: f64) -> (Option<f64>, Option<f64>) {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(alpha_sq)
        .filter(|(&s, &a)| s >= lo - 1e-12 && s <= hi + 1e-12 && a > 0.0)
        .map(|(&s, &a)| (s, a.ln()))
        .collect();
    if pts.len() < 2 {
        return (None, None);
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let rms = (pts
        .iter()
        .map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (Some(-slope), Some(rms))
}

fn output_times(s_max: f64) -> Vec<f64> {
    let n = (s_max / OUTPUT_STEP).round() as usize;
    let mut t: Vec<f64> = (0..=n)
        .map(|i| i as f64 * OUTPUT_STEP)
        .filter(|&s| s < s_max)
        .collect();
    t.push(s_max);
    t
}

/// Integrates a prepared system from the fully excited state.
pub fn simulate(system: &WignerWeisskopf, s_max: f64, ode_tol: f64) -> Result<OracleRun> {
    if !(s_max.is_finite() && s_max > 0.0) {
        return Err(Error::invalid(
            "s_max",
            format!("must be positive, got {s_max}"),
        ));
    }
    if !(ode_tol > 0.0 && ode_tol <= 1e-8) {
        return Err(Error::invalid(
            "ode_tol",
            format!("must lie in (0, 1e-8], got {ode_tol}"),
        ));
    }
    let times = output_times(s_max);
    let mut alpha_sq = Vec::with_capacity(times.len());
    let mut norm_error: f64 = 0.0;
    let (y, stats): (Vec<Complex64>, StepStats) = integrate(
        system,
        0.0,
        &system.initial_state(),
        &times,
        &StepControl::with_rtol(ode_tol),
        |_, y| {
            let a = y[0].norm_sqr();
            let photons: f64 = y[1..].iter().map(|b| b.norm_sqr()).sum();
            norm_error = norm_error.max((a + photons - 1.0).abs());
            alpha_sq.push(a);
        },
    )?;
    if norm_error > UNITARITY_TOLERANCE {
        return Err(Error::Integration(format!(
            "norm drifted by {norm_error:e}, above {UNITARITY_TOLERANCE:e}"
        )));
    }
    let dnu = system.nu[1] - system.nu[0];
    let recurrence_time = 2.0 * PI / dnu;
    let fit_end = FIT_END
        .min(RECURRENCE_FRACTION * recurrence_time)
        .min(s_max);
    let (fitted_rate, fit_residual) = fit_decay(&times, &alpha_sq, FIT_START, fit_end);
    Ok(OracleRun {
        zeta: system.zeta,
        r: system.r,
        mode_spacing: dnu,
        recurrence_time,
        s_max,
        times,
        alpha_sq,
        nu: system.nu.clone(),
        beta_sq_final: y[1..].iter().map(|b| b.norm_sqr()).collect(),
        fitted_rate,
        fit_residual,
        norm_error,
        steps: stats.accepted,
    })
}

pub fn ww_simulate(
    zeta: f64,
    r: f64,
    grid: &ModeGrid,
    s_max: f64,
    ode_tol: f64,
) -> Result<OracleRun> {
    simulate(&WignerWeisskopf::new(zeta, r, grid)?, s_max, ode_tol)
}

/// Independent runs for several heights, in parallel.
pub fn ww_simulate_many(
    zetas: &[f64],
    r: f64,
    grid_for: impl Fn(f64) -> Result<ModeGrid> + Sync,
    s_max: f64,
    ode_tol: f64,
) -> Result<Vec<OracleRun>> {
    zetas
        .par_iter()
        .map(|&z| ww_simulate(z, r, &grid_for(z)?, s_max, ode_tol))
        .collect()
}

/// Emitted line `|beta_j(s_max)|^2 / dnu`. The run must cover at least
/// five lifetimes so that the atom has essentially decayed.
pub fn oracle_spectrum(run: &OracleRun) -> Result<SpectrumResult> {
    let needed = 5.0 / (1.0 + run.zeta);
    if run.s_max < needed {
        return Err(Error::Validity(format!(
            "run ends at s = {}, needs at least {needed} to read off the emitted line",
            run.s_max
        )));
    }
    let p_values = run
        .beta_sq_final
        .iter()
        .map(|b| b / run.mode_spacing)
        .collect();
    Ok(SpectrumResult {
        nu_grid: run.nu.clone(),
        p_values,
        total_mass: run.beta_sq_final.iter().sum(),
        mass_warning: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinglePoleReport {
    pub zeta: f64,
    pub r: f64,
    pub fitted_rate: Option<f64>,
    pub fit_residual: Option<f64>,
    /// Largest `| |alpha|^2 e^{(1+zeta)s} - 1 |` over the compared times.
    pub max_deviation: f64,
    pub compared_until: f64,
    /// Set when part of the run lay beyond the recurrence cut and was ignored.
    pub truncated: bool,
}

impl SinglePoleReport {
    /// Compares a run against `e^{-(1+zeta)s}` for `s` up to `until`,
    /// capped at the physical horizon of the run.
    pub fn from_run(run: &OracleRun, until: f64) -> Self {
        let horizon = run.physical_horizon();
        let compared_until = until.min(horizon);
        let rate = 1.0 + run.zeta;
        let max_deviation = run
            .times
            .iter()
            .zip(&run.alpha_sq)
            .filter(|(&s, _)| s <= compared_until + 1e-12)
            .map(|(&s, &a)| (a * (rate * s).exp() - 1.0).abs())
            .fold(0.0, f64::max);
        Self {
            zeta: run.zeta,
            r: run.r,
            fitted_rate: run.fitted_rate,
            fit_residual: run.fit_residual,
            max_deviation,
            compared_until,
            truncated: run.s_max > horizon,
        }
    }

    pub fn summary_json(&self) -> Result<String> {
        let v = serde_json::json!({
            "zeta": self.zeta,
            "r": self.r,
            "fitted_rate": self.fitted_rate,
            "fit_residual": self.fit_residual,
            "max_deviation_single_pole": self.max_deviation,
        });
        Ok(serde_json::to_string_pretty(&v)?)
    }
}

/// Runs the oracle and compares it to single-pole decay over the whole
/// physical range of the run.
pub fn validate_single_pole(
    zeta: f64,
    r: f64,
    grid: &ModeGrid,
    s_max: f64,
    ode_tol: f64,
) -> Result<(OracleRun, SinglePoleReport)> {
    let run = ww_simulate(zeta, r, grid, s_max, ode_tol)?;
    let report = SinglePoleReport::from_run(&run, f64::INFINITY);
    Ok((run, report))
}
