//! Plot-ready tables: rate-difference surfaces, paired emission lines, the
//! optimal-state scan and the post-Newtonian term magnitudes.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_8, PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{
    khandelwal_tcoh_full, quantum_correction, quantum_correction_quadrature, spectrum, spectrum_at,
    KhandelwalParams, SpectrumResult,
};
use crate::error::{Error, Result};
use crate::io::fmt17;
use crate::model::{
    HeightDensity, MixtureSpec, SuperpositionSpec, ATOMIC_MASS_UNIT, HBAR, SPEED_OF_LIGHT,
    STANDARD_GRAVITY,
};
use crate::numerics::quadrature::Integrator;

/// Packet width of the rate-difference surfaces, in units of `c^2/g`.
pub const FIGURE1_DELTA: f64 = 0.01;
pub const FIGURE1_SAMPLES: usize = 201;
/// Largest packet separation on the default surfaces.
pub const FIGURE1_MAX_SEPARATION: f64 = 0.06;
pub const FIGURE2_SAMPLES: usize = 4001;
pub const FIGURE2_WINDOW: f64 = 5.0;

/// Evenly spaced samples. With `closed = false` the upper end is left out,
/// which is how periodic axes such as `phi` are sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    #[serde(default = "default_closed")]
    pub closed: bool,
}

fn default_closed() -> bool {
    true
}

impl Axis {
    pub fn closed(lo: f64, hi: f64, n: usize) -> Self {
        Self {
            lo,
            hi,
            n,
            closed: true,
        }
    }

    pub fn periodic(lo: f64, period: f64, n: usize) -> Self {
        Self {
            lo,
            hi: lo + period,
            n,
            closed: false,
        }
    }

    pub fn fixed(v: f64) -> Self {
        Self::closed(v, v, 1)
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid(name, "axis has no samples"));
        }
        if !(self.lo.is_finite() && self.hi.is_finite() && self.hi >= self.lo) {
            return Err(Error::invalid(
                name,
                format!("bad range [{}, {}]", self.lo, self.hi),
            ));
        }
        if self.n > 1 && self.hi == self.lo {
            return Err(Error::invalid(name, "several samples over an empty range"));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
        let intervals = if self.closed { self.n - 1 } else { self.n };
        let step = (self.hi - self.lo) / intervals as f64;
        (0..self.n)
            .map(|i| {
                if self.closed && i == self.n - 1 {
                    self.hi
                } else {
                    self.lo + step * i as f64
                }
            })
            .collect()
    }

    fn spacing(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.hi - self.lo) / (if self.closed { self.n - 1 } else { self.n }) as f64
        }
    }
}

/// Grid of `(theta, phi, zeta2 - zeta1)` at fixed packet width. A held
/// parameter is an axis with one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub delta_zeta: f64,
    pub theta: Axis,
    pub phi: Axis,
    pub dz: Axis,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_zeta.is_finite() && self.delta_zeta > 0.0) {
            return Err(Error::invalid("delta_zeta", "must be positive"));
        }
        self.theta.validate("theta")?;
        self.phi.validate("phi")?;
        self.dz.validate("dz")?;
        if self.theta.lo < 0.0 || self.theta.hi > FRAC_PI_2 {
            return Err(Error::invalid("theta", "must lie within [0, pi/2]"));
        }
        let phi_top = self.phi.values().last().copied().unwrap_or(0.0);
        if self.phi.lo < 0.0 || phi_top >= TAU {
            return Err(Error::invalid("phi", "samples must lie within [0, 2pi)"));
        }
        Ok(())
    }
}

/// The three default rate-difference surfaces:
/// `a` unequal weights `theta = pi/8` over `(phi, dz)`,
/// `b` and `c` with `phi = 0` and `phi = pi` over `(theta, dz)`.
pub fn figure1_panels(n: usize) -> [(&'static str, SweepSpec); 3] {
    let dz = Axis::closed(0.0, FIGURE1_MAX_SEPARATION, n);
    let theta = Axis::closed(0.0, FRAC_PI_2, n);
    let spec = |theta, phi| SweepSpec {
        delta_zeta: FIGURE1_DELTA,
        theta,
        phi,
        dz,
    };
    [
        (
            "figure1a",
            spec(Axis::fixed(FRAC_PI_8), Axis::periodic(0.0, TAU, n)),
        ),
        ("figure1b", spec(theta, Axis::fixed(0.0))),
        ("figure1c", spec(theta, Axis::fixed(PI))),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    /// Rows of `(theta, phi, dz, gammaQ_inv)`.
    pub rows: Vec<[f64; 4]>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta,phi,dz,gammaQ_inv\n");
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| fmt17(*v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Packets centred symmetrically about `zeta = 0`.
fn centred_superposition(dz: f64, delta: f64, theta: f64, phi: f64) -> Result<SuperpositionSpec> {
    SuperpositionSpec::new(-0.5 * dz, 0.5 * dz, delta, theta, phi)
}

/// Evaluates the rate difference over the sweep grid by quadrature of the
/// density excess, independently of the closed form.
pub fn figure1_sweep(spec: &SweepSpec, integrator: &Integrator) -> Result<SweepTable> {
    spec.validate()?;
    let (thetas, phis, dzs) = (spec.theta.values(), spec.phi.values(), spec.dz.values());
    let mut points = Vec::with_capacity(thetas.len() * phis.len() * dzs.len());
    for &t in &thetas {
        for &p in &phis {
            points.extend(dzs.iter().map(|&d| [t, p, d]));
        }
    }
    let rows = points
        .par_iter()
        .map(|&[t, p, d]| {
            // Coincident packets have no rate difference. Short-circuiting also
            // covers theta = pi/4, phi = pi, where the state itself is null.
            if d == 0.0 {
                return Ok([t, p, d, 0.0]);
            }
            let sup = centred_superposition(d, spec.delta_zeta, t, p)?;
            Ok([t, p, d, quantum_correction_quadrature(&sup, integrator)?])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable { rows })
}

/// One emission-line comparison, all heights dimensionless.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineCase {
    pub zeta1: f64,
    pub zeta2: f64,
    pub delta_zeta: f64,
    pub r: f64,
    pub nu: Axis,
    #[serde(default = "default_equal_weights")]
    pub theta: f64,
    #[serde(default)]
    pub phi: f64,
}

fn default_equal_weights() -> f64 {
    std::f64::consts::FRAC_PI_4
}

impl LineCase {
    pub fn validate(&self) -> Result<()> {
        self.nu.validate("nu")?;
        if self.nu.n < 2 {
            return Err(Error::invalid("nu", "needs at least two samples"));
        }
        self.superposition()?;
        Ok(())
    }

    pub fn superposition(&self) -> Result<SuperpositionSpec> {
        SuperpositionSpec::new(
            self.zeta1,
            self.zeta2,
            self.delta_zeta,
            self.theta,
            self.phi,
        )
    }

    pub fn mixture(&self) -> Result<MixtureSpec> {
        MixtureSpec::new(self.zeta1, self.zeta2, self.delta_zeta, self.theta)
    }
}

/// The four line comparisons at frequency ratio `r`: packets at `∓h` with
/// `h = 2e-18, 6e-18, 1e-17, 1e-17` and widths `h, h, h, h/2`.
pub fn figure2_cases(r: f64) -> [(&'static str, LineCase); 4] {
    let case = |h: f64, delta: f64| LineCase {
        zeta1: -h,
        zeta2: h,
        delta_zeta: delta,
        r,
        nu: Axis::closed(-FIGURE2_WINDOW, FIGURE2_WINDOW, FIGURE2_SAMPLES),
        theta: std::f64::consts::FRAC_PI_4,
        phi: 0.0,
    };
    [
        ("figure2a", case(2e-18, 2e-18)),
        ("figure2b", case(6e-18, 6e-18)),
        ("figure2c", case(1e-17, 1e-17)),
        ("figure2d", case(1e-17, 5e-18)),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinePair {
    pub case: LineCase,
    pub sup: SpectrumResult,
    pub cl: SpectrumResult,
}

impl LinePair {
    pub fn max_norm_difference(&self) -> f64 {
        self.sup.max_abs_difference(&self.cl)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("nu,p_sup,p_cl\n");
        for ((nu, s), c) in self
            .sup
            .nu_grid
            .iter()
            .zip(&self.sup.p_values)
            .zip(&self.cl.p_values)
        {
            out.push_str(&format!("{},{},{}\n", fmt17(*nu), fmt17(*s), fmt17(*c)));
        }
        out
    }
}

pub fn figure2_lines(case: &LineCase, integrator: &Integrator) -> Result<LinePair> {
    case.validate()?;
    let grid = case.nu.values();
    let sup = spectrum(
        &HeightDensity::superposition(case.superposition()?)?,
        &grid,
        case.r,
        integrator,
    )?;
    let cl = spectrum(
        &HeightDensity::mixture(case.mixture()?)?,
        &grid,
        case.r,
        integrator,
    )?;
    Ok(LinePair {
        case: *case,
        sup,
        cl,
    })
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for a maximum of a unimodal `f` on `[a, b]`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut x1 = b - GOLDEN * (b - a);
    let mut x2 = a + GOLDEN * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while (b - a).abs() > tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - GOLDEN * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + GOLDEN * (b - a);
            f2 = f(x2);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Positions of the interior maxima of a sampled line, each refined on the
/// continuous line density within one grid step of its sample.
pub fn refined_maxima(
    density: &HeightDensity,
    r: f64,
    line: &SpectrumResult,
    integrator: &Integrator,
) -> Result<Vec<f64>> {
    let step = line.nu_grid[1] - line.nu_grid[0];
    line.local_maxima()
        .into_iter()
        .map(|nu0| {
            // Probe once so quadrature failures surface as errors rather than NaN.
            spectrum_at(density, nu0, r, integrator)?;
            let f = |nu: f64| spectrum_at(density, nu, r, integrator).unwrap_or(f64::NAN);
            Ok(golden_max(f, nu0 - step, nu0 + step, 1e-9).0)
        })
        .collect()
}

/// Search grid for the largest `|gammaQ_inv|` at fixed width. Separations
/// are in units of the packet width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    pub delta_zeta: f64,
    pub theta: Axis,
    pub phi: Axis,
    pub separation: Axis,
}

impl ScanSpec {
    pub fn default_for(delta_zeta: f64) -> Self {
        Self {
            delta_zeta,
            theta: Axis::closed(0.0, FRAC_PI_2, 91),
            phi: Axis::periodic(0.0, TAU, 72),
            separation: Axis::closed(0.05, 6.0, 120),
        }
    }

    pub fn validate(&self) -> Result<()> {
        SweepSpec {
            delta_zeta: self.delta_zeta,
            theta: self.theta,
            phi: self.phi,
            dz: self.separation,
        }
        .validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    #[serde(rename = "max_gammaQ")]
    pub max_gamma_q: f64,
    pub theta_star: f64,
    pub phi_star: f64,
    pub dz_star: f64,
    pub ratio_to_quarter_delta: f64,
}

/// Coarse grid over `(theta, phi, separation)`, then coordinate-wise
/// golden-section refinement inside the best cell.
pub fn optimal_state_scan(spec: &ScanSpec) -> Result<ScanReport> {
    spec.validate()?;
    let delta = spec.delta_zeta;
    let objective = |t: f64, p: f64, x: f64| -> f64 {
        match centred_superposition(x * delta, delta, t, p) {
            Ok(s) => quantum_correction(&s, &s.matched_mixture())
                .map(f64::abs)
                .unwrap_or(0.0),
            Err(_) => 0.0,
        }
    };
    let (thetas, phis, seps) = (
        spec.theta.values(),
        spec.phi.values(),
        spec.separation.values(),
    );
    let (mut best, mut t, mut p, mut x) = thetas
        .par_iter()
        .map(|&t| {
            let mut best = (-1.0, t, 0.0, 0.0);
            for &p in &phis {
                for &x in &seps {
                    let v = objective(t, p, x);
                    if v > best.0 {
                        best = (v, t, p, x);
                    }
                }
            }
            best
        })
        .reduce(
            || (-1.0, 0.0, 0.0, 0.0),
            |a, b| if b.0 > a.0 { b } else { a },
        );

    if best > 0.0 {
        let clip = |v: f64, axis: &Axis, lo: f64, hi: f64| {
            let h = axis.spacing();
            ((v - h).max(lo), (v + h).min(hi))
        };
        let phi_hi = spec.phi.hi.min(TAU - 1e-12);
        for _ in 0..4 {
            let (a, b) = clip(t, &spec.theta, spec.theta.lo, spec.theta.hi);
            if b > a {
                t = golden_max(|v| objective(v, p, x), a, b, 1e-10).0;
            }
            let (a, b) = clip(p, &spec.phi, spec.phi.lo, phi_hi);
            if b > a {
                p = golden_max(|v| objective(t, v, x), a, b, 1e-10).0;
            }
            let (a, b) = clip(x, &spec.separation, spec.separation.lo, spec.separation.hi);
            if b > a {
                x = golden_max(|v| objective(t, p, v), a, b, 1e-10).0;
            }
        }
        let refined = objective(t, p, x);
        best = best.max(refined);
    }
    let best = best.max(0.0);
    Ok(ScanReport {
        max_gamma_q: best,
        theta_star: t,
        phi_star: p,
        dz_star: x * delta,
        ratio_to_quarter_delta: best / (0.25 * delta),
    })
}

/// Magnitudes of the three bracket terms of the full time correction at a
/// reference point, next to order-of-magnitude estimates for them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermMagnitudeReport {
    pub sigma_v_sq_over_c_sq: f64,
    pub kinetic: f64,
    pub gravitational: f64,
    /// `|factor multiplying tan(phi)|` at the largest time considered.
    pub momentum_bound: f64,
    pub estimates: [f64; 3],
    /// Base-10 exponent gap between each term and its estimate; the third
    /// entry is zero whenever the bound is below its estimate.
    pub orders_off: [f64; 3],
}

impl TermMagnitudeReport {
    pub fn within_one_order(&self) -> [bool; 3] {
        self.orders_off.map(|o| o <= 1.0)
    }
}

/// Reference point: separation and spread `1e-18 c^2/g`, one atomic mass
/// unit, resting atom, `t = 1e-8 s`, unequal weights `alpha = cos^2(pi/8)`.
pub fn reference_tcoh_point() -> (KhandelwalParams, f64) {
    let sigma_z = 1e-18 * SPEED_OF_LIGHT * SPEED_OF_LIGHT / STANDARD_GRAVITY;
    let kp = KhandelwalParams::minimum_uncertainty(
        sigma_z,
        ATOMIC_MASS_UNIT,
        HBAR,
        FRAC_PI_8.cos().powi(2),
        0.0,
        1e-8,
    );
    (kp, sigma_z)
}

pub const TERM_ESTIMATES: [f64; 3] = [1e-26, 1e-18, 1e-26];

pub fn term_magnitude_report(
    kp: &KhandelwalParams,
    dz: f64,
    g: f64,
    c: f64,
    hbar: f64,
) -> Result<TermMagnitudeReport> {
    let terms = khandelwal_tcoh_full(kp, 0.0, dz, g, c, hbar)?;
    let kinetic = terms.kinetic.abs();
    let gravitational = terms.gravitational.abs();
    let momentum_bound = terms.momentum_coefficient.abs();
    let gap = |v: f64, e: f64| (v.log10() - e.log10()).abs();
    Ok(TermMagnitudeReport {
        sigma_v_sq_over_c_sq: (kp.sigma_v / c).powi(2),
        kinetic,
        gravitational,
        momentum_bound,
        estimates: TERM_ESTIMATES,
        orders_off: [
            gap(kinetic, TERM_ESTIMATES[0]),
            gap(gravitational, TERM_ESTIMATES[1]),
            if momentum_bound <= TERM_ESTIMATES[2] {
                0.0
            } else {
                gap(momentum_bound, TERM_ESTIMATES[2])
            },
        ],
    })
}
