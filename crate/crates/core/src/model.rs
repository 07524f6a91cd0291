//! Physical parameters, the dimensionless frame, and the two-packet clock states.
//!
//! Everything downstream of this module works in dimensionless variables:
//!
//! ```text
//! r    = Omega / Gamma0          frequency ratio
//! zeta = g z / c^2               height
//! s    = Gamma0 tau              time
//! nu   = (omega - Omega)/Gamma0  detuning
//! ```
//!
//! The gravitational line shift is `r * zeta`, a product of a huge and a tiny
//! number. It is always formed directly and never as a difference of two
//! absolute frequencies.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const STANDARD_GRAVITY: f64 = 9.80665;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const HBAR: f64 = 1.054_571_817e-34;
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

/// Frequency ratio of the narrow aluminium line used for the emission-line figures.
pub const ALUMINIUM_FREQUENCY_RATIO: f64 = 1.5e17;
/// Transition angular frequency assumed by the `earth-aluminium` preset.
pub const ALUMINIUM_OMEGA: f64 = 2.5e15;

/// Packets further than this many widths from their centre are treated as empty.
pub const SUPPORT_WIDTHS: f64 = 12.0;
/// States whose support reaches below this height are rejected.
pub const HORIZON_GUARD: f64 = -0.5;
/// Smallest accepted `1 + cos(phi) sin(2 theta) overlap`.
pub const NULL_STATE_FLOOR: f64 = 1e-12;

/// Dimensionful constants and atom parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub g: f64,
    pub c: f64,
    pub hbar: f64,
    pub eps0: f64,
    pub omega: f64,
    pub gamma0: f64,
    pub dipole: Option<f64>,
    pub mass: f64,
}

/// JSON form of [`PhysicalParams`]. Exactly one of `gamma0_s` and
/// `dipole_Cm` must be given.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsRecord {
    #[serde(default = "default_g")]
    pub g: f64,
    #[serde(default = "default_c")]
    pub c: f64,
    pub omega_rad_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma0_s: Option<f64>,
    #[serde(default, rename = "dipole_Cm", skip_serializing_if = "Option::is_none")]
    pub dipole_cm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass_kg: Option<f64>,
}

fn default_g() -> f64 {
    STANDARD_GRAVITY
}

fn default_c() -> f64 {
    SPEED_OF_LIGHT
}

/// Flat-space decay rate `Omega d^2 / (2 hbar c eps0)` for a dipole
/// perpendicular to the propagation axis.
pub fn gamma0_from_dipole(omega: f64, dipole: f64, hbar: f64, c: f64, eps0: f64) -> f64 {
    omega * dipole * dipole / (2.0 * hbar * c * eps0)
}

/// Resolves the flat-space rate of a parameter record, deriving it from the
/// dipole moment when one is given.
pub fn derive_gamma0(record: &ParamsRecord) -> Result<f64> {
    match (record.gamma0_s, record.dipole_cm) {
        (_, Some(d)) => Ok(gamma0_from_dipole(
            record.omega_rad_s,
            d,
            HBAR,
            record.c,
            VACUUM_PERMITTIVITY,
        )),
        (Some(g0), None) => Ok(g0),
        (None, None) => Err(Error::Config(
            "one of `gamma0_s` or `dipole_Cm` is required".into(),
        )),
    }
}

fn require_positive(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            field,
            format!("must be finite and positive, got {value}"),
        ))
    }
}

impl PhysicalParams {
    /// Earth surface gravity with the aluminium line ratio `Omega/Gamma0 = 1.5e17`.
    pub fn earth_aluminium() -> Self {
        Self {
            g: STANDARD_GRAVITY,
            c: SPEED_OF_LIGHT,
            hbar: HBAR,
            eps0: VACUUM_PERMITTIVITY,
            omega: ALUMINIUM_OMEGA,
            gamma0: ALUMINIUM_OMEGA / ALUMINIUM_FREQUENCY_RATIO,
            dipole: None,
            mass: ATOMIC_MASS_UNIT,
        }
    }

    /// Builds parameters from a desired frequency ratio; only `r` and `g/c^2`
    /// matter to every observable downstream.
    pub fn with_ratio(g: f64, c: f64, omega: f64, r: f64) -> Result<Self> {
        let p = Self {
            g,
            c,
            hbar: HBAR,
            eps0: VACUUM_PERMITTIVITY,
            omega,
            gamma0: omega / r,
            dipole: None,
            mass: ATOMIC_MASS_UNIT,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn from_record(record: &ParamsRecord) -> Result<Self> {
        if record.gamma0_s.is_some() && record.dipole_cm.is_some() {
            return Err(Error::Config(
                "give exactly one of `gamma0_s` and `dipole_Cm`, not both".into(),
            ));
        }
        let gamma0 = derive_gamma0(record)?;
        let p = Self {
            g: record.g,
            c: record.c,
            hbar: HBAR,
            eps0: VACUUM_PERMITTIVITY,
            omega: record.omega_rad_s,
            gamma0,
            dipole: record.dipole_cm,
            mass: record.mass_kg.unwrap_or(ATOMIC_MASS_UNIT),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("g", self.g)?;
        require_positive("c", self.c)?;
        require_positive("hbar", self.hbar)?;
        require_positive("eps0", self.eps0)?;
        require_positive("omega_rad_s", self.omega)?;
        require_positive("gamma0_s", self.gamma0)?;
        require_positive("mass_kg", self.mass)?;
        if let Some(d) = self.dipole {
            require_positive("dipole_Cm", d)?;
        }
        if self.omega / self.gamma0 < 1.0 {
            return Err(Error::invalid(
                "gamma0_s",
                format!(
                    "Omega/Gamma0 = {} must be at least 1",
                    self.omega / self.gamma0
                ),
            ));
        }
        Ok(())
    }

    pub fn scales(&self) -> DimensionlessScales {
        DimensionlessScales {
            r: self.omega / self.gamma0,
            g_over_c2: self.g / (self.c * self.c),
            gamma0: self.gamma0,
            omega: self.omega,
        }
    }
}

/// Conversion between laboratory and dimensionless variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionlessScales {
    pub r: f64,
    pub g_over_c2: f64,
    pub gamma0: f64,
    pub omega: f64,
}

impl DimensionlessScales {
    pub fn zeta(&self, z: f64) -> f64 {
        self.g_over_c2 * z
    }

    pub fn height(&self, zeta: f64) -> f64 {
        zeta / self.g_over_c2
    }

    pub fn s(&self, tau: f64) -> f64 {
        self.gamma0 * tau
    }

    pub fn tau(&self, s: f64) -> f64 {
        s / self.gamma0
    }

    pub fn nu(&self, omega: f64) -> f64 {
        (omega - self.omega) / self.gamma0
    }

    pub fn omega_at(&self, nu: f64) -> f64 {
        self.omega + nu * self.gamma0
    }

    /// Gravitational line shift `r * zeta` of an atom at height `zeta`.
    pub fn line_shift(&self, zeta: f64) -> f64 {
        self.r * zeta
    }
}

fn validate_weights(delta: f64, theta: f64) -> Result<()> {
    require_positive("delta_m", delta)?;
    if !(0.0..=FRAC_PI_2).contains(&theta) {
        return Err(Error::invalid(
            "theta_rad",
            format!("must lie in [0, pi/2], got {theta}"),
        ));
    }
    Ok(())
}

fn validate_centres(z1: f64, z2: f64) -> Result<()> {
    if !z1.is_finite() {
        return Err(Error::invalid("z1_m", "must be finite"));
    }
    if !z2.is_finite() {
        return Err(Error::invalid("z2_m", "must be finite"));
    }
    Ok(())
}

/// Normalised Gaussian `exp(-(z-centre)^2/width^2) / (sqrt(pi) width)`.
#[inline]
pub fn packet_density(z: f64, centre: f64, width: f64) -> f64 {
    let x = (z - centre) / width;
    (-x * x).exp() / (PI.sqrt() * width)
}

/// Coherent superposition of two Gaussian packets with weights `cos theta`,
/// `e^{i phi} sin theta`.
///
/// Lengths may be metres or dimensionless heights; every method works in
/// whichever unit the fields carry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuperpositionSpec {
    pub z1: f64,
    pub z2: f64,
    pub delta: f64,
    pub theta: f64,
    pub phi: f64,
}

/// Incoherent mixture of the same two packets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub z1: f64,
    pub z2: f64,
    pub delta: f64,
    pub theta: f64,
}

impl SuperpositionSpec {
    pub fn new(z1: f64, z2: f64, delta: f64, theta: f64, phi: f64) -> Result<Self> {
        let spec = Self {
            z1,
            z2,
            delta,
            theta,
            phi,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        validate_centres(self.z1, self.z2)?;
        validate_weights(self.delta, self.theta)?;
        if !(0.0..TAU).contains(&self.phi) {
            return Err(Error::invalid(
                "phi_rad",
                format!("must lie in [0, 2pi), got {}", self.phi),
            ));
        }
        // Coincident packets with theta = pi/4, phi = pi cancel to the null state.
        if 1.0 + self.interference() < NULL_STATE_FLOOR {
            return Err(Error::invalid(
                "phi_rad",
                "the two packets cancel and the state cannot be normalised",
            ));
        }
        Ok(())
    }

    /// The mixture sharing centres, width and weights.
    pub fn matched_mixture(&self) -> MixtureSpec {
        MixtureSpec {
            z1: self.z1,
            z2: self.z2,
            delta: self.delta,
            theta: self.theta,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            z1: self.z1 * factor,
            z2: self.z2 * factor,
            delta: self.delta * factor,
            ..*self
        }
    }

    /// Packet overlap `exp(-(z1-z2)^2 / 4 delta^2)`.
    pub fn overlap(&self) -> f64 {
        let x = (self.z1 - self.z2) / (2.0 * self.delta);
        (-x * x).exp()
    }

    /// Weight of the interference term, `cos(phi) sin(2 theta) overlap`.
    pub fn interference(&self) -> f64 {
        self.phi.cos() * (2.0 * self.theta).sin() * self.overlap()
    }

    pub fn norm_constant(&self) -> f64 {
        (PI.sqrt() * self.delta * (1.0 + self.interference())).powf(-0.5)
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.z1 + self.z2)
    }

    /// Wave function `psi_sup(z)` with the normalisation constant applied.
    pub fn amplitude(&self, z: f64) -> num_complex::Complex64 {
        let a = (z - self.z1) / self.delta;
        let b = (z - self.z2) / self.delta;
        let first = self.theta.cos() * (-0.5 * a * a).exp();
        let second = self.theta.sin() * (-0.5 * b * b).exp();
        let psi = num_complex::Complex64::from(first)
            + num_complex::Complex64::from_polar(second, self.phi);
        psi * self.norm_constant()
    }

    /// `|psi_sup(z)|^2`, written as a combination of three normalised
    /// Gaussians so no cancellation occurs in the cross term.
    pub fn density(&self, z: f64) -> f64 {
        let (c, s) = (self.theta.cos(), self.theta.sin());
        let k = self.interference();
        let direct = c * c * packet_density(z, self.z1, self.delta)
            + s * s * packet_density(z, self.z2, self.delta);
        let cross = k * packet_density(z, self.midpoint(), self.delta);
        (direct + cross) / (1.0 + k)
    }

    /// `|psi_sup(z)|^2 - P_cl(z)`, proportional to the interference weight.
    pub fn density_excess(&self, z: f64) -> f64 {
        let (c, s) = (self.theta.cos(), self.theta.sin());
        let k = self.interference();
        let direct = c * c * packet_density(z, self.z1, self.delta)
            + s * s * packet_density(z, self.z2, self.delta);
        k * (packet_density(z, self.midpoint(), self.delta) - direct) / (1.0 + k)
    }

    /// Closed-form first moment of the density.
    pub fn mean(&self) -> f64 {
        let (c, s) = (self.theta.cos(), self.theta.sin());
        let k = self.interference();
        (c * c * self.z1 + s * s * self.z2 + k * self.midpoint()) / (1.0 + k)
    }

    pub fn support(&self) -> (f64, f64) {
        support_of(self.z1, self.z2, self.delta)
    }
}

impl MixtureSpec {
    pub fn new(z1: f64, z2: f64, delta: f64, theta: f64) -> Result<Self> {
        let spec = Self {
            z1,
            z2,
            delta,
            theta,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        validate_centres(self.z1, self.z2)?;
        validate_weights(self.delta, self.theta)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            z1: self.z1 * factor,
            z2: self.z2 * factor,
            delta: self.delta * factor,
            ..*self
        }
    }

    pub fn density(&self, z: f64) -> f64 {
        let (c, s) = (self.theta.cos(), self.theta.sin());
        c * c * packet_density(z, self.z1, self.delta)
            + s * s * packet_density(z, self.z2, self.delta)
    }

    pub fn mean(&self) -> f64 {
        let (c, s) = (self.theta.cos(), self.theta.sin());
        c * c * self.z1 + s * s * self.z2
    }

    pub fn support(&self) -> (f64, f64) {
        support_of(self.z1, self.z2, self.delta)
    }
}

fn support_of(z1: f64, z2: f64, delta: f64) -> (f64, f64) {
    (
        z1.min(z2) - SUPPORT_WIDTHS * delta,
        z1.max(z2) + SUPPORT_WIDTHS * delta,
    )
}

/// Tabulated density on an increasing grid of heights, linearly interpolated
/// and normalised by the trapezoid rule at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledDensity {
    zeta: Vec<f64>,
    values: Vec<f64>,
}

impl SampledDensity {
    pub fn new(zeta: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if zeta.len() != values.len() || zeta.len() < 2 {
            return Err(Error::invalid(
                "sampled density",
                "needs at least two (zeta, value) pairs of equal length",
            ));
        }
        if zeta.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid(
                "sampled density",
                "heights must be strictly increasing",
            ));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid(
                "sampled density",
                "values must be finite and non-negative",
            ));
        }
        let mass: f64 = zeta
            .windows(2)
            .zip(values.windows(2))
            .map(|(z, v)| 0.5 * (z[1] - z[0]) * (v[0] + v[1]))
            .sum();
        if !(mass > 0.0) {
            return Err(Error::invalid(
                "sampled density",
                "total mass must be positive",
            ));
        }
        let values = values.into_iter().map(|v| v / mass).collect();
        Ok(Self { zeta, values })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.zeta
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, zeta: f64) -> f64 {
        let n = self.zeta.len();
        if zeta < self.zeta[0] || zeta > self.zeta[n - 1] {
            return 0.0;
        }
        let i = match self.zeta.partition_point(|&z| z <= zeta) {
            0 => 0,
            i if i >= n => n - 2,
            i => i - 1,
        };
        let t = (zeta - self.zeta[i]) / (self.zeta[i + 1] - self.zeta[i]);
        self.values[i] + t * (self.values[i + 1] - self.values[i])
    }

    /// Exact first moment of the piecewise-linear density.
    pub fn mean(&self) -> f64 {
        self.zeta
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(z, v)| {
                let h = z[1] - z[0];
                h * (v[0] * (2.0 * z[0] + z[1]) + v[1] * (z[0] + 2.0 * z[1])) / 6.0
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityKind {
    AnalyticSuperposition,
    AnalyticMixture,
    Sampled,
}

/// Normalised probability density over dimensionless height.
#[derive(Debug, Clone, PartialEq)]
pub enum HeightDensity {
    Superposition(SuperpositionSpec),
    Mixture(MixtureSpec),
    Sampled(SampledDensity),
}

fn check_horizon(lower: f64) -> Result<()> {
    if lower <= HORIZON_GUARD {
        Err(Error::Horizon {
            zeta: lower,
            limit: HORIZON_GUARD,
        })
    } else {
        Ok(())
    }
}

impl HeightDensity {
    /// Wraps a superposition whose lengths are already dimensionless.
    pub fn superposition(spec: SuperpositionSpec) -> Result<Self> {
        spec.validate()?;
        check_horizon(spec.support().0)?;
        Ok(Self::Superposition(spec))
    }

    /// Wraps a mixture whose lengths are already dimensionless.
    pub fn mixture(spec: MixtureSpec) -> Result<Self> {
        spec.validate()?;
        check_horizon(spec.support().0)?;
        Ok(Self::Mixture(spec))
    }

    pub fn sampled(density: SampledDensity) -> Result<Self> {
        check_horizon(density.zeta[0])?;
        Ok(Self::Sampled(density))
    }

    /// A packet narrow enough to stand in for an atom localised at `zeta`.
    pub fn localized(zeta: f64) -> Result<Self> {
        Self::mixture(MixtureSpec::new(zeta, zeta, 1e-15, 0.0)?)
    }

    pub fn kind(&self) -> DensityKind {
        match self {
            Self::Superposition(_) => DensityKind::AnalyticSuperposition,
            Self::Mixture(_) => DensityKind::AnalyticMixture,
            Self::Sampled(_) => DensityKind::Sampled,
        }
    }

    pub fn eval(&self, zeta: f64) -> f64 {
        match self {
            Self::Superposition(s) => s.density(zeta),
            Self::Mixture(m) => m.density(zeta),
            Self::Sampled(d) => d.eval(zeta),
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match self {
            Self::Superposition(s) => s.support(),
            Self::Mixture(m) => m.support(),
            Self::Sampled(d) => (d.zeta[0], d.zeta[d.zeta.len() - 1]),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Superposition(s) => s.mean(),
            Self::Mixture(m) => m.mean(),
            Self::Sampled(d) => d.mean(),
        }
    }
}

/// JSON record for a clock state; lengths in metres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateRecord {
    pub z1_m: f64,
    pub z2_m: f64,
    pub delta_m: f64,
    pub theta_rad: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_rad: Option<f64>,
    pub kind: StateKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    Superposition,
    Mixture,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StateSpec {
    Superposition(SuperpositionSpec),
    Mixture(MixtureSpec),
}

impl StateSpec {
    pub fn from_record(record: &StateRecord) -> Result<Self> {
        match record.kind {
            StateKind::Superposition => {
                let phi = record
                    .phi_rad
                    .ok_or_else(|| Error::invalid("phi_rad", "required for a superposition"))?;
                Ok(Self::Superposition(SuperpositionSpec::new(
                    record.z1_m,
                    record.z2_m,
                    record.delta_m,
                    record.theta_rad,
                    phi,
                )?))
            }
            StateKind::Mixture => {
                if record.phi_rad.is_some() {
                    return Err(Error::invalid(
                        "phi_rad",
                        "a mixture carries no relative phase",
                    ));
                }
                Ok(Self::Mixture(MixtureSpec::new(
                    record.z1_m,
                    record.z2_m,
                    record.delta_m,
                    record.theta_rad,
                )?))
            }
        }
    }

    pub fn to_record(&self) -> StateRecord {
        match *self {
            Self::Superposition(s) => StateRecord {
                z1_m: s.z1,
                z2_m: s.z2,
                delta_m: s.delta,
                theta_rad: s.theta,
                phi_rad: Some(s.phi),
                kind: StateKind::Superposition,
            },
            Self::Mixture(m) => StateRecord {
                z1_m: m.z1,
                z2_m: m.z2,
                delta_m: m.delta,
                theta_rad: m.theta,
                phi_rad: None,
                kind: StateKind::Mixture,
            },
        }
    }

    /// Converts metres to dimensionless heights and wraps the result as a density.
    pub fn density(&self, scales: &DimensionlessScales) -> Result<HeightDensity> {
        match self {
            Self::Superposition(s) => HeightDensity::superposition(s.scaled(scales.g_over_c2)),
            Self::Mixture(m) => HeightDensity::mixture(m.scaled(scales.g_over_c2)),
        }
    }
}
