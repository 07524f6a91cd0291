//! Gauss–Hermite rules and a globally adaptive Gauss–Kronrod integrator.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::HeightDensity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureMethod {
    GaussHermite,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub method: QuadratureMethod,
    /// Node count of the Gauss–Hermite rule.
    pub order: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self::gauss_hermite(64)
    }
}

impl QuadratureSpec {
    pub fn gauss_hermite(order: usize) -> Self {
        Self {
            method: QuadratureMethod::GaussHermite,
            order,
            rel_tol: 1e-12,
            abs_tol: 1e-15,
            max_subdivisions: 2000,
        }
    }

    pub fn adaptive(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            method: QuadratureMethod::Adaptive,
            order: 64,
            rel_tol,
            abs_tol,
            max_subdivisions: 2000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.order < 2 {
            return Err(Error::invalid("quad-order", "needs at least 2 nodes"));
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::invalid("tol", "tolerances must be positive"));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::invalid("max_subdivisions", "must be positive"));
        }
        Ok(())
    }
}

/// Nodes and weights for `∫ e^{-x²} f(x) dx ≈ Σ w_i f(x_i)`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Newton iteration on the orthonormal Hermite recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let pim4 = PI.powf(-0.25);
        let nf = n as f64;
        let m = n.div_ceil(2);
        let mut z = 0.0f64;
        for i in 0..m {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let step = p1 / pp;
                z -= step;
                if step.abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            weights[i] = 2.0 / (pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        if n % 2 == 1 {
            nodes[m - 1] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫ e^{-x²} f(x) dx`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Expectation of `f` under the normalised packet
    /// `exp(-(z-centre)²/width²) / (√π width)`.
    pub fn packet_expectation(&self, centre: f64, width: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.integrate(|x| f(centre + width * x)) / PI.sqrt()
    }
}

// 21-point Kronrod extension of the 10-point Gauss–Legendre rule.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_067_730_025,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gauss_kronrod_21(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> Segment {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kronrod = WGK[10] * fc;
    let mut gauss = 0.0;
    let mut fv = [(0.0, 0.0); 10];
    for (j, x) in XGK[..10].iter().enumerate() {
        let dx = half * x;
        let (f1, f2) = (f(centre - dx), f(centre + dx));
        fv[j] = (f1, f2);
        kronrod += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[10] * (fc - mean).abs();
    for (j, (f1, f2)) in fv.iter().enumerate() {
        asc += WGK[j] * ((f1 - mean).abs() + (f2 - mean).abs());
    }
    let value = kronrod * half;
    let asc = asc * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if asc != 0.0 && error != 0.0 {
        error = asc * (200.0 * error / asc).powf(1.5).min(1.0);
    }
    Segment { a, b, value, error }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveResult {
    pub value: f64,
    pub error: f64,
    pub subdivisions: usize,
}

/// Globally adaptive bisection with 21-point Gauss–Kronrod panels. Stops once
/// the summed error estimate is below `max(abs_tol, rel_tol·|I|)`.
pub fn adaptive_integrate(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_subdivisions: usize,
) -> Result<AdaptiveResult> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!(
            "integration limits must be finite, got [{a}, {b}]"
        )));
    }
    if a == b {
        return Ok(AdaptiveResult {
            value: 0.0,
            error: 0.0,
            subdivisions: 0,
        });
    }
    let first = gauss_kronrod_21(&f, a, b);
    let mut value = first.value;
    let mut error = first.error;
    let mut heap = BinaryHeap::from([first]);
    let mut subdivisions = 0;
    loop {
        let tol = abs_tol.max(rel_tol * value.abs());
        if !value.is_finite() {
            return Err(Error::Domain(
                "integrand is not finite on the interval".into(),
            ));
        }
        if error <= tol {
            return Ok(AdaptiveResult {
                value,
                error,
                subdivisions,
            });
        }
        if subdivisions >= max_subdivisions {
            return Err(Error::Accuracy {
                estimate: value,
                error_bound: error,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        let left = gauss_kronrod_21(&f, worst.a, mid);
        let right = gauss_kronrod_21(&f, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        subdivisions += 1;
        // Re-sum occasionally so the running totals do not drift.
        if subdivisions % 64 == 0 {
            value = heap.iter().map(|s| s.value).sum();
            error = heap.iter().map(|s| s.error).sum();
        }
    }
}

/// Reusable integrator; holds the Gauss–Hermite rule so sweeps do not
/// rebuild it for every point.
#[derive(Debug, Clone)]
pub struct Integrator {
    spec: QuadratureSpec,
    rule: GaussHermite,
}

impl Integrator {
    pub fn new(spec: QuadratureSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec,
            rule: GaussHermite::new(spec.order),
        })
    }

    pub fn spec(&self) -> &QuadratureSpec {
        &self.spec
    }

    pub fn rule(&self) -> &GaussHermite {
        &self.rule
    }

    pub fn adaptive(&self, f: impl Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
        adaptive_integrate(
            f,
            a,
            b,
            self.spec.rel_tol,
            self.spec.abs_tol,
            self.spec.max_subdivisions,
        )
        .map(|r| r.value)
    }

    /// `∫ f(zeta) density(zeta) dzeta`.
    ///
    /// The Gauss–Hermite path integrates each Gaussian component (and the
    /// interference term of a superposition) with its own scaled rule.
    /// Sampled densities are always integrated adaptively segment by segment.
    pub fn integrate_density(
        &self,
        f: impl Fn(f64) -> f64,
        density: &HeightDensity,
    ) -> Result<f64> {
        match (self.spec.method, density) {
            (QuadratureMethod::GaussHermite, HeightDensity::Mixture(m)) => {
                let (c, s) = (m.theta.cos(), m.theta.sin());
                Ok(c * c * self.rule.packet_expectation(m.z1, m.delta, &f)
                    + s * s * self.rule.packet_expectation(m.z2, m.delta, &f))
            }
            (QuadratureMethod::GaussHermite, HeightDensity::Superposition(sp)) => {
                let (c, s) = (sp.theta.cos(), sp.theta.sin());
                let k = sp.interference();
                let direct = c * c * self.rule.packet_expectation(sp.z1, sp.delta, &f)
                    + s * s * self.rule.packet_expectation(sp.z2, sp.delta, &f);
                let cross = k * self.rule.packet_expectation(sp.midpoint(), sp.delta, &f);
                Ok((direct + cross) / (1.0 + k))
            }
            (_, HeightDensity::Sampled(d)) => {
                let z = d.nodes();
                let mut total = 0.0;
                for w in z.windows(2) {
                    total += self.adaptive(|x| f(x) * d.eval(x), w[0], w[1])?;
                }
                Ok(total)
            }
            (QuadratureMethod::Adaptive, _) => {
                let (lo, hi) = density.support();
                self.adaptive(|x| f(x) * density.eval(x), lo, hi)
            }
        }
    }
}

/// One-shot form of [`Integrator::integrate_density`].
pub fn integrate_density(
    f: impl Fn(f64) -> f64,
    density: &HeightDensity,
    spec: &QuadratureSpec,
) -> Result<f64> {
    Integrator::new(*spec)?.integrate_density(f, density)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MixtureSpec, SuperpositionSpec};
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_8};

    #[test]
    fn two_point_rule() {
        let gh = GaussHermite::new(2);
        assert_relative_eq!(gh.nodes()[0], 0.5f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(gh.nodes()[1], -(0.5f64.sqrt()), max_relative = 1e-15);
        assert_relative_eq!(gh.weights()[0], PI.sqrt() / 2.0, max_relative = 1e-14);
    }

    #[test]
    fn hermite_rules_are_exact_for_even_moments() {
        // ∫ x^{2k} e^{-x²} = Γ(k + 1/2)
        for n in [5, 20, 40, 64, 100, 150] {
            let gh = GaussHermite::new(n);
            let mut gamma_half = PI.sqrt();
            for k in 0..n.min(20) {
                let got = gh.integrate(|x| x.powi(2 * k as i32));
                assert_relative_eq!(got, gamma_half, max_relative = 1e-12);
                assert!(gh.integrate(|x| x.powi(2 * k as i32 + 1)).abs() < 1e-10 * gamma_half);
                gamma_half *= k as f64 + 0.5;
            }
        }
    }

    #[test]
    fn odd_order_has_centre_node() {
        let gh = GaussHermite::new(7);
        assert_eq!(gh.nodes()[3], 0.0);
        assert!(gh.nodes().windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn kronrod_panel_exact_for_polynomials() {
        for deg in 0..=31 {
            let seg = gauss_kronrod_21(&|x: f64| x.powi(deg), -1.0, 1.0);
            let exact = if deg % 2 == 1 {
                0.0
            } else {
                2.0 / (deg as f64 + 1.0)
            };
            assert!((seg.value - exact).abs() < 1e-14, "degree {deg}");
        }
    }

    #[test]
    fn adaptive_handles_peaked_integrands() {
        let r = adaptive_integrate(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-12, 1e-15, 500).unwrap();
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert_relative_eq!(r.value, exact, max_relative = 1e-11);
        let r = adaptive_integrate(|x| x.sin(), 0.0, PI, 1e-13, 1e-300, 100).unwrap();
        assert_relative_eq!(r.value, 2.0, max_relative = 1e-13);
    }

    #[test]
    fn adaptive_reports_nonconvergence() {
        let err = adaptive_integrate(|x| (1.0 / x).sin(), 1e-9, 1.0, 1e-14, 1e-300, 3).unwrap_err();
        assert!(matches!(err, Error::Accuracy { .. }));
    }

    #[test]
    fn density_integrals_both_paths() {
        let sup = HeightDensity::superposition(
            SuperpositionSpec::new(0.0, 0.02, 0.01, FRAC_PI_8, 0.0).unwrap(),
        )
        .unwrap();
        let mix = HeightDensity::mixture(MixtureSpec::new(-0.03, 0.03, 0.01, FRAC_PI_4).unwrap())
            .unwrap();
        for spec in [
            QuadratureSpec::gauss_hermite(48),
            QuadratureSpec::adaptive(1e-13, 1e-16),
        ] {
            let one = integrate_density(|_| 1.0, &sup, &spec).unwrap();
            assert_relative_eq!(one, 1.0, max_relative = 1e-12);
            let odd = integrate_density(|z| z, &mix, &spec).unwrap();
            assert!(odd.abs() < 1e-15);
            let rate = integrate_density(|z| 1.0 + z, &sup, &spec).unwrap();
            assert_relative_eq!(rate, 1.0 + sup.mean(), max_relative = 1e-12);
        }
    }

    #[test]
    fn amplitude_form_is_normalised() {
        // Integrate |psi|² built from the complex amplitude, not the
        // three-Gaussian density form.
        let cases = [
            (0.0, 0.02, 0.01, FRAC_PI_8, 0.0),
            (-1.0, 1.0, 0.7, 1.2, 3.0),
            (0.4, 0.4, 0.05, FRAC_PI_4, 3.0),
            (-0.2, 0.1, 0.3, 0.1, 5.9),
        ];
        for (z1, z2, d, th, ph) in cases {
            let s = SuperpositionSpec::new(z1, z2, d, th, ph).unwrap();
            let (lo, hi) = s.support();
            let r = adaptive_integrate(|z| s.amplitude(z).norm_sqr(), lo, hi, 1e-14, 1e-300, 4000)
                .unwrap_or_else(|e| panic!("{e} for {z1} {z2} {d} {th} {ph}"));
            assert_relative_eq!(r.value, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn rejects_bad_spec() {
        let mut spec = QuadratureSpec::gauss_hermite(1);
        assert!(Integrator::new(spec).is_err());
        spec.order = 10;
        spec.rel_tol = 0.0;
        assert!(Integrator::new(spec).is_err());
    }
}
