//! Command-line front end.
//!
//! Every command reads an optional JSON configuration, writes its tables
//! into `--out` and prints a one-line summary. Exit status: 0 on success,
//! 2 for invalid configuration or input, 3 when an integration fails,
//! 1 for anything else (I/O).

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::analytic::{
    compare_rates, compare_rates_quadrature, khandelwal_tcoh_full, khandelwal_tcoh_reduced,
    spectrum, survival_probability, uniform_grid, KhandelwalParams, RateResult, TcohTerms,
};
use crate::error::{Error, Result};
use crate::experiments::{
    figure1_panels, figure1_sweep, figure2_cases, figure2_lines, optimal_state_scan,
    reference_tcoh_point, term_magnitude_report, ScanReport, ScanSpec, SweepSpec,
    TermMagnitudeReport, FIGURE1_SAMPLES, FIGURE2_SAMPLES,
};
use crate::io::{fmt12, fmt17, write_output};
use crate::model::{ParamsRecord, PhysicalParams, StateRecord, StateSpec};
use crate::numerics::oracle::{oracle_spectrum, ww_simulate, ModeGrid, SinglePoleReport, FIT_END};
use crate::numerics::quadrature::{Integrator, QuadratureSpec};

#[derive(Debug, Parser)]
#[command(
    name = "gravdecay",
    version,
    about = "Decay rate and emission line of an atom spread over heights in gravity"
)]
pub struct Cli {
    /// JSON configuration file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory; must exist
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    /// Named parameter set
    #[arg(long, global = true, value_enum)]
    pub preset: Option<Preset>,

    /// Gauss–Hermite node count
    #[arg(long, global = true, conflicts_with = "tol")]
    pub quad_order: Option<usize>,

    /// Relative tolerance; switches to adaptive quadrature
    #[arg(long, global = true)]
    pub tol: Option<f64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    EarthAluminium,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rate difference between a superposition and its mixture
    Rate {
        /// Evaluate by quadrature instead of the closed form
        #[arg(long)]
        quadrature: bool,
    },
    /// Emission line of each configured state
    Spectrum,
    /// Survival probability of each configured state
    Survival,
    /// Time-domain check of single-pole decay
    Oracle,
    /// Rate-difference surfaces
    Sweep,
    /// Every default figure table
    Figures,
    /// Post-Newtonian clock-time correction terms
    Tcoh,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub preset: Option<Preset>,
    #[serde(default)]
    pub params: Option<ParamsRecord>,
    #[serde(default)]
    pub state: Option<StateRecord>,
    #[serde(default)]
    pub states: Vec<StateRecord>,
    #[serde(default)]
    pub spectrum: Option<SpectrumOptions>,
    #[serde(default)]
    pub survival: Option<SurvivalOptions>,
    #[serde(default)]
    pub oracle: Option<OracleOptions>,
    #[serde(default)]
    pub sweep: Option<SweepOptions>,
    #[serde(default)]
    pub figures: Option<FigureOptions>,
    #[serde(default)]
    pub tcoh: Option<TcohOptions>,
    /// Only consumed by randomised checks; commands are deterministic.
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumOptions {
    pub nu_min: f64,
    pub nu_max: f64,
    pub n_points: usize,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            nu_min: -5.0,
            nu_max: 5.0,
            n_points: FIGURE2_SAMPLES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurvivalOptions {
    /// Times in units of `1/Gamma0`.
    pub times: Vec<f64>,
}

impl Default for SurvivalOptions {
    fn default() -> Self {
        Self {
            times: (0..=50).map(|i| 0.1 * i as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleOptions {
    pub zeta: f64,
    pub r: f64,
    /// Half-width of the mode window around the line centre.
    pub half_width: f64,
    pub n_modes: usize,
    /// Defaults to 25 lifetimes.
    pub s_max: Option<f64>,
    pub ode_tol: f64,
    /// End of the single-pole comparison window.
    pub compare_until: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            zeta: 0.0,
            r: 1e3,
            half_width: 100.0,
            n_modes: 8001,
            s_max: None,
            ode_tol: 1e-9,
            compare_until: FIT_END,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepOptions {
    /// Default surfaces to write, from `a`, `b`, `c`.
    pub panels: Vec<String>,
    pub samples: usize,
    /// Additional user-defined grid, written to `sweep.csv`.
    pub custom: Option<SweepSpec>,
    /// Optimal-state scan, written to `optimal_scan.json`.
    pub scan: Option<ScanSpec>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            panels: vec!["a".into(), "b".into(), "c".into()],
            samples: FIGURE1_SAMPLES,
            custom: None,
            scan: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FigureOptions {
    pub figure1_samples: usize,
    pub figure2_samples: usize,
    pub scan_delta_zeta: f64,
}

impl Default for FigureOptions {
    fn default() -> Self {
        Self {
            figure1_samples: FIGURE1_SAMPLES,
            figure2_samples: FIGURE2_SAMPLES,
            scan_delta_zeta: 0.01,
        }
    }
}

/// Clock parameters in SI units; unset fields take the reference point
/// (separation and spread `1e-18 c^2/g`, one atomic mass unit, resting
/// atom, `t = 1e-8 s`, `alpha = cos^2(pi/8)`, `phi = 0`).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TcohOptions {
    pub z1_m: Option<f64>,
    pub z2_m: Option<f64>,
    pub sigma_z_m: Option<f64>,
    /// Defaults to the minimum-uncertainty value `hbar/(m sigma_z)`.
    pub sigma_v_m_s: Option<f64>,
    pub p_bar: Option<f64>,
    pub alpha: Option<f64>,
    pub phi_rad: Option<f64>,
    pub t_s: Option<f64>,
    pub mass_kg: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TcohOutput {
    pub params: KhandelwalParams,
    pub z1_m: f64,
    pub z2_m: f64,
    pub terms: TcohTerms,
    #[serde(rename = "gammaQ_inv_reduced")]
    pub reduced: f64,
    pub magnitudes: TermMagnitudeReport,
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn physical_params(cli: &Cli, cfg: &RunConfig) -> Result<PhysicalParams> {
    let preset = cli.preset.or(cfg.preset);
    match (preset, &cfg.params) {
        (Some(_), Some(_)) => Err(Error::Config(
            "give either `preset` or `params`, not both".into(),
        )),
        (None, Some(record)) => PhysicalParams::from_record(record),
        (Some(Preset::EarthAluminium), None) | (None, None) => {
            Ok(PhysicalParams::earth_aluminium())
        }
    }
}

fn integrator(cli: &Cli) -> Result<Integrator> {
    let spec = match (cli.quad_order, cli.tol) {
        (_, Some(tol)) => QuadratureSpec::adaptive(tol, 1e-300),
        (Some(n), None) => QuadratureSpec::gauss_hermite(n),
        (None, None) => QuadratureSpec::default(),
    };
    Integrator::new(spec)
}

fn states(cfg: &RunConfig) -> Result<Vec<StateSpec>> {
    let records: Vec<&StateRecord> = cfg.state.iter().chain(&cfg.states).collect();
    if records.is_empty() {
        return Err(Error::Config("missing `state`".into()));
    }
    records.into_iter().map(StateSpec::from_record).collect()
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn cmd_rate(cli: &Cli, cfg: &RunConfig, quadrature: bool) -> Result<()> {
    let scales = physical_params(cli, cfg)?.scales();
    let integ = integrator(cli)?;
    let mut results: Vec<RateResult> = Vec::new();
    for state in states(cfg)? {
        let StateSpec::Superposition(sup) = state else {
            return Err(Error::invalid(
                "kind",
                "the rate comparison needs a superposition",
            ));
        };
        let sup = sup.scaled(scales.g_over_c2);
        let result = if quadrature {
            compare_rates_quadrature(&sup, &integ)?
        } else {
            compare_rates(&sup)?
        };
        results.push(result);
    }
    let body = if results.len() == 1 {
        to_json(&results[0])?
    } else {
        to_json(&results)?
    };
    write_output(&cli.out, "rate.json", &body)?;
    for r in &results {
        println!("gammaQ_inv = {}", fmt12(r.gamma_q_inv));
    }
    Ok(())
}

fn cmd_spectrum(cli: &Cli, cfg: &RunConfig) -> Result<()> {
    let params = physical_params(cli, cfg)?;
    let scales = params.scales();
    let opts = cfg.spectrum.unwrap_or_default();
    if opts.n_points < 2 || !(opts.nu_max > opts.nu_min) {
        return Err(Error::invalid(
            "spectrum",
            "needs nu_min < nu_max and at least two points",
        ));
    }
    let grid = uniform_grid(opts.nu_min, opts.nu_max, opts.n_points);
    let integ = integrator(cli)?;
    for (i, state) in states(cfg)?.iter().enumerate() {
        let line = spectrum(&state.density(&scales)?, &grid, scales.r, &integ)?;
        if line.mass_warning {
            eprintln!(
                "warning: state {i}: grid holds only {:.4} of the line",
                line.total_mass
            );
        }
        write_output(&cli.out, &format!("spectrum_{i}.csv"), &line.to_csv())?;
        println!("state {i}: total_mass = {}", fmt12(line.total_mass));
    }
    Ok(())
}

fn cmd_survival(cli: &Cli, cfg: &RunConfig) -> Result<()> {
    let scales = physical_params(cli, cfg)?.scales();
    let opts = cfg.survival.clone().unwrap_or_default();
    let integ = integrator(cli)?;
    for (i, state) in states(cfg)?.iter().enumerate() {
        let density = state.density(&scales)?;
        let mut out = String::from("s,survival\n");
        for &s in &opts.times {
            let p = survival_probability(&density, s, &integ)?;
            out.push_str(&format!("{},{}\n", fmt17(s), fmt17(p)));
        }
        write_output(&cli.out, &format!("survival_{i}.csv"), &out)?;
    }
    Ok(())
}

fn cmd_oracle(cli: &Cli, cfg: &RunConfig) -> Result<()> {
    let opts = cfg.oracle.unwrap_or_default();
    let grid = ModeGrid::centered(opts.r * opts.zeta, opts.half_width, opts.n_modes)?;
    let s_max = opts.s_max.unwrap_or(25.0 / (1.0 + opts.zeta));
    if !cli.out.is_dir() {
        return Err(Error::Config(format!(
            "output directory {} does not exist",
            cli.out.display()
        )));
    }
    let run = ww_simulate(opts.zeta, opts.r, &grid, s_max, opts.ode_tol)?;
    let report = SinglePoleReport::from_run(&run, opts.compare_until);
    write_output(&cli.out, "oracle_trajectory.csv", &run.trajectory_csv())?;
    write_output(&cli.out, "oracle_spectrum.csv", &run.final_spectrum_csv())?;
    write_output(
        &cli.out,
        "oracle_summary.json",
        &(report.summary_json()? + "\n"),
    )?;
    if let Ok(line) = oracle_spectrum(&run) {
        let (peak, _) = line.peak();
        println!(
            "line peak at nu = {}, fwhm = {:?}",
            fmt12(peak),
            line.fwhm()
        );
    }
    println!(
        "fitted_rate = {}, max_deviation_single_pole = {}",
        run.fitted_rate.map_or("n/a".into(), fmt12),
        fmt12(report.max_deviation)
    );
    Ok(())
}

fn write_figure1(cli: &Cli, panels: &[String], samples: usize, integ: &Integrator) -> Result<()> {
    for (name, spec) in figure1_panels(samples) {
        let tag = name.trim_start_matches("figure1");
        if panels.iter().any(|p| p == tag) {
            write_output(
                &cli.out,
                &format!("{name}.csv"),
                &figure1_sweep(&spec, integ)?.to_csv(),
            )?;
        }
    }
    Ok(())
}

fn write_scan(cli: &Cli, spec: &ScanSpec) -> Result<ScanReport> {
    let report = optimal_state_scan(spec)?;
    write_output(&cli.out, "optimal_scan.json", &to_json(&report)?)?;
    Ok(report)
}

fn cmd_sweep(cli: &Cli, cfg: &RunConfig) -> Result<()> {
    let opts = cfg.sweep.clone().unwrap_or_default();
    if let Some(bad) = opts
        .panels
        .iter()
        .find(|p| !matches!(p.as_str(), "a" | "b" | "c"))
    {
        return Err(Error::invalid("panels", format!("unknown panel `{bad}`")));
    }
    if opts.samples == 0 {
        return Err(Error::invalid("samples", "must be positive"));
    }
    let integ = integrator(cli)?;
    if !cli.out.is_dir() {
        return Err(Error::Config(format!(
            "output directory {} does not exist",
            cli.out.display()
        )));
    }
    write_figure1(cli, &opts.panels, opts.samples, &integ)?;
    if let Some(spec) = &opts.custom {
        write_output(
            &cli.out,
            "sweep.csv",
            &figure1_sweep(spec, &integ)?.to_csv(),
        )?;
    }
    if let Some(spec) = &opts.scan {
        let report = write_scan(cli, spec)?;
        println!("max |gammaQ_inv| = {}", fmt12(report.max_gamma_q));
    }
    Ok(())
}

fn cmd_figures(cli: &Cli, cfg: &RunConfig) -> Result<()> {
    let params = physical_params(cli, cfg)?;
    let opts = cfg.figures.unwrap_or_default();
    if opts.figure1_samples == 0 || opts.figure2_samples < 2 {
        return Err(Error::invalid("figures", "sample counts too small"));
    }
    let integ = integrator(cli)?;
    if !cli.out.is_dir() {
        return Err(Error::Config(format!(
            "output directory {} does not exist",
            cli.out.display()
        )));
    }
    let all = ["a".to_string(), "b".to_string(), "c".to_string()];
    write_figure1(cli, &all, opts.figure1_samples, &integ)?;
    for (name, mut case) in figure2_cases(params.scales().r) {
        case.nu.n = opts.figure2_samples;
        let pair = figure2_lines(&case, &integ)?;
        write_output(&cli.out, &format!("{name}.csv"), &pair.to_csv())?;
    }
    let report = write_scan(cli, &ScanSpec::default_for(opts.scan_delta_zeta))?;
    println!(
        "wrote 3 rate surfaces, 4 line pairs, optimal scan (ratio {})",
        fmt12(report.ratio_to_quarter_delta)
    );
    Ok(())
}

fn cmd_tcoh(cli: &Cli, cfg: &RunConfig) -> Result<()> {
    let params = physical_params(cli, cfg)?;
    let o = cfg.tcoh.unwrap_or_default();
    let (reference, dz_ref) = reference_tcoh_point();
    let sigma_z = o.sigma_z_m.unwrap_or(reference.sigma_z);
    let m = o.mass_kg.unwrap_or(reference.m);
    let kp = KhandelwalParams {
        sigma_z,
        sigma_v: o.sigma_v_m_s.unwrap_or(params.hbar / (m * sigma_z)),
        p_bar: o.p_bar.unwrap_or(reference.p_bar),
        alpha_w: o.alpha.unwrap_or(reference.alpha_w),
        phi: o.phi_rad.unwrap_or(reference.phi),
        t: o.t_s.unwrap_or(reference.t),
        m,
    };
    let z1 = o.z1_m.unwrap_or(0.0);
    let z2 = o.z2_m.unwrap_or(z1 + dz_ref);
    let output = TcohOutput {
        params: kp,
        z1_m: z1,
        z2_m: z2,
        terms: khandelwal_tcoh_full(&kp, z1, z2, params.g, params.c, params.hbar)?,
        reduced: khandelwal_tcoh_reduced(&kp, z1, z2, params.g, params.c)?,
        magnitudes: term_magnitude_report(&kp, z2 - z1, params.g, params.c, params.hbar)?,
    };
    write_output(&cli.out, "tcoh.json", &to_json(&output)?)?;
    println!("T_coh = {} s", fmt12(output.terms.total));
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Rate { quadrature } => cmd_rate(cli, &cfg, quadrature),
        Command::Spectrum => cmd_spectrum(cli, &cfg),
        Command::Survival => cmd_survival(cli, &cfg),
        Command::Oracle => cmd_oracle(cli, &cfg),
        Command::Sweep => cmd_sweep(cli, &cfg),
        Command::Figures => cmd_figures(cli, &cfg),
        Command::Tcoh => cmd_tcoh(cli, &cfg),
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Integration(_) | Error::Accuracy { .. } => 3,
        Error::Io(_) => 1,
        _ => 2,
    }
}

pub fn main() -> i32 {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
