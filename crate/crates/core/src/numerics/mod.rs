pub mod ode;
pub mod oracle;
pub mod quadrature;

pub use ode::{ComplexSystem, StepControl, StepStats};
pub use oracle::{
    oracle_spectrum, validate_single_pole, ww_simulate, ModeGrid, OracleRun, SinglePoleReport,
    WignerWeisskopf,
};
pub use quadrature::{
    integrate_density, GaussHermite, Integrator, QuadratureMethod, QuadratureSpec,
};
