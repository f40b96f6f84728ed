//! Command-line front end: single-point evaluation, simulation, sweeps and
//! analytic-versus-simulation validation, emitted as CSV or JSON.

pub mod app;
pub mod record;
pub mod settings;
pub mod sweep;
pub mod table1;
pub mod validate;
