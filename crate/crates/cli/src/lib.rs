//! Command-line front end for the platoon simulator: scenario documents,
//! run orchestration, CSV/SVG artifacts, and verification suites.

pub mod commands;
pub mod export;
pub mod plot;
pub mod scenario_file;
pub mod verify;
