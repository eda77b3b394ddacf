//! Named scenarios: configuration, drivers, outputs and verification.

pub mod config;
pub mod drivers;
pub mod io;
pub mod verify;

pub use config::*;
pub use drivers::*;
pub use verify::*;
