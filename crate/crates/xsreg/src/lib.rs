//! File formats, configuration files and the command-line front end for
//! [`xsreg_core`].

pub mod cli;
pub mod config;
pub mod export;
pub mod formats;
pub mod transform_file;

use std::time::Instant;

use xsreg_core::pipeline::Clock;

/// Seconds since construction.
#[derive(Debug, Clone, Copy)]
pub struct WallClock(Instant);

impl WallClock {
    pub fn start() -> Self {
        Self(Instant::now())
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::start()
    }
}

impl Clock for WallClock {
    fn now(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}
