//! Files, training runs, Monte-Carlo benchmarks and plot data around the
//! `ladn-core` decoders. The `ladn` binary is a thin command-line layer over
//! this crate.

pub mod bench;
pub mod exec;
pub mod io;
pub mod manifest;
pub mod params_file;
pub mod plotdata;
pub mod recipe;
pub mod samples;

mod error;

pub use error::{Error, Result};
