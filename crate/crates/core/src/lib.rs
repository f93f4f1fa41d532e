pub mod bounds;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod oracles;
pub mod optimize;
pub mod process;
pub mod quantize;
pub mod runner;
pub mod rng;
pub mod space;
pub mod stats;
