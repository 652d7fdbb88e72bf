//! Files, benchmarks and the command line around `epiprep-core`.

pub mod bench;
pub mod cli;
pub mod csv_io;
pub mod features_io;
pub mod model_io;
pub mod parallel;
pub mod records;
