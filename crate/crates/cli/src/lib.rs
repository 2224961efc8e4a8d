//! Front end for the `linkshare` simulator: TOML scenario files, embedded
//! experiment presets, bound and allocation reports, rate CSV and SVG output.

pub mod config;
pub mod experiment;
pub mod output;
pub mod report;
