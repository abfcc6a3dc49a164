//! Command-line front end for `fluidsched`: file formats, reports and
//! command dispatch. The `fluidsched` binary is a thin wrapper around
//! [`app::run`].

pub mod app;
pub mod files;
pub mod report;
