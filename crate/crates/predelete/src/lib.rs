//! Command-line tool and HTTP service built on `predelete_core`.

pub mod cli;
pub mod server;
