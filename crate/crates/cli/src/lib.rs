//! Command-line pipeline and HTTP annotation service.

pub mod commands;
pub mod service;
