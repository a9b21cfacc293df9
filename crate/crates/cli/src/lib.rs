//! Command line and HTTP front end.

pub mod commands;
pub mod service;
