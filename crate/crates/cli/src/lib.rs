//! Configuration-driven experiments on approximate quantum cloaks.

pub mod commands;
pub mod config;
pub mod guard;
pub mod output;
