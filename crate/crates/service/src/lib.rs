//! Pipeline stages, run directories and the HTTP API behind the
//! `forumcode` command.

pub mod api;
pub mod cli;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod report;
pub mod run;
pub mod svg;
