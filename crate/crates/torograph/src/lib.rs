//! File formats and command-line front end for `torograph-core`.
//!
//! * [`input`]: CSV ingest of angle matrices and Ramachandran export.
//! * [`format`]: graph JSON and DOT documents.
//! * [`report`]: fit report documents.
//! * [`cli`]: the `torograph` command.
pub mod cli;
pub mod error;
pub mod format;
pub mod input;
pub mod output;
pub mod report;

pub use cli::{execute, run, Command, RunConfig};
pub use error::CliError;
pub use format::{emit_graph, parse_graph_json, Graph, GraphDocument, GraphFormat};
pub use input::{export_ramachandran, ingest_csv, AngleUnit};
pub use report::FitReportDocument;
