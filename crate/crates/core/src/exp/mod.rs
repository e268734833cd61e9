//! Configured studies: cell enumeration and seeding, method fitting,
//! result tables, summaries and figure emission.

mod config;
mod ingest;
mod results;
mod runner;
mod svg;

pub use config::{DataConfig, ExperimentConfig, Method, ModelConfig, RealConfig, RealDataset, Study};
pub use ingest::{ingest_california, ingest_chameleon, CALIFORNIA_FEATURES, CALIFORNIA_TARGET};
pub use results::{
    fit_slope, read_results, results_csv, sort_rows, spearman, summarize, summary_csv, ResultRow, SlopeFit, Spearman,
    SummaryRow, RESULTS_HEADER, SUMMARY_HEADER,
};
pub use runner::{
    cell_dataset, data_seed, emit_outputs, enumerate_cells, fit_and_evaluate, function_seed, load_corpus, panels,
    run_cell, run_experiment, run_with_corpus, CellSpec, Corpus, ExperimentOutput, MethodFit,
};
pub use svg::{Panel, Reference, Series};
