//! End-to-end runner and ingestion checks.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use gnnlab::datagen::TopologyKind;
use gnnlab::exp::{
    emit_outputs, enumerate_cells, ingest_california, load_corpus, read_results, run_cell, run_experiment,
    run_with_corpus, ExperimentConfig, Method, RealDataset, Study, RESULTS_HEADER, SUMMARY_HEADER,
};
use gnnlab::graph::OperatorKind;

use crate::{CheckError, Outcome};

type Result<T> = std::result::Result<T, CheckError>;

/// Path of the bundled 500-row California-format sample.
pub fn california_sample() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/data/california_sample.csv")
}

/// Every row of a small multi-factor run is reproduced byte-for-byte when
/// its cell is rerun alone.
pub fn determinism() -> Outcome {
    let start = Instant::now();
    let mut cfg = ExperimentConfig::for_study(Study::Topology);
    cfg.n_grid = vec![60];
    cfg.pi_grid = vec![0.3, 0.7];
    cfg.trials = 2;
    cfg.data.topologies = vec![TopologyKind::ErdosRenyi, TopologyKind::BarabasiAlbert];
    cfg.data.operators = vec![OperatorKind::SymNorm, OperatorKind::RawAdj];
    cfg.train.epochs = 50;
    cfg.workers = Some(2);
    let run = || -> Result<(usize, usize)> {
        let out = run_experiment(&cfg)?;
        let cells = enumerate_cells(&cfg, None);
        let mut mismatched = 0;
        for row in &out.rows {
            let cell = cells
                .iter()
                .find(|c| {
                    c.topology == row.topology
                        && c.pi == row.pi
                        && c.trial == row.trial
                        && c.operator.as_str() == row.operator
                })
                .ok_or_else(|| CheckError::Violation("row without a cell".into()))?;
            mismatched += usize::from(run_cell(&cfg, cell, row.method, None).to_csv_line() != row.to_csv_line());
        }
        Ok((out.rows.len(), mismatched))
    };
    match run() {
        Ok((rows, bad)) => Outcome::new(bad == 0, format!("{rows} rows rerun, {bad} differ"), start),
        Err(e) => Outcome::error(e, start),
    }
}

fn check_csv(path: &Path, header: &str) -> Result<usize> {
    let text = std::fs::read_to_string(path).map_err(|source| CheckError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut lines = text.lines();
    if lines.next() != Some(header) {
        return Err(CheckError::Violation(format!(
            "{} has an unexpected header",
            path.display()
        )));
    }
    let width = header.split(',').count();
    let mut count = 0;
    for (i, line) in lines.enumerate() {
        if line.split(',').count() != width {
            return Err(CheckError::Violation(format!(
                "{} line {} has the wrong width",
                path.display(),
                i + 2
            )));
        }
        count += 1;
    }
    Ok(count)
}

/// Ingests the bundled sample, fits every method on it and validates the
/// emitted CSVs.
pub fn real_data_pipeline() -> Outcome {
    let start = Instant::now();
    let k = 8;
    let run = || -> Result<String> {
        let data = ingest_california(&california_sample(), k, OperatorKind::SymNorm)?;
        data.check()?;
        let g = data.graph.without_self_loops();
        g.check_invariants()?;
        for i in 0..g.n() {
            if g.degree(i) < k {
                return Err(CheckError::Violation(format!(
                    "node {i} has degree {} below k",
                    g.degree(i)
                )));
            }
            if g.neighbors(i).iter().any(|&j| !g.neighbors(j).contains(&i)) {
                return Err(CheckError::Violation(format!("node {i} has an asymmetric edge")));
            }
        }
        let mut cfg = ExperimentConfig::for_study(Study::Real);
        cfg.methods = Method::ALL.to_vec();
        cfg.pi_grid = vec![0.3, 0.7];
        cfg.trials = 1;
        cfg.real.dataset = RealDataset::California;
        cfg.real.csv = Some(california_sample());
        cfg.real.knn_k = k;
        let corpus = load_corpus(&cfg)?;
        let out = run_with_corpus(&cfg, Some(&corpus))?;
        if let Some(bad) = out.rows.iter().find(|r| !r.is_ok()) {
            return Err(CheckError::Violation(format!("{} failed: {}", bad.method, bad.status)));
        }
        let dir = std::env::temp_dir().join(format!("gnnlab-acceptance-{}", std::process::id()));
        emit_outputs(&out, &dir)?;
        let rows = check_csv(&dir.join("results.csv"), RESULTS_HEADER)?;
        let summary = check_csv(&dir.join("summary.csv"), SUMMARY_HEADER)?;
        let parsed = read_results(&dir.join("results.csv"))?;
        let _ = std::fs::remove_dir_all(&dir);
        if parsed != out.rows || rows != out.rows.len() {
            return Err(CheckError::Violation("results.csv does not round-trip".into()));
        }
        Ok(format!(
            "{} nodes, {} edges, {rows} result rows over {} methods, {summary} summary rows",
            g.n(),
            g.num_edges(),
            cfg.methods.len()
        ))
    };
    match run() {
        Ok(detail) => Outcome::new(true, detail, start).within(Duration::from_secs(120)),
        Err(e) => Outcome::error(e, start),
    }
}
