use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::config::{ExperimentConfig, Method, RealDataset, Study};
use super::ingest::{ingest_california, ingest_chameleon};
use super::results::{results_csv, sort_rows, summarize, summary_csv, ResultRow, SummaryRow};
use super::svg::{Panel, Reference, Series};
use crate::datagen::{make_synthetic, Dataset, SyntheticSpec, TopologyKind, TopologySpec};
use crate::error::{Error, Result};
use crate::graph::{OperatorKind, PropagationOperator};
use crate::model::{label_propagation, tikhonov_fit, GcnParams, GnnParams, MlpParams, Model, MultiscaleParams};
use crate::rng::{derive_seed, rng_from, tag};
use crate::theory::{dependency_partition, receptive_field};
use crate::train::{fit, mse, MaskVector};

/// Factor combination that determines one generated dataset. Every method
/// listed in the configuration is fitted on it.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSpec {
    pub study: Study,
    /// Topology kind, or the corpus name for fixed data.
    pub topology: String,
    pub n: usize,
    pub pi: f64,
    pub avg_degree: f64,
    pub operator: OperatorKind,
    pub trial: usize,
}

/// Seed of the graph, features, noise and mask of a cell. Excludes the
/// operator and the label fraction so that cells differing only in those
/// share the same sample (masks at different `π` are nested).
pub fn data_seed(cfg: &ExperimentConfig, cell: &CellSpec) -> u64 {
    derive_seed(
        cfg.master_seed,
        &[
            tag(cell.study.as_str()),
            tag(&cell.topology),
            cell.n as u64,
            cell.avg_degree.to_bits(),
            cell.trial as u64,
        ],
    )
}

/// Seed of the regression function. Depends on the trial only, so a trial
/// keeps the same target function across sample sizes and topologies.
pub fn function_seed(cfg: &ExperimentConfig, trial: usize) -> u64 {
    derive_seed(cfg.master_seed, &[tag("function"), trial as u64])
}

fn model_seed(cfg: &ExperimentConfig, cell: &CellSpec, method: Method) -> u64 {
    derive_seed(
        data_seed(cfg, cell),
        &[
            tag(method.as_str()),
            tag(cell.operator.as_str()),
            cell.pi.to_bits(),
            cfg.train.seed,
        ],
    )
}

/// Fixed corpus loaded once and shared by all cells of a real-data study.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub name: String,
    pub data: Dataset,
}

pub fn load_corpus(cfg: &ExperimentConfig) -> Result<Corpus> {
    let r = &cfg.real;
    let need = |p: &Option<PathBuf>, what: &str| {
        p.clone()
            .ok_or_else(|| Error::input(format!("real-data study needs `real.{what}`")))
    };
    let data = match r.dataset {
        RealDataset::California => ingest_california(&need(&r.csv, "csv")?, r.knn_k, r.operator)?,
        RealDataset::Chameleon => ingest_chameleon(
            &need(&r.edges, "edges")?,
            &need(&r.features, "features")?,
            &need(&r.target, "target")?,
            r.max_features,
            r.operator,
        )?,
    };
    Ok(Corpus {
        name: r.dataset.as_str().to_string(),
        data,
    })
}

/// All cells of the configured study, in canonical order.
pub fn enumerate_cells(cfg: &ExperimentConfig, corpus: Option<&Corpus>) -> Vec<CellSpec> {
    let mut cells = Vec::new();
    if cfg.study == Study::Real {
        let Some(c) = corpus else { return cells };
        let mean_degree = c.data.graph.without_self_loops().mean_degree();
        for &pi in &cfg.pi_grid {
            for trial in 0..cfg.trials {
                cells.push(CellSpec {
                    study: cfg.study,
                    topology: c.name.clone(),
                    n: c.data.n(),
                    pi,
                    avg_degree: mean_degree,
                    operator: cfg.real.operator,
                    trial,
                });
            }
        }
        return cells;
    }
    for topo in &cfg.data.topologies {
        for &n in &cfg.n_grid {
            for &avg_degree in &cfg.degree_grid {
                for &operator in &cfg.data.operators {
                    for &pi in &cfg.pi_grid {
                        for trial in 0..cfg.trials {
                            cells.push(CellSpec {
                                study: cfg.study,
                                topology: topo.as_str().to_string(),
                                n,
                                pi,
                                avg_degree,
                                operator,
                                trial,
                            });
                        }
                    }
                }
            }
        }
    }
    cells
}

/// Generates (or, for fixed corpora, masks) the dataset of a cell.
pub fn cell_dataset(cfg: &ExperimentConfig, cell: &CellSpec, corpus: Option<&Corpus>) -> Result<Dataset> {
    let seed = data_seed(cfg, cell);
    if cell.study == Study::Real {
        let c = corpus.ok_or_else(|| Error::input("real-data cell without a corpus"))?;
        if cell.pi >= 1.0 {
            return Err(Error::input("held-out evaluation needs π < 1"));
        }
        let mut data = c.data.clone();
        data.mask = MaskVector::sample(data.n(), cell.pi, derive_seed(seed, &[tag("mask")]))?;
        if data.mask.observed_count() == 0 || data.mask.observed_count() == data.n() {
            return Err(Error::input("mask left no training or no held-out node"));
        }
        return Ok(data);
    }
    let kind: TopologyKind = cell.topology.parse()?;
    let d = &cfg.data;
    let mut spec = SyntheticSpec::new(
        TopologySpec::new(kind, cell.n, cell.avg_degree, 0),
        d.target,
        cell.operator,
        cell.pi,
        seed,
    );
    spec.d = d.d;
    spec.k = d.k;
    spec.noise_sigma = d.noise_sigma;
    spec.features = d.features;
    spec.self_loops = d.self_loops;
    spec.brownian_scale = d.brownian_scale;
    spec.dnn_depth = d.dnn_depth;
    spec.dnn_width = d.dnn_width;
    spec.function_seed = Some(function_seed(cfg, cell.trial));
    make_synthetic(&spec)
}

fn init_model(cfg: &ExperimentConfig, method: Method, d: usize, n: usize, depth: usize, seed: u64) -> Result<Model> {
    let mut rng = rng_from(seed);
    let m = &cfg.model;
    let head = |rng: &mut _| MlpParams::init(m.readout_widths(d, n), m.f_trunc, rng);
    Ok(match method {
        Method::GnnSkip => {
            let gcn = GcnParams::init_skip(d, depth, &mut rng)?;
            Model::Gnn(GnnParams::new(gcn, head(&mut rng)?)?)
        }
        Method::GnnNoskip => {
            let gcn = GcnParams::init_last_layer(d, depth, &mut rng)?;
            Model::Gnn(GnnParams::new(gcn, head(&mut rng)?)?)
        }
        Method::Mlp => Model::Mlp(head(&mut rng)?),
        Method::Multiscale => {
            let h = head(&mut rng)?;
            Model::Multiscale(MultiscaleParams::init(depth, d, h, &mut rng)?)
        }
        Method::Tikhonov | Method::LabelProp => return Err(Error::input(format!("{method} has no parametric model"))),
    })
}

/// Fitted predictor: a trained network with its operator and loss trace,
/// or node values.
enum Fitted {
    Net(Box<Model>, PropagationOperator, Vec<f64>),
    Values(Vec<f64>),
}

impl Fitted {
    fn predict_train(&self, data: &Dataset) -> Result<Vec<f64>> {
        match self {
            Fitted::Net(model, op, _) => Ok(model.predict(op, &data.x)?.to_vec()),
            Fitted::Values(v) => Ok(v.clone()),
        }
    }

    fn predict_fresh(&self, data: &Dataset) -> Result<Vec<f64>> {
        match self {
            Fitted::Net(model, op, _) => Ok(model.predict(op, &data.x_fresh)?.to_vec()),
            Fitted::Values(v) => Ok(v.clone()),
        }
    }
}

fn multiscale_operator(data: &Dataset) -> Result<PropagationOperator> {
    PropagationOperator::from_graph(
        &data.graph.without_self_loops().loops_at_isolated(),
        OperatorKind::SymNorm,
    )
}

fn masked_error(pred: &[f64], target: &[f64], mask: &MaskVector) -> Option<f64> {
    let idx = mask.observed_indices();
    if idx.is_empty() {
        return None;
    }
    Some(idx.iter().map(|&i| (pred[i] - target[i]).powi(2)).sum::<f64>() / idx.len() as f64)
}

fn fit_at_depth(
    cfg: &ExperimentConfig,
    method: Method,
    data: &Dataset,
    mask: &MaskVector,
    depth: usize,
    seed: u64,
) -> Result<Fitted> {
    match method {
        Method::Tikhonov => Ok(Fitted::Values(tikhonov_fit(
            &data.graph,
            &data.y,
            mask,
            cfg.model.tikhonov_lambda,
        )?)),
        Method::LabelProp => Ok(Fitted::Values(label_propagation(
            &data.graph,
            &data.y,
            mask,
            cfg.model.label_prop_alpha,
            cfg.model.label_prop_iters,
        )?)),
        _ => {
            let op = if method == Method::Multiscale {
                multiscale_operator(data)?
            } else {
                data.op.clone()
            };
            let init = init_model(cfg, method, data.d(), data.n(), depth, seed)?;
            let res = fit(init, &op, &data.x, &data.y, mask, &cfg.train)?;
            Ok(Fitted::Net(Box::new(res.model), op, res.loss_trace))
        }
    }
}

/// Fits `method`, selecting the propagation depth on a calibration split of
/// the observed nodes when a depth grid is configured.
fn fit_method(cfg: &ExperimentConfig, method: Method, data: &Dataset, seed: u64) -> Result<Fitted> {
    let grid = &cfg.model.depth_grid;
    if !method.has_depth() || grid.len() < 2 {
        let depth = grid.first().copied().unwrap_or(cfg.model.gcn_depth);
        return fit_at_depth(cfg, method, data, &data.mask, depth, seed);
    }
    let mut observed = data.mask.observed_indices();
    observed.shuffle(&mut rng_from(derive_seed(seed, &[tag("calibration")])));
    let held = ((observed.len() as f64) * cfg.model.calibration_fraction).round() as usize;
    let held = held.clamp(1, observed.len().saturating_sub(1).max(1));
    let (train, calib) = data.mask.split_off(&observed[..held]);
    if train.observed_count() == 0 {
        return Err(Error::input("calibration split left no training node"));
    }
    let mut best: Option<(f64, Fitted)> = None;
    for &depth in grid {
        let fitted = fit_at_depth(cfg, method, data, &train, depth, seed)?;
        let pred = fitted.predict_train(data)?;
        let err = masked_error(&pred, &data.y, &calib).unwrap_or(f64::INFINITY);
        if best.as_ref().is_none_or(|(b, _)| err < *b) {
            best = Some((err, fitted));
        }
    }
    Ok(best.expect("nonempty depth grid").1)
}

struct CellDiagnostics {
    max_degree: usize,
    m: Option<usize>,
    r: Option<usize>,
    laplacian_energy: Option<f64>,
}

fn diagnostics(cfg: &ExperimentConfig, data: &Dataset) -> CellDiagnostics {
    let plain = data.graph.without_self_loops();
    let m = receptive_field(&data.op, cfg.model.gcn_depth);
    let r = (m <= cfg.partition_max_m).then(|| dependency_partition(&data.op, cfg.model.gcn_depth).r);
    CellDiagnostics {
        max_degree: plain.max_degree(),
        m: Some(m),
        r,
        laplacian_energy: plain.laplacian_energy(&data.y_clean).ok(),
    }
}

fn base_row(cell: &CellSpec, method: Method) -> ResultRow {
    ResultRow {
        study: cell.study,
        topology: cell.topology.clone(),
        n: cell.n,
        pi: cell.pi,
        avg_degree: cell.avg_degree,
        max_degree: 0,
        operator: cell.operator.to_string(),
        method,
        trial: cell.trial,
        train_mse: None,
        test_mse: None,
        m: None,
        r: None,
        laplacian_energy: None,
        wall_time_s: None,
        status: "ok".into(),
    }
}

fn error_row(cell: &CellSpec, method: Method, err: &Error) -> ResultRow {
    ResultRow {
        status: format!("error: {err}"),
        ..base_row(cell, method)
    }
}

/// Outcome of fitting one method on one dataset.
#[derive(Debug, Clone)]
pub struct MethodFit {
    /// Trained network; `None` for the graph smoothers.
    pub model: Option<Model>,
    pub loss_trace: Vec<f64>,
    /// Mean squared error on the observed nodes.
    pub train_mse: f64,
    /// Inductive risk on the fresh features, or held-out node error for
    /// fixed corpora.
    pub test_mse: f64,
}

/// Fits `method` on `data` (with depth calibration when configured) and
/// evaluates it. `seed` drives initialization and the calibration split.
pub fn fit_and_evaluate(cfg: &ExperimentConfig, method: Method, data: &Dataset, seed: u64) -> Result<MethodFit> {
    let fitted = fit_method(cfg, method, data, seed)?;
    let pred = fitted.predict_train(data)?;
    let train_mse = masked_error(&pred, &data.y, &data.mask).ok_or_else(|| Error::input("no observed node"))?;
    let test_mse = if data.is_transductive() {
        masked_error(&pred, &data.y, &data.mask.complement()).ok_or_else(|| Error::input("no held-out node"))?
    } else {
        mse(&fitted.predict_fresh(data)?, &data.y_clean_fresh)?
    };
    if !(train_mse.is_finite() && test_mse.is_finite()) {
        return Err(Error::numeric("non-finite error"));
    }
    let (model, loss_trace) = match fitted {
        Fitted::Net(m, _, trace) => (Some(*m), trace),
        Fitted::Values(_) => (None, Vec::new()),
    };
    Ok(MethodFit {
        model,
        loss_trace,
        train_mse,
        test_mse,
    })
}

fn method_row(
    cfg: &ExperimentConfig,
    cell: &CellSpec,
    method: Method,
    data: &Dataset,
    diag: &CellDiagnostics,
) -> ResultRow {
    let start = Instant::now();
    match fit_and_evaluate(cfg, method, data, model_seed(cfg, cell, method)) {
        Ok(f) => ResultRow {
            max_degree: diag.max_degree,
            train_mse: Some(f.train_mse),
            test_mse: Some(f.test_mse),
            m: diag.m,
            r: diag.r,
            laplacian_energy: diag.laplacian_energy,
            wall_time_s: cfg.timing.then(|| start.elapsed().as_secs_f64()),
            ..base_row(cell, method)
        },
        Err(e) => ResultRow {
            max_degree: diag.max_degree,
            ..error_row(cell, method, &e)
        },
    }
}

fn run_data_cell(
    cfg: &ExperimentConfig,
    cell: &CellSpec,
    methods: &[Method],
    corpus: Option<&Corpus>,
) -> Vec<ResultRow> {
    match cell_dataset(cfg, cell, corpus) {
        Ok(data) => {
            let diag = diagnostics(cfg, &data);
            methods
                .iter()
                .map(|&m| method_row(cfg, cell, m, &data, &diag))
                .collect()
        }
        Err(e) => methods.iter().map(|&m| error_row(cell, m, &e)).collect(),
    }
}

/// Reruns a single (cell, method) pair. Produces the same row as the full
/// experiment because every seed is derived from the cell's factors.
pub fn run_cell(cfg: &ExperimentConfig, cell: &CellSpec, method: Method, corpus: Option<&Corpus>) -> ResultRow {
    run_data_cell(cfg, cell, &[method], corpus).remove(0)
}

/// Rows of a finished experiment in canonical order, with the summary.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub study: Study,
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
    pub evaluation: String,
}

/// Runs every cell of the configured study on a bounded worker pool. Failed
/// fits become rows with an error status; the run always completes.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let corpus = if cfg.study == Study::Real {
        Some(load_corpus(cfg)?)
    } else {
        None
    };
    run_with_corpus(cfg, corpus.as_ref())
}

/// [`run_experiment`] with an already loaded corpus for real-data studies.
pub fn run_with_corpus(cfg: &ExperimentConfig, corpus: Option<&Corpus>) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let cells = enumerate_cells(cfg, corpus);
    if cells.is_empty() {
        return Err(Error::input("configuration produces no cells"));
    }
    let workers = cfg
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::input(format!("worker pool: {e}")))?;
    let (tx, rx) = std::sync::mpsc::channel();
    pool.install(|| {
        cells.par_iter().for_each_with(tx, |tx, cell| {
            tx.send(run_data_cell(cfg, cell, &cfg.methods, corpus))
                .expect("collector alive");
        })
    });
    let mut rows: Vec<ResultRow> = rx.into_iter().flatten().collect();
    sort_rows(&mut rows);
    let evaluation = if cfg.study == Study::Real {
        "transductive"
    } else {
        "inductive"
    }
    .to_string();
    let summary = summarize(cfg.study, &rows, &evaluation);
    Ok(ExperimentOutput {
        study: cfg.study,
        rows,
        summary,
        evaluation,
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn file_key(parts: &[String]) -> String {
    parts
        .iter()
        .map(|p| {
            p.chars()
                .map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '_' })
                .collect::<String>()
        })
        .collect::<Vec<_>>()
        .join("_")
}

/// Named point series of one panel.
type SeriesMap = BTreeMap<String, Vec<(f64, f64)>>;

/// Builds the figure panels of a finished experiment.
pub fn panels(out: &ExperimentOutput) -> Vec<(String, Panel)> {
    let agg: Vec<&SummaryRow> = out.summary.iter().filter(|s| s.kind == "aggregate").collect();
    let mut grouped: BTreeMap<Vec<String>, SeriesMap> = BTreeMap::new();
    let (x_label, log_x, log_y) = match out.study {
        Study::Convergence => ("n", true, true),
        Study::LabelFraction => ("1/pi", true, true),
        Study::Topology | Study::Real => ("pi", false, true),
        Study::Degree => ("max degree", false, true),
    };
    if out.study == Study::Degree {
        for r in out.rows.iter().filter(|r| r.is_ok()) {
            let key = vec![r.topology.clone(), r.operator.clone(), r.method.to_string()];
            let series = format!("avg degree {}", r.avg_degree);
            if let Some(y) = r.test_mse {
                grouped
                    .entry(key)
                    .or_default()
                    .entry(series)
                    .or_default()
                    .push((r.max_degree as f64, y));
            }
        }
    } else {
        for a in agg {
            let Some(y) = a.mean_test_mse else { continue };
            let (n, pi) = (a.n.unwrap_or(0), a.pi.unwrap_or(1.0));
            let (key, series, x) = match out.study {
                Study::Convergence => (
                    vec![a.topology.clone(), a.operator.clone()],
                    format!("{} pi={pi}", a.method),
                    n as f64,
                ),
                Study::LabelFraction => (
                    vec![a.topology.clone(), a.operator.clone()],
                    format!("{} n={n}", a.method),
                    1.0 / pi,
                ),
                _ => (
                    vec![
                        a.topology.clone(),
                        a.operator.clone(),
                        format!("n{n}"),
                        format!("deg{}", a.avg_degree.unwrap_or(0.0)),
                    ],
                    a.method.to_string(),
                    pi,
                ),
            };
            grouped.entry(key).or_default().entry(series).or_default().push((x, y));
        }
    }
    grouped
        .into_iter()
        .map(|(key, series)| {
            let series: Vec<Series> = series
                .into_iter()
                .map(|(name, mut points)| {
                    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
                    Series { name, points }
                })
                .collect();
            let anchor = series.first().and_then(|s| s.points.first().copied());
            let references = match (out.study, anchor) {
                (Study::Convergence, Some((x0, y0))) => vec![Reference {
                    label: "slope -1/2".into(),
                    slope: -0.5,
                    x0,
                    y0,
                }],
                (Study::LabelFraction, Some((x0, y0))) => vec![Reference {
                    label: "slope 1".into(),
                    slope: 1.0,
                    x0,
                    y0,
                }],
                _ => Vec::new(),
            };
            let name = format!("{}_{}", out.study, file_key(&key));
            let panel = Panel {
                title: format!("{}: {}", out.study, key.join(", ")),
                x_label: x_label.into(),
                y_label: format!("{} test MSE", out.evaluation),
                log_x,
                log_y,
                series,
                references,
            };
            (name, panel)
        })
        .collect()
}

/// Writes `results.csv`, `summary.csv` and one SVG per panel into `dir`.
/// Returns the written paths.
pub fn emit_outputs(out: &ExperimentOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    if out.rows.is_empty() {
        return Err(Error::input("no rows to write"));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = vec![dir.join("results.csv"), dir.join("summary.csv")];
    write(&paths[0], &results_csv(&out.rows))?;
    write(&paths[1], &summary_csv(&out.summary))?;
    for (name, panel) in panels(out) {
        let p = dir.join(format!("{name}.svg"));
        write(&p, &panel.to_svg())?;
        paths.push(p);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::TargetKind;

    fn tiny(study: Study) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::for_study(study);
        cfg.n_grid = vec![40];
        cfg.pi_grid = vec![0.5];
        cfg.degree_grid = vec![2.0];
        cfg.trials = 1;
        cfg.train.epochs = 20;
        cfg.workers = Some(2);
        cfg
    }

    #[test]
    fn single_cell_gives_one_row_per_method() {
        let mut cfg = tiny(Study::Topology);
        cfg.data.topologies = vec![TopologyKind::ErdosRenyi];
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.rows.len(), cfg.methods.len());
        for r in &out.rows {
            assert!(r.is_ok(), "{}", r.status);
            assert!(r.test_mse.unwrap() >= 0.0);
        }
    }

    #[test]
    fn seeds_ignore_operator_and_pi() {
        let cfg = tiny(Study::Degree);
        let a = CellSpec {
            study: Study::Degree,
            topology: "barabasi_albert".into(),
            n: 50,
            pi: 0.5,
            avg_degree: 4.0,
            operator: OperatorKind::RawAdj,
            trial: 1,
        };
        let b = CellSpec {
            operator: OperatorKind::SymNorm,
            pi: 0.9,
            ..a.clone()
        };
        assert_eq!(data_seed(&cfg, &a), data_seed(&cfg, &b));
        let da = cell_dataset(&cfg, &a, None).unwrap();
        let db = cell_dataset(&cfg, &b, None).unwrap();
        assert_eq!(da.graph, db.graph);
        assert_eq!(da.x, db.x);
        let c = CellSpec { trial: 2, ..a.clone() };
        assert_ne!(data_seed(&cfg, &a), data_seed(&cfg, &c));
    }

    #[test]
    fn failing_fit_becomes_error_row() {
        let mut cfg = tiny(Study::Convergence);
        cfg.methods = vec![Method::GnnSkip, Method::Tikhonov];
        cfg.model.tikhonov_lambda = -1.0;
        cfg.data.target = TargetKind::Brownian;
        let out = run_experiment(&cfg).unwrap();
        let tik = out.rows.iter().find(|r| r.method == Method::Tikhonov).unwrap();
        assert!(tik.status.starts_with("error:"));
        assert!(tik.test_mse.is_none());
        assert!(out.rows.iter().find(|r| r.method == Method::GnnSkip).unwrap().is_ok());
    }
}
