use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::Rng;

use gnnlab::datagen::{
    make_synthetic, read_bundle, write_bundle, SyntheticSpec, TargetKind, TopologyKind, TopologySpec,
};
use gnnlab::exp::{emit_outputs, fit_and_evaluate, run_experiment, ExperimentConfig, Method, Study};
use gnnlab::graph::{FeatureMatrix, FilterCoefficients, OperatorKind, PropagationOperator};
use gnnlab::model::write_checkpoint;
use gnnlab::rng::{derive_seed, rng_from, tag};
use gnnlab::theory::{
    conservative_receptive_bound, dependency_partition, effective_smoothness, entropy_bound, kappa_n, predicted_rate,
    receptive_field, stochastic_terms_shape, verify_mismatch,
};

#[derive(Parser)]
#[command(
    name = "gnnlab",
    version,
    about = "GNN node regression: data, training, studies and bounds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset bundle.
    Gen {
        /// TOML file with a synthetic dataset description.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit one method on a dataset bundle.
    Train {
        /// Bundle directory written by `gen`.
        #[arg(long)]
        data: PathBuf,
        /// Experiment-style TOML; only `[model]` and `[train]` are used.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "gnn_skip")]
        method: String,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Risk against sample size on a ring graph.
    Convergence(StudyArgs),
    /// Risk against the label fraction.
    LabelFraction(StudyArgs),
    /// Methods compared across random topologies.
    Topology(StudyArgs),
    /// Sensitivity to the maximum degree on preferential-attachment graphs.
    Degree(StudyArgs),
    /// Held-out node error on a fixed corpus.
    Real(StudyArgs),
    /// Evaluate complexity and rate formulas.
    Theory(TheoryArgs),
}

#[derive(Args)]
struct StudyArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long, default_value_t = 1600)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    d: usize,
    /// Propagation depth L1.
    #[arg(long, default_value_t = 2)]
    depth: usize,
    /// Hidden layers of the readout L2.
    #[arg(long, default_value_t = 1)]
    hidden_layers: usize,
    /// Hidden width; defaults to ⌈√n⌉.
    #[arg(long)]
    width: Option<usize>,
    /// Sparsity; defaults to the readout's parameter count.
    #[arg(long)]
    sparsity: Option<usize>,
    /// Row-sum norm of the operator.
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    /// Receptive-field size.
    #[arg(long, default_value_t = 5)]
    m: usize,
    #[arg(long, default_value_t = 0.95)]
    pi: f64,
    /// Covering scale; defaults to 1/n.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    /// Truncation level of the readout.
    #[arg(long, default_value_t = 10.0)]
    f_trunc: f64,
    /// Hölder exponents of the composition stages.
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    alpha: Vec<f64>,
    /// Active variables per stage.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    active: Vec<usize>,
    /// Take n, t, m and r from a bundle's operator.
    #[arg(long)]
    bundle: Option<PathBuf>,
    /// Also write the table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Check the operator-mismatch inequality on instances derived from
    /// `--bundle` instead of printing the table.
    #[arg(long)]
    mismatch: bool,
    #[arg(long, default_value_t = 20)]
    perturbations: usize,
    #[arg(long, default_value_t = 1.0)]
    tau_max: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Gen { config, out, seed } => gen(config, &out, seed),
        Command::Train {
            data,
            config,
            out,
            method,
            seed,
        } => train(&data, config, &out, &method, seed.unwrap_or(0)),
        Command::Convergence(a) => study(Study::Convergence, a),
        Command::LabelFraction(a) => study(Study::LabelFraction, a),
        Command::Topology(a) => study(Study::Topology, a),
        Command::Degree(a) => study(Study::Degree, a),
        Command::Real(a) => study(Study::Real, a),
        Command::Theory(a) => {
            if a.mismatch {
                mismatch(&a)
            } else {
                theory(&a)
            }
        }
    }
}

fn gen(config: Option<PathBuf>, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut spec = match config {
        Some(p) => {
            let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str::<SyntheticSpec>(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => SyntheticSpec::new(
            TopologySpec::new(TopologyKind::Ring, 200, 2.0, 0),
            TargetKind::Brownian,
            OperatorKind::NeighAvg,
            0.5,
            0,
        ),
    };
    if let Some(s) = seed {
        spec.seed = s;
        spec.topology.seed = derive_seed(s, &[tag("topology")]);
    }
    let data = make_synthetic(&spec)?;
    write_bundle(&data, out)?;
    println!(
        "wrote {} nodes ({} observed) to {}",
        data.n(),
        data.mask.observed_count(),
        out.display()
    );
    Ok(())
}

fn train(data_dir: &Path, config: Option<PathBuf>, out: &Path, method: &str, seed: u64) -> Result<()> {
    let cfg = match config {
        Some(p) => ExperimentConfig::load(&p)?,
        None => ExperimentConfig::default(),
    };
    let method: Method = method.parse()?;
    let data = read_bundle(data_dir)?;
    let fit = fit_and_evaluate(&cfg, method, &data, seed)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut trace = String::from("epoch,loss\n");
    for (e, l) in fit.loss_trace.iter().enumerate() {
        let _ = writeln!(trace, "{e},{l}");
    }
    std::fs::write(out.join("loss.csv"), trace)?;
    if let Some(model) = &fit.model {
        write_checkpoint(model, &out.join("model.ckpt"))?;
    }
    let evaluation = if data.is_transductive() {
        "transductive"
    } else {
        "inductive"
    };
    let metrics = format!(
        "method,train_mse,test_mse,evaluation\n{method},{},{},{evaluation}\n",
        fit.train_mse, fit.test_mse
    );
    std::fs::write(out.join("metrics.csv"), &metrics)?;
    print!("{metrics}");
    Ok(())
}

fn study(kind: Study, args: StudyArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::for_study(kind),
    };
    if cfg.study != kind {
        bail!("config describes a `{}` study, not `{kind}`", cfg.study);
    }
    if let Some(s) = args.seed {
        cfg.master_seed = s;
    }
    if args.workers.is_some() {
        cfg.workers = args.workers;
    }
    let out_dir = args
        .out
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from(format!("out/{kind}")));
    let out = run_experiment(&cfg)?;
    let failed = out.rows.iter().filter(|r| !r.is_ok()).count();
    let paths = emit_outputs(&out, &out_dir)?;
    println!(
        "{} rows ({failed} failed) written to {}",
        out.rows.len(),
        out_dir.display()
    );
    for s in out.summary.iter().filter(|s| s.kind != "aggregate") {
        println!("{}", s.to_csv_line());
    }
    println!("{} files", paths.len());
    Ok(())
}

fn theory(a: &TheoryArgs) -> Result<()> {
    let (mut n, mut t, mut m, mut r) = (a.n, a.t, a.m, None);
    let mut m_conservative = None;
    if let Some(dir) = &a.bundle {
        let data = read_bundle(dir)?;
        n = data.n();
        t = data.op.row_sum_norm();
        m = receptive_field(&data.op, a.depth);
        m_conservative = Some(conservative_receptive_bound(&data.op, a.depth));
        if m <= 64 {
            r = Some(dependency_partition(&data.op, a.depth).r);
        }
    }
    let width = a.width.unwrap_or_else(|| (n as f64).sqrt().ceil() as usize);
    let mut widths = vec![a.d];
    widths.extend(std::iter::repeat_n(width, a.hidden_layers));
    widths.push(1);
    let s = a
        .sparsity
        .unwrap_or_else(|| widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum());
    let delta = a.delta.unwrap_or(1.0 / n as f64);
    let log_cover = entropy_bound(delta, a.d, a.depth, a.hidden_layers, &widths, s, t)?;
    let kappa = kappa_n(n as f64, a.d, a.depth, a.hidden_layers, s, t)?;
    let stoch = stochastic_terms_shape(m, a.f_trunc, log_cover, a.eps, n, a.pi, delta)?;
    let dims: Vec<usize> = (0..a.alpha.len()).map(|i| if i == 0 { a.d } else { 1 }).collect();
    let smooth = effective_smoothness(dims, a.active.clone(), a.alpha.clone())?;
    let rate = predicted_rate(&smooth, n, m, a.pi)?;

    let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    let mut rows: Vec<(&str, String)> = vec![
        ("n", n.to_string()),
        ("d", a.d.to_string()),
        ("depth", a.depth.to_string()),
        ("hidden_layers", a.hidden_layers.to_string()),
        (
            "widths",
            widths.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(" "),
        ),
        ("sparsity", s.to_string()),
        ("row_sum_norm", t.to_string()),
        ("receptive_field", m.to_string()),
    ];
    if let Some(c) = m_conservative {
        rows.push(("receptive_bound", c.to_string()));
    }
    if let Some(r) = r {
        rows.push(("partition_classes", r.to_string()));
        rows.push(("partition_limit", (m * (m - 1) + 1).to_string()));
    }
    rows.extend([
        ("delta", delta.to_string()),
        ("entropy_bound", log_cover.to_string()),
        ("kappa_n", kappa.to_string()),
        ("stochastic_lower", stoch.lower.to_string()),
        ("stochastic_upper", stoch.upper.to_string()),
        ("alpha_star", join(&smooth.alpha_star)),
        ("rate_exponent", smooth.rate_exponent().to_string()),
        ("predicted_rate", rate.to_string()),
    ]);
    let key_width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (k, v) in &rows {
        println!("{k:<key_width$}  {v}");
    }
    if let Some(p) = &a.csv {
        let mut text = String::from("quantity,value\n");
        for (k, v) in &rows {
            let _ = writeln!(text, "{k},{v}");
        }
        std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

/// Rescales each feature column to `[0, 1]`.
fn unit_features(x: &FeatureMatrix) -> Result<FeatureMatrix> {
    let mut v = x.as_array().clone();
    for mut col in v.columns_mut() {
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = if hi > lo { hi - lo } else { 1.0 };
        col.mapv_inplace(|c| ((c - lo) / span).clamp(0.0, 1.0));
    }
    Ok(FeatureMatrix::new(v)?)
}

fn mismatch(a: &TheoryArgs) -> Result<()> {
    let Some(dir) = &a.bundle else {
        bail!("--mismatch needs --bundle");
    };
    let data = read_bundle(dir)?;
    let theta: Vec<f64> = match data.meta.get("theta") {
        Some(t) => t.split_whitespace().map(str::parse).collect::<Result<_, _>>()?,
        None => vec![0.5, 0.5],
    };
    let coeffs = FilterCoefficients::from_theta(theta)?;
    let x = unit_features(&data.x)?;
    let s_op = &data.op;
    let mut instances: Vec<(String, PropagationOperator)> = Vec::new();
    for kind in OperatorKind::ALL {
        if Some(kind) != s_op.kind() {
            if let Ok(t) = PropagationOperator::from_graph(&data.graph, kind) {
                instances.push((format!("operator:{kind}"), t));
            }
        }
    }
    let mut rng = rng_from(a.seed);
    for i in 0..a.perturbations {
        let tau = a.tau_max * (i + 1) as f64 / a.perturbations as f64;
        let trip: Vec<(usize, usize, f64)> = s_op
            .triplets()
            .into_iter()
            .map(|(r, c, v)| (r, c, v * (1.0 + tau * rng.random_range(-1.0..=1.0))))
            .collect();
        instances.push((
            format!("perturb:{tau}"),
            PropagationOperator::from_triplets(s_op.n(), &trip)?,
        ));
    }
    let mut text = String::from("instance,kind,frobenius,lhs,rhs,margin,holds\n");
    let mut held = 0;
    for (i, (kind, t_op)) in instances.iter().enumerate() {
        let check = verify_mismatch(t_op, s_op, &coeffs, &x)?;
        let dist = t_op.frobenius_distance(s_op)?;
        held += usize::from(check.holds);
        let _ = writeln!(
            text,
            "{i},{kind},{dist},{},{},{},{}",
            check.lhs,
            check.rhs,
            check.margin(),
            check.holds
        );
    }
    print!("{text}");
    eprintln!("{held}/{} instances satisfy the bound", instances.len());
    if let Some(p) = &a.csv {
        std::fs::write(p, &text).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}
