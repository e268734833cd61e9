use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use statrs::distribution::{ContinuousCDF, StudentsT};

use super::config::{Method, Study};
use crate::error::{Error, Result};

pub const RESULTS_HEADER: &str = "study,topology,n,pi,avg_degree,max_degree,operator,method,trial,\
train_mse,test_mse,m,r,laplacian_energy,wall_time_s,status";

pub const SUMMARY_HEADER: &str = "kind,study,topology,n,pi,avg_degree,operator,method,count,\
mean_train_mse,mean_test_mse,slope,intercept,r_squared,rho,p_value,evaluation";

/// One fitted method on one experiment cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub study: Study,
    pub topology: String,
    pub n: usize,
    pub pi: f64,
    pub avg_degree: f64,
    pub max_degree: usize,
    pub operator: String,
    pub method: Method,
    pub trial: usize,
    pub train_mse: Option<f64>,
    pub test_mse: Option<f64>,
    pub m: Option<usize>,
    pub r: Option<usize>,
    pub laplacian_energy: Option<f64>,
    pub wall_time_s: Option<f64>,
    /// `ok`, or `error: <message>` for a failed fit.
    pub status: String,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn clean_status(s: &str) -> String {
    s.chars()
        .map(|c| match c {
            ',' => ';',
            '\n' | '\r' => ' ',
            c => c,
        })
        .collect()
}

impl ResultRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.study,
            self.topology,
            self.n,
            self.pi,
            self.avg_degree,
            self.max_degree,
            self.operator,
            self.method,
            self.trial,
            opt(self.train_mse),
            opt(self.test_mse),
            opt(self.m),
            opt(self.r),
            opt(self.laplacian_energy),
            opt(self.wall_time_s),
            clean_status(&self.status),
        )
    }

    pub fn parse_csv_line(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 16 {
            return Err(Error::input(format!("expected 16 fields, got {}", f.len())));
        }
        fn num<T: std::str::FromStr>(s: &str) -> Result<T> {
            s.parse().map_err(|_| Error::input(format!("bad number `{s}`")))
        }
        fn maybe<T: std::str::FromStr>(s: &str) -> Result<Option<T>> {
            if s.is_empty() {
                Ok(None)
            } else {
                num(s).map(Some)
            }
        }
        Ok(Self {
            study: f[0].parse()?,
            topology: f[1].to_string(),
            n: num(f[2])?,
            pi: num(f[3])?,
            avg_degree: num(f[4])?,
            max_degree: num(f[5])?,
            operator: f[6].to_string(),
            method: f[7].parse()?,
            trial: num(f[8])?,
            train_mse: maybe(f[9])?,
            test_mse: maybe(f[10])?,
            m: maybe(f[11])?,
            r: maybe(f[12])?,
            laplacian_energy: maybe(f[13])?,
            wall_time_s: maybe(f[14])?,
            status: f[15].to_string(),
        })
    }

    /// Canonical ordering over the factor columns.
    pub fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.study
            .cmp(&other.study)
            .then_with(|| self.topology.cmp(&other.topology))
            .then_with(|| self.n.cmp(&other.n))
            .then_with(|| self.pi.total_cmp(&other.pi))
            .then_with(|| self.avg_degree.total_cmp(&other.avg_degree))
            .then_with(|| self.operator.cmp(&other.operator))
            .then_with(|| self.method.cmp(&other.method))
            .then_with(|| self.trial.cmp(&other.trial))
    }
}

pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(ResultRow::canonical_cmp);
}

pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(RESULTS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv_line());
        out.push('\n');
    }
    out
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(RESULTS_HEADER) {
        return Err(Error::format(path, "missing or unexpected header"));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| ResultRow::parse_csv_line(l).map_err(|e| Error::format(path, e.to_string())))
        .collect()
}

/// Ordinary least squares of `log y` on `log x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Fits `log y = a + b log x`; needs at least two distinct positive `x`
/// and positive `y`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Result<SlopeFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::input("need at least two paired points"));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::input("log-log fit needs positive finite values"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = ly.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::input("x values are all equal"));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(SlopeFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
        points: x.len(),
    })
}

fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let k = a.len() as f64;
    let ma = a.iter().sum::<f64>() / k;
    let mb = b.iter().sum::<f64>() / k;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}

/// Spearman rank correlation with average ranks for ties.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spearman {
    pub rho: f64,
    /// Two-sided p-value from the Student-t approximation with `k − 2`
    /// degrees of freedom.
    pub p_value: f64,
    pub points: usize,
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<Spearman> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::input("need at least three paired points"));
    }
    let rho = pearson(&average_ranks(x), &average_ranks(y));
    let df = (x.len() - 2) as f64;
    let p_value = if rho.abs() >= 1.0 {
        0.0
    } else {
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
        2.0 * (1.0 - dist.cdf(t.abs()))
    };
    Ok(Spearman {
        rho,
        p_value,
        points: x.len(),
    })
}

/// One line of `summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    /// `aggregate`, `slope_n`, `slope_inv_pi` or `spearman_degree`.
    pub kind: String,
    pub study: Study,
    pub topology: String,
    pub n: Option<usize>,
    pub pi: Option<f64>,
    pub avg_degree: Option<f64>,
    pub operator: String,
    pub method: Method,
    pub count: usize,
    pub mean_train_mse: Option<f64>,
    pub mean_test_mse: Option<f64>,
    pub slope: Option<SlopeFit>,
    pub spearman: Option<Spearman>,
    /// `inductive` or `transductive`.
    pub evaluation: String,
}

impl SummaryRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.kind,
            self.study,
            self.topology,
            opt(self.n),
            opt(self.pi),
            opt(self.avg_degree),
            self.operator,
            self.method,
            self.count,
            opt(self.mean_train_mse),
            opt(self.mean_test_mse),
            opt(self.slope.map(|s| s.slope)),
            opt(self.slope.map(|s| s.intercept)),
            opt(self.slope.map(|s| s.r_squared)),
            opt(self.spearman.map(|s| s.rho)),
            opt(self.spearman.map(|s| s.p_value)),
            self.evaluation,
        )
    }
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{SUMMARY_HEADER}");
    for r in rows {
        let _ = writeln!(out, "{}", r.to_csv_line());
    }
    out
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

type CellKey = (String, usize, u64, u64, String, Method);

fn cell_key(r: &ResultRow) -> CellKey {
    (
        r.topology.clone(),
        r.n,
        r.pi.to_bits(),
        r.avg_degree.to_bits(),
        r.operator.clone(),
        r.method,
    )
}

/// Per-cell means over successful trials plus the study's trend statistic:
/// log-log slope in `n` (convergence), in `1/π` (label fraction), or the
/// Spearman correlation between realized maximum degree and test error
/// (degree).
/// `(x, y)` pairs collected for one fit.
type Points = Vec<(f64, f64)>;

pub fn summarize(study: Study, rows: &[ResultRow], evaluation: &str) -> Vec<SummaryRow> {
    let mut cells: BTreeMap<CellKey, Vec<&ResultRow>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.is_ok()) {
        cells.entry(cell_key(r)).or_default().push(r);
    }
    let mut out = Vec::new();
    for ((topology, n, pi, deg, operator, method), group) in &cells {
        let train: Vec<f64> = group.iter().filter_map(|r| r.train_mse).collect();
        let test: Vec<f64> = group.iter().filter_map(|r| r.test_mse).collect();
        out.push(SummaryRow {
            kind: "aggregate".into(),
            study,
            topology: topology.clone(),
            n: Some(*n),
            pi: Some(f64::from_bits(*pi)),
            avg_degree: Some(f64::from_bits(*deg)),
            operator: operator.clone(),
            method: *method,
            count: group.len(),
            mean_train_mse: mean(&train),
            mean_test_mse: mean(&test),
            slope: None,
            spearman: None,
            evaluation: evaluation.into(),
        });
    }
    let aggregates = out.clone();
    match study {
        Study::Convergence => {
            let mut series: BTreeMap<(String, u64, u64, String, Method), Points> = BTreeMap::new();
            for a in &aggregates {
                if let (Some(n), Some(mse)) = (a.n, a.mean_test_mse) {
                    series
                        .entry((
                            a.topology.clone(),
                            a.pi.unwrap().to_bits(),
                            a.avg_degree.unwrap().to_bits(),
                            a.operator.clone(),
                            a.method,
                        ))
                        .or_default()
                        .push((n as f64, mse));
                }
            }
            for ((topology, pi, deg, operator, method), pts) in series {
                let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
                if let Ok(fit) = fit_slope(&x, &y) {
                    out.push(SummaryRow {
                        kind: "slope_n".into(),
                        study,
                        topology,
                        n: None,
                        pi: Some(f64::from_bits(pi)),
                        avg_degree: Some(f64::from_bits(deg)),
                        operator,
                        method,
                        count: fit.points,
                        mean_train_mse: None,
                        mean_test_mse: None,
                        slope: Some(fit),
                        spearman: None,
                        evaluation: evaluation.into(),
                    });
                }
            }
        }
        Study::LabelFraction => {
            let mut series: BTreeMap<(String, usize, u64, String, Method), Points> = BTreeMap::new();
            for a in &aggregates {
                if let (Some(pi), Some(mse)) = (a.pi, a.mean_test_mse) {
                    series
                        .entry((
                            a.topology.clone(),
                            a.n.unwrap(),
                            a.avg_degree.unwrap().to_bits(),
                            a.operator.clone(),
                            a.method,
                        ))
                        .or_default()
                        .push((1.0 / pi, mse));
                }
            }
            for ((topology, n, deg, operator, method), pts) in series {
                let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
                if let Ok(fit) = fit_slope(&x, &y) {
                    out.push(SummaryRow {
                        kind: "slope_inv_pi".into(),
                        study,
                        topology,
                        n: Some(n),
                        pi: None,
                        avg_degree: Some(f64::from_bits(deg)),
                        operator,
                        method,
                        count: fit.points,
                        mean_train_mse: None,
                        mean_test_mse: None,
                        slope: Some(fit),
                        spearman: None,
                        evaluation: evaluation.into(),
                    });
                }
            }
        }
        Study::Degree => {
            let mut groups: BTreeMap<(String, usize, u64, String, Method), Points> = BTreeMap::new();
            for r in rows.iter().filter(|r| r.is_ok()) {
                if let Some(mse) = r.test_mse {
                    groups
                        .entry((r.topology.clone(), r.n, r.pi.to_bits(), r.operator.clone(), r.method))
                        .or_default()
                        .push((r.max_degree as f64, mse));
                }
            }
            for ((topology, n, pi, operator, method), pts) in groups {
                let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
                if let Ok(s) = spearman(&x, &y) {
                    out.push(SummaryRow {
                        kind: "spearman_degree".into(),
                        study,
                        topology,
                        n: Some(n),
                        pi: Some(f64::from_bits(pi)),
                        avg_degree: None,
                        operator,
                        method,
                        count: s.points,
                        mean_train_mse: None,
                        mean_test_mse: None,
                        slope: None,
                        spearman: Some(s),
                        evaluation: evaluation.into(),
                    });
                }
            }
        }
        Study::Topology | Study::Real => {}
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(n: usize, trial: usize, mse: Option<f64>) -> ResultRow {
        ResultRow {
            study: Study::Convergence,
            topology: "ring".into(),
            n,
            pi: 0.5,
            avg_degree: 2.0,
            max_degree: 2,
            operator: "neigh_avg".into(),
            method: Method::GnnSkip,
            trial,
            train_mse: mse,
            test_mse: mse,
            m: Some(5),
            r: None,
            laplacian_energy: Some(0.25),
            wall_time_s: None,
            status: if mse.is_some() {
                "ok".into()
            } else {
                "error: boom, bad".into()
            },
        }
    }

    #[test]
    fn csv_line_round_trip() {
        let r = row(100, 3, Some(0.1 + 0.2));
        let back = ResultRow::parse_csv_line(&r.to_csv_line()).unwrap();
        assert_eq!(back, r);
        let e = row(100, 4, None);
        assert_eq!(e.to_csv_line().split(',').count(), 16);
        assert!(e.to_csv_line().ends_with("error: boom; bad"));
    }

    #[test]
    fn slope_recovers_power_law() {
        let x = [100.0, 200.0, 400.0, 800.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.5)).collect();
        let f = fit_slope(&x, &y).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!(fit_slope(&[1.0], &[1.0]).is_err());
        assert!(fit_slope(&[1.0, 2.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn spearman_examples() {
        let s = spearman(&[1.0, 2.0, 3.0, 4.0], &[10.0, 20.0, 25.0, 100.0]).unwrap();
        assert_eq!(s.rho, 1.0);
        assert_eq!(s.p_value, 0.0);
        let s = spearman(&[1.0, 2.0, 3.0, 4.0, 5.0], &[5.0, 4.0, 3.0, 2.0, 1.0]).unwrap();
        assert_eq!(s.rho, -1.0);
        // ties share the average rank
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
        // rho = 0.8 with 5 points: t = 0.8·√(3/0.36) ≈ 2.309, two-sided p ≈ 0.1041
        let s = spearman(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 1.0, 4.0, 3.0, 5.0]).unwrap();
        assert!((s.rho - 0.8).abs() < 1e-12);
        assert!((s.p_value - 0.1041).abs() < 5e-4);
    }

    #[test]
    fn summary_means_and_slopes() {
        let rows = vec![
            row(100, 0, Some(0.2)),
            row(100, 1, Some(0.4)),
            row(400, 0, Some(0.15)),
            row(400, 1, Some(0.15)),
            row(400, 2, None),
        ];
        let s = summarize(Study::Convergence, &rows, "inductive");
        let agg: Vec<_> = s.iter().filter(|r| r.kind == "aggregate").collect();
        assert_eq!(agg.len(), 2);
        assert!((agg[0].mean_test_mse.unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(agg[1].count, 2);
        let slope = s.iter().find(|r| r.kind == "slope_n").unwrap().slope.unwrap();
        assert!((slope.slope - (0.15f64 / 0.3).ln() / 4f64.ln()).abs() < 1e-12);
    }
}
