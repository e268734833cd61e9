use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use ndarray::Array2;

use crate::datagen::{standardize, Dataset, Meta};
use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, OperatorKind, PropagationOperator, SparseGraph};
use crate::train::MaskVector;

/// Attribute columns of the housing corpus, in feature order.
pub const CALIFORNIA_FEATURES: [&str; 8] = [
    "MedInc",
    "HouseAge",
    "AveRooms",
    "AveBedrms",
    "Population",
    "AveOccup",
    "Latitude",
    "Longitude",
];
pub const CALIFORNIA_TARGET: &str = "MedHouseVal";

fn transductive(
    graph: SparseGraph,
    kind: OperatorKind,
    x: FeatureMatrix,
    y: Vec<f64>,
    mut meta: Meta,
) -> Result<Dataset> {
    let op = PropagationOperator::from_graph(&graph, kind)?;
    let n = graph.n();
    meta.insert("transductive".into(), "true".into());
    meta.insert("operator".into(), kind.to_string());
    let data = Dataset {
        graph,
        op,
        x_fresh: x.clone(),
        x,
        y_clean: y.clone(),
        y_clean_fresh: y.clone(),
        y,
        mask: MaskVector::full(n),
        meta,
    };
    data.check()?;
    Ok(data)
}

fn standardize_columns(x: &mut Array2<f64>) {
    for mut col in x.columns_mut() {
        let mut v = col.to_vec();
        standardize(&mut v);
        col.assign(&ndarray::Array1::from(v));
    }
}

/// Loads a housing CSV with a header naming the eight attributes and the
/// target column (any order, extra columns ignored). Features are
/// standardized per column; the graph is the symmetric `k`-NN graph over
/// (latitude, longitude) with self-loops added for propagation.
pub fn ingest_california(csv_path: &Path, k: usize, kind: OperatorKind) -> Result<Dataset> {
    let fmt = |msg: String| Error::format(csv_path, msg);
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(csv_path)
        .map_err(|e| fmt(e.to_string()))?;
    let header = reader.headers().map_err(|e| fmt(e.to_string()))?.clone();
    let column = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| fmt(format!("missing column `{name}`")))
    };
    let feature_cols: Vec<usize> = CALIFORNIA_FEATURES.iter().map(|c| column(c)).collect::<Result<_>>()?;
    let target_col = column(CALIFORNIA_TARGET)?;
    let lat = feature_cols[6];
    let lon = feature_cols[7];

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut coords: Vec<Vec<f64>> = Vec::new();
    let mut y = Vec::new();
    for (idx, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| fmt(format!("row {idx}: {e}")))?;
        let cell = |c: usize| -> Result<f64> {
            let raw = rec.get(c).unwrap_or("");
            raw.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                fmt(format!(
                    "row {idx}: non-numeric value `{raw}` in column `{}`",
                    &header[c]
                ))
            })
        };
        rows.push(feature_cols.iter().map(|&c| cell(c)).collect::<Result<_>>()?);
        coords.push(vec![cell(lat)?, cell(lon)?]);
        y.push(cell(target_col)?);
    }
    if rows.is_empty() {
        return Err(fmt("no data rows".into()));
    }
    let n = rows.len();
    let mut x = Array2::from_shape_fn((n, CALIFORNIA_FEATURES.len()), |(i, j)| rows[i][j]);
    standardize_columns(&mut x);
    let graph = SparseGraph::knn(&coords, k)?.with_self_loops();
    let mut meta = Meta::new();
    meta.insert("dataset".into(), "california".into());
    meta.insert("knn_k".into(), k.to_string());
    transductive(graph, kind, FeatureMatrix::new(x)?, y, meta)
}

/// Loads the page network: an edge CSV of id pairs, a JSON object mapping
/// each node id to its list of noun ids, and a target CSV of `id,traffic`.
///
/// Only the `max_features` most frequent nouns are kept (ties by smaller
/// id; 0 keeps all), encoded as 0/1 indicators. The target becomes
/// `log(1 + traffic)`, standardized.
pub fn ingest_chameleon(
    edges_path: &Path,
    features_path: &Path,
    target_path: &Path,
    max_features: usize,
    kind: OperatorKind,
) -> Result<Dataset> {
    let targets = read_id_value_csv(target_path)?;
    let n = targets.len();
    if n == 0 {
        return Err(Error::format(target_path, "no data rows"));
    }
    let mut traffic = vec![f64::NAN; n];
    for (id, v) in targets {
        if id >= n {
            return Err(Error::format(target_path, format!("node id {id} outside [0, {n})")));
        }
        traffic[id] = v;
    }
    if let Some(i) = traffic.iter().position(|v| v.is_nan()) {
        return Err(Error::format(target_path, format!("node {i} has no target")));
    }
    let mut y: Vec<f64> = traffic.iter().map(|t| t.max(0.0).ln_1p()).collect();
    standardize(&mut y);

    let edges = read_pair_csv(edges_path)?;
    if let Some(&(u, v)) = edges.iter().find(|(u, v)| *u >= n || *v >= n) {
        return Err(Error::format(
            edges_path,
            format!("edge ({u}, {v}) names an unknown node"),
        ));
    }
    let graph = SparseGraph::from_edges(n, &edges, true)?;

    let text = std::fs::read_to_string(features_path).map_err(|e| Error::io(features_path, e))?;
    let raw: BTreeMap<String, Vec<usize>> =
        serde_json::from_str(&text).map_err(|e| Error::format(features_path, e.to_string()))?;
    let mut lists = vec![Vec::new(); n];
    for (key, nouns) in raw {
        let id: usize = key
            .parse()
            .map_err(|_| Error::format(features_path, format!("bad node id `{key}`")))?;
        if id >= n {
            return Err(Error::format(features_path, format!("node id {id} outside [0, {n})")));
        }
        lists[id] = nouns;
    }
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for l in &lists {
        for &f in l {
            *counts.entry(f).or_default() += 1;
        }
    }
    let mut vocab: Vec<(usize, usize)> = counts.into_iter().collect();
    vocab.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    if max_features > 0 {
        vocab.truncate(max_features);
    }
    let column: HashMap<usize, usize> = vocab.iter().enumerate().map(|(j, &(f, _))| (f, j)).collect();
    let mut x = Array2::zeros((n, vocab.len().max(1)));
    for (i, l) in lists.iter().enumerate() {
        for f in l {
            if let Some(&j) = column.get(f) {
                x[[i, j]] = 1.0;
            }
        }
    }
    let mut meta = Meta::new();
    meta.insert("dataset".into(), "chameleon".into());
    meta.insert("max_features".into(), max_features.to_string());
    transductive(graph, kind, FeatureMatrix::new(x)?, y, meta)
}

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::format(path, e.to_string()))
}

fn read_pair_csv(path: &Path) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for (idx, rec) in csv_reader(path)?.records().enumerate() {
        let rec = rec.map_err(|e| Error::format(path, format!("row {idx}: {e}")))?;
        let id = |c: usize| -> Result<usize> {
            rec.get(c)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::format(path, format!("row {idx}: expected two node ids")))
        };
        out.push((id(0)?, id(1)?));
    }
    Ok(out)
}

fn read_id_value_csv(path: &Path) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::new();
    for (idx, rec) in csv_reader(path)?.records().enumerate() {
        let rec = rec.map_err(|e| Error::format(path, format!("row {idx}: {e}")))?;
        let id = rec.get(0).and_then(|s| s.parse().ok());
        let v = rec.get(1).and_then(|s| s.parse::<f64>().ok()).filter(|v| v.is_finite());
        match (id, v) {
            (Some(id), Some(v)) => out.push((id, v)),
            _ => return Err(Error::format(path, format!("row {idx}: expected `id,value`"))),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    const HEADER: &str = "MedInc,HouseAge,AveRooms,AveBedrms,Population,AveOccup,Latitude,Longitude,MedHouseVal";

    #[test]
    fn california_small_file() {
        let dir = tempfile::tempdir().unwrap();
        let mut text = format!("{HEADER}\n");
        for i in 0..6 {
            let f = i as f64;
            text.push_str(&format!(
                "{},{},5,1,300,2,{},{},{}\n",
                2.0 + f,
                10.0 + f,
                34.0 + f * 0.1,
                -118.0,
                1.5 + f
            ));
        }
        let p = write(dir.path(), "h.csv", &text);
        let d = ingest_california(&p, 2, OperatorKind::SymNorm).unwrap();
        assert_eq!(d.n(), 6);
        assert_eq!(d.d(), 8);
        assert!(d.is_transductive());
        assert_eq!(d.y[2], 3.5);
        let col0: Vec<f64> = d.x.view().column(0).to_vec();
        assert!(col0.iter().sum::<f64>().abs() < 1e-12);
        d.graph.check_invariants().unwrap();
        for i in 0..6 {
            assert!(d.graph.without_self_loops().degree(i) >= 2);
        }
    }

    #[test]
    fn california_errors_name_the_problem() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "a.csv", "MedInc,HouseAge\n1,2\n");
        let e = ingest_california(&p, 1, OperatorKind::SymNorm).unwrap_err().to_string();
        assert!(e.contains("AveRooms"), "{e}");
        let p = write(
            dir.path(),
            "b.csv",
            &format!("{HEADER}\n1,2,3,4,5,6,7,8,9\n1,2,3,x,5,6,7,8,9\n"),
        );
        let e = ingest_california(&p, 1, OperatorKind::SymNorm).unwrap_err().to_string();
        assert!(e.contains("row 1"), "{e}");
    }

    #[test]
    fn chameleon_small_files() {
        let dir = tempfile::tempdir().unwrap();
        let e = write(dir.path(), "e.csv", "id1,id2\n0,1\n1,0\n1,2\n");
        let f = write(dir.path(), "f.json", r#"{"0": [5, 7], "1": [7], "2": [], "3": [9, 7]}"#);
        let t = write(dir.path(), "t.csv", "id,target\n0,10\n1,100\n2,0\n3,1000\n");
        let d = ingest_chameleon(&e, &f, &t, 2, OperatorKind::SymNorm).unwrap();
        assert_eq!(d.n(), 4);
        assert_eq!(d.graph.without_self_loops().num_edges(), 2);
        // noun 7 is most frequent, then 5 (ties by smaller id)
        assert_eq!(d.x.row(0).to_vec(), vec![1.0, 1.0]);
        assert_eq!(d.x.row(2).to_vec(), vec![0.0, 0.0]);
        assert_eq!(d.x.row(3).to_vec(), vec![1.0, 0.0]);
        let mean: f64 = d.y.iter().sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert!(d.y[3] > d.y[1] && d.y[1] > d.y[0] && d.y[0] > d.y[2]);

        let bad = write(dir.path(), "bad.csv", "id1,id2\n0,9\n");
        assert!(ingest_chameleon(&bad, &f, &t, 2, OperatorKind::SymNorm).is_err());
    }
}
