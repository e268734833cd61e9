use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Parses a whitespace-separated `u v` edge list. Lines starting with `#`
/// and blank lines are skipped.
pub fn read_edge_list(path: &Path) -> Result<Vec<(usize, usize)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_edge_list(&text).map_err(|msg| Error::format(path, msg))
}

pub(crate) fn parse_edge_list(text: &str) -> std::result::Result<Vec<(usize, usize)>, String> {
    let mut edges = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let parse = |tok: Option<&str>| -> std::result::Result<usize, String> {
            tok.ok_or_else(|| format!("line {}: expected two node ids", lineno + 1))?
                .parse::<usize>()
                .map_err(|e| format!("line {}: {e}", lineno + 1))
        };
        let u = parse(it.next())?;
        let v = parse(it.next())?;
        if it.next().is_some() {
            return Err(format!("line {}: trailing tokens", lineno + 1));
        }
        edges.push((u, v));
    }
    Ok(edges)
}

pub fn write_edge_list(path: &Path, n: usize, edges: &[(usize, usize)]) -> Result<()> {
    let mut out = format!("# n={n}\n");
    for (u, v) in edges {
        out.push_str(&format!("{u} {v}\n"));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blank_lines() {
        let e = parse_edge_list("# header\n0 1\n\n 2\t3 \n").unwrap();
        assert_eq!(e, vec![(0, 1), (2, 3)]);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(parse_edge_list("0\n").is_err());
        assert!(parse_edge_list("0 x\n").is_err());
        assert!(parse_edge_list("0 1 2\n").is_err());
    }
}
