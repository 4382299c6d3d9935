//! Matrix Market files plus a JSON header for [`LqoSystem`].
//!
//! A system directory holds `A.mtx`, `B.mtx`, `C.mtx`, `M.mtx` and
//! `system.json` (`{"n": .., "m": .., "d": ..}`). Matrices are written in
//! dense `array real general` form (column-major values); reading also accepts
//! `coordinate real {general,symmetric}`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::LqoSystem;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemHeader {
    pub n: usize,
    pub m: usize,
    pub d: f64,
}

pub fn write_matrix_market(path: &Path, a: &Matrix) -> Result<()> {
    let mut out = String::with_capacity(24 * a.len() + 64);
    out.push_str("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(out, "{} {}", a.nrows(), a.ncols());
    for v in a.iter() {
        let _ = writeln!(out, "{v:e}");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_matrix_market(path: &Path) -> Result<Matrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix_market(&text).map_err(|message| Error::Parse {
        path: path.to_path_buf(),
        message,
    })
}

fn parse_matrix_market(text: &str) -> std::result::Result<Matrix, String> {
    let mut lines = text.lines();
    let banner = lines.next().ok_or("empty file")?.to_ascii_lowercase();
    let fields: Vec<&str> = banner.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(format!("bad banner: {banner}"));
    }
    let (layout, field, symmetry) = (fields[2], fields[3], fields[4]);
    if field != "real" && field != "double" && field != "integer" {
        return Err(format!("unsupported field type {field}"));
    }
    let symmetric = match symmetry {
        "general" => false,
        "symmetric" => true,
        other => return Err(format!("unsupported symmetry {other}")),
    };
    let mut body = lines.map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('%'));
    let size: Vec<usize> = body
        .next()
        .ok_or("missing size line")?
        .split_whitespace()
        .map(|t| t.parse().map_err(|e| format!("bad size entry {t}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    let parse_f = |t: &str| t.parse::<f64>().map_err(|e| format!("bad value {t}: {e}"));
    match layout {
        "array" => {
            let [rows, cols] = size[..] else {
                return Err("array size line needs rows and cols".into());
            };
            let mut a = Matrix::zeros(rows, cols);
            if symmetric {
                // Lower triangle, column by column.
                for j in 0..cols {
                    for i in j..rows {
                        let v = parse_f(body.next().ok_or("truncated data")?)?;
                        a[(i, j)] = v;
                        a[(j, i)] = v;
                    }
                }
            } else {
                for v in a.iter_mut() {
                    *v = parse_f(body.next().ok_or("truncated data")?)?;
                }
            }
            Ok(a)
        }
        "coordinate" => {
            let [rows, cols, nnz] = size[..] else {
                return Err("coordinate size line needs rows, cols and nnz".into());
            };
            let mut a = Matrix::zeros(rows, cols);
            for _ in 0..nnz {
                let line = body.next().ok_or("truncated data")?;
                let parts: Vec<&str> = line.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(format!("bad entry line: {line}"));
                }
                let i: usize = parts[0].parse().map_err(|e| format!("bad index: {e}"))?;
                let j: usize = parts[1].parse().map_err(|e| format!("bad index: {e}"))?;
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(format!("index out of range: {line}"));
                }
                let v = parse_f(parts[2])?;
                a[(i - 1, j - 1)] = v;
                if symmetric {
                    a[(j - 1, i - 1)] = v;
                }
            }
            Ok(a)
        }
        other => Err(format!("unsupported layout {other}")),
    }
}

impl LqoSystem {
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_matrix_market(&dir.join("A.mtx"), self.a())?;
        write_matrix_market(&dir.join("B.mtx"), self.b())?;
        write_matrix_market(&dir.join("C.mtx"), self.c())?;
        write_matrix_market(&dir.join("M.mtx"), self.m())?;
        let header = SystemHeader {
            n: self.n(),
            m: self.num_inputs(),
            d: self.d(),
        };
        let path = dir.join("system.json");
        let json = serde_json::to_string_pretty(&header).expect("header serialises");
        fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("system.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let header: SystemHeader = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.clone(),
            message: e.to_string(),
        })?;
        let a = read_matrix_market(&dir.join("A.mtx"))?;
        let b = read_matrix_market(&dir.join("B.mtx"))?;
        let c = read_matrix_market(&dir.join("C.mtx"))?;
        let m = read_matrix_market(&dir.join("M.mtx"))?;
        if a.nrows() != header.n || b.ncols() != header.m {
            return Err(Error::dims(
                "system header",
                format!("n={}, m={}", header.n, header.m),
                format!("n={}, m={}", a.nrows(), b.ncols()),
            ));
        }
        LqoSystem::new(a, b, c, m, header.d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_lqo_system, seeded};

    #[test]
    fn system_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = seeded(4);
        let sys = random_lqo_system(&mut rng, 5, 2);
        sys.save(dir.path()).unwrap();
        let back = LqoSystem::load(dir.path()).unwrap();
        assert_eq!(back.a(), sys.a());
        assert_eq!(back.b(), sys.b());
        assert_eq!(back.c(), sys.c());
        assert_eq!(back.m(), sys.m());
        assert_eq!(back.d(), sys.d());
    }

    #[test]
    fn coordinate_symmetric_input() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n% comment\n3 3 3\n1 1 2.0\n3 1 -1.5\n2 2 4\n";
        let a = parse_matrix_market(text).unwrap();
        assert_eq!(a[(0, 2)], -1.5);
        assert_eq!(a[(2, 0)], -1.5);
        assert_eq!(a[(1, 1)], 4.0);
        assert_eq!(a[(2, 2)], 0.0);
    }

    #[test]
    fn malformed_inputs() {
        assert!(parse_matrix_market("").is_err());
        assert!(parse_matrix_market("%%MatrixMarket matrix array complex general\n1 1\n1\n").is_err());
        assert!(parse_matrix_market("%%MatrixMarket matrix array real general\n2 2\n1\n2\n").is_err());
        assert!(parse_matrix_market("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n").is_err());
    }
}
