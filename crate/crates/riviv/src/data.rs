//! CSV ingestion. The file needs a header row; every named column must be
//! present and hold a finite number in every row.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use riviv_core::numerics::Mat;
use riviv_core::{Dataset, Error};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSchema {
    pub csv: PathBuf,
    pub y: String,
    pub x: String,
    pub z: Vec<String>,
    #[serde(default)]
    pub w: Vec<String>,
    pub intercept: bool,
}

impl DataSchema {
    /// Name of column `j` of the design `[1?, W, Z]`.
    pub fn design_column(&self, j: usize) -> String {
        let mut names: Vec<&str> = Vec::new();
        if self.intercept {
            names.push("(intercept)");
        }
        names.extend(self.w.iter().map(String::as_str));
        names.extend(self.z.iter().map(String::as_str));
        names.get(j).map_or_else(|| format!("#{j}"), |s| s.to_string())
    }

    /// Rewrites core errors that point at a design column so they name it.
    pub fn explain(&self, err: Error) -> AppError {
        match err {
            Error::RankDeficient { column } => AppError::input(format!(
                "column '{}' is collinear with earlier design columns (rank-deficient design)",
                self.design_column(column)
            )),
            e => AppError::Core(e),
        }
    }

    pub fn load(&self) -> AppResult<Dataset> {
        let file = std::fs::File::open(&self.csv).map_err(|e| AppError::io(&self.csv, e))?;
        self.read(file).map_err(|e| match e {
            AppError::Input(m) => AppError::input(format!("{}: {m}", self.csv.display())),
            e => e,
        })
    }

    pub fn read<R: Read>(&self, reader: R) -> AppResult<Dataset> {
        if self.z.is_empty() {
            return Err(AppError::input("at least one instrument column is required"));
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers().map_err(csv_error)?.clone();
        let find = |name: &str| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| AppError::input(format!("column '{name}' not found in header")))
        };
        let wanted: Vec<&str> = [self.y.as_str(), self.x.as_str()]
            .into_iter()
            .chain(self.w.iter().map(String::as_str))
            .chain(self.z.iter().map(String::as_str))
            .collect();
        for (i, a) in wanted.iter().enumerate() {
            if wanted[..i].contains(a) {
                return Err(AppError::input(format!("column '{a}' is used more than once")));
            }
        }
        let idx = wanted.iter().map(|n| find(n)).collect::<AppResult<Vec<_>>>()?;
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); idx.len()];
        for record in rdr.records() {
            let record = record.map_err(csv_error)?;
            let line = record.position().map_or(0, |p| p.line());
            for ((col, &j), name) in cols.iter_mut().zip(&idx).zip(&wanted) {
                let cell = record.get(j).unwrap_or("");
                if cell.is_empty() || matches!(cell, "NA" | "NaN" | "nan" | ".") {
                    return Err(AppError::input(format!("line {line}, column '{name}': missing value")));
                }
                match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => col.push(v),
                    _ => {
                        return Err(AppError::input(format!(
                            "line {line}, column '{name}': '{cell}' is not a finite number"
                        )))
                    }
                }
            }
        }
        let n = cols[0].len();
        if n == 0 {
            return Err(AppError::input("no data rows"));
        }
        let p = self.w.len();
        let w: Vec<&[f64]> = cols[2..2 + p].iter().map(Vec::as_slice).collect();
        let z: Vec<&[f64]> = cols[2 + p..].iter().map(Vec::as_slice).collect();
        let w = Mat::from_columns(n, &w)?;
        let z = Mat::from_columns(n, &z)?;
        let cols_needed = self.z.len() + p + usize::from(self.intercept);
        if n <= cols_needed + 1 {
            return Err(AppError::input(format!(
                "{n} rows are too few for {cols_needed} design columns"
            )));
        }
        Ok(Dataset::new(cols[0].clone(), cols[1].clone(), z, w)?)
    }
}

fn csv_error(e: csv::Error) -> AppError {
    AppError::input(format!("malformed CSV: {e}"))
}

/// Writes `data` with columns `y, x, z1..zk, w1..wp`.
pub fn write_dataset<W: Write>(data: &Dataset, out: W) -> AppResult<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["y".to_string(), "x".to_string()];
    header.extend((1..=data.k()).map(|j| format!("z{j}")));
    header.extend((1..=data.p()).map(|j| format!("w{j}")));
    let err = |e: csv::Error| AppError::input(e.to_string());
    wtr.write_record(&header).map_err(err)?;
    for i in 0..data.n() {
        let mut row = vec![data.y[i].to_string(), data.x[i].to_string()];
        row.extend(data.z.row(i).iter().map(f64::to_string));
        row.extend(data.w.row(i).iter().map(f64::to_string));
        wtr.write_record(&row).map_err(err)?;
    }
    wtr.flush().map_err(|e| AppError::input(e.to_string()))?;
    Ok(())
}

/// Schema matching [`write_dataset`] output.
pub fn default_schema(csv: &Path, k: usize, p: usize) -> DataSchema {
    DataSchema {
        csv: csv.to_path_buf(),
        y: "y".into(),
        x: "x".into(),
        z: (1..=k).map(|j| format!("z{j}")).collect(),
        w: (1..=p).map(|j| format!("w{j}")).collect(),
        intercept: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema(z: &[&str], w: &[&str]) -> DataSchema {
        DataSchema {
            csv: "mem.csv".into(),
            y: "y".into(),
            x: "x".into(),
            z: z.iter().map(|s| s.to_string()).collect(),
            w: w.iter().map(|s| s.to_string()).collect(),
            intercept: true,
        }
    }

    fn body(rows: usize) -> String {
        let mut s = String::from("y,x,a,b,c\n");
        for i in 0..rows {
            let t = i as f64;
            s += &format!("{},{},{},{},{}\n", t.sin(), t.cos(), (2.0 * t).sin(), (3.0 * t).cos(), t * t);
        }
        s
    }

    #[test]
    fn reads_named_columns_in_order() {
        let d = schema(&["b", "a"], &["c"]).read(body(10).as_bytes()).unwrap();
        assert_eq!((d.n(), d.k(), d.p()), (10, 2, 1));
        assert_eq!(d.z[(3, 0)], (9.0f64).cos());
        assert_eq!(d.z[(3, 1)], (6.0f64).sin());
        assert_eq!(d.w[(4, 0)], 16.0);
    }

    #[test]
    fn missing_and_bad_cells_are_located() {
        let s = body(10);
        let mut lines: Vec<String> = s.lines().map(String::from).collect();
        lines[4] = "1,2,,4,5".into();
        let e = schema(&["a"], &[]).read(lines.join("\n").as_bytes()).unwrap_err().to_string();
        assert!(e.contains("line 5") && e.contains("'a'") && e.contains("missing"), "{e}");
        lines[4] = "1,2,3,oops,5".into();
        let e = schema(&["b"], &[]).read(lines.join("\n").as_bytes()).unwrap_err().to_string();
        assert!(e.contains("line 5") && e.contains("'oops'"), "{e}");
        // bad cells in unused columns are ignored
        assert!(schema(&["a"], &[]).read(lines.join("\n").as_bytes()).is_ok());
    }

    #[test]
    fn schema_errors() {
        let e = schema(&["nope"], &[]).read(body(10).as_bytes()).unwrap_err().to_string();
        assert!(e.contains("'nope'"), "{e}");
        assert!(schema(&["a", "a"], &[]).read(body(10).as_bytes()).is_err());
        assert!(schema(&[], &[]).read(body(10).as_bytes()).is_err());
        assert!(schema(&["a", "b"], &["c"]).read(body(4).as_bytes()).is_err());
    }

    #[test]
    fn rank_deficiency_names_the_column() {
        let s = schema(&["a", "b"], &[]);
        let e = s.explain(Error::RankDeficient { column: 2 }).to_string();
        assert!(e.contains("'b'"), "{e}");
        assert_eq!(s.explain(Error::RankDeficient { column: 2 }).exit_code(), 1);
    }

    #[test]
    fn round_trip() {
        let d = schema(&["a", "b"], &["c"]).read(body(12).as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_dataset(&d, &mut buf).unwrap();
        let back = default_schema(Path::new("x.csv"), 2, 1).read(buf.as_slice()).unwrap();
        assert_eq!(back, d);
    }
}
