//! File formats: plants as JSON, signals as CSV, data banks as a directory.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::constrained::InputBox;
use crate::error::{Error, Result};
use crate::hankel::DataBank;
use crate::signal::Signal;
use crate::system::StateSpaceSystem;

/// `{"A": [[...]], "B": [[...]], "C": [[...]], "D": [[...]]}`, row-major.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SystemFile {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    pub d: Vec<Vec<f64>>,
}

fn matrix_from_rows(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse(format!("matrix {name} has ragged rows")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl SystemFile {
    pub fn to_system(&self) -> Result<StateSpaceSystem<f64>> {
        StateSpaceSystem::new(
            matrix_from_rows("A", &self.a)?,
            matrix_from_rows("B", &self.b)?,
            matrix_from_rows("C", &self.c)?,
            matrix_from_rows("D", &self.d)?,
        )
    }

    pub fn from_system(sys: &StateSpaceSystem<f64>) -> Self {
        SystemFile {
            a: matrix_to_rows(sys.a()),
            b: matrix_to_rows(sys.b()),
            c: matrix_to_rows(sys.c()),
            d: matrix_to_rows(sys.d()),
        }
    }
}

pub fn parse_system(json: &str) -> Result<StateSpaceSystem<f64>> {
    serde_json::from_str::<SystemFile>(json)?.to_system()
}

pub fn read_system(path: impl AsRef<Path>) -> Result<StateSpaceSystem<f64>> {
    parse_system(&fs::read_to_string(path)?)
}

pub fn write_system(path: impl AsRef<Path>, sys: &StateSpaceSystem<f64>) -> Result<()> {
    let json = serde_json::to_string_pretty(&SystemFile::from_system(sys))?;
    fs::write(path, json + "\n")?;
    Ok(())
}

/// Parses `k, v_1, …, v_q` rows. A leading header row (first field not an
/// integer) is skipped; time indices must be consecutive.
pub fn parse_signal(text: &str) -> Result<Signal<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut start = None;
    let mut dim = None;
    let mut values = Vec::new();
    let mut count = 0usize;
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let first = record.get(0).unwrap_or("");
        let Ok(k) = first.parse::<i64>() else {
            if line == 0 {
                continue;
            }
            return Err(Error::Parse(format!(
                "row {line}: bad time index {first:?}"
            )));
        };
        let q = record.len() - 1;
        match dim {
            None => dim = Some(q),
            Some(d) if d != q => {
                return Err(Error::Parse(format!(
                    "row {line}: {q} components, expected {d}"
                )));
            }
            _ => {}
        }
        let s = *start.get_or_insert(k);
        if k != s + count as i64 {
            return Err(Error::Parse(format!(
                "row {line}: time index {k} is not consecutive"
            )));
        }
        for field in record.iter().skip(1) {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Parse(format!("row {line}: bad value {field:?}")))?;
            values.push(v);
        }
        count += 1;
    }
    let (Some(start), Some(dim)) = (start, dim) else {
        return Err(Error::Parse("signal file holds no samples".into()));
    };
    if dim == 0 {
        return Err(Error::Parse("signal rows carry no components".into()));
    }
    Ok(Signal::new(
        start,
        DMatrix::from_column_slice(dim, count, &values),
    ))
}

pub fn read_signal(path: impl AsRef<Path>) -> Result<Signal<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    parse_signal(&text)
}

/// Renders a signal with header `k,<prefix>0,<prefix>1,…`.
pub fn format_signal(signal: &Signal<f64>, prefix: &str) -> Result<String> {
    let names: Vec<String> = (0..signal.dim()).map(|i| format!("{prefix}{i}")).collect();
    format_signal_columns(signal, &names)
}

/// Renders a signal with header `k` followed by one name per channel.
pub fn format_signal_columns(signal: &Signal<f64>, names: &[String]) -> Result<String> {
    if names.len() != signal.dim() {
        return Err(Error::invalid(format!(
            "{} column names for a {}-channel signal",
            names.len(),
            signal.dim()
        )));
    }
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["k".to_string()];
    header.extend(names.iter().cloned());
    writer.write_record(&header)?;
    for (k, v) in signal.iter() {
        let mut row = vec![k.to_string()];
        row.extend(v.iter().map(|x| x.to_string()));
        writer.write_record(&row)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

pub fn write_signal(path: impl AsRef<Path>, signal: &Signal<f64>, prefix: &str) -> Result<()> {
    fs::write(path, format_signal(signal, prefix)?)?;
    Ok(())
}

/// Side-car `params.json` of a persisted bank.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BankParamsFile {
    #[serde(rename = "T_p")]
    pub t_p: usize,
    #[serde(rename = "T_f")]
    pub t_f: usize,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pe_order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pe_satisfied: Option<bool>,
}

/// Writes `u_d.csv`, `y_d.csv` and `params.json` into `dir`.
pub fn write_bank(dir: impl AsRef<Path>, bank: &DataBank<f64>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_signal(dir.join("u_d.csv"), &bank.u_d, "u")?;
    write_signal(dir.join("y_d.csv"), &bank.y_d, "y")?;
    let bp = bank.params;
    let params = BankParamsFile {
        t_p: bp.t_p,
        t_f: bp.t_f,
        l: bp.l,
        t: bp.t,
        n: bank.state_dim,
        pe_order: bank.pe.map(|c| c.order),
        pe_satisfied: bank.pe.map(|c| c.satisfied),
    };
    fs::write(
        dir.join("params.json"),
        serde_json::to_string_pretty(&params)? + "\n",
    )?;
    Ok(())
}

/// Loads a bank directory and rebuilds the Hankel blocks.
pub fn read_bank(dir: impl AsRef<Path>) -> Result<DataBank<f64>> {
    let dir = dir.as_ref();
    let params: BankParamsFile =
        serde_json::from_str(&fs::read_to_string(dir.join("params.json"))?)?;
    let u_d = read_signal(dir.join("u_d.csv"))?;
    let y_d = read_signal(dir.join("y_d.csv"))?;
    if u_d.len() != params.t + params.l {
        return Err(Error::Parse(format!(
            "u_d.csv holds {} samples, params say T + L = {}",
            u_d.len(),
            params.t + params.l
        )));
    }
    DataBank::build(&u_d, &y_d, params.t_p, params.t_f, params.l, params.n)
}

/// `{"lower": [...], "upper": [...]}`; `null` entries are unbounded.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BoundsFile {
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
}

pub fn parse_bounds(json: &str) -> Result<InputBox<f64>> {
    let f: BoundsFile = serde_json::from_str(json)?;
    Ok(InputBox {
        lower: f.lower,
        upper: f.upper,
    })
}

pub fn read_bounds(path: impl AsRef<Path>) -> Result<InputBox<f64>> {
    parse_bounds(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn system_json_round_trip() {
        let json = r#"{"A": [[-0.3, 0], [0, -0.5]], "B": [[2, 1], [-1, 1]],
                       "C": [[1, 2], [1, 0]], "D": [[0, 0], [0, 0]]}"#;
        let sys = parse_system(json).unwrap();
        assert_eq!((sys.n(), sys.m(), sys.p()), (2, 2, 2));
        assert_eq!(sys.b()[(1, 0)], -1.0);
        let back = SystemFile::from_system(&sys);
        assert_eq!(back.to_system().unwrap(), sys);
    }

    #[test]
    fn ragged_or_inconsistent_systems_fail() {
        assert!(
            parse_system(r#"{"A": [[1, 0], [0]], "B": [[1],[1]], "C": [[1, 0]], "D": [[0]]}"#)
                .is_err()
        );
        assert!(parse_system(r#"{"A": [[1]], "B": [[1]], "C": [[1, 0]], "D": [[0]]}"#).is_err());
    }

    #[test]
    fn signal_csv_with_and_without_header() {
        let with = "k,u0,u1\n3,1,2\n4,0.5,-1e-3\n";
        let without = "3,1,2\n4,0.5,-0.001\n";
        let a = parse_signal(with).unwrap();
        let b = parse_signal(without).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.start(), 3);
        assert_eq!(a.at(4)[1], -0.001);
        let text = format_signal(&a, "u").unwrap();
        assert_eq!(text, "k,u0,u1\n3,1,2\n4,0.5,-0.001\n");
        assert_eq!(parse_signal(&text).unwrap(), a);
    }

    #[test]
    fn bad_signal_files() {
        assert!(parse_signal("0,1\n2,1\n").is_err());
        assert!(parse_signal("0,1\n1,1,2\n").is_err());
        assert!(parse_signal("k,u0\n").is_err());
        assert!(parse_signal("0,abc\n").is_err());
    }

    #[test]
    fn bounds_with_open_sides() {
        let b = parse_bounds(r#"{"lower": [-1, null], "upper": [1, null]}"#).unwrap();
        assert_eq!(b.lower, vec![Some(-1.0), None]);
        assert_eq!(b.upper, vec![Some(1.0), None]);
    }

    #[test]
    fn bank_and_system_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let sys = crate::fixtures::example1::<f64>();
        write_system(dir.path().join("plant.json"), &sys).unwrap();
        assert_eq!(read_system(dir.path().join("plant.json")).unwrap(), sys);

        let u_d = crate::hankel::generate_pe_input::<f64>(2, 31, 8, 5).unwrap();
        let (_, y_d) = sys.simulate(&nalgebra::DVector::zeros(2), &u_d).unwrap();
        let bank = DataBank::build(&u_d, &y_d, 2, 3, 1, Some(2)).unwrap();
        write_bank(dir.path().join("bank"), &bank).unwrap();
        let back = read_bank(dir.path().join("bank")).unwrap();
        assert_eq!(back.params, bank.params);
        assert_eq!(back.u_f, bank.u_f);
        assert_eq!(back.y_fl, bank.y_fl);
        assert_eq!(back.pe, bank.pe);
    }
}
