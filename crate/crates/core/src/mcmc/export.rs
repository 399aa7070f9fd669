//! Chain files: one row per iteration with columns
//! `iter, sigma2, gamma, rho, k, A, beta, accepted1, accepted3`.
//! `A` holds one-based indices joined by `;`, `beta` all `d` coefficients
//! joined by `;`. Floats are written in shortest round-trip form.

use std::io::{Read, Write};
use std::path::Path;

use crate::covariance::ActiveSet;
use crate::error::{Error, Result};

use super::{Chain, Sample};

const HEADER: [&str; 9] = ["iter", "sigma2", "gamma", "rho", "k", "A", "beta", "accepted1", "accepted3"];

fn join<T: ToString>(v: impl Iterator<Item = T>) -> String {
    v.map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

pub fn write_chain_csv<W: Write>(chain: &Chain, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for (i, s) in chain.samples.iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            s.sigma2.to_string(),
            s.gamma.to_string(),
            s.rho.to_string(),
            s.active.len().to_string(),
            join(s.active.indices().iter().map(|a| a + 1)),
            join(s.beta.iter()),
            u8::from(s.accepted_selection).to_string(),
            u8::from(s.accepted_hmc).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a chain written by [`write_chain_csv`]; `label` names the source in
/// error messages. The returned chain has `burn_in = 0`.
pub fn read_chain_csv<R: Read>(input: R, label: &str) -> Result<Chain> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != HEADER {
        return Err(Error::Ingest {
            path: label.to_string(),
            row: 0,
            column: "header".into(),
            message: format!("expected columns {}", HEADER.join(",")),
        });
    }
    let mut samples: Vec<Sample> = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let row = row + 1;
        let rec = rec?;
        let err = |column: &str, message: String| Error::Ingest {
            path: label.to_string(),
            row,
            column: column.to_string(),
            message,
        };
        let float = |c: usize| -> Result<f64> {
            rec[c]
                .trim()
                .parse::<f64>()
                .map_err(|e| err(HEADER[c], format!("'{}': {e}", &rec[c])))
        };
        let flag = |c: usize| -> Result<bool> {
            match rec[c].trim() {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(err(HEADER[c], format!("expected 0 or 1, got '{other}'"))),
            }
        };
        let beta = rec[6]
            .split(';')
            .map(|v| v.trim().parse::<f64>().map_err(|e| err("beta", format!("'{v}': {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let d = beta.len();
        let indices = rec[5]
            .split(';')
            .map(|v| match v.trim().parse::<usize>() {
                Ok(i) if i >= 1 => Ok(i - 1),
                _ => Err(err("A", format!("'{v}' is not a one-based index"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let active = ActiveSet::new(indices, d).map_err(|e| err("A", e.to_string()))?;
        let k: usize = rec[4].trim().parse().map_err(|e| err("k", format!("{e}")))?;
        if k != active.len() {
            return Err(err("k", format!("k = {k} but A has {} entries", active.len())));
        }
        if let Some(first) = samples.first() {
            if first.beta.len() != d {
                return Err(err("beta", format!("expected {} coefficients, got {d}", first.beta.len())));
            }
        }
        samples.push(Sample {
            beta,
            sigma2: float(1)?,
            gamma: float(2)?,
            rho: float(3)?,
            active,
            accepted_selection: flag(7)?,
            accepted_hmc: flag(8)?,
        });
    }
    Ok(Chain { samples, burn_in: 0 })
}

/// Reads a chain file from disk.
pub fn read_chain_file(path: &Path) -> Result<Chain> {
    let file = std::fs::File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.display().to_string()),
        _ => Error::Io(e),
    })?;
    read_chain_csv(file, &path.display().to_string())
}
