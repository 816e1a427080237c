use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean marginal contribution `φ̂_i^k` of one point over one layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerEstimate {
    pub point: usize,
    pub layer: usize,
    pub mean_contribution: f64,
    pub samples_used: u64,
    pub contribution_variance: f64,
    /// Uncapped sample size from the bound, when one applies.
    #[serde(default)]
    pub theoretical_samples: Option<u64>,
    /// Orders per marginal in expected-utility mode.
    #[serde(default)]
    pub permutations: Option<u64>,
    #[serde(default)]
    pub trainings: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    #[serde(rename = "mc")]
    MonteCarlo,
    Stratified,
    Delta,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::MonteCarlo => "mc",
            Method::Stratified => "stratified",
            Method::Delta => "delta",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Method::Exact),
            "mc" => Ok(Method::MonteCarlo),
            "stratified" => Ok(Method::Stratified),
            "delta" => Ok(Method::Delta),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub iteration: u64,
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValuationResult {
    pub method: Method,
    pub seed: u64,
    #[serde(default)]
    pub dataset_hash: Option<String>,
    pub n_players: usize,
    pub points: Vec<usize>,
    pub values: Vec<f64>,
    #[serde(default)]
    pub layers: Vec<LayerEstimate>,
    pub trainings_performed: u64,
    #[serde(default)]
    pub cache_hits: u64,
    pub wall_time_s: f64,
    #[serde(default)]
    pub iterations: Option<u64>,
    #[serde(default)]
    pub converged: Option<bool>,
    #[serde(default)]
    pub band: Option<(usize, usize)>,
    #[serde(default)]
    pub convergence_trace: Vec<ConvergencePoint>,
}

impl ValuationResult {
    pub fn new(method: Method, seed: u64, n_players: usize, points: Vec<usize>, values: Vec<f64>) -> Self {
        Self {
            method,
            seed,
            dataset_hash: None,
            n_players,
            points,
            values,
            layers: Vec::new(),
            trainings_performed: 0,
            cache_hits: 0,
            wall_time_s: 0.0,
            iterations: None,
            converged: None,
            band: None,
            convergence_trace: Vec::new(),
        }
    }

    pub fn with_dataset_hash(mut self, hash: impl Into<String>) -> Self {
        self.dataset_hash = Some(hash.into());
        self
    }

    pub fn value_of(&self, point: usize) -> Option<f64> {
        self.points.iter().position(|&p| p == point).map(|j| self.values[j])
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.len() != self.values.len() {
            return Err(Error::Config(format!(
                "result lists {} points but {} values",
                self.points.len(),
                self.values.len()
            )));
        }
        if let Some(&p) = self.points.iter().find(|&&p| p >= self.n_players) {
            return Err(Error::IndexOutOfRange {
                index: p,
                n: self.n_players,
            });
        }
        let mut seen = self.points.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("result lists a point twice".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_slice(bytes: &[u8]) -> Result<Self> {
        let r: Self = serde_json::from_slice(bytes)?;
        r.validate()?;
        Ok(r)
    }

    /// `point_id,value,method,seed,dataset_hash`, values with 17 significant
    /// digits.
    pub fn write_values_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["point_id", "value", "method", "seed", "dataset_hash"])?;
        let hash = self.dataset_hash.as_deref().unwrap_or("");
        for (p, v) in self.points.iter().zip(&self.values) {
            w.write_record([
                p.to_string(),
                format!("{v:.16e}"),
                self.method.as_str().to_string(),
                self.seed.to_string(),
                hash.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One row of a values file.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueRow {
    pub point: usize,
    pub value: f64,
    pub method: String,
    pub seed: u64,
    pub dataset_hash: String,
}

/// Reads a file written by [`ValuationResult::write_values_csv`].
pub fn read_values_csv<R: Read>(reader: R) -> Result<Vec<ValueRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            row: 1,
            column: name.to_string(),
            message: "missing column".into(),
        })
    };
    let (ip, iv, im, is, ih) = (col("point_id")?, col("value")?, col("method")?, col("seed")?, col("dataset_hash")?);
    let mut rows = Vec::new();
    for (j, record) in r.records().enumerate() {
        let record = record?;
        let row = j + 2;
        let field = |idx: usize, name: &str| {
            record.get(idx).ok_or_else(|| Error::Parse {
                row,
                column: name.to_string(),
                message: "missing field".into(),
            })
        };
        let parse_err = |name: &str, e: &dyn std::fmt::Display| Error::Parse {
            row,
            column: name.to_string(),
            message: e.to_string(),
        };
        let point = field(ip, "point_id")?.trim().parse::<usize>().map_err(|e| parse_err("point_id", &e))?;
        let value = field(iv, "value")?.trim().parse::<f64>().map_err(|e| parse_err("value", &e))?;
        if !value.is_finite() {
            return Err(parse_err("value", &"non-finite value"));
        }
        let seed = field(is, "seed")?.trim().parse::<u64>().map_err(|e| parse_err("seed", &e))?;
        rows.push(ValueRow {
            point,
            value,
            method: field(im, "method")?.to_string(),
            seed,
            dataset_hash: field(ih, "dataset_hash")?.to_string(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ValuationResult {
        let mut r = ValuationResult::new(Method::Delta, 7, 3, vec![0, 2], vec![0.1, -1.0 / 3.0]).with_dataset_hash("abc");
        r.band = Some((1, 2));
        r.trainings_performed = 12;
        r
    }

    #[test]
    fn json_round_trip() {
        let r = sample();
        let back = ValuationResult::from_json_slice(r.to_json().unwrap().as_bytes()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let r = sample();
        let mut buf = Vec::new();
        r.write_values_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("point_id,value,method,seed,dataset_hash\n"));
        let rows = read_values_csv(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].value.to_bits(), (-1.0f64 / 3.0).to_bits());
        assert_eq!(rows[0].method, "delta");
        assert_eq!(rows[0].dataset_hash, "abc");
    }

    #[test]
    fn malformed_inputs() {
        assert!(read_values_csv("point_id,value,method,seed,dataset_hash\nx,1,mc,0,h\n".as_bytes()).is_err());
        assert!(read_values_csv("point_id,value\n1,2\n".as_bytes()).is_err());
        let mut r = sample();
        r.points = vec![5, 0];
        assert!(r.validate().is_err());
        r.points = vec![0, 0];
        assert!(r.validate().is_err());
        assert_eq!("mc".parse::<Method>().unwrap(), Method::MonteCarlo);
    }
}
