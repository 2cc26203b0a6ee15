//! Streaming CSV ingestion and a synthetic positive-target generator.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::SaturationSpec;
use crate::numeric::dot;
use crate::rng::{SeededRng, NOISE_STREAM};
use crate::types::Regressor;

/// Which CSV columns form the regressor and the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub features: Vec<String>,
    pub target: String,
    /// Prepend a constant 1 to every regressor.
    #[serde(default)]
    pub intercept: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `(phi, y)` pairs in file order.
    pub rows: Vec<(Regressor, f64)>,
    /// 1-based file line of each kept row.
    pub lines: Vec<usize>,
    /// Lines skipped in lenient mode.
    pub skipped: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.rows.iter().map(|(_, y)| *y).collect()
    }
}

pub fn ingest_csv(path: &Path, map: &ColumnMap, strict: bool) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(std::io::BufReader::new(file), map, strict)
}

/// Read `(phi, y)` pairs. Strict mode fails on the first malformed row;
/// lenient mode skips it and records its line.
pub fn ingest_reader<R: Read>(input: R, map: &ColumnMap, strict: bool) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Data {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Err(Error::Data {
            line: 1,
            message: "empty file: no header row".into(),
        });
    }
    let index_of = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Data {
                line: 1,
                message: format!("missing column `{name}`"),
            })
    };
    let feature_idx = map
        .features
        .iter()
        .map(|f| index_of(f))
        .collect::<Result<Vec<_>>>()?;
    let target_idx = index_of(&map.target)?;

    let mut out = Dataset {
        rows: Vec::new(),
        lines: Vec::new(),
        skipped: Vec::new(),
    };
    for rec in rdr.records() {
        let parsed = rec
            .map_err(|e| Error::Data {
                line: e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            })
            .and_then(|rec| {
                let line = rec.position().map_or(0, |p| p.line() as usize);
                let cell = |j: usize, name: &str| -> Result<f64> {
                    let raw = rec.get(j).ok_or_else(|| Error::Data {
                        line,
                        message: format!("column `{name}` is missing"),
                    })?;
                    match raw.trim().parse::<f64>() {
                        Ok(v) if v.is_finite() => Ok(v),
                        _ => Err(Error::Data {
                            line,
                            message: format!("column `{name}`: non-numeric value {raw:?}"),
                        }),
                    }
                };
                let mut phi = Vec::with_capacity(feature_idx.len() + 1);
                if map.intercept {
                    phi.push(1.0);
                }
                for (j, name) in feature_idx.iter().zip(&map.features) {
                    phi.push(cell(*j, name)?);
                }
                let y = cell(target_idx, &map.target)?;
                Ok((line, Regressor::new(phi)?, y))
            });
        match parsed {
            Ok((line, phi, y)) => {
                out.rows.push((phi, y));
                out.lines.push(line);
            }
            Err(e) if strict => return Err(e),
            Err(e) => {
                let line = match e {
                    Error::Data { line, .. } => line,
                    _ => 0,
                };
                log::debug!("skipping malformed row: {e}");
                out.skipped.push(line);
            }
        }
    }
    if out.rows.is_empty() {
        return Err(Error::Data {
            line: 2,
            message: "no data rows".into(),
        });
    }
    if !out.skipped.is_empty() {
        log::warn!("skipped {} malformed rows", out.skipped.len());
    }
    Ok(out)
}

/// Censored linear generator with strictly positive targets:
/// `y = clamp(theta*^T [1, x] + s e, L, U)`, `x ~ U(0, 1)^d`, `L > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub rows: usize,
    /// Intercept first, then one weight per feature.
    pub theta_star: Vec<f64>,
    pub saturation: SaturationSpec,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            rows: 10_000,
            theta_star: vec![4.0, 12.0, 8.0, 10.0],
            saturation: SaturationSpec {
                lower: 1.0,
                upper: 60.0,
                noise_std: 5.0,
            },
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn feature_names(&self) -> Vec<String> {
        (1..self.theta_star.len())
            .map(|j| format!("x{j}"))
            .collect()
    }

    /// Column map matching the generated file.
    pub fn column_map(&self) -> ColumnMap {
        ColumnMap {
            features: self.feature_names(),
            target: "y".into(),
            intercept: true,
        }
    }

    /// `(features, y)` rows, features without the intercept.
    pub fn generate(&self) -> Result<Vec<(Vec<f64>, f64)>> {
        self.saturation.validate()?;
        if !(self.saturation.lower > 0.0) {
            return Err(Error::config(
                "saturation.lower",
                "must be positive for positive targets",
            ));
        }
        if self.theta_star.len() < 2 {
            return Err(Error::config(
                "theta_star",
                "needs an intercept and at least one weight",
            ));
        }
        let d = self.theta_star.len() - 1;
        let mut xs = SeededRng::new(self.seed);
        let mut noise = SeededRng::substream(self.seed, NOISE_STREAM);
        let rows = (0..self.rows)
            .map(|_| {
                let x: Vec<f64> = (0..d).map(|_| xs.uniform()).collect();
                let index = self.theta_star[0] + dot(&self.theta_star[1..], &x);
                let s = &self.saturation;
                (x, s.censor(index + s.noise_std * noise.standard_normal()))
            })
            .collect();
        Ok(rows)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Parse {
            what: "synthetic csv".into(),
            message: e.to_string(),
        };
        let mut header = self.feature_names();
        header.push("y".into());
        w.write_record(&header).map_err(csv_err)?;
        for (x, y) in self.generate()? {
            let mut rec: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            rec.push(y.to_string());
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io("synthetic csv", e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map2() -> ColumnMap {
        ColumnMap {
            features: vec!["a".into(), "b".into()],
            target: "y".into(),
            intercept: false,
        }
    }

    #[test]
    fn three_rows_in_order() {
        let text = "a,b,y\n1,2,3\n4,5,6\n7,8,9\n";
        let d = ingest_reader(text.as_bytes(), &map2(), true).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.rows[0].0.as_slice(), &[1.0, 2.0]);
        assert_eq!(d.targets(), vec![3.0, 6.0, 9.0]);
        assert_eq!(d.lines, vec![2, 3, 4]);
    }

    #[test]
    fn lenient_skips_and_strict_names_line() {
        let text = "a,b,y\n1,2,3\n4,oops,6\n7,8,9\n";
        let d = ingest_reader(text.as_bytes(), &map2(), false).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.skipped, vec![3]);
        let err = ingest_reader(text.as_bytes(), &map2(), true).unwrap_err();
        assert!(matches!(err, Error::Data { line: 3, .. }), "{err}");
        assert!(err.to_string().contains("`b`"));
    }

    #[test]
    fn short_row_is_malformed() {
        let text = "a,b,y\n1,2\n4,5,6\n";
        let d = ingest_reader(text.as_bytes(), &map2(), false).unwrap();
        assert_eq!((d.len(), d.skipped.len()), (1, 1));
    }

    #[test]
    fn missing_column_and_empty_file() {
        let err = ingest_reader("a,y\n1,2\n".as_bytes(), &map2(), false).unwrap_err();
        assert!(err.to_string().contains("missing column `b`"), "{err}");
        assert!(ingest_reader("".as_bytes(), &map2(), true).is_err());
        assert!(ingest_reader("a,b,y\n".as_bytes(), &map2(), true).is_err());
    }

    #[test]
    fn intercept_is_prepended() {
        let mut m = map2();
        m.intercept = true;
        let d = ingest_reader("y,b,a\n3,2,1\n".as_bytes(), &m, true).unwrap();
        assert_eq!(d.rows[0].0.as_slice(), &[1.0, 1.0, 2.0]);
    }

    #[test]
    fn synthetic_round_trip_positive() {
        let spec = SyntheticSpec {
            rows: 50,
            ..Default::default()
        };
        let mut buf = Vec::new();
        spec.write_csv(&mut buf).unwrap();
        let d = ingest_reader(buf.as_slice(), &spec.column_map(), true).unwrap();
        let direct = spec.generate().unwrap();
        assert_eq!(d.len(), 50);
        for ((phi, y), (x, y0)) in d.rows.iter().zip(&direct) {
            assert_eq!(*y, *y0);
            assert_eq!(&phi.as_slice()[1..], x.as_slice());
            assert!(*y >= 1.0);
        }
    }
}
