//! Truncated functional observations: data model, CSV ingestion and validation.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Side of the recording interval a value was clipped to, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flag {
    Below,
    None,
    Above,
}

impl Flag {
    pub fn is_truncated(self) -> bool {
        self != Flag::None
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Flag::Below => "below",
            Flag::None => "none",
            Flag::Above => "above",
        }
    }

    fn parse(s: &str) -> Option<Flag> {
        match s.trim().to_ascii_lowercase().as_str() {
            "below" => Some(Flag::Below),
            "none" => Some(Flag::None),
            "above" => Some(Flag::Above),
            _ => None,
        }
    }
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub a: f64,
    pub b: f64,
}

impl Bounds {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::domain(format!("invalid bounds ({a}, {b}): need finite a < b")));
        }
        Ok(Bounds { a, b })
    }

    pub fn width(&self) -> f64 {
        self.b - self.a
    }

    /// Clamps `value` into `[a, b]`; boundary values count as truncated.
    pub fn truncate(&self, value: f64) -> (f64, Flag) {
        if value <= self.a {
            (self.a, Flag::Below)
        } else if value >= self.b {
            (self.b, Flag::Above)
        } else {
            (value, Flag::None)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationPoint {
    pub time: f64,
    pub value: f64,
    pub flag: Flag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub unit_id: String,
    pub points: Vec<ObservationPoint>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.time).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    pub fn untruncated(&self) -> impl Iterator<Item = &ObservationPoint> {
        self.points.iter().filter(|p| p.flag == Flag::None)
    }
}

/// Clamps each value to the bounds and sets flags accordingly.
pub fn apply_truncation(latent: &Trajectory, bounds: Bounds) -> Trajectory {
    let points = latent
        .points
        .iter()
        .map(|p| {
            let (value, flag) = bounds.truncate(p.value);
            ObservationPoint {
                time: p.time,
                value,
                flag,
            }
        })
        .collect();
    Trajectory {
        unit_id: latent.unit_id.clone(),
        points,
    }
}

/// Baseline covariates, one row per trajectory in dataset order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Covariates {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalDataset {
    pub trajectories: Vec<Trajectory>,
    pub bounds: Bounds,
    pub covariates: Option<Covariates>,
    pub outcomes: Option<Vec<f64>>,
}

impl FunctionalDataset {
    pub fn new(trajectories: Vec<Trajectory>, bounds: Bounds) -> Self {
        FunctionalDataset {
            trajectories,
            bounds,
            covariates: None,
            outcomes: None,
        }
    }

    pub fn n(&self) -> usize {
        self.trajectories.len()
    }

    pub fn total_points(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }

    pub fn truncated_fraction(&self) -> f64 {
        let total = self.total_points();
        if total == 0 {
            return 0.0;
        }
        let trunc = self
            .trajectories
            .iter()
            .flat_map(|t| &t.points)
            .filter(|p| p.flag.is_truncated())
            .count();
        trunc as f64 / total as f64
    }

    pub fn has_truncation(&self) -> bool {
        self.trajectories
            .iter()
            .flat_map(|t| &t.points)
            .any(|p| p.flag.is_truncated())
    }

    pub fn unit_index(&self, unit_id: &str) -> Option<usize> {
        self.trajectories.iter().position(|t| t.unit_id == unit_id)
    }

    /// Sorted distinct observation times across all units.
    pub fn distinct_times(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self
            .trajectories
            .iter()
            .flat_map(|tr| tr.points.iter().map(|p| p.time))
            .collect();
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }

    /// Same values with every flag set to `None`: the data as seen by a
    /// method that ignores truncation. The result generally fails `validate`.
    pub fn ignoring_truncation(&self) -> FunctionalDataset {
        let mut out = self.clone();
        for tr in &mut out.trajectories {
            for p in &mut tr.points {
                p.flag = Flag::None;
            }
        }
        out
    }

    pub fn subset(&self, idx: &[usize]) -> FunctionalDataset {
        FunctionalDataset {
            trajectories: idx.iter().map(|&i| self.trajectories[i].clone()).collect(),
            bounds: self.bounds,
            covariates: self.covariates.as_ref().map(|c| Covariates {
                names: c.names.clone(),
                rows: idx.iter().map(|&i| c.rows[i].clone()).collect(),
            }),
            outcomes: self.outcomes.as_ref().map(|y| idx.iter().map(|&i| y[i]).collect()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlagMode {
    Explicit,
    Infer,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadOptions {
    /// Min-max rescale all observation times (jointly over units) onto [0, 1].
    pub rescale_time: bool,
}

pub fn load_csv(path: &Path, bounds: Bounds, mode: FlagMode, opts: LoadOptions) -> Result<FunctionalDataset> {
    let file = std::fs::File::open(path).map_err(|e| io_error(path, e))?;
    read_csv(file, bounds, mode, opts)
}

pub fn read_csv<R: Read>(reader: R, bounds: Bounds, mode: FlagMode, opts: LoadOptions) -> Result<FunctionalDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::Parse {
            line: 1,
            message: "empty file".into(),
        });
    }
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let missing = |name: &str| Error::Parse {
        line: 1,
        message: format!("missing column `{name}`"),
    };
    let c_unit = col("unit_id").ok_or_else(|| missing("unit_id"))?;
    let c_time = col("time").ok_or_else(|| missing("time"))?;
    let c_value = col("value").ok_or_else(|| missing("value"))?;
    let c_flag = col("flag");
    if mode == FlagMode::Explicit && c_flag.is_none() {
        return Err(missing("flag"));
    }

    let mut order: Vec<String> = Vec::new();
    let mut units: HashMap<String, Vec<(ObservationPoint, usize)>> = HashMap::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let field = |c: usize, name: &str| {
            rec.get(c).ok_or_else(|| Error::Parse {
                line,
                message: format!("missing field `{name}`"),
            })
        };
        let number = |c: usize, name: &str| -> Result<f64> {
            let s = field(c, name)?;
            let v: f64 = s.parse().map_err(|_| Error::Parse {
                line,
                message: format!("`{name}` is not a number: {s:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("`{name}` is not finite"),
                });
            }
            Ok(v)
        };
        let unit = field(c_unit, "unit_id")?.to_string();
        if unit.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty unit_id".into(),
            });
        }
        let time = number(c_time, "time")?;
        let raw = number(c_value, "value")?;
        let (value, flag) = match mode {
            FlagMode::Infer => bounds.truncate(raw),
            FlagMode::Explicit => {
                let s = field(c_flag.expect("checked above"), "flag")?;
                let flag = Flag::parse(s).ok_or_else(|| Error::Parse {
                    line,
                    message: format!("unknown flag {s:?} (expected below, none or above)"),
                })?;
                (raw, flag)
            }
        };
        if !opts.rescale_time && !(0.0..=1.0).contains(&time) {
            return Err(Error::domain(format!("line {line}: time {time} outside [0, 1]")));
        }
        let entry = units.entry(unit.clone()).or_insert_with(|| {
            order.push(unit);
            Vec::new()
        });
        entry.push((ObservationPoint { time, value, flag }, line));
    }
    if order.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no data rows".into(),
        });
    }

    if opts.rescale_time {
        let (lo, hi) = units
            .values()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (p, _)| {
                (lo.min(p.time), hi.max(p.time))
            });
        let span = hi - lo;
        for (p, _) in units.values_mut().flatten() {
            p.time = if span > 0.0 {
                ((p.time - lo) / span).clamp(0.0, 1.0)
            } else {
                0.0
            };
        }
    }

    let mut trajectories = Vec::with_capacity(order.len());
    for unit in order {
        let mut pts = units.remove(&unit).expect("unit recorded in order");
        pts.sort_by(|x, y| x.0.time.total_cmp(&y.0.time));
        for w in pts.windows(2) {
            if w[0].0.time == w[1].0.time {
                return Err(Error::Duplicate {
                    unit,
                    time: w[1].0.time,
                });
            }
        }
        trajectories.push(Trajectory {
            unit_id: unit,
            points: pts.into_iter().map(|(p, _)| p).collect(),
        });
    }
    Ok(FunctionalDataset::new(trajectories, bounds))
}

/// Writes the long-format CSV with an explicit flag column. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn write_csv<W: Write>(ds: &FunctionalDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| Error::Parse {
        line: 0,
        message: format!("csv write failed: {e}"),
    };
    w.write_record(["unit_id", "time", "value", "flag"]).map_err(err)?;
    for tr in &ds.trajectories {
        for p in &tr.points {
            w.write_record([
                tr.unit_id.as_str(),
                &p.time.to_string(),
                &p.value.to_string(),
                p.flag.as_str(),
            ])
            .map_err(err)?;
        }
    }
    w.flush().map_err(|e| Error::Io {
        path: "<csv writer>".into(),
        source: e,
    })
}

pub fn save_csv(ds: &FunctionalDataset, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_csv(ds, &mut buf)?;
    std::fs::write(path, buf).map_err(|e| io_error(path, e))
}

/// Attaches covariate columns and an optional response column from a CSV
/// keyed by `unit_id`. Every trajectory must have a row.
pub fn attach_covariates<R: Read>(
    ds: &mut FunctionalDataset,
    reader: R,
    covariate_names: &[String],
    response: Option<&str>,
) -> Result<()> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("covariate file has no column `{name}`"),
        })
    };
    let c_unit = col("unit_id")?;
    let c_cov: Vec<usize> = covariate_names.iter().map(|n| col(n)).collect::<Result<_>>()?;
    let c_resp = response.map(col).transpose()?;

    let mut rows: BTreeMap<String, (Vec<f64>, Option<f64>)> = BTreeMap::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let num = |c: usize| -> Result<f64> {
            let s = rec.get(c).unwrap_or("");
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    line,
                    message: format!("not a finite number: {s:?}"),
                })
        };
        let unit = rec.get(c_unit).unwrap_or("").to_string();
        let x = c_cov.iter().map(|&c| num(c)).collect::<Result<Vec<_>>>()?;
        let y = c_resp.map(num).transpose()?;
        if rows.insert(unit.clone(), (x, y)).is_some() {
            return Err(Error::Parse {
                line,
                message: format!("unit {unit} appears twice"),
            });
        }
    }

    let mut x_rows = Vec::with_capacity(ds.n());
    let mut y = Vec::with_capacity(ds.n());
    for tr in &ds.trajectories {
        let (x, resp) = rows
            .remove(&tr.unit_id)
            .ok_or_else(|| Error::Lookup(format!("{} (no covariate row)", tr.unit_id)))?;
        x_rows.push(x);
        if let Some(r) = resp {
            y.push(r);
        }
    }
    if !rows.is_empty() {
        warn!(
            "{} covariate rows have no matching trajectory and were ignored",
            rows.len()
        );
    }
    ds.covariates = Some(Covariates {
        names: covariate_names.to_vec(),
        rows: x_rows,
    });
    if response.is_some() {
        ds.outcomes = Some(y);
    }
    Ok(())
}

pub(crate) fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = (&str, &str)> {
        self.checks
            .iter()
            .flat_map(|c| c.failures.iter().map(move |f| (c.name.as_str(), f.as_str())))
    }
}

/// Checks every dataset invariant and reports all breaches.
pub fn validate(ds: &FunctionalDataset) -> ValidationReport {
    let Bounds { a, b } = ds.bounds;
    let mut checks = Vec::new();
    let mut push = |name: &str, failures: Vec<String>| {
        checks.push(Check {
            name: name.to_string(),
            passed: failures.is_empty(),
            failures,
        })
    };

    push(
        "bounds",
        if a.is_finite() && b.is_finite() && a < b {
            vec![]
        } else {
            vec![format!("invalid bounds ({a}, {b})")]
        },
    );

    let mut f = Vec::new();
    for tr in &ds.trajectories {
        if tr.points.is_empty() {
            f.push(format!("unit {} has no observations", tr.unit_id));
        }
        if tr.points.windows(2).any(|w| w[1].time <= w[0].time) {
            f.push(format!("unit {}: times not strictly increasing", tr.unit_id));
        }
    }
    push("trajectory_times", f);

    let mut f = Vec::new();
    for tr in &ds.trajectories {
        for p in &tr.points {
            if !(0.0..=1.0).contains(&p.time) {
                f.push(format!("unit {} time {}: outside [0, 1]", tr.unit_id, p.time));
            }
        }
    }
    push("time_domain", f);

    let mut f = Vec::new();
    for tr in &ds.trajectories {
        for p in &tr.points {
            let ok = match p.flag {
                Flag::Below => p.value == a,
                Flag::Above => p.value == b,
                Flag::None => a < p.value && p.value < b,
            };
            if !ok {
                f.push(format!(
                    "unit {} time {}: flag {} inconsistent with value {}",
                    tr.unit_id, p.time, p.flag, p.value
                ));
            }
        }
    }
    push("flag_value_consistency", f);

    let mut seen = std::collections::HashSet::new();
    let dup: Vec<String> = ds
        .trajectories
        .iter()
        .filter(|t| !seen.insert(t.unit_id.as_str()))
        .map(|t| format!("unit id {} repeated", t.unit_id))
        .collect();
    push("unique_units", dup);

    let mut f = Vec::new();
    if let Some(c) = &ds.covariates {
        if c.rows.len() != ds.n() {
            f.push(format!(
                "covariate matrix has {} rows for {} trajectories",
                c.rows.len(),
                ds.n()
            ));
        }
        if let Some(r) = c.rows.iter().position(|r| r.len() != c.names.len()) {
            f.push(format!("covariate row {r} has wrong width"));
        }
    }
    if let Some(y) = &ds.outcomes {
        if y.len() != ds.n() {
            f.push(format!(
                "outcome vector has {} entries for {} trajectories",
                y.len(),
                ds.n()
            ));
        }
    }
    push("covariate_alignment", f);

    ValidationReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bounds() -> Bounds {
        Bounds::new(-1.0, 1.0).unwrap()
    }

    fn traj(values: &[f64]) -> Trajectory {
        Trajectory {
            unit_id: "u".into(),
            points: values
                .iter()
                .enumerate()
                .map(|(j, &v)| ObservationPoint {
                    time: j as f64 / 10.0,
                    value: v,
                    flag: Flag::None,
                })
                .collect(),
        }
    }

    #[test]
    fn infer_mode_clamps_and_flags() {
        let csv = "unit_id,time,value\nu,0.0,-2\nu,0.5,0\nu,1.0,2\n";
        let ds = read_csv(csv.as_bytes(), bounds(), FlagMode::Infer, LoadOptions::default()).unwrap();
        let p = &ds.trajectories[0].points;
        assert_eq!(
            p.iter().map(|p| p.flag).collect::<Vec<_>>(),
            [Flag::Below, Flag::None, Flag::Above]
        );
        assert_eq!(p.iter().map(|p| p.value).collect::<Vec<_>>(), [-1.0, 0.0, 1.0]);
    }

    #[test]
    fn empty_file_is_parse_error() {
        let err = read_csv("".as_bytes(), bounds(), FlagMode::Infer, LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        let err = read_csv(
            "unit_id,time,value\n".as_bytes(),
            bounds(),
            FlagMode::Infer,
            LoadOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn malformed_row_reports_line() {
        let csv = "unit_id,time,value\nu,0.1,0\nu,abc,0\n";
        match read_csv(csv.as_bytes(), bounds(), FlagMode::Infer, LoadOptions::default()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn time_domain_and_duplicates() {
        let csv = "unit_id,time,value\nu,1.5,0\n";
        assert!(matches!(
            read_csv(csv.as_bytes(), bounds(), FlagMode::Infer, LoadOptions::default()),
            Err(Error::Domain(_))
        ));
        let csv = "unit_id,time,value\nu,0.5,0\nu,0.5,0.1\n";
        assert!(matches!(
            read_csv(csv.as_bytes(), bounds(), FlagMode::Infer, LoadOptions::default()),
            Err(Error::Duplicate { .. })
        ));
    }

    #[test]
    fn rescale_is_global() {
        let csv = "unit_id,time,value\nu,10,0\nu,20,0\nv,30,0\n";
        let ds = read_csv(
            csv.as_bytes(),
            bounds(),
            FlagMode::Infer,
            LoadOptions { rescale_time: true },
        )
        .unwrap();
        assert_eq!(ds.trajectories[0].times(), vec![0.0, 0.5]);
        assert_eq!(ds.trajectories[1].times(), vec![1.0]);
    }

    #[test]
    fn explicit_flags_pass_through() {
        let b = Bounds::new(40.0, 400.0).unwrap();
        let csv = "unit_id,time,value,flag\np1,0.2,400,above\np1,0.3,120,none\n";
        let ds = read_csv(csv.as_bytes(), b, FlagMode::Explicit, LoadOptions::default()).unwrap();
        assert_eq!(ds.trajectories[0].points[0].flag, Flag::Above);
        assert!(validate(&ds).all_passed());
    }

    #[test]
    fn truncation_definition_and_idempotence() {
        let t = apply_truncation(&traj(&[-5.0, 0.2, 7.0, -1.0]), bounds());
        assert_eq!(t.values(), vec![-1.0, 0.2, 1.0, -1.0]);
        assert_eq!(
            t.points.iter().map(|p| p.flag).collect::<Vec<_>>(),
            [Flag::Below, Flag::None, Flag::Above, Flag::Below]
        );
        assert_eq!(apply_truncation(&t, bounds()), t);
        let inside = traj(&[0.1, -0.3]);
        assert_eq!(apply_truncation(&inside, bounds()), inside);
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut tr = apply_truncation(&traj(&[-5.0, 0.1 + 0.2, 1.0 / 3.0, 7.0]), bounds());
        tr.points[1].time = 0.123_456_789_012_345_67;
        let ds = FunctionalDataset::new(vec![tr], bounds());
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), bounds(), FlagMode::Explicit, LoadOptions::default()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn validate_reports_breaches() {
        let mut ds = FunctionalDataset::new(vec![traj(&[0.0, 1.0])], bounds());
        let report = validate(&ds);
        assert!(!report.all_passed());
        let (name, msg) = report.failures().next().unwrap();
        assert_eq!(name, "flag_value_consistency");
        assert!(msg.contains("unit u") && msg.contains("0.1"));

        ds.trajectories[0].points[1].value = 0.5;
        ds.covariates = Some(Covariates {
            names: vec!["x1".into()],
            rows: vec![vec![1.0], vec![2.0]],
        });
        let report = validate(&ds);
        assert_eq!(
            report.failures().map(|f| f.0).collect::<Vec<_>>(),
            ["covariate_alignment"]
        );
    }

    #[test]
    fn covariates_join_by_unit() {
        let csv = "unit_id,time,value\na,0.1,0\nb,0.2,0\n";
        let mut ds = read_csv(csv.as_bytes(), bounds(), FlagMode::Infer, LoadOptions::default()).unwrap();
        let cov = "unit_id,age,y\nb,40,1\na,30,0\nc,1,1\n";
        attach_covariates(&mut ds, cov.as_bytes(), &["age".into()], Some("y")).unwrap();
        assert_eq!(ds.covariates.as_ref().unwrap().rows, vec![vec![30.0], vec![40.0]]);
        assert_eq!(ds.outcomes, Some(vec![0.0, 1.0]));
        let cov = "unit_id,age\na,30\n";
        assert!(matches!(
            attach_covariates(&mut ds, cov.as_bytes(), &["age".into()], None),
            Err(Error::Lookup(_))
        ));
    }
}
