//! Capacity sweeps: rerun one scenario while varying a carrier's capacity.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::run;
use crate::error::{ScenarioError, TraceIoError, ValidationError};
use crate::ids::{CarrierId, UeId};
use crate::scenario::{table1_scenario, Scenario};
use crate::trace_io::fmt_num;

/// Where the swept scenario comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum BaseScenario {
    /// Scenario file, relative to the sweep file when loaded from disk.
    File(PathBuf),
    Inline(Scenario),
    Table1 { r1: f64, r2: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepValues {
    List(Vec<f64>),
    /// `start, start + step, ...` up to and including `stop`.
    Range { start: f64, stop: f64, step: f64 },
}

impl SweepValues {
    pub fn expand(&self) -> Vec<f64> {
        match *self {
            SweepValues::List(ref v) => v.clone(),
            SweepValues::Range { start, stop, step } => {
                if !(step > 0.0 && start.is_finite() && stop.is_finite()) {
                    return Vec::new();
                }
                let count = ((stop - start) / step + 1e-9).floor();
                if count < 0.0 {
                    return Vec::new();
                }
                (0..=count as u64).map(|i| start + i as f64 * step).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub base: BaseScenario,
    pub carrier: CarrierId,
    pub values: SweepValues,
    /// Directory receiving `sweep.csv`.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl SweepSpec {
    /// Loads a spec and resolves relative paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<SweepSpec, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut spec: SweepSpec = serde_json::from_str(&text)?;
        let dir = path.parent().unwrap_or(Path::new(""));
        if let BaseScenario::File(ref mut f) = spec.base {
            if f.is_relative() {
                *f = dir.join(&*f);
            }
        }
        if let Some(ref mut out) = spec.output {
            if out.is_relative() {
                *out = dir.join(&*out);
            }
        }
        Ok(spec)
    }

    pub fn base_scenario(&self) -> Result<Scenario, ScenarioError> {
        let s = match &self.base {
            BaseScenario::File(path) => Scenario::load(path)?,
            BaseScenario::Inline(s) => s.clone(),
            BaseScenario::Table1 { r1, r2 } => table1_scenario(*r1, *r2),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self, base: &Scenario) -> Result<(), ValidationError> {
        let mut problems = Vec::new();
        let values = self.values.expand();
        if values.is_empty() {
            problems.push("sweep has no capacity values".to_string());
        }
        for v in &values {
            if !(v.is_finite() && *v > 0.0) {
                problems.push(format!("capacity value {v} must be finite and > 0"));
            }
        }
        if base.carrier(self.carrier).is_none() {
            problems.push(format!("swept carrier {} is not in the scenario", self.carrier));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ValidationError(problems))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub r_swept: f64,
    pub ue: UeId,
    /// One rate per carrier in ascending carrier order; zero if not covered.
    pub rates: Vec<f64>,
    pub total: f64,
    pub prices: Vec<f64>,
    pub iterations: u64,
    pub converged: bool,
    /// Set when the run at this capacity failed; numeric fields are then meaningless.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub carriers: Vec<CarrierId>,
    /// Ordered by (capacity value, UE id).
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn rows_at(&self, r_swept: f64) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.r_swept == r_swept)
    }

    pub fn row(&self, r_swept: f64, ue: UeId) -> Option<&SweepRow> {
        self.rows_at(r_swept).find(|r| r.ue == ue)
    }

    /// Distinct swept values in row order.
    pub fn values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.rows.iter().map(|r| r.r_swept).collect();
        v.dedup();
        v
    }

    /// Price of the carrier at position `idx` (ascending id) for each swept
    /// value, taken from the first row of that value.
    pub fn price_series(&self, idx: usize) -> Vec<(f64, f64)> {
        self.values()
            .into_iter()
            .filter_map(|v| self.rows_at(v).next().map(|r| (v, r.prices[idx])))
            .collect()
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["R_swept".to_string(), "ue_id".to_string()];
        h.extend(self.carriers.iter().map(|c| format!("r_carrier_{c}")));
        h.push("total".to_string());
        h.extend(self.carriers.iter().map(|c| format!("p_{c}")));
        h.push("iterations".to_string());
        h.push("converged".to_string());
        h
    }

    /// Failed rows keep their capacity and UE and leave numeric fields empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), TraceIoError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        for r in &self.rows {
            let mut rec = vec![fmt_num(r.r_swept), r.ue.to_string()];
            if r.error.is_some() {
                rec.extend(std::iter::repeat_n(String::new(), 2 * self.carriers.len() + 2));
                rec.push("failed".to_string());
            } else {
                rec.extend(r.rates.iter().map(|&x| fmt_num(x)));
                rec.push(fmt_num(r.total));
                rec.extend(r.prices.iter().map(|&x| fmt_num(x)));
                rec.push(r.iterations.to_string());
                rec.push(r.converged.to_string());
            }
            w.write_record(rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<PathBuf, TraceIoError> {
        std::fs::create_dir_all(&dir)?;
        let path = dir.as_ref().join("sweep.csv");
        self.write_csv(File::create(&path)?)?;
        Ok(path)
    }
}

/// Runs `base` once per value with the swept carrier's capacity replaced.
/// Points run in parallel; a failed point yields rows flagged with its error.
pub fn run_sweep_on(base: &Scenario, carrier: CarrierId, values: &[f64]) -> SweepTable {
    let carriers = base.carrier_ids();
    let mut order: Vec<f64> = values.to_vec();
    order.sort_by(f64::total_cmp);

    let blocks: Vec<Vec<SweepRow>> = order
        .par_iter()
        .map(|&value| {
            let mut s = base.clone();
            s.set_capacity(carrier, value);
            let mut users: Vec<UeId> = s.users.iter().map(|u| u.id).collect();
            users.sort_unstable();
            match run(&s) {
                Ok(trace) => users
                    .iter()
                    .map(|&ue| {
                        let rates: Vec<f64> = carriers.iter().map(|&c| trace.allocation.rate(ue, c)).collect();
                        SweepRow {
                            r_swept: value,
                            ue,
                            total: rates.iter().sum(),
                            rates,
                            prices: carriers.iter().map(|&c| trace.price(c).unwrap_or(0.0)).collect(),
                            iterations: trace.iterations_used,
                            converged: trace.converged,
                            error: None,
                        }
                    })
                    .collect(),
                Err(e) => users
                    .iter()
                    .map(|&ue| SweepRow {
                        r_swept: value,
                        ue,
                        rates: vec![0.0; carriers.len()],
                        total: 0.0,
                        prices: vec![0.0; carriers.len()],
                        iterations: 0,
                        converged: false,
                        error: Some(e.to_string()),
                    })
                    .collect(),
            }
        })
        .collect();

    SweepTable {
        carriers,
        rows: blocks.into_iter().flatten().collect(),
    }
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepTable, ScenarioError> {
    let base = spec.base_scenario()?;
    spec.validate(&base)?;
    Ok(run_sweep_on(&base, spec.carrier, &spec.values.expand()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table1_spec(values: SweepValues) -> SweepSpec {
        SweepSpec {
            base: BaseScenario::Table1 { r1: 100.0, r2: 70.0 },
            carrier: CarrierId(1),
            values,
            output: None,
        }
    }

    #[test]
    fn range_expansion() {
        let v = SweepValues::Range { start: 30.0, stop: 200.0, step: 10.0 }.expand();
        assert_eq!(v.len(), 18);
        assert_eq!(v[0], 30.0);
        assert_eq!(*v.last().unwrap(), 200.0);
        assert!(SweepValues::Range { start: 5.0, stop: 1.0, step: 1.0 }.expand().is_empty());
    }

    #[test]
    fn spec_parsing() {
        let spec: SweepSpec = serde_json::from_str(
            r#"{"base":{"table1":{"r1":100,"r2":70}},"carrier":1,
                "values":{"start":30,"stop":200,"step":10},"output":"out"}"#,
        )
        .unwrap();
        assert_eq!(spec.values.expand().len(), 18);
        let spec: SweepSpec =
            serde_json::from_str(r#"{"base":{"file":"s.json"},"carrier":2,"values":[10,20]}"#).unwrap();
        assert_eq!(spec.base, BaseScenario::File("s.json".into()));
        assert!(serde_json::from_str::<SweepSpec>(
            r#"{"base":{"file":"s.json"},"carrier":2,"values":[10],"extra":1}"#
        )
        .is_err());
    }

    #[test]
    fn invalid_specs() {
        let spec = table1_spec(SweepValues::List(vec![]));
        assert!(run_sweep(&spec).is_err());
        let spec = table1_spec(SweepValues::List(vec![10.0, -1.0]));
        assert!(run_sweep(&spec).is_err());
        let mut spec = table1_spec(SweepValues::List(vec![10.0]));
        spec.carrier = CarrierId(9);
        assert!(run_sweep(&spec).is_err());
    }

    #[test]
    fn rows_are_ordered_and_order_free() {
        let a = run_sweep(&table1_spec(SweepValues::List(vec![90.0, 50.0, 70.0]))).unwrap();
        let b = run_sweep(&table1_spec(SweepValues::List(vec![50.0, 70.0, 90.0]))).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 36);
        assert_eq!(a.values(), vec![50.0, 70.0, 90.0]);
        assert_eq!(a.rows[0].ue, UeId(1));
        assert_eq!(a.rows[11].ue, UeId(12));
        assert_eq!(a.rows[12].r_swept, 70.0);
        for r in &a.rows {
            assert!(r.rates.iter().chain(&r.prices).all(|x| x.is_finite()));
            assert!(r.ue.0 > 6 || r.rates[1] == 0.0);
        }
    }

    #[test]
    fn failed_point_is_flagged() {
        let mut base = table1_scenario(100.0, 70.0);
        base.settings.max_iterations = 50;
        let t = run_sweep_on(&base, CarrierId(1), &[-5.0, 60.0]);
        assert_eq!(t.rows.len(), 24);
        assert!(t.rows[..12].iter().all(|r| r.error.is_some()));
        assert!(t.rows[12..].iter().all(|r| r.error.is_none()));
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "R_swept,ue_id,r_carrier_1,r_carrier_2,total,p_1,p_2,iterations,converged"
        );
        assert_eq!(lines.next().unwrap(), "-5,1,,,,,,,failed");
        assert_eq!(lines.count(), 23);
    }

    #[test]
    fn loading_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("base.json"), table1_scenario(50.0, 70.0).to_json_pretty()).unwrap();
        let spec_path = dir.path().join("sweep.json");
        std::fs::write(&spec_path, r#"{"base":{"file":"base.json"},"carrier":2,"values":[70],"output":"out"}"#)
            .unwrap();
        let spec = SweepSpec::load(&spec_path).unwrap();
        assert_eq!(spec.output.as_deref(), Some(dir.path().join("out").as_path()));
        let table = run_sweep(&spec).unwrap();
        let path = table.write_to(spec.output.as_ref().unwrap()).unwrap();
        assert!(path.exists());
    }
}
