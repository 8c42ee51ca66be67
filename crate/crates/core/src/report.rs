//! Output files: per-iteration results, JSON summary, constraint
//! statistics, operation histograms and the Pareto front.
//!
//! All tables are comma-separated with a header row. Floats use the shortest
//! text that parses back to the same value; absent values are empty cells.

use std::fs::{self, File};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{IterationRecord, OpHistogram, RunConfig, SearchOutcome, SearchStats};
use crate::error::{MonasError, Result};
use crate::pareto::{front_of, ParetoFront, ParetoPoint};
use crate::reward::EvaluationResult;
use crate::space::{ActionSequence, Architecture, MacroOp};

pub const RESULTS_HEADER: [&str; 9] = [
    "iteration",
    "actions",
    "architecture",
    "accuracy",
    "energy",
    "peak_power",
    "mac_normalized",
    "reward",
    "grad_norm",
];
pub const FRONT_HEADER: [&str; 4] = ["energy", "accuracy", "iteration", "architecture"];
pub const STATS_HEADER: [&str; 4] = [
    "window",
    "first_iteration",
    "last_iteration",
    "satisfaction_rate",
];
pub const SAMPLES_HEADER: [&str; 7] = [
    "sample",
    "actions",
    "architecture",
    "accuracy",
    "energy",
    "peak_power",
    "mac_normalized",
];

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const STATS_FILE: &str = "stats.csv";
pub const FRONT_FILE: &str = "front.csv";
pub const OPS_FILE: &str = "ops.csv";
pub const LAYERS_FILE: &str = "layers.csv";
pub const SAMPLES_FILE: &str = "samples.csv";
pub const CHECKPOINT_FILE: &str = "controller.ckpt";

fn num(v: f64) -> String {
    v.to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

fn finish<W: Write>(w: csv::Writer<W>) -> Result<W> {
    w.into_inner().map_err(|e| MonasError::Io(e.into_error()))
}

/// One row of a results file.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub iteration: usize,
    pub actions: ActionSequence,
    pub arch: Architecture,
    pub eval: EvaluationResult,
    pub reward: f64,
    pub grad_norm: f64,
}

impl From<&IterationRecord> for ResultRow {
    fn from(r: &IterationRecord) -> Self {
        ResultRow {
            iteration: r.iteration,
            actions: ActionSequence::new(r.actions.actions.clone()),
            arch: r.arch.clone(),
            eval: r.eval,
            reward: r.reward,
            grad_norm: r.grad_norm,
        }
    }
}

impl ResultRow {
    pub fn point(&self) -> ParetoPoint {
        ParetoPoint {
            accuracy: self.eval.accuracy,
            energy: self.eval.energy_joules,
            arch: self.arch.clone(),
            iteration: self.iteration,
        }
    }
}

pub fn write_results<W: Write>(out: W, rows: &[ResultRow]) -> Result<W> {
    let mut w = writer(out);
    w.write_record(RESULTS_HEADER)?;
    for r in rows {
        w.write_record([
            r.iteration.to_string(),
            r.actions.to_compact(),
            r.arch.to_compact(),
            num(r.eval.accuracy),
            num(r.eval.energy_joules),
            opt(r.eval.peak_power_watts),
            opt(r.eval.mac_normalized),
            num(r.reward),
            num(r.grad_norm),
        ])?;
    }
    finish(w)
}

fn check_header(r: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let got = r.headers()?;
    if !got.iter().eq(expected.iter().copied()) {
        return Err(MonasError::Parse {
            line: 1,
            message: format!("expected header `{}`", expected.join(",")),
        });
    }
    Ok(())
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str) -> Result<T> {
    let line = rec.position().map_or(0, |p| p.line() as usize);
    let raw = rec.get(i).unwrap_or("");
    raw.parse().map_err(|_| MonasError::Parse {
        line,
        message: format!("invalid {name} `{raw}`"),
    })
}

fn opt_field<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    i: usize,
    name: &str,
) -> Result<Option<T>> {
    if rec.get(i).is_none_or(str::is_empty) {
        Ok(None)
    } else {
        field(rec, i, name).map(Some)
    }
}

fn arch_field(rec: &csv::StringRecord, i: usize) -> Result<Architecture> {
    let line = rec.position().map_or(0, |p| p.line() as usize);
    Architecture::parse_text(rec.get(i).unwrap_or("")).map_err(|e| MonasError::Parse {
        line,
        message: format!("architecture: {e}"),
    })
}

fn actions_field(rec: &csv::StringRecord, i: usize) -> Result<ActionSequence> {
    let line = rec.position().map_or(0, |p| p.line() as usize);
    ActionSequence::parse_compact(rec.get(i).unwrap_or("")).map_err(|e| MonasError::Parse {
        line,
        message: format!("actions: {e}"),
    })
}

fn eval_fields(rec: &csv::StringRecord, at: usize) -> Result<EvaluationResult> {
    let peak_power_watts = opt_field(rec, at + 2, "peak_power")?;
    let mac_normalized = opt_field(rec, at + 3, "mac_normalized")?;
    Ok(EvaluationResult {
        accuracy: field(rec, at, "accuracy")?,
        energy_joules: field(rec, at + 1, "energy")?,
        peak_power_watts,
        mac_total: None,
        mac_normalized,
    })
}

pub fn read_results<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut r = reader(input);
    check_header(&mut r, &RESULTS_HEADER)?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            Ok(ResultRow {
                iteration: field(&rec, 0, "iteration")?,
                actions: actions_field(&rec, 1)?,
                arch: arch_field(&rec, 2)?,
                eval: eval_fields(&rec, 3)?,
                reward: field(&rec, 7, "reward")?,
                grad_norm: field(&rec, 8, "grad_norm")?,
            })
        })
        .collect()
}

pub fn write_front<W: Write>(out: W, front: &ParetoFront) -> Result<W> {
    let mut w = writer(out);
    w.write_record(FRONT_HEADER)?;
    for p in front.points() {
        w.write_record([
            num(p.energy),
            num(p.accuracy),
            p.iteration.to_string(),
            p.arch.to_compact(),
        ])?;
    }
    finish(w)
}

pub fn read_front<R: Read>(input: R) -> Result<Vec<ParetoPoint>> {
    let mut r = reader(input);
    check_header(&mut r, &FRONT_HEADER)?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            Ok(ParetoPoint {
                energy: field(&rec, 0, "energy")?,
                accuracy: field(&rec, 1, "accuracy")?,
                iteration: field(&rec, 2, "iteration")?,
                arch: arch_field(&rec, 3)?,
            })
        })
        .collect()
}

/// Front of a results file.
pub fn results_front(rows: &[ResultRow]) -> ParetoFront {
    front_of(rows.iter().map(ResultRow::point))
}

/// One row per window, 1-based iteration bounds.
pub fn write_stats<W: Write>(out: W, stats: &SearchStats, iterations: usize) -> Result<W> {
    let mut w = writer(out);
    w.write_record(STATS_HEADER)?;
    for (k, rate) in stats.window_rates.iter().enumerate() {
        let first = k * stats.window + 1;
        let last = ((k + 1) * stats.window).min(iterations);
        w.write_record([
            (k + 1).to_string(),
            first.to_string(),
            last.to_string(),
            num(*rate),
        ])?;
    }
    finish(w)
}

pub fn read_stats<R: Read>(input: R) -> Result<Vec<(usize, usize, usize, f64)>> {
    let mut r = reader(input);
    check_header(&mut r, &STATS_HEADER)?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            Ok((
                field(&rec, 0, "window")?,
                field(&rec, 1, "first_iteration")?,
                field(&rec, 2, "last_iteration")?,
                field(&rec, 3, "satisfaction_rate")?,
            ))
        })
        .collect()
}

/// `op,count,fraction` for every operation.
pub fn write_ops<W: Write>(out: W, hist: &OpHistogram) -> Result<W> {
    let mut w = writer(out);
    w.write_record(["op", "count", "fraction"])?;
    for op in MacroOp::ALL {
        w.write_record([
            op.name().to_string(),
            hist.totals[op.index()].to_string(),
            num(hist.fraction(op)),
        ])?;
    }
    finish(w)
}

/// `layer` followed by one count column per operation.
pub fn write_layers<W: Write>(out: W, hist: &OpHistogram) -> Result<W> {
    let mut w = writer(out);
    let mut header = vec!["layer".to_string()];
    header.extend(MacroOp::ALL.iter().map(|op| op.name().to_string()));
    w.write_record(&header)?;
    for (l, counts) in hist.per_layer.iter().enumerate() {
        let mut row = vec![(l + 1).to_string()];
        row.extend(counts.iter().map(u64::to_string));
        w.write_record(&row)?;
    }
    finish(w)
}

pub fn read_layers<R: Read>(input: R) -> Result<Vec<[u64; 6]>> {
    let mut r = reader(input);
    let mut header = vec!["layer"];
    header.extend(MacroOp::ALL.iter().map(|op| op.name()));
    check_header(&mut r, &header)?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            let mut counts = [0u64; 6];
            for (k, c) in counts.iter_mut().enumerate() {
                *c = field(&rec, k + 1, MacroOp::ALL[k].name())?;
            }
            Ok(counts)
        })
        .collect()
}

pub fn write_samples<W: Write>(
    out: W,
    samples: &[(ActionSequence, Architecture, EvaluationResult)],
) -> Result<W> {
    let mut w = writer(out);
    w.write_record(SAMPLES_HEADER)?;
    for (k, (seq, arch, eval)) in samples.iter().enumerate() {
        w.write_record([
            (k + 1).to_string(),
            seq.to_compact(),
            arch.to_compact(),
            num(eval.accuracy),
            num(eval.energy_joules),
            opt(eval.peak_power_watts),
            opt(eval.mac_normalized),
        ])?;
    }
    finish(w)
}

pub fn read_samples<R: Read>(
    input: R,
) -> Result<Vec<(ActionSequence, Architecture, EvaluationResult)>> {
    let mut r = reader(input);
    check_header(&mut r, &SAMPLES_HEADER)?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            Ok((
                actions_field(&rec, 1)?,
                arch_field(&rec, 2)?,
                eval_fields(&rec, 3)?,
            ))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// `search` or `random`.
    pub mode: String,
    pub config: RunConfig,
    pub evaluator: String,
    pub iterations: usize,
    pub best: IterationRecord,
    pub front: ParetoFront,
    pub stats: SearchStats,
}

impl Summary {
    pub fn new(mode: &str, cfg: &RunConfig, evaluator: String, outcome: &SearchOutcome) -> Self {
        Summary {
            mode: mode.to_string(),
            config: cfg.clone(),
            evaluator,
            iterations: outcome.records.len(),
            best: outcome.best.clone(),
            front: outcome.front.clone(),
            stats: outcome.stats.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

/// Writes every output of a run into `dir`; returns the paths written.
pub fn write_run(dir: &Path, summary: &Summary, outcome: &SearchOutcome) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, bytes: Vec<u8>| -> Result<()> {
        let path = dir.join(name);
        write_file(&path, &bytes)?;
        written.push(path);
        Ok(())
    };
    let rows: Vec<ResultRow> = outcome.records.iter().map(ResultRow::from).collect();
    put(RESULTS_FILE, write_results(Vec::new(), &rows)?)?;
    put(SUMMARY_FILE, summary.to_json()?.into_bytes())?;
    put(
        STATS_FILE,
        write_stats(Vec::new(), &outcome.stats, outcome.records.len())?,
    )?;
    put(FRONT_FILE, write_front(Vec::new(), &outcome.front)?)?;
    if let Some(hist) = &outcome.stats.op_histogram {
        put(OPS_FILE, write_ops(Vec::new(), hist)?)?;
        put(LAYERS_FILE, write_layers(Vec::new(), hist)?)?;
    }
    if let Some(ctl) = &outcome.controller {
        let path = dir.join(CHECKPOINT_FILE);
        ctl.save(&path)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::CondenseNetArch;

    fn row(iteration: usize, accuracy: f64, energy: f64) -> ResultRow {
        ResultRow {
            iteration,
            actions: ActionSequence::new(vec![0, 1, 2, 3, 4, 0]),
            arch: Architecture::CondenseNet(CondenseNetArch {
                stages: [6, 8, 10],
                growths: [8, 16, 32],
            }),
            eval: EvaluationResult {
                accuracy,
                energy_joules: energy,
                peak_power_watts: Some(61.25),
                mac_total: None,
                mac_normalized: None,
            },
            reward: 0.1 + 0.2,
            grad_norm: 0.0,
        }
    }

    #[test]
    fn results_golden() {
        let bytes = write_results(Vec::new(), &[row(1, 0.9566, 92.16)]).unwrap();
        let expected = concat!(
            "iteration,actions,architecture,accuracy,energy,peak_power,mac_normalized,reward,grad_norm\n",
            "1,0-1-2-3-4-0,\"space=condensenet; stages=6,8,10; growths=8,16,32\",",
            "0.9566,92.16,61.25,,0.30000000000000004,0\n",
        );
        assert_eq!(String::from_utf8(bytes).unwrap(), expected);
    }

    #[test]
    fn results_round_trip() {
        let rows = vec![row(1, 0.5, 1e-9), row(2, 1.0 / 3.0, 123.456)];
        let bytes = write_results(Vec::new(), &rows).unwrap();
        assert_eq!(read_results(bytes.as_slice()).unwrap(), rows);
    }

    #[test]
    fn front_round_trip() {
        let rows = vec![row(1, 0.9, 50.0), row(2, 0.95, 80.0), row(3, 0.85, 60.0)];
        let front = results_front(&rows);
        let bytes = write_front(Vec::new(), &front).unwrap();
        assert_eq!(read_front(bytes.as_slice()).unwrap(), front.points());
    }

    #[test]
    fn malformed_results() {
        assert!(read_results("a,b\n1,2\n".as_bytes())
            .unwrap_err()
            .is_usage());
        let mut text = RESULTS_HEADER.join(",");
        text.push_str(
            "\n1,0-0-0-0-0-0,\"space=condensenet; stages=6,6,6; growths=4,4,4\",abc,1,,,0,0\n",
        );
        assert!(matches!(
            read_results(text.as_bytes()),
            Err(MonasError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn empty_results() {
        let bytes = write_results(Vec::new(), &[]).unwrap();
        assert!(read_results(bytes.as_slice()).unwrap().is_empty());
    }
}
