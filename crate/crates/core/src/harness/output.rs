use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::run::{AggregateCurve, ExperimentOutput, RegretTrajectory};
use crate::Result;

/// One row of `raw.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRow {
    pub agent: String,
    pub rep: usize,
    pub t: usize,
    pub inst_regret: f64,
    pub cum_regret: f64,
}

/// One row of `agg.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggRow {
    pub agent: String,
    pub t: usize,
    pub mean_cum: f64,
    pub ci_half: f64,
    pub n: usize,
}

/// One row of `probs.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbRow {
    pub t: usize,
    pub context: usize,
    pub action: usize,
    pub p: f64,
}

fn write_rows<W: Write, T: Serialize>(out: W, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<R: Read, T: for<'de> Deserialize<'de>>(input: R) -> Result<Vec<T>> {
    csv::Reader::from_reader(input).deserialize().map(|r| r.map_err(Into::into)).collect()
}

pub fn write_raw<W: Write>(out: W, output: &ExperimentOutput) -> Result<()> {
    let rows = output.runs.iter().flat_map(|run| {
        let agent = &output.labels[run.agent];
        run.trajectory.inst.iter().zip(&run.trajectory.cum).enumerate().map(move |(i, (&inst, &cum))| RawRow {
            agent: agent.clone(),
            rep: run.rep,
            t: i + 1,
            inst_regret: inst,
            cum_regret: cum,
        })
    });
    write_rows(out, rows)
}

pub fn write_agg<W: Write>(out: W, curves: &[AggregateCurve]) -> Result<()> {
    let rows = curves.iter().flat_map(|c| {
        c.mean_cum.iter().zip(&c.ci_half).enumerate().map(move |(i, (&m, &h))| AggRow {
            agent: c.agent.clone(),
            t: i + 1,
            mean_cum: m,
            ci_half: h,
            n: c.n,
        })
    });
    write_rows(out, rows)
}

pub fn write_probs<W: Write>(out: W, rows: &[ProbRow]) -> Result<()> {
    write_rows(out, rows)
}

pub fn read_raw<R: Read>(input: R) -> Result<Vec<RawRow>> {
    read_rows(input)
}

pub fn read_agg<R: Read>(input: R) -> Result<Vec<AggRow>> {
    read_rows(input)
}

pub fn read_probs<R: Read>(input: R) -> Result<Vec<ProbRow>> {
    read_rows(input)
}

/// Regroup `raw.csv` rows into `(agent, rep, trajectory)` in file order.
pub fn trajectories_from_raw(rows: &[RawRow]) -> Vec<(String, usize, RegretTrajectory)> {
    let mut out: Vec<(String, usize, RegretTrajectory)> = Vec::new();
    for row in rows {
        match out.last_mut() {
            Some((agent, rep, traj)) if *agent == row.agent && *rep == row.rep => {
                traj.inst.push(row.inst_regret);
                traj.cum.push(row.cum_regret);
            }
            _ => out.push((
                row.agent.clone(),
                row.rep,
                RegretTrajectory { inst: vec![row.inst_regret], cum: vec![row.cum_regret] },
            )),
        }
    }
    out
}

/// Regroup `agg.csv` rows into curves in file order.
pub fn curves_from_agg(rows: &[AggRow]) -> Vec<AggregateCurve> {
    let mut out: Vec<AggregateCurve> = Vec::new();
    for row in rows {
        match out.last_mut() {
            Some(c) if c.agent == row.agent => {
                c.mean_cum.push(row.mean_cum);
                c.ci_half.push(row.ci_half);
            }
            _ => out.push(AggregateCurve {
                agent: row.agent.clone(),
                mean_cum: vec![row.mean_cum],
                ci_half: vec![row.ci_half],
                n: row.n,
            }),
        }
    }
    out
}

/// Write `raw.csv` and `agg.csv` into `dir`, creating it if needed.
pub fn write_experiment(dir: &Path, output: &ExperimentOutput) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_raw(BufWriter::new(File::create(dir.join("raw.csv"))?), output)?;
    write_agg(BufWriter::new(File::create(dir.join("agg.csv"))?), &output.curves)?;
    Ok(())
}
