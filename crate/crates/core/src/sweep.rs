//! Parameter sweeps over `m` and `ε`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::config::SimConfig;
use crate::diagnostics::l2_distance;
use crate::error::{Error, Result};
use crate::run::{run_observed, RunResult};

pub const THREADS_ENV: &str = "KSNS_THREADS";

/// One `(m, ε)` cell of the sweep table.
#[derive(Clone, Debug)]
pub struct SweepCell {
    pub label: String,
    pub m: f64,
    pub eps: f64,
    pub outcome: std::result::Result<RunResult, String>,
}

impl SweepCell {
    pub fn termination(&self) -> &str {
        match &self.outcome {
            Ok(r) => r.termination.label(),
            Err(_) => "error",
        }
    }
}

/// Ratios `‖X_{j+1} − X_j‖ / ‖X_j − X_{j−1}‖` for one `m` along its ε list.
#[derive(Clone, Debug, PartialEq)]
pub struct CauchySeries {
    pub m: f64,
    pub eps: Vec<f64>,
    /// `[n, c, u]` differences between consecutive ε.
    pub differences: Vec<[f64; 3]>,
    pub ratios: Vec<[f64; 3]>,
}

impl CauchySeries {
    pub fn all_below_one(&self) -> bool {
        self.ratios.iter().flatten().all(|&r| r < 1.0)
    }
}

#[derive(Clone, Debug, Default)]
pub struct SweepReport {
    pub cells: Vec<SweepCell>,
    pub cauchy: Vec<CauchySeries>,
}

impl SweepReport {
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        for cell in &self.cells {
            match &cell.outcome {
                Ok(r) => out.extend(r.failures.iter().map(|f| format!("{}: {f}", cell.label))),
                Err(e) => out.push(format!("{}: {e}", cell.label)),
            }
        }
        out
    }

    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("label,m,eps,termination,max_n_inf,max_F_key,blowup_indicator,failures\n");
        for cell in &self.cells {
            match &cell.outcome {
                Ok(r) => {
                    let ind = r.blowup(crate::diagnostics::DEFAULT_PLATEAU_FACTOR);
                    writeln!(
                        s,
                        "{},{:?},{:?},{},{:.16e},{:.16e},{},{}",
                        cell.label,
                        cell.m,
                        cell.eps,
                        r.termination.label(),
                        r.max_n_inf(),
                        r.max_f_key(),
                        ind,
                        r.failures.len()
                    )
                    .unwrap();
                }
                Err(_) => {
                    writeln!(s, "{},{:?},{:?},error,,,,1", cell.label, cell.m, cell.eps).unwrap();
                }
            }
        }
        s
    }

    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<24} {:>8} {:>10} {:>22} {:>14} {:>14}  {}\n",
            "label", "m", "eps", "termination", "max |n|inf", "max F_key", "indicator"
        );
        for cell in &self.cells {
            match &cell.outcome {
                Ok(r) => writeln!(
                    s,
                    "{:<24} {:>8} {:>10} {:>22} {:>14.6e} {:>14.6e}  {}",
                    cell.label,
                    cell.m,
                    cell.eps,
                    r.termination.label(),
                    r.max_n_inf(),
                    r.max_f_key(),
                    r.blowup(crate::diagnostics::DEFAULT_PLATEAU_FACTOR)
                ),
                Err(e) => writeln!(s, "{:<24} {:>8} {:>10} error: {e}", cell.label, cell.m, cell.eps),
            }
            .unwrap();
        }
        for series in &self.cauchy {
            writeln!(s, "\nCauchy ratios for m = {} over eps = {:?}", series.m, series.eps).unwrap();
            for (j, d) in series.differences.iter().enumerate() {
                writeln!(s, "  d{}  n {:.6e}  c {:.6e}  u {:.6e}", j + 1, d[0], d[1], d[2]).unwrap();
            }
            for (j, r) in series.ratios.iter().enumerate() {
                writeln!(
                    s,
                    "  j={}  n {:.6}  c {:.6}  u {:.6}",
                    j + 1,
                    r[0],
                    r[1],
                    r[2]
                )
                .unwrap();
            }
        }
        for f in self.failures() {
            writeln!(s, "FAILED {f}").unwrap();
        }
        s
    }
}

/// Worker count: `KSNS_THREADS` when set to a positive integer, otherwise
/// the available parallelism; never more than `jobs`.
pub fn thread_count(jobs: usize) -> usize {
    let avail = std::thread::available_parallelism().map_or(1, |n| n.get());
    let cap = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(avail);
    cap.min(jobs).max(1)
}

/// Runs every child of `cfg`, writing each child's outputs into its own
/// directory.
pub fn run_sweep(cfg: &SimConfig) -> Result<SweepReport> {
    run_sweep_with(cfg, true)
}

/// A configuration without a sweep section yields an empty report.
pub fn run_sweep_with(cfg: &SimConfig, write: bool) -> Result<SweepReport> {
    cfg.validate()?;
    let children = if cfg.sweep.is_some() { cfg.expand_sweep() } else { Vec::new() };
    let results: Vec<Mutex<Option<SweepCell>>> = children.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = thread_count(children.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some((label, child)) = children.get(k) else {
                    break;
                };
                let outcome = run_child(child, write).map_err(|e| e.to_string());
                *results[k].lock().unwrap() = Some(SweepCell {
                    label: label.clone(),
                    m: child.scenario.m,
                    eps: child.scenario.eps,
                    outcome,
                });
            });
        }
    });
    let cells: Vec<SweepCell> = results
        .into_iter()
        .map(|c| c.into_inner().unwrap().expect("every child ran"))
        .collect();
    let cauchy = cauchy_series(&cells);
    Ok(SweepReport { cells, cauchy })
}

fn run_child(child: &SimConfig, write: bool) -> Result<RunResult> {
    if write {
        fs::create_dir_all(&child.output_dir).map_err(|e| Error::io(&child.output_dir, e))?;
    }
    run_observed(child, write, &mut |_| {})
}

fn cauchy_series(cells: &[SweepCell]) -> Vec<CauchySeries> {
    let mut ms: Vec<f64> = Vec::new();
    for c in cells {
        if !ms.contains(&c.m) {
            ms.push(c.m);
        }
    }
    let mut out = Vec::new();
    for m in ms {
        let group: Vec<&SweepCell> = cells.iter().filter(|c| c.m == m).collect();
        if group.len() < 3 {
            continue;
        }
        let Some(finals) = group
            .iter()
            .map(|c| c.outcome.as_ref().ok().map(|r| &r.final_state))
            .collect::<Option<Vec<_>>>()
        else {
            continue;
        };
        let differences: Vec<[f64; 3]> = finals
            .windows(2)
            .map(|w| {
                let du = w[1].u.axpby(1.0, &w[0].u, -1.0);
                [
                    l2_distance(&w[1].n, &w[0].n),
                    l2_distance(&w[1].c, &w[0].c),
                    du.l2_norm(),
                ]
            })
            .collect();
        let ratios = differences
            .windows(2)
            .map(|d| std::array::from_fn(|i| d[1][i] / d[0][i]))
            .collect();
        out.push(CauchySeries {
            m,
            eps: group.iter().map(|c| c.eps).collect(),
            differences,
            ratios,
        });
    }
    out
}

/// Writes `sweep.csv` and `sweep.txt` into `dir`.
pub fn emit_report(report: &SweepReport, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv = dir.join("sweep.csv");
    fs::write(&csv, report.csv()).map_err(|e| Error::io(&csv, e))?;
    let txt = dir.join("sweep.txt");
    fs::write(&txt, report.table()).map_err(|e| Error::io(&txt, e))?;
    Ok((csv, txt))
}
