//! Plain-text formats: degree distribution files and CSV artifacts.
//!
//! Every CSV starts with one metadata comment line
//! (`# greedy-ldp <version> config=<hash> seed=<seed>`) followed by a header.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::deviations::RateCurve;
use crate::dynamics::RunResult;
use crate::error::{Error, Result};
use crate::model::{DegreeDistribution, DEFAULT_DEGREE_CAP};
use crate::montecarlo::HistogramBin;
use crate::odeflow::{HamiltonSolution, Trajectory};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance written as the first line of every CSV.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CsvMeta {
    pub config_hash: String,
    pub seed: Option<u64>,
}

impl CsvMeta {
    pub fn comment(&self) -> String {
        let seed = self.seed.map_or_else(|| "none".to_string(), |s| s.to_string());
        format!("# greedy-ldp {VERSION} config={} seed={seed}", self.config_hash)
    }
}

/// Parse `j = p_j` lines; `#` starts a comment and unlisted degrees get 0.
pub fn parse_distribution(text: &str) -> Result<DegreeDistribution> {
    let mut probs: BTreeMap<usize, f64> = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = || Error::invalid(format!("line {}: expected `j = p_j`, got {raw:?}", no + 1));
        let (k, v) = line.split_once('=').ok_or_else(bad)?;
        let j: usize = k.trim().parse().map_err(|_| bad())?;
        let p: f64 = v.trim().parse().map_err(|_| bad())?;
        if probs.insert(j, p).is_some() {
            return Err(Error::invalid(format!("line {}: degree {j} listed twice", no + 1)));
        }
    }
    let max = *probs.keys().next_back().ok_or_else(|| Error::invalid("distribution file lists no degrees"))?;
    if max > DEFAULT_DEGREE_CAP {
        return Err(Error::invalid(format!("degree {max} exceeds the cap {DEFAULT_DEGREE_CAP}")));
    }
    let mut v = vec![0.0; max + 1];
    for (j, p) in probs {
        v[j] = p;
    }
    DegreeDistribution::new(v)
}

pub fn read_distribution(path: &Path) -> Result<DegreeDistribution> {
    parse_distribution(&std::fs::read_to_string(path)?)
}

/// Inverse of [`parse_distribution`], skipping zero entries.
pub fn format_distribution(dist: &DegreeDistribution) -> String {
    dist.probs()
        .iter()
        .enumerate()
        .filter(|(_, &p)| p != 0.0)
        .map(|(j, p)| format!("{j} = {p}\n"))
        .collect()
}

/// A header plus numeric rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn write_csv<W: Write>(&self, out: &mut W, meta: &CsvMeta) -> Result<()> {
        writeln!(out, "{}", meta.comment())?;
        writeln!(out, "{}", self.header.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path, meta: &CsvMeta) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut f, meta)?;
        f.flush()?;
        Ok(())
    }

    /// Parse what [`Table::write_csv`] writes; comment lines are skipped.
    pub fn parse_csv(text: &str) -> Result<Table> {
        let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
        let header: Vec<String> =
            lines.next().ok_or_else(|| Error::invalid("CSV without header"))?.split(',').map(String::from).collect();
        let rows = lines
            .map(|l| {
                l.split(',')
                    .map(|c| c.trim().parse::<f64>().map_err(|_| Error::invalid(format!("bad CSV cell {c:?}"))))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        Ok(Table { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

fn path_header(max_degree: usize) -> Vec<String> {
    let mut h: Vec<String> = ["t", "s", "u"].iter().map(|s| s.to_string()).collect();
    h.extend((0..=max_degree).map(|j| format!("e_{j}")));
    h
}

/// Columns `t, s, u, e_0.., e_D`.
pub fn trajectory_table(tr: &Trajectory) -> Table {
    let d = tr.states[0].max_degree();
    Table {
        header: path_header(d),
        rows: tr
            .times
            .iter()
            .zip(&tr.states)
            .map(|(&t, x)| std::iter::once(t).chain(x.flat()).collect())
            .collect(),
    }
}

/// Path columns followed by the adjoint `a_s, a_u, a_0.., a_D` and nothing else.
pub fn hamilton_table(sol: &HamiltonSolution) -> Table {
    let mut table = trajectory_table(&sol.trajectory);
    let d = sol.alpha0.max_degree();
    table.header.extend(["a_s".to_string(), "a_u".to_string()]);
    table.header.extend((0..=d).map(|j| format!("a_{j}")));
    for (row, a) in table.rows.iter_mut().zip(&sol.adjoint) {
        row.extend(a.flat());
    }
    table
}

/// Same schema as [`trajectory_table`], on the rescaled clock `t = n / N`.
pub fn run_table(run: &RunResult) -> Table {
    Table {
        header: path_header(run.max_degree),
        rows: run.rescaled_path().into_iter().map(|(t, x)| std::iter::once(t).chain(x.flat()).collect()).collect(),
    }
}

/// Columns `alpha0, T_alpha0, F`; failed points are written as `NaN`.
pub fn rate_curve_table(curve: &RateCurve) -> Table {
    Table {
        header: vec!["alpha0".into(), "T_alpha0".into(), "F".into()],
        rows: (0..curve.alpha0_grid.len())
            .map(|i| vec![curve.alpha0_grid[i], curve.t_values[i], curve.f_values[i]])
            .collect(),
    }
}

pub fn histogram_table(bins: &[HistogramBin]) -> Table {
    Table {
        header: vec!["steps".into(), "fraction".into(), "count".into(), "probability".into()],
        rows: bins.iter().map(|b| vec![b.steps as f64, b.fraction, b.count as f64, b.probability]).collect(),
    }
}
