//! End-to-end runs and step-count scaling benchmarks.
//!
//! ```
//! use meshmsf::experiment::{run, ExperimentConfig, Verdict};
//! use meshmsf::graph::Graph;
//!
//! let g: Graph = "3 3\n0 1 1\n1 2 2\n0 2 3\n".parse().unwrap();
//! let report = run(&g, &ExperimentConfig::default()).unwrap();
//! assert_eq!(report.verdict, Verdict::Pass);
//! assert_eq!((report.msf_weight, report.components), (3, 1));
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{MeshError, Result};
use crate::graph::{gen, Graph};
use crate::mesh::ExecMode;
use crate::msf::{minimum_spanning_forest, MsfConfig, MsfResult};
use crate::oracle;

/// Version of the report layout; bumped on any key change.
pub const REPORT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sorter {
    #[default]
    Shearsort,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExperimentConfig {
    pub side: Option<usize>,
    pub rounds: usize,
    pub sorter: Sorter,
    pub seed: u64,
    pub verify: bool,
    pub exec: ExecMode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig { side: None, rounds: 6, sorter: Sorter::Shearsort, seed: 0, verify: true, exec: ExecMode::Fused }
    }
}

impl ExperimentConfig {
    fn msf(&self) -> MsfConfig {
        MsfConfig { rounds: self.rounds, side: self.side, exec: self.exec, capture_contraction: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RunReport {
    pub version: u32,
    /// Processor count.
    pub n: usize,
    pub records: usize,
    pub vertices: usize,
    pub msf_weight: u128,
    pub components: usize,
    pub steps_total: u64,
    pub steps_by_phase: BTreeMap<String, u64>,
    pub verdict: Verdict,
    /// Oracle diagnostics when verification fails.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<oracle::Verdict>,
    pub config_echo: ExperimentConfig,
}

/// Runs the pipeline on `g` and, if configured, checks it against the oracle.
pub fn run(g: &Graph, cfg: &ExperimentConfig) -> Result<RunReport> {
    run_with_result(g, cfg).map(|(r, _)| r)
}

/// Like [`run`], also returning the raw result with its trace.
pub fn run_with_result(g: &Graph, cfg: &ExperimentConfig) -> Result<(RunReport, MsfResult)> {
    let res = minimum_spanning_forest(g, &cfg.msf())?;
    let (verdict, diagnostics) = if cfg.verify {
        let v = oracle::verify(g, &res.msf_origins, &res.component_of);
        if v.ok() {
            (Verdict::Pass, None)
        } else {
            (Verdict::Fail, Some(v))
        }
    } else {
        (Verdict::Skipped, None)
    };
    let report = RunReport {
        version: REPORT_VERSION,
        n: res.side * res.side,
        records: g.proper_edges() + g.n_vertices,
        vertices: g.n_vertices,
        msf_weight: oracle::total_weight(g, &res.msf_origins),
        components: res.components(),
        steps_total: res.steps.total_steps,
        steps_by_phase: res.steps.per_phase.clone(),
        verdict,
        diagnostics,
        config_echo: cfg.clone(),
    };
    Ok((report, res))
}

/// Random instance filling a side-`side` mesh: `n/4` vertices and `n/2`
/// edges with weights below 2^20.
pub fn bench_graph(side: usize, seed: u64) -> Graph {
    let n = side * side;
    gen::random_gnm(n / 4, n / 2, 1 << 20, &mut gen::rng(seed))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BenchRow {
    pub side: usize,
    pub n: usize,
    pub trial: usize,
    pub total_steps: u64,
    pub phases: BTreeMap<String, u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Least-squares slope of ln(mean total steps) against ln n.
    pub slope: Option<f64>,
    /// Mean total steps of each side over the previous side.
    pub ratios: Vec<f64>,
}

/// Runs `trials` instances per side; trial `k` of side `s` uses seed
/// `seed + 1000·s + k`. Every run is verified.
pub fn bench(sides: &[usize], trials: usize, cfg: &ExperimentConfig) -> Result<BenchReport> {
    if sides.is_empty() || trials == 0 {
        return Err(MeshError::Config("bench needs at least one side and one trial".into()));
    }
    if sides.windows(2).any(|w| w[0] >= w[1]) || sides.iter().any(|s| !s.is_power_of_two() || *s < 2) {
        return Err(MeshError::Config("bench sides must be ascending powers of two".into()));
    }
    let mut rows = Vec::new();
    for &side in sides {
        for trial in 0..trials {
            let g = bench_graph(side, cfg.seed + 1000 * side as u64 + trial as u64);
            let c = ExperimentConfig { side: Some(side), ..cfg.clone() };
            let r = run(&g, &c)?;
            if r.verdict == Verdict::Fail {
                return Err(MeshError::Invariant(format!("bench instance side {side} trial {trial} failed verification")));
            }
            log::info!("bench side {side} trial {trial}: {} steps", r.steps_total);
            rows.push(BenchRow { side, n: r.n, trial, total_steps: r.steps_total, phases: r.steps_by_phase });
        }
    }
    let means: Vec<(f64, f64)> = sides
        .iter()
        .map(|&s| {
            let xs: Vec<f64> = rows.iter().filter(|r| r.side == s).map(|r| r.total_steps as f64).collect();
            ((s * s) as f64, xs.iter().sum::<f64>() / xs.len() as f64)
        })
        .collect();
    let ratios = means.windows(2).map(|w| w[1].1 / w[0].1).collect();
    Ok(BenchReport { rows, slope: loglog_slope(&means), ratios })
}

/// Least-squares slope of `ln y` against `ln x`; `None` for fewer than two
/// distinct abscissae.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

impl BenchReport {
    /// `side,n,trial,total_steps,phases` rows, phases as `name=steps` joined
    /// by `;`, then `#` footer lines with the fitted slope and ratios.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("side,n,trial,total_steps,phases\n");
        for r in &self.rows {
            let phases: Vec<String> = r.phases.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let _ = writeln!(out, "{},{},{},{},{}", r.side, r.n, r.trial, r.total_steps, phases.join(";"));
        }
        match self.slope {
            Some(s) => {
                let _ = writeln!(out, "# loglog_slope={s:.4}");
            }
            None => out.push_str("# loglog_slope=NA\n"),
        }
        let ratios: Vec<String> = self.ratios.iter().map(|r| format!("{r:.4}")).collect();
        let _ = writeln!(out, "# ratios={}", ratios.join(";"));
        out
    }
}

/// Step cost of each primitive on a full side-`side` block, as
/// `primitive,side,steps` rows.
pub fn primitive_costs(sides: &[usize]) -> String {
    use crate::primitives::{scan_steps, sort_steps, ScanDir};
    let mut out = String::from("primitive,side,steps\n");
    for &s in sides {
        let sort = sort_steps(s);
        let fwd = scan_steps(s, ScanDir::Forward);
        let bwd = scan_steps(s, ScanDir::Backward);
        for (name, steps) in [
            ("mesh_sort", sort),
            ("scan_forward", fwd),
            ("scan_backward", bwd),
            ("segmented_min", fwd + bwd),
            ("batched_lookup", 2 * sort + fwd),
            ("compact_route", fwd + sort),
        ] {
            let _ = writeln!(out, "{name},{s},{steps}");
        }
    }
    out
}
