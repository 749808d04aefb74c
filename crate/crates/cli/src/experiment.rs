//! Parameter sweeps over simulated scenarios.

use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::str::FromStr;

use chordrep::alloc::min_peripheral_slack;
use chordrep::metrics::Category;
use chordrep::sim::{self, across, Algorithm, ChurnMode, MetricsLog, ScenarioConfig};
use rayon::prelude::*;

use crate::config::{self, canonical, hash_text};
use crate::error::{CliError, Result};
use crate::output::{num, Table};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    /// Maintenance runs per half life.
    S,
    Nodes,
    /// DHash `r`; dynamic `R_MIN = r + 1`, keeping the base peripheral
    /// width unless collisions need more.
    R,
    ItemsPerNode,
    CatastropheFraction,
}

impl Axis {
    fn integral(self) -> bool {
        self != Axis::CatastropheFraction
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::S => "s",
            Axis::Nodes => "nodes",
            Axis::R => "r",
            Axis::ItemsPerNode => "items_per_node",
            Axis::CatastropheFraction => "catastrophe_fraction",
        })
    }
}

impl FromStr for Axis {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "s" | "S" => Ok(Axis::S),
            "nodes" | "N" => Ok(Axis::Nodes),
            "r" => Ok(Axis::R),
            "items_per_node" => Ok(Axis::ItemsPerNode),
            "catastrophe_fraction" => Ok(Axis::CatastropheFraction),
            _ => Err(CliError::Config(format!("unknown sweep axis `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub base: ScenarioConfig,
    pub axis: Axis,
    pub values: Vec<f64>,
    pub algorithms: Vec<Algorithm>,
    pub output: Option<PathBuf>,
}

/// Parses `a,b,c` or an inclusive integer range `a..b`.
pub fn parse_values(s: &str) -> Result<Vec<f64>> {
    let bad = || CliError::Config(format!("bad value list `{s}`"));
    if let Some((a, b)) = s.split_once("..") {
        let a: i64 = a.trim().parse().map_err(|_| bad())?;
        let b: i64 = b.trim().parse().map_err(|_| bad())?;
        return Ok((a..=b).map(|x| x as f64).collect());
    }
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| bad()))
        .collect()
}

impl ExperimentSpec {
    /// Scenario keys plus `axis`, `values`, `algorithms` (default: all)
    /// and `output`.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let mut base = ScenarioConfig::default();
        let (mut axis, mut values, mut output) = (None, None, None);
        let mut algorithms = Algorithm::ALL.to_vec();
        for (k, v) in pairs {
            if config::apply(&mut base, k, v)? {
                continue;
            }
            match k.as_str() {
                "axis" => axis = Some(v.parse()?),
                "values" => values = Some(parse_values(v)?),
                "algorithms" => {
                    algorithms = v
                        .split(',')
                        .map(str::trim)
                        .filter(|t| !t.is_empty())
                        .map(|t| t.parse::<Algorithm>().map_err(CliError::from))
                        .collect::<Result<_>>()?
                }
                "output" => output = Some(PathBuf::from(v)),
                _ => return Err(CliError::Config(format!("unknown key `{k}`"))),
            }
        }
        let spec = ExperimentSpec {
            base,
            axis: axis.ok_or_else(|| CliError::Config("missing `axis`".into()))?,
            values: values.ok_or_else(|| CliError::Config("missing `values`".into()))?,
            algorithms,
            output,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(CliError::Config("sweep value list is empty".into()));
        }
        if self.values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::Config("sweep values must be strictly increasing".into()));
        }
        if self.axis.integral() && self.values.iter().any(|v| v.fract() != 0.0 || *v < 1.0) {
            return Err(CliError::Config(format!(
                "axis `{}` takes positive integers",
                self.axis
            )));
        }
        if self.algorithms.is_empty() {
            return Err(CliError::Config("no algorithms selected".into()));
        }
        self.base.validate()?;
        for &a in &self.algorithms {
            for &v in &self.values {
                self.cell(a, v).validate()?;
            }
        }
        Ok(())
    }

    /// The scenario of one table cell.
    pub fn cell(&self, algorithm: Algorithm, value: f64) -> ScenarioConfig {
        let mut c = ScenarioConfig {
            algorithm,
            ..self.base.clone()
        };
        let n = value as u32;
        match self.axis {
            Axis::S => c.maintenance_per_half_life = n,
            Axis::Nodes => c.nodes = n as usize,
            Axis::R => {
                let width = self
                    .base
                    .r_max
                    .saturating_sub(self.base.r_min)
                    .max(min_peripheral_slack(n + 1));
                c.replicas = n;
                c.r_min = n + 1;
                c.r_max = n + 1 + width;
            }
            Axis::ItemsPerNode => c.items_per_node = n as usize,
            Axis::CatastropheFraction => {
                c.churn = ChurnMode::Catastrophe(value);
                c.max_retries = None;
            }
        }
        c
    }

    pub fn config_hash(&self) -> String {
        let values: Vec<String> = self.values.iter().map(|v| num(*v)).collect();
        let algs: Vec<String> = self.algorithms.iter().map(Algorithm::to_string).collect();
        hash_text(&format!(
            "{}axis = {}\nvalues = {}\nalgorithms = {}\n",
            canonical(&self.base),
            self.axis,
            values.join(","),
            algs.join(",")
        ))
    }
}

pub const SWEEP_COLUMNS: [&str; 22] = [
    "algorithm",
    "axis",
    "value",
    "status",
    "runs",
    "latency_mean",
    "latency_se",
    "hops_mean",
    "hops_se",
    "probes_mean",
    "probes_se",
    "success_rate",
    "overhead_bytes_mean",
    "overhead_bytes_se",
    "data_movement_bytes_mean",
    "data_movement_bytes_se",
    "chord_repair_bytes_mean",
    "fetch_bytes_mean",
    "data_moved_fraction_mean",
    "data_moved_fraction_se",
    "losses_mean",
    "lost_at_end_mean",
];

fn bytes(c: Category) -> impl Fn(&MetricsLog) -> f64 {
    move |l| l.bandwidth.bytes(c) as f64
}

/// Mean and standard error across repeats; latency, hops and probes are
/// per-run means over found fetches.
fn summary(logs: &[MetricsLog]) -> Vec<String> {
    let pair = |f: &dyn Fn(&MetricsLog) -> f64| {
        let m = across(logs, f);
        [num(m.mean), num(m.std_err)]
    };
    let mut row = vec![logs.len().to_string()];
    row.extend(pair(&|l| l.latency().mean));
    row.extend(pair(&|l| l.hops().mean));
    row.extend(pair(&|l| l.probes().mean));
    row.push(num(across(logs, MetricsLog::success_rate).mean));
    row.extend(pair(&bytes(Category::MaintenanceOverhead)));
    row.extend(pair(&bytes(Category::DataMovement)));
    row.push(num(across(logs, bytes(Category::ChordRepair)).mean));
    row.push(num(across(logs, bytes(Category::Fetch)).mean));
    row.extend(pair(&MetricsLog::data_moved_fraction));
    row.push(num(across(logs, |l| l.losses.len() as f64).mean));
    row.push(num(across(logs, |l| l.lost_at_end as f64).mean));
    row
}

fn run_cell(cfg: &ScenarioConfig) -> std::result::Result<Vec<MetricsLog>, String> {
    let logs = match cfg.churn {
        ChurnMode::Catastrophe(f) => sim::catastrophe(cfg, f),
        _ => sim::run_scenario(cfg),
    };
    logs.map_err(|e| e.to_string())
}

/// A panic inside one cell is reported as that cell's error.
fn guarded<F>(runner: &F, cfg: &ScenarioConfig) -> std::result::Result<Vec<MetricsLog>, String>
where
    F: Fn(&ScenarioConfig) -> std::result::Result<Vec<MetricsLog>, String>,
{
    catch_unwind(AssertUnwindSafe(|| runner(cfg))).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into()))
    })
}

/// Runs every `(algorithm, value)` cell. A failed cell becomes a row with
/// status `error: ..` and blank numbers; the count of such rows is
/// returned with the table.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<(Table, usize)> {
    run_with(spec, run_cell)
}

fn run_with<F>(spec: &ExperimentSpec, runner: F) -> Result<(Table, usize)>
where
    F: Fn(&ScenarioConfig) -> std::result::Result<Vec<MetricsLog>, String> + Sync,
{
    spec.validate()?;
    let cells: Vec<(Algorithm, f64)> = spec
        .algorithms
        .iter()
        .flat_map(|&a| spec.values.iter().map(move |&v| (a, v)))
        .collect();
    let results: Vec<_> = cells
        .par_iter()
        .map(|&(a, v)| guarded(&runner, &spec.cell(a, v)))
        .collect();
    let mut table = Table::new(&SWEEP_COLUMNS, spec.base.seeds(), spec.config_hash());
    let mut failed = 0;
    for ((a, v), res) in cells.iter().zip(results) {
        let mut row = vec![a.to_string(), spec.axis.to_string(), num(*v)];
        match res {
            Ok(logs) => {
                row.push("ok".into());
                row.extend(summary(&logs));
            }
            Err(msg) => {
                failed += 1;
                row.push(format!("error: {msg}"));
                row.resize(SWEEP_COLUMNS.len(), String::new());
            }
        }
        table.push(row);
    }
    Ok((table, failed))
}

pub const SIMULATE_COLUMNS: [&str; 17] = [
    "seed",
    "fetches",
    "success_rate",
    "latency_mean",
    "hops_mean",
    "probes_mean",
    "overhead_bytes",
    "data_movement_bytes",
    "chord_repair_bytes",
    "fetch_bytes",
    "data_moved_fraction",
    "losses",
    "lost_at_end",
    "failures",
    "joins",
    "warmup_rounds",
    "trace_hash",
];

/// One row per repeat.
pub fn simulate(cfg: &ScenarioConfig) -> Result<Table> {
    cfg.validate()?;
    let logs = guarded(&run_cell, cfg).map_err(CliError::Run)?;
    let mut table = Table::new(&SIMULATE_COLUMNS, cfg.seeds(), hash_text(&canonical(cfg)));
    for l in &logs {
        table.push(vec![
            l.seed.to_string(),
            l.fetches.len().to_string(),
            num(l.success_rate()),
            num(l.latency().mean),
            num(l.hops().mean),
            num(l.probes().mean),
            l.bandwidth.bytes(Category::MaintenanceOverhead).to_string(),
            l.bandwidth.bytes(Category::DataMovement).to_string(),
            l.bandwidth.bytes(Category::ChordRepair).to_string(),
            l.bandwidth.bytes(Category::Fetch).to_string(),
            num(l.data_moved_fraction()),
            l.losses.len().to_string(),
            l.lost_at_end.to_string(),
            l.failures.to_string(),
            l.joins.to_string(),
            l.warmup_rounds.to_string(),
            format!("{:016x}", l.trace_hash),
        ]);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chordrep::alloc::AllocationKind;

    fn pairs(text: &str) -> Vec<(String, String)> {
        config::parse_pairs(text).unwrap()
    }

    #[test]
    fn ranges_and_lists_parse() {
        assert_eq!(parse_values("4..7").unwrap(), vec![4.0, 5.0, 6.0, 7.0]);
        assert_eq!(parse_values("0.1, 0.3").unwrap(), vec![0.1, 0.3]);
        assert!(parse_values("2,x").is_err());
    }

    #[test]
    fn empty_sweep_is_rejected() {
        let e = ExperimentSpec::from_pairs(&pairs("axis = s\nvalues = \n")).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn values_must_increase() {
        assert!(ExperimentSpec::from_pairs(&pairs("axis = s\nvalues = 4,2\n")).is_err());
        assert!(ExperimentSpec::from_pairs(&pairs("axis = s\nvalues = 2,2\n")).is_err());
        assert!(ExperimentSpec::from_pairs(&pairs("axis = s\nvalues = 2.5\n")).is_err());
    }

    #[test]
    fn unregistered_algorithm_is_rejected() {
        let e = ExperimentSpec::from_pairs(&pairs("axis = s\nvalues = 2\nalgorithms = pastry\n")).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn r_axis_keeps_the_peripheral_width() {
        let spec = ExperimentSpec::from_pairs(&pairs("axis = r\nvalues = 4,9\nr_min = 7\nr_max = 12\n")).unwrap();
        let c = spec.cell(Algorithm::Dynamic(AllocationKind::Block), 9.0);
        assert_eq!((c.replicas, c.r_min, c.r_max), (9, 10, 16));
        let c = spec.cell(Algorithm::Dynamic(AllocationKind::Block), 4.0);
        assert_eq!((c.replicas, c.r_min, c.r_max), (4, 5, 10));
    }

    #[test]
    fn catastrophe_cells_retry_forever() {
        let spec = ExperimentSpec::from_pairs(&pairs("axis = catastrophe_fraction\nvalues = 0,0.3\n")).unwrap();
        let c = spec.cell(Algorithm::DHash, 0.3);
        assert_eq!(c.churn, ChurnMode::Catastrophe(0.3));
        assert_eq!(c.max_retries, None);
    }

    #[test]
    fn cells_run_in_table_order() {
        let text = "nodes = 20\nitems_per_node = 2\nfetches = 40\nrepeats = 1\nbits = 16\n\
                    axis = s\nvalues = 1,2\nalgorithms = dhash,dyn-block\n";
        let spec = ExperimentSpec::from_pairs(&pairs(text)).unwrap();
        let (table, failed) = run_experiment(&spec).unwrap();
        assert_eq!(failed, 0);
        let keys: Vec<(&str, &str)> = table.rows.iter().map(|r| (r[0].as_str(), r[2].as_str())).collect();
        assert_eq!(
            keys,
            [("dhash", "1"), ("dhash", "2"), ("dyn-block", "1"), ("dyn-block", "2")]
        );
        assert!(table.rows.iter().all(|r| r[3] == "ok" && r[4] == "1"));
    }

    #[test]
    fn failed_cell_is_marked_and_others_run() {
        let text = "nodes = 20\nitems_per_node = 2\nfetches = 40\nrepeats = 1\nbits = 16\n\
                    axis = s\nvalues = 1,2,3\nalgorithms = dhash\n";
        let spec = ExperimentSpec::from_pairs(&pairs(text)).unwrap();
        let (table, failed) = run_with(&spec, |c| {
            if c.maintenance_per_half_life == 2 {
                panic!("boom");
            }
            run_cell(c)
        })
        .unwrap();
        assert_eq!(failed, 1);
        assert_eq!(table.rows[1][3], "error: boom");
        assert!(table.rows[1][4..].iter().all(String::is_empty));
        assert_eq!(table.rows[0][3], "ok");
        assert_eq!(table.rows[2][3], "ok");
    }
}
