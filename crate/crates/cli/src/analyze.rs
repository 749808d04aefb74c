//! Tables from the analytical models.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chordrep::alloc::AllocationKind;
use chordrep::analysis::collision::{collision_bound, collision_coverage};
use chordrep::analysis::placement::{placement_sweep, PlacementSweep};
use chordrep::analysis::run::{expected_probes, min_repairs};

use crate::config::hash_text;
use crate::error::{CliError, Result};
use crate::experiment::parse_values;
use crate::output::{num, Table};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Fig1,
    Fig2,
    Fig4,
    Fig5,
    Probes,
    Collision,
}

impl Kind {
    pub const ALL: [Kind; 6] = [
        Kind::Fig1,
        Kind::Fig2,
        Kind::Fig4,
        Kind::Fig5,
        Kind::Probes,
        Kind::Collision,
    ];

    fn name(self) -> &'static str {
        match self {
            Kind::Fig1 => "fig1",
            Kind::Fig2 => "fig2",
            Kind::Fig4 => "fig4",
            Kind::Fig5 => "fig5",
            Kind::Probes => "probes",
            Kind::Collision => "collision",
        }
    }

    /// Accepted parameters and their defaults.
    pub fn defaults(self) -> &'static [(&'static str, &'static str)] {
        match self {
            Kind::Fig1 => &[
                ("nodes", "500"),
                ("target", "1e-6"),
                ("r", "4..20"),
                ("refined", "false"),
            ],
            Kind::Fig2 => &[
                ("nodes", "50,100,200,500"),
                ("r", "6,10,15"),
                ("target", "1e-6"),
                ("refined", "false"),
            ],
            Kind::Fig4 | Kind::Fig5 => &[
                ("nodes", "500"),
                ("failed", "250"),
                ("samples", "100000"),
                ("bits", "32"),
                ("seed", "1"),
                ("r", "1..24"),
                ("kinds", "block,successor,finger,random"),
            ],
            Kind::Probes => &[("s", "1,2,4,8")],
            Kind::Collision => &[
                ("r", "4,9,16"),
                ("nodes", "500"),
                ("bits", "32"),
                ("trials", "100000"),
                ("seed", "1"),
            ],
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Kind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            CliError::Config(format!(
                "unknown analysis `{s}` (expected fig1, fig2, fig4, fig5, probes or collision)"
            ))
        })
    }
}

struct Params {
    kind: Kind,
    values: BTreeMap<&'static str, String>,
}

impl Params {
    fn new(kind: Kind, given: &[(String, String)]) -> Result<Self> {
        let mut values: BTreeMap<&'static str, String> =
            kind.defaults().iter().map(|&(k, v)| (k, v.to_string())).collect();
        for (k, v) in given {
            let slot = kind
                .defaults()
                .iter()
                .find(|(name, _)| name == k)
                .map(|(name, _)| *name)
                .ok_or_else(|| CliError::Config(format!("`{kind}` takes no parameter `{k}`")))?;
            values.insert(slot, v.clone());
        }
        Ok(Self { kind, values })
    }

    fn raw(&self, key: &str) -> &str {
        &self.values[key]
    }

    fn one<T: FromStr>(&self, key: &str) -> Result<T> {
        self.raw(key)
            .parse()
            .map_err(|_| CliError::Config(format!("bad value `{}` for `{key}`", self.raw(key))))
    }

    /// Positive integer list.
    fn ints(&self, key: &str) -> Result<Vec<u32>> {
        let xs = parse_values(self.raw(key))?;
        if xs.is_empty() || xs.iter().any(|x| x.fract() != 0.0 || *x < 1.0 || *x > u32::MAX as f64) {
            return Err(CliError::Config(format!("`{key}` needs positive integers")));
        }
        Ok(xs.into_iter().map(|x| x as u32).collect())
    }

    fn flag(&self, key: &str) -> Result<bool> {
        match self.raw(key) {
            "true" => Ok(true),
            "false" => Ok(false),
            v => Err(CliError::Config(format!("bad value `{v}` for `{key}`"))),
        }
    }

    fn hash(&self) -> String {
        let mut s = format!("analysis = {}\n", self.kind);
        for (k, v) in &self.values {
            s.push_str(&format!("{k} = {v}\n"));
        }
        hash_text(&s)
    }
}

fn s_min(n: u32, r: u32, target: f64, refined: bool) -> String {
    min_repairs(n, r, target, refined).map_or(String::new(), |s| s.to_string())
}

fn check_target(target: f64) -> Result<f64> {
    if target > 0.0 && target < 1.0 {
        Ok(target)
    } else {
        Err(CliError::Config("target must lie in (0, 1)".into()))
    }
}

pub fn run_analysis(kind: Kind, given: &[(String, String)]) -> Result<Table> {
    let p = Params::new(kind, given)?;
    let hash = p.hash();
    match kind {
        Kind::Fig1 => {
            let n: u32 = p.one("nodes")?;
            let target = check_target(p.one("target")?)?;
            let refined = p.flag("refined")?;
            let mut t = Table::new(&["nodes", "r", "target", "s_min"], Vec::new(), hash);
            for r in p.ints("r")? {
                t.push(vec![
                    n.to_string(),
                    r.to_string(),
                    num(target),
                    s_min(n, r, target, refined),
                ]);
            }
            Ok(t)
        }
        Kind::Fig2 => {
            let target = check_target(p.one("target")?)?;
            let refined = p.flag("refined")?;
            let mut t = Table::new(&["r", "nodes", "target", "s_min"], Vec::new(), hash);
            for r in p.ints("r")? {
                for n in p.ints("nodes")? {
                    t.push(vec![
                        r.to_string(),
                        n.to_string(),
                        num(target),
                        s_min(n, r, target, refined),
                    ]);
                }
            }
            Ok(t)
        }
        Kind::Fig4 | Kind::Fig5 => {
            let kinds = p
                .raw("kinds")
                .split(',')
                .map(|k| k.trim().parse::<AllocationKind>().map_err(CliError::from))
                .collect::<Result<Vec<_>>>()?;
            let seed: u64 = p.one("seed")?;
            let sweep = PlacementSweep {
                nodes: p.one("nodes")?,
                failed: p.one("failed")?,
                bits: p.one("bits")?,
                kinds,
                rs: p.ints("r")?,
                samples: p.one("samples")?,
                seed,
            };
            let rows = placement_sweep(&sweep)?;
            if kind == Kind::Fig4 {
                let mut t = Table::new(
                    &["kind", "r", "samples", "failures", "p_loss", "ci_lower", "ci_upper"],
                    vec![seed],
                    hash,
                )
                .meta("ci", "wilson-95");
                for l in rows {
                    t.push(vec![
                        l.kind.to_string(),
                        l.r.to_string(),
                        l.loss.trials.to_string(),
                        l.loss.successes.to_string(),
                        num(l.loss.estimate),
                        num(l.loss.lower),
                        num(l.loss.upper),
                    ]);
                }
                Ok(t)
            } else {
                let mut t = Table::new(
                    &["kind", "r", "failures", "lost_fraction_mean", "lost_fraction_se"],
                    vec![seed],
                    hash,
                );
                for l in rows {
                    t.push(vec![
                        l.kind.to_string(),
                        l.r.to_string(),
                        l.loss.successes.to_string(),
                        num(l.lost_fraction.mean),
                        num(l.lost_fraction.std_err),
                    ]);
                }
                Ok(t)
            }
        }
        Kind::Probes => {
            let mut t = Table::new(&["s", "expected_probes"], Vec::new(), hash);
            for s in p.ints("s")? {
                t.push(vec![s.to_string(), num(expected_probes::<f64>(s as u64))]);
            }
            Ok(t)
        }
        Kind::Collision => {
            let n: u32 = p.one("nodes")?;
            let bits: u32 = p.one("bits")?;
            let trials: u64 = p.one("trials")?;
            let seed: u64 = p.one("seed")?;
            if !(1..=64).contains(&bits) || n < 2 || trials == 0 {
                return Err(CliError::Config(
                    "collision needs 1 <= bits <= 64, nodes >= 2, trials >= 1".into(),
                ));
            }
            let rs = p.ints("r")?;
            if rs.iter().any(|&r| r >= n) {
                return Err(CliError::Config("r must be below nodes".into()));
            }
            let mut t = Table::new(
                &["r", "nodes", "bound", "trials", "coverage", "ci_lower", "ci_upper"],
                vec![seed],
                hash,
            )
            .meta("ci", "wilson-95");
            let k = 2f64.powi(bits as i32);
            for r in rs {
                let c = collision_coverage(r, n, bits, trials, seed);
                t.push(vec![
                    r.to_string(),
                    n.to_string(),
                    num(collision_bound(r, k, n as f64)),
                    c.trials.to_string(),
                    num(c.estimate),
                    num(c.lower),
                    num(c.upper),
                ]);
            }
            Ok(t)
        }
    }
}
