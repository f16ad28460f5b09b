//! Batch runs over an instance × configuration grid with performance
//! profiles.
//!
//! A manifest is JSON:
//!
//! ```json
//! {
//!   "instances": [{"name": "spar-a", "path": "a.txt"}, {"path": "case3.m", "kind": "matpower"}],
//!   "configs": [{"name": "mvsb", "rule": "mvsb"}, {"name": "rbeb", "rule": "rbeb", "gap": 1e-4}],
//!   "jobs": 2
//! }
//! ```
//!
//! Paths are relative to the manifest. `kind` defaults to `matpower` for
//! `.m` files and `boxqp` otherwise. Unset config fields take the defaults
//! of the instance kind.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acopf::{self, PowerCase};
use crate::boxqp::{self, BoxQpInstance};
use crate::branch::BranchRule;
use crate::cuts::RelaxKind;
use crate::driver::{self, Config, Outcome, Status};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceKind {
    Boxqp,
    Matpower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub path: PathBuf,
    #[serde(default)]
    pub kind: Option<InstanceKind>,
}

impl InstanceSpec {
    pub fn kind(&self) -> InstanceKind {
        self.kind.unwrap_or(match self.path.extension().and_then(|e| e.to_str()) {
            Some("m") => InstanceKind::Matpower,
            _ => InstanceKind::Boxqp,
        })
    }

    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            self.path.file_stem().map_or_else(|| self.path.display().to_string(), |s| s.to_string_lossy().into_owned())
        })
    }
}

/// Overrides applied on top of the per-kind defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigSpec {
    pub name: String,
    #[serde(default)]
    pub relax: Option<RelaxKind>,
    #[serde(default)]
    pub rule: Option<BranchRule>,
    #[serde(default)]
    pub gap: Option<f64>,
    #[serde(default)]
    pub nodes: Option<usize>,
    /// Seconds.
    #[serde(default)]
    pub time: Option<f64>,
    #[serde(default)]
    pub depth: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub threads: Option<usize>,
}

impl ConfigSpec {
    pub fn apply(&self, mut cfg: Config) -> Config {
        if let Some(v) = self.relax {
            cfg.relax = v;
        }
        if let Some(v) = self.rule {
            cfg.rule = v;
        }
        if let Some(v) = self.gap {
            cfg.gap = v;
        }
        if let Some(v) = self.nodes {
            cfg.max_nodes = v;
        }
        if let Some(v) = self.time {
            cfg.time_limit = Some(Duration::from_secs_f64(v.max(0.0)));
        }
        if let Some(v) = self.depth {
            cfg.max_depth = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.threads {
            cfg.threads = v.max(1);
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub instances: Vec<InstanceSpec>,
    pub configs: Vec<ConfigSpec>,
    /// Concurrent runs.
    #[serde(default = "one")]
    pub jobs: usize,
}

fn one() -> usize {
    1
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Self> {
        let m: Manifest = serde_json::from_str(text)?;
        if m.configs.is_empty() {
            return Err(Error::Invalid("manifest lists no configs".into()));
        }
        let mut names: Vec<&str> = m.configs.iter().map(|c| c.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Invalid("duplicate config name".into()));
        }
        Ok(m)
    }

    /// Reads a manifest and resolves instance paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut m = Self::parse(&std::fs::read_to_string(path)?)?;
        let dir = path.parent().unwrap_or(Path::new(""));
        for inst in &mut m.instances {
            if inst.path.is_relative() {
                inst.path = dir.join(&inst.path);
            }
        }
        Ok(m)
    }
}

#[derive(Debug, Clone)]
pub enum Instance {
    BoxQp(BoxQpInstance),
    Acopf(PowerCase),
}

impl Instance {
    pub fn load(spec: &InstanceSpec) -> Result<Self> {
        let text = std::fs::read_to_string(&spec.path)?;
        Ok(match spec.kind() {
            InstanceKind::Boxqp => Instance::BoxQp(boxqp::parse_boxqp(&text)?),
            InstanceKind::Matpower => Instance::Acopf(acopf::parse_matpower(&text)?),
        })
    }

    pub fn default_config(&self) -> Config {
        match self {
            Instance::BoxQp(_) => boxqp::default_config(),
            Instance::Acopf(_) => acopf::default_config(),
        }
    }

    pub fn solve(&self, cfg: &Config) -> Result<Outcome> {
        match self {
            Instance::BoxQp(b) => driver::solve_qcqp(&boxqp::boxqp_to_model(b), cfg),
            Instance::Acopf(pc) => acopf::solve_acopf(pc, cfg).map(|(_, o)| o),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance: String,
    pub config: String,
    pub status: Option<Status>,
    pub solved: bool,
    pub glb: f64,
    pub gub: f64,
    pub gap: f64,
    pub nodes: usize,
    pub depth: usize,
    pub time: f64,
    pub lbtime: f64,
    pub ubtime: f64,
    pub error: Option<String>,
}

impl RunRecord {
    fn failed(instance: &str, config: &str, msg: String) -> Self {
        Self {
            instance: instance.into(),
            config: config.into(),
            status: None,
            solved: false,
            glb: f64::NEG_INFINITY,
            gub: f64::INFINITY,
            gap: f64::INFINITY,
            nodes: 0,
            depth: 0,
            time: 0.0,
            lbtime: 0.0,
            ubtime: 0.0,
            error: Some(msg),
        }
    }

    fn from_outcome(instance: &str, config: &str, o: &Outcome) -> Self {
        let r = &o.report;
        Self {
            instance: instance.into(),
            config: config.into(),
            status: Some(r.status),
            solved: r.solved,
            glb: r.glb,
            gub: r.gub,
            gap: r.gap,
            nodes: r.nodes,
            depth: r.depth,
            time: r.time,
            lbtime: r.lbtime,
            ubtime: r.ubtime,
            error: None,
        }
    }
}

/// Means over the instances a config solved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSummary {
    pub config: String,
    pub instances: usize,
    pub solved: usize,
    pub failed: usize,
    pub mean_time: Option<f64>,
    pub mean_lbtime: Option<f64>,
    pub mean_ubtime: Option<f64>,
    pub mean_nodes: Option<f64>,
    pub mean_depth: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub log2_ratio: f64,
    pub fraction: f64,
}

/// Step function: fraction of instances whose ratio to the best config is
/// at most `2^x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub metric: String,
    pub config: String,
    pub points: Vec<ProfilePoint>,
}

impl Profile {
    pub fn fraction_at(&self, log2_ratio: f64) -> f64 {
        self.points.iter().take_while(|p| p.log2_ratio <= log2_ratio).last().map_or(0.0, |p| p.fraction)
    }
}

/// `values[c][i]` is config `c`'s measure on instance `i`, `None` if it did
/// not solve it. Returns one curve per config; the denominator is the
/// number of instances.
pub fn performance_profile(values: &[Vec<Option<f64>>]) -> Vec<Vec<ProfilePoint>> {
    let n = values.first().map_or(0, Vec::len);
    let best: Vec<Option<f64>> = (0..n)
        .map(|i| values.iter().filter_map(|v| v[i]).map(|x| x.max(1e-9)).reduce(f64::min))
        .collect();
    values
        .iter()
        .map(|v| {
            let mut r: Vec<f64> = (0..n)
                .filter_map(|i| Some((v[i]?.max(1e-9) / best[i]?).log2().max(0.0)))
                .collect();
            r.sort_by(f64::total_cmp);
            let mut pts: Vec<ProfilePoint> = Vec::new();
            for (k, x) in r.iter().enumerate() {
                let fraction = (k + 1) as f64 / n as f64;
                match pts.last_mut() {
                    Some(p) if p.log2_ratio == *x => p.fraction = fraction,
                    _ => pts.push(ProfilePoint { log2_ratio: *x, fraction }),
                }
            }
            pts
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub runs: Vec<RunRecord>,
    pub summary: Vec<ConfigSummary>,
    pub profiles: Vec<Profile>,
}

#[derive(Serialize)]
struct ProfileRow<'a> {
    metric: &'a str,
    config: &'a str,
    log2_ratio: f64,
    fraction: f64,
}

impl BatchReport {
    /// Builds summaries and time/node profiles from run records listed
    /// instance-major in `instances × configs` order.
    pub fn from_runs(runs: Vec<RunRecord>, configs: &[String]) -> Self {
        let nc = configs.len();
        let ni = if nc == 0 { 0 } else { runs.len() / nc };
        let summary = configs
            .iter()
            .enumerate()
            .map(|(c, name)| {
                let mine: Vec<&RunRecord> = (0..ni).map(|i| &runs[i * nc + c]).collect();
                let ok: Vec<&&RunRecord> = mine.iter().filter(|r| r.solved).collect();
                let mean = |f: &dyn Fn(&RunRecord) -> f64| {
                    (!ok.is_empty()).then(|| ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64)
                };
                ConfigSummary {
                    config: name.clone(),
                    instances: ni,
                    solved: ok.len(),
                    failed: mine.iter().filter(|r| r.error.is_some()).count(),
                    mean_time: mean(&|r| r.time),
                    mean_lbtime: mean(&|r| r.lbtime),
                    mean_ubtime: mean(&|r| r.ubtime),
                    mean_nodes: mean(&|r| r.nodes as f64),
                    mean_depth: mean(&|r| r.depth as f64),
                }
            })
            .collect();
        let mut profiles = Vec::new();
        for (metric, f) in [("time", (|r: &RunRecord| r.time) as fn(&RunRecord) -> f64), ("nodes", |r| r.nodes as f64)] {
            let values: Vec<Vec<Option<f64>>> = (0..nc)
                .map(|c| (0..ni).map(|i| &runs[i * nc + c]).map(|r| r.solved.then(|| f(r))).collect())
                .collect();
            for (c, points) in performance_profile(&values).into_iter().enumerate() {
                profiles.push(Profile { metric: metric.into(), config: configs[c].clone(), points });
            }
        }
        Self { runs, summary, profiles }
    }

    pub fn profiles_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for p in &self.profiles {
            for pt in &p.points {
                w.serialize(ProfileRow { metric: &p.metric, config: &p.config, log2_ratio: pt.log2_ratio, fraction: pt.fraction })
                    .map_err(csv_err)?;
            }
        }
        into_string(w)
    }

    pub fn runs_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.runs {
            w.serialize(r).map_err(csv_err)?;
        }
        into_string(w)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Invalid(format!("csv: {e}"))
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Invalid(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "panic".into())
}

/// Runs every config on every instance. Load and solve failures are
/// recorded per run.
pub fn run_batch(m: &Manifest) -> BatchReport {
    let loaded: Vec<(String, std::result::Result<Instance, String>)> = m
        .instances
        .iter()
        .map(|s| (s.display_name(), Instance::load(s).map_err(|e| e.to_string())))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..loaded.len()).flat_map(|i| (0..m.configs.len()).map(move |c| (i, c))).collect();
    let run = |&(i, c): &(usize, usize)| -> RunRecord {
        let (name, inst) = &loaded[i];
        let spec = &m.configs[c];
        let inst = match inst {
            Ok(x) => x,
            Err(e) => return RunRecord::failed(name, &spec.name, e.clone()),
        };
        let cfg = spec.apply(inst.default_config());
        match catch_unwind(AssertUnwindSafe(|| inst.solve(&cfg))) {
            Ok(Ok(o)) => RunRecord::from_outcome(name, &spec.name, &o),
            Ok(Err(e)) => RunRecord::failed(name, &spec.name, e.to_string()),
            Err(p) => RunRecord::failed(name, &spec.name, panic_message(p)),
        }
    };
    let runs: Vec<RunRecord> = if m.jobs > 1 {
        match rayon::ThreadPoolBuilder::new().num_threads(m.jobs).build() {
            Ok(pool) => pool.install(|| jobs.par_iter().map(run).collect()),
            Err(_) => jobs.iter().map(run).collect(),
        }
    } else {
        jobs.iter().map(run).collect()
    };
    let names: Vec<String> = m.configs.iter().map(|c| c.name.clone()).collect();
    BatchReport::from_runs(runs, &names)
}
