use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use sbc_core::acopf::{self, AcopfOptions, PowerCase};
use sbc_core::batch::{run_batch, ConfigSpec, InstanceKind, InstanceSpec, Manifest};
use sbc_core::boxqp::{self, BoxQpInstance};
use sbc_core::branch::BranchRule;
use sbc_core::cuts::{node_cuts, RelaxKind};
use sbc_core::driver::{self, Outcome, Status};
use sbc_core::lifted::LiftedModel;
use sbc_core::relax::{build_csdp, sdpa};
use sbc_core::tighten::{tighten_box, tighten_node, TightenResult};

#[derive(Parser)]
#[command(name = "sbc", version, about = "Spatial branch-and-cut for complex QCQP")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve an optimal power flow case in MATPOWER format.
    SolveAcopf {
        case: PathBuf,
        #[command(flatten)]
        opts: SolveOpts,
    },
    /// Solve a box-constrained QP.
    SolveBoxqp {
        file: PathBuf,
        #[command(flatten)]
        opts: SolveOpts,
    },
    /// Run every config of a manifest on every instance.
    Batch {
        manifest: PathBuf,
        /// Directory for batch.json, runs.csv and profiles.csv.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Concurrent runs (overrides the manifest).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Write the root relaxation of an instance in SDPA sparse format.
    ExportSdpa {
        instance: PathBuf,
        #[arg(long)]
        relax: Option<RelaxKind>,
        /// Output file (stdout if omitted).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SolveOpts {
    #[arg(long)]
    relax: Option<RelaxKind>,
    #[arg(long)]
    rule: Option<BranchRule>,
    /// Relative optimality gap.
    #[arg(long)]
    gap: Option<f64>,
    /// Node limit.
    #[arg(long)]
    nodes: Option<usize>,
    /// Time limit in seconds.
    #[arg(long)]
    time: Option<f64>,
    /// Depth limit.
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write the NDJSON search log here.
    #[arg(long)]
    log: Option<PathBuf>,
}

impl SolveOpts {
    fn spec(&self) -> ConfigSpec {
        ConfigSpec {
            name: "cli".into(),
            relax: self.relax,
            rule: self.rule,
            gap: self.gap,
            nodes: self.nodes,
            time: self.time,
            depth: self.depth,
            seed: self.seed,
            threads: self.threads,
        }
    }
}

type CliResult<T> = Result<T, String>;

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn emit(opts: &SolveOpts, out: &Outcome, solution: Value) -> CliResult<ExitCode> {
    let doc = json!({"report": out.report, "solution": solution});
    let text = serde_json::to_string_pretty(&doc).map_err(|e| e.to_string())?;
    match &opts.report {
        Some(p) => write(p, &text)?,
        None => println!("{text}"),
    }
    if let Some(p) = &opts.log {
        write(p, &out.log_text())?;
    }
    eprintln!(
        "{:?}: glb {:.6} gub {:.6} gap {:.3e} nodes {} time {:.2}s",
        out.report.status, out.report.glb, out.report.gub, out.report.gap, out.report.nodes, out.report.time
    );
    Ok(if out.report.status == Status::Optimal { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn acopf_solution(pc: &PowerCase, model: &LiftedModel, out: &Outcome) -> Value {
    let Some(inc) = &out.incumbent else { return Value::Null };
    let v = acopf::voltages(model, &inc.y);
    let lay = acopf::aux_layout(pc);
    let base = pc.base_mva;
    json!({
        "vm": (0..v.len()).map(|i| v.re[i].hypot(v.im[i])).collect::<Vec<_>>(),
        "va_deg": (0..v.len()).map(|i| v.im[i].atan2(v.re[i]).to_degrees()).collect::<Vec<_>>(),
        "pg_mw": (0..pc.gens.len()).map(|g| inc.aux[lay.p(g)] * base).collect::<Vec<_>>(),
        "qg_mvar": (0..pc.gens.len()).map(|g| inc.aux[lay.q(g)] * base).collect::<Vec<_>>(),
        "objective": inc.objective,
    })
}

fn solve_acopf(case: &Path, opts: &SolveOpts) -> CliResult<ExitCode> {
    let pc = acopf::parse_matpower(&read(case)?).map_err(|e| e.to_string())?;
    let cfg = opts.spec().apply(acopf::default_config());
    let (model, out) = acopf::solve_acopf(&pc, &cfg).map_err(|e| e.to_string())?;
    let sol = acopf_solution(&pc, &model, &out);
    emit(opts, &out, sol)
}

fn solve_boxqp(file: &Path, opts: &SolveOpts) -> CliResult<ExitCode> {
    let b = boxqp::parse_boxqp(&read(file)?).map_err(|e| e.to_string())?;
    let cfg = opts.spec().apply(boxqp::default_config());
    let out = driver::solve_qcqp(&boxqp::boxqp_to_model(&b), &cfg).map_err(|e| e.to_string())?;
    let sol = out.incumbent.as_ref().map_or(Value::Null, |i| json!({"x": i.x.re.clone(), "objective": i.objective}));
    emit(opts, &out, sol)
}

fn batch(manifest: &Path, out_dir: &Path, jobs: Option<usize>) -> CliResult<ExitCode> {
    let mut m = Manifest::load(manifest).map_err(|e| e.to_string())?;
    if let Some(j) = jobs {
        m.jobs = j.max(1);
    }
    let r = run_batch(&m);
    std::fs::create_dir_all(out_dir).map_err(|e| format!("{}: {e}", out_dir.display()))?;
    write(&out_dir.join("batch.json"), &r.to_json().map_err(|e| e.to_string())?)?;
    write(&out_dir.join("runs.csv"), &r.runs_csv().map_err(|e| e.to_string())?)?;
    write(&out_dir.join("profiles.csv"), &r.profiles_csv().map_err(|e| e.to_string())?)?;
    for s in &r.summary {
        eprintln!("{}: solved {}/{} ({} failed)", s.config, s.solved, s.instances, s.failed);
    }
    let all = r.runs.iter().all(|x| x.solved);
    Ok(if all { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn root_model(path: &Path, relax: Option<RelaxKind>) -> CliResult<(LiftedModel, RelaxKind)> {
    let spec = InstanceSpec { name: None, path: path.to_path_buf(), kind: None };
    let text = read(path)?;
    match spec.kind() {
        InstanceKind::Matpower => {
            let pc = acopf::parse_matpower(&text).map_err(|e| e.to_string())?;
            let kind = relax.unwrap_or(acopf::default_config().relax);
            let m = acopf::build_lacopf(&pc, &AcopfOptions::for_relaxation(kind)).map_err(|e| e.to_string())?;
            Ok((m, kind))
        }
        InstanceKind::Boxqp => {
            let b: BoxQpInstance = boxqp::parse_boxqp(&text).map_err(|e| e.to_string())?;
            let kind = relax.unwrap_or(boxqp::default_config().relax);
            let p = tighten_box(&boxqp::boxqp_to_model(&b)).ok_or("instance is infeasible")?;
            Ok((LiftedModel::from_qcqp(&p).map_err(|e| e.to_string())?, kind))
        }
    }
}

fn export_sdpa(path: &Path, relax: Option<RelaxKind>, output: Option<&Path>) -> CliResult<ExitCode> {
    let (model, kind) = root_model(path, relax)?;
    let mut eb = model.root_bounds.clone();
    if tighten_node(&model, &mut eb) == TightenResult::Infeasible {
        return Err("root bounds are infeasible".into());
    }
    let cuts = node_cuts(&model, &eb, kind);
    let (cp, _) = build_csdp(&model, &eb, &cuts).ok_or("root bounds are infeasible")?;
    let text = sdpa::export(&cp.to_standard());
    match output {
        Some(p) => write(p, &text)?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match &cli.cmd {
        Cmd::SolveAcopf { case, opts } => solve_acopf(case, opts),
        Cmd::SolveBoxqp { file, opts } => solve_boxqp(file, opts),
        Cmd::Batch { manifest, out_dir, jobs } => batch(manifest, out_dir, *jobs),
        Cmd::ExportSdpa { instance, relax, output } => export_sdpa(instance, *relax, output.as_deref()),
    };
    r.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(2)
    })
}
