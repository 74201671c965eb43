//! Command-line entry points. Every subcommand reads one JSON config
//! (optionally patched by `--override`), echoes the effective config next to
//! its outputs, and reports through the shared exit-code contract:
//! 0 success, 1 usage/config, 2 numerical failure, 3 search without result.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::eplocator::{encircle_spec, find_ep_nd, EpLocation, EpSearchOptions};
use crate::error::{Error, Result};
use crate::harness::{evaluate_at, find_equilibrium, run_sweep, EquilibriumSearchOptions, SweepOptions};
use crate::interface::config::{parse_config, EpConfig, Format, RunConfig};
use crate::interface::emit::{fmt_float, write_atomic, write_json, write_plot_data, write_sweep_csv};
use crate::model::ParameterPoint;
use crate::spectral::TrackOptions;

#[derive(Debug, Parser)]
#[command(name = "eplab", version, about = "spectra, exceptional points and equilibrium of open-system effective Hamiltonians")]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Eigenvalues and observables at one parameter point
    Spectrum(RunArgs),
    /// Observables along a parameter path
    Sweep(RunArgs),
    /// Locate an exceptional point over two parameter knobs
    FindEp(RunArgs),
    /// Loop around a point in knob space and report the label permutation
    Encircle(RunArgs),
    /// Search a path for an equilibrium state
    Equilibrium(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON run configuration
    #[arg(long)]
    pub config: PathBuf,
    /// Dotted-path JSON edits, e.g. --override sweep.samples=500
    #[arg(long = "override", value_name = "PATH=JSON")]
    pub overrides: Vec<String>,
    /// Output directory (overrides output.dir from the config)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Force the serial sweep schedule
    #[arg(long)]
    pub serial: bool,
}

struct Outputs {
    dir: PathBuf,
    prefix: String,
    precision: usize,
    formats: Vec<Format>,
}

impl Outputs {
    fn prepare(cfg: &RunConfig) -> Result<Outputs> {
        std::fs::create_dir_all(&cfg.output.dir)?;
        let out = Outputs {
            dir: cfg.output.dir.clone(),
            prefix: cfg.output.prefix.clone(),
            precision: cfg.output.precision,
            formats: cfg.output.formats.clone(),
        };
        // effective config, after overrides
        write_json(&out.path("config", "json"), cfg)?;
        Ok(out)
    }

    fn path(&self, stem: &str, ext: &str) -> PathBuf {
        self.dir.join(format!("{}_{stem}.{ext}", self.prefix))
    }

    fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

fn require_ep(cfg: &RunConfig) -> Result<&EpConfig> {
    cfg.ep
        .as_ref()
        .ok_or_else(|| Error::Config("this subcommand needs an \"ep\" section".into()))
}

fn spectrum_point(cfg: &RunConfig) -> Result<ParameterPoint> {
    if let Some(p) = &cfg.point {
        if p.omegas.len() != cfg.system.n_channels() {
            return Err(Error::Config(format!(
                "point has {} omegas, system has {} channels",
                p.omegas.len(),
                cfg.system.n_channels()
            )));
        }
        return Ok(p.clone());
    }
    cfg.sweep
        .as_ref()
        .map(|s| s.path.points[0].clone())
        .ok_or_else(|| Error::Config("spectrum needs a \"point\" or a \"sweep\" section".into()))
}

/// Runs one parsed command line; the returned value is the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    let (args, cmd): (&RunArgs, &str) = match &cli.cmd {
        Cmd::Spectrum(a) => (a, "spectrum"),
        Cmd::Sweep(a) => (a, "sweep"),
        Cmd::FindEp(a) => (a, "find-ep"),
        Cmd::Encircle(a) => (a, "encircle"),
        Cmd::Equilibrium(a) => (a, "equilibrium"),
    };
    let mut cfg = parse_config(&args.config, &args.overrides)?;
    if let Some(dir) = &args.out {
        cfg.output.dir = dir.clone();
    }
    let out = Outputs::prepare(&cfg)?;
    match cmd {
        "spectrum" => spectrum(&cfg, &out),
        "sweep" => sweep(&cfg, &out, args.serial),
        "find-ep" => find_ep(&cfg, &out),
        "encircle" => encircle(&cfg, &out),
        "equilibrium" => equilibrium(&cfg, &out, args.serial),
        _ => unreachable!(),
    }
}

fn spectrum(cfg: &RunConfig, out: &Outputs) -> Result<i32> {
    let point = spectrum_point(cfg)?;
    let row = evaluate_at(&cfg.system, 0, &point, &cfg.thresholds)?;
    for i in 0..row.energies.len() {
        println!(
            "state {i}: E = {}, Gamma = {}, r = {}, H = {}",
            fmt_float(row.energies[i], out.precision),
            fmt_float(row.widths[i], out.precision),
            fmt_float(row.rigidities[i], out.precision),
            fmt_float(row.entropies[i], out.precision),
        );
    }
    println!(
        "defect = {}, min_gap = {}, equilibrium = {}",
        fmt_float(row.defect, out.precision),
        fmt_float(row.min_gap, out.precision),
        row.equilibrium
    );
    let rows = [row];
    if out.wants(Format::Csv) {
        write_sweep_csv(&out.path("spectrum", "csv"), &rows, out.precision)?;
    }
    if out.wants(Format::Json) {
        write_json(&out.path("spectrum", "json"), &rows)?;
    }
    Ok(0)
}

fn sweep(cfg: &RunConfig, out: &Outputs, serial: bool) -> Result<i32> {
    let sc = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("sweep needs a \"sweep\" section".into()))?;
    let opts = SweepOptions {
        parallel: sc.parallel && !serial,
        thresholds: cfg.thresholds,
    };
    let rows = run_sweep(&cfg.system, &sc.path, sc.samples, &opts)?;
    if out.wants(Format::Csv) {
        write_sweep_csv(&out.path("sweep", "csv"), &rows, out.precision)?;
    }
    if out.wants(Format::Json) {
        write_json(&out.path("sweep", "json"), &rows)?;
    }
    if out.wants(Format::Plot) {
        write_plot_data(&out.dir, &out.prefix, &rows, out.precision)?;
    }
    let hits = rows.iter().filter(|r| r.equilibrium).count();
    println!("{} samples, {} flagged as equilibrium", rows.len(), hits);
    Ok(0)
}

fn candidate_json(cand: &crate::eplocator::EpCandidate) -> serde_json::Value {
    let location = match &cand.location {
        EpLocation::Spec { point, knobs, x } => json!({
            "point": point,
            "knobs": knobs,
            "x": x,
        }),
        EpLocation::Direct { model, .. } => json!({
            "eps1": [model.eps1.re, model.eps1.im],
            "eps2": [model.eps2.re, model.eps2.im],
            "omega": [model.omega.re, model.omega.im],
        }),
    };
    json!({
        "location": location,
        "pair": [cand.pair.0, cand.pair.1],
        "min_gap": cand.min_gap,
        "self_orth": cand.self_orth,
        "verified": cand.verified,
    })
}

fn find_ep(cfg: &RunConfig, out: &Outputs) -> Result<i32> {
    let ep = require_ep(cfg)?;
    let opts = EpSearchOptions {
        verify_radius: ep.radius,
        verify_steps: ep.steps.max(64),
        ..EpSearchOptions::default()
    };
    let cand = find_ep_nd(
        &cfg.system,
        (ep.pair[0], ep.pair[1]),
        ep.knobs,
        &ep.base,
        ep.seed,
        &opts,
    )?;
    let EpLocation::Spec { x, .. } = &cand.location else { unreachable!() };
    println!(
        "exceptional point at knobs ({}, {}): min_gap = {:.3e}, self_orth = {:.3e}, verified = {}",
        fmt_float(x[0], out.precision),
        fmt_float(x[1], out.precision),
        cand.min_gap,
        cand.self_orth,
        cand.verified
    );
    if out.wants(Format::Json) || out.wants(Format::Csv) {
        write_json(&out.path("ep", "json"), &candidate_json(&cand))?;
    }
    Ok(0)
}

fn encircle(cfg: &RunConfig, out: &Outputs) -> Result<i32> {
    let ep = require_ep(cfg)?;
    let res = encircle_spec(
        &cfg.system,
        &ep.base,
        ep.knobs,
        ep.seed,
        ep.radius,
        ep.steps,
        &TrackOptions::default(),
    )?;
    println!("net permutation after one loop: {:?}", res.permutation);
    if out.wants(Format::Csv) || out.wants(Format::Plot) {
        let traj = &res.trajectories;
        let n = res.permutation.len();
        let mut text = String::from("step");
        for l in 0..n {
            text.push_str(&format!(",E_{l}_re,E_{l}_im"));
        }
        text.push('\n');
        for t in 0..traj.values[0].len() {
            text.push_str(&t.to_string());
            for l in 0..n {
                let v = traj.values[l][t];
                text.push_str(&format!(
                    ",{},{}",
                    fmt_float(v.re, out.precision),
                    fmt_float(v.im, out.precision)
                ));
            }
            text.push('\n');
        }
        write_atomic(&out.path("loop", "csv"), &text)?;
    }
    if out.wants(Format::Json) {
        write_json(&out.path("loop", "json"), &json!({ "permutation": res.permutation }))?;
    }
    Ok(0)
}

fn equilibrium(cfg: &RunConfig, out: &Outputs, serial: bool) -> Result<i32> {
    let sc = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("equilibrium needs a \"sweep\" section".into()))?;
    let opts = EquilibriumSearchOptions {
        sweep: SweepOptions {
            parallel: sc.parallel && !serial,
            thresholds: cfg.thresholds,
        },
        plateau_window: sc.plateau_window,
        plateau_delta: sc.plateau_delta,
    };
    match find_equilibrium(&cfg.system, &sc.path, sc.samples, &opts)? {
        Some(found) => {
            println!(
                "equilibrium at sample {} (a = {}): min entropy {}, defect {}",
                found.index,
                fmt_float(found.row.a, out.precision),
                fmt_float(
                    found.row.entropies.iter().copied().fold(f64::INFINITY, f64::min),
                    out.precision
                ),
                fmt_float(found.row.defect, out.precision),
            );
            if let Some(p) = &found.plateau {
                println!(
                    "entropy plateau from sample {} at {}",
                    p.onset_index,
                    fmt_float(p.saturated_value, out.precision)
                );
            }
            if out.wants(Format::Json) || out.wants(Format::Csv) {
                write_json(&out.path("equilibrium", "json"), &found)?;
            }
            Ok(0)
        }
        None => {
            eprintln!("no equilibrium state on the given path");
            Ok(3)
        }
    }
}
