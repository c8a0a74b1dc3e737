use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use optsort_cli::{
    comparison_table, exit_code, parse_range, parse_seeds, Reports, RunOptions, Session,
};
use optsort_core::pipeline::Algo;
use optsort_core::scenario::{generate, GenerateOptions, LayoutKind};
use optsort_core::tuner::{tuning_csv, TuneOptions};

#[derive(Parser)]
#[command(
    name = "optsort",
    version,
    about = "Sorting-center planning, allocation and simulation"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a synthetic scenario file.
    Generate(GenerateArgs),
    /// Plan, staff, allocate and simulate one configuration.
    Run(RunArgs),
    /// Raise C̄ from C_j until no parcel is rejected or a chute blocks.
    Tune(TuneArgs),
    /// Worst case of one C̄ over sampled worker efficiencies.
    Sweep(SweepArgs),
    /// GREEDY against OPTSORT at several C̄ values.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Optsort,
    Greedy,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Unrestricted,
    Restricted,
    #[value(name = "direct-restricted", alias = "direct+restricted")]
    DirectRestricted,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    /// Worker efficiency seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    workers: Option<usize>,
    /// Uniform efficiency bounds, `lo,hi`.
    #[arg(long, value_parser = parse_range)]
    efficiency_range: Option<(f64, f64)>,
    /// Waves to execute (default: all in the scenario).
    #[arg(long)]
    waves: Option<usize>,
    /// Allocate with the sampled efficiencies rather than nominal ones.
    #[arg(long)]
    known_efficiency: bool,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

impl Common {
    fn session(&self) -> Result<Session> {
        Session::open(
            &self.scenario,
            RunOptions {
                seed: self.seed,
                workers: self.workers,
                efficiency_range: self.efficiency_range,
                waves: self.waves,
                known_efficiency: self.known_efficiency,
                ..Default::default()
            },
        )
    }
}

/// Wrapped so clap takes a whole list as one value.
#[derive(Clone)]
struct Seeds(Vec<u64>);

fn seeds(s: &str) -> Result<Seeds, String> {
    parse_seeds(s).map(Seeds)
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 300)]
    destinations: usize,
    #[arg(long, default_value_t = 30)]
    chutes: usize,
    #[arg(long, default_value_t = 29_335)]
    load: u64,
    #[arg(long, value_enum, default_value = "unrestricted")]
    kind: KindArg,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    waves: usize,
    #[arg(long, default_value_t = 2523)]
    wave_size: usize,
    /// Arrivals are spread uniformly over this many seconds of each wave.
    #[arg(long, default_value_t = 2400.0)]
    arrival_span: f64,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "optsort")]
    algo: AlgoArg,
    /// Window cap on spiral chutes (default: C_j).
    #[arg(long)]
    cap_bar: Option<u32>,
    /// Write event traces per wave.
    #[arg(long)]
    emit_trace: bool,
}

#[derive(Args)]
struct TuneArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 5)]
    step: u32,
    #[arg(long, default_value_t = 10)]
    max_iters: usize,
    /// Certify against the worst of these efficiency seeds (`a..b` or a list).
    #[arg(long, value_parser = seeds)]
    seeds: Option<Seeds>,
    /// Move each chute on its own signals.
    #[arg(long)]
    per_chute: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    cap_bar: Option<u32>,
    #[arg(long, value_parser = seeds, default_value = "1..21")]
    seeds: Seeds,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_delimiter = ',', default_value = "50,55")]
    cap_bar: Vec<u32>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Generate(a) => {
            let kind = match a.kind {
                KindArg::Unrestricted => LayoutKind::Unrestricted,
                KindArg::Restricted => LayoutKind::Restricted,
                KindArg::DirectRestricted => LayoutKind::DirectRestricted,
            };
            let g = generate(&GenerateOptions {
                name: a.name.unwrap_or_else(|| kind.name().to_string()),
                destinations: a.destinations,
                chutes: a.chutes,
                load: a.load,
                kind,
                seed: a.seed,
                waves: a.waves,
                wave_size: a.wave_size,
                arrival_span_ms: (a.arrival_span * 1000.0).round() as u64,
                ..Default::default()
            })?;
            if let Some(w) = &g.warning {
                eprintln!("warning: {w}");
            }
            g.scenario
                .save(&a.out)
                .with_context(|| format!("writing {}", a.out.display()))?;
        }
        Cmd::Run(a) => {
            let s = a.common.session()?;
            let algo = match a.algo {
                AlgoArg::Optsort => Algo::Optsort,
                AlgoArg::Greedy => Algo::Greedy,
            };
            let out = s.run(algo, a.cap_bar, a.emit_trace)?;
            let row = s.row(algo, a.cap_bar, out.sim.kpis);
            Reports::new(Some(a.common.out_dir.clone()))?.run(&s, &out, &row)?;
            print!("{}", comparison_table(&[row]));
        }
        Cmd::Tune(a) => {
            let s = a.common.session()?;
            let opts = TuneOptions {
                step: a.step,
                max_iters: a.max_iters,
                per_chute: a.per_chute,
                ..Default::default()
            };
            let trace = s.tune(&opts, a.seeds.map_or_else(|| vec![a.common.seed], |s| s.0))?;
            Reports::new(Some(a.common.out_dir.clone()))?.tune(&trace, &s.tunable())?;
            print!("{}", tuning_csv(&trace, &s.tunable()));
            println!("stop: {}", trace.stop);
        }
        Cmd::Sweep(a) => {
            let s = a.common.session()?;
            let r = s.sweep(a.cap_bar, &a.seeds.0)?;
            Reports::new(Some(a.common.out_dir.clone()))?.sweep(&r)?;
            let w = &r.worst;
            println!(
                "worst over {} seeds: Rc {} Rj {} blockages {} St {:.3} min",
                r.per_seed.len(),
                w.recirculated,
                w.rejected,
                w.blockages,
                w.st_min()
            );
        }
        Cmd::Compare(a) => {
            let s = a.common.session()?;
            let rows = s.compare(&a.cap_bar)?;
            Reports::new(Some(a.common.out_dir.clone()))?.compare(&rows)?;
            print!("{}", comparison_table(&rows));
        }
    }
    Ok(())
}
