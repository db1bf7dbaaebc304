//! `interlace`: seeded simulations, verification suites and kernel tables.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use interlace_core::bead::{kernel_k, sample_bead_path, BeadParams, K_MAX};
use interlace_core::brownian::{hbm_simulate, simulate_gamma_pair, GridPath};
use interlace_core::circle_discrete::{coupled_step, m_kernel, q_kernel};
use interlace_core::config::{AlcovePoint, DiscreteConfig};
use interlace_core::gt_line::{gt_step, GtPattern};
use interlace_core::interlace::{run_coupling, CouplingKind};
use interlace_core::matrix::DenseMatrix;
use interlace_core::rng;
use interlace_core::verify::{run_suite, Scale, Suite};
use interlace_core::Error;
use rand::Rng;

const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Default seed of the verification suites.
const VERIFY_SEED: u64 = 20_240_602;

#[derive(Parser, Debug)]
#[command(name = "interlace", version, about = "Interlaced particle systems on the circle")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = "INTERLACE_OUT_DIR", default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a verification suite and write its report.
    Verify {
        #[arg(long, value_parser = parse_suite)]
        suite: Suite,
        #[arg(long, default_value_t = VERIFY_SEED)]
        seed: u64,
        /// Use the full acceptance sample sizes.
        #[arg(long)]
        full: bool,
    },
    /// Simulate one of the processes and write its trajectory.
    Simulate {
        #[arg(value_enum)]
        kind: Kind,
        #[command(flatten)]
        params: SimParams,
    },
    /// Tabulate the bead-model correlation kernel over angle offsets.
    Kernel {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        /// Level difference r − s.
        #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
        r: i64,
        /// Number of grid points in [0, 2π).
        #[arg(long, default_value_t = 64)]
        points: usize,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    GtChain,
    CircleCoupling,
    Push,
    Block,
    Hbm,
    Gamma,
    BeadChain,
}

#[derive(Args, Debug, Clone)]
struct SimParams {
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Sites on the discrete circle.
    #[arg(long = "N", default_value_t = 6)]
    modulus: usize,
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    s: f64,
    #[arg(long = "T", default_value_t = 1.0)]
    horizon: f64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 100)]
    steps: usize,
    /// Independent runs of the chosen process.
    #[arg(long, default_value_t = 1)]
    replicas: usize,
    #[arg(long, default_value_t = 8)]
    levels: usize,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long)]
    seed: u64,
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Validation failures are usage errors; everything else is a run failure.
fn exit_code_for(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::InvalidConfig(_) | Error::Precondition(_) | Error::NotInterlaced(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<u8> {
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    match &cli.command {
        Command::Verify { suite, seed, full } => {
            let scale = if *full { Scale::Full } else { Scale::Quick };
            let report = run_suite(*suite, scale, *seed);
            let text = report.to_text();
            let name = format!("verify-{}.txt", format!("{suite:?}").to_lowercase());
            write(&cli.out.join(name), &text)?;
            print!("{text}");
            Ok(if report.passed() { 0 } else { 1 })
        }
        Command::Simulate { kind, params } => {
            let data = simulate(*kind, params)?;
            let stem = kind.to_possible_value().expect("named kind").get_name().to_string();
            let header = format!("# interlace {} --seed {}\n", rerun_args(*kind, params), params.seed);
            write(&cli.out.join(format!("{stem}.tsv")), &(header + &data))?;
            write(&cli.out.join(format!("{stem}.meta")), &metadata(*kind, params))?;
            Ok(0)
        }
        Command::Kernel { n, q, r, points } => {
            let p = BeadParams::new(*n, *q)?;
            let (table, tail) = kernel_table(&p, *r, *points);
            let header = format!("# interlace kernel --n {n} --q {q} --r {r} --points {points}\n");
            write(&cli.out.join("kernel.tsv"), &(header + &table))?;
            let mut meta = format!(
                "command=kernel\nversion={VERSION}\nn={n}\nq={q}\nr_minus_s={r}\npoints={points}\nk_max={K_MAX}\n"
            );
            let _ = writeln!(meta, "max_tail_bound={tail:e}");
            if tail > 1e-6 {
                let _ = writeln!(meta, "warning=truncation tail above 1e-6");
            }
            write(&cli.out.join("kernel.meta"), &meta)?;
            Ok(0)
        }
    }
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn rerun_args(kind: Kind, p: &SimParams) -> String {
    let name = kind.to_possible_value().expect("named kind").get_name().to_string();
    let args = match kind {
        Kind::GtChain => format!("--n {} --steps {} --replicas {}", p.n, p.steps, p.replicas),
        Kind::CircleCoupling => format!(
            "--n {} --N {} --steps {} --replicas {}",
            p.n, p.modulus, p.steps, p.replicas
        ),
        Kind::Push | Kind::Block => format!(
            "--n {} --r {} --s {} --steps {} --replicas {}",
            p.n, p.r, p.s, p.steps, p.replicas
        ),
        Kind::Hbm => format!("--n {} --T {} --dt {} --replicas {}", p.n, p.horizon, p.dt, p.replicas),
        Kind::Gamma => format!(
            "--n {} --s {} --T {} --dt {} --replicas {}",
            p.n, p.s, p.horizon, p.dt, p.replicas
        ),
        Kind::BeadChain => format!("--n {} --q {} --levels {} --samples {}", p.n, p.q, p.levels, p.samples),
    };
    format!("simulate {name} {args}")
}

fn metadata(kind: Kind, p: &SimParams) -> String {
    format!(
        "command=simulate\nkind={}\nversion={VERSION}\nseed={}\nn={}\nN={}\nq={}\nr={}\ns={}\nT={}\ndt={}\nsteps={}\nreplicas={}\nlevels={}\nsamples={}\nrng=chacha8 stream per replica\n",
        kind.to_possible_value().expect("named kind").get_name(),
        p.seed,
        p.n,
        p.modulus,
        p.q,
        p.r,
        p.s,
        p.horizon,
        p.dt,
        p.steps,
        p.replicas,
        p.levels,
        p.samples
    )
}

fn evenly_spaced(n: usize) -> anyhow::Result<AlcovePoint> {
    Ok(AlcovePoint::circle(
        (0..n).map(|i| TAU * i as f64 / n as f64).collect(),
    )?)
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(" ")
}

fn need(cond: bool, msg: &str) -> anyhow::Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidConfig(msg.into()).into())
    }
}

fn simulate(kind: Kind, p: &SimParams) -> anyhow::Result<String> {
    need(p.n >= 1, "--n must be at least 1")?;
    need(p.replicas >= 1, "--replicas must be at least 1")?;
    let mut out = String::new();
    match kind {
        Kind::GtChain => {
            out.push_str("replica\tstep\trow\tvalues\n");
            for rep in 0..p.replicas {
                let mut g = rng::replica(p.seed, rep as u64);
                let mut pat = GtPattern::null(p.n);
                for step in 0..=p.steps {
                    if step > 0 {
                        pat = gt_step(&pat, &mut g);
                    }
                    for (k, row) in pat.rows().iter().enumerate() {
                        let _ = writeln!(out, "{rep}\t{step}\t{}\t{}", k + 1, join(row));
                    }
                }
            }
        }
        Kind::CircleCoupling => {
            need(p.n < p.modulus, "--n must be smaller than --N")?;
            let q = q_kernel(p.n, p.modulus)?;
            let mk = m_kernel(p.n, p.modulus)?;
            let idx = &q.index;
            let y0 = DiscreteConfig::new((0..p.n).collect(), p.modulus)?;
            let yi = idx.index_of(&y0).expect("enumerated state");
            out.push_str("replica\tstep\tx\ty\n");
            for rep in 0..p.replicas {
                let mut g = rng::replica(p.seed, rep as u64);
                let mut xi = categorical(&mk.kernel.matrix, yi, &mut g);
                let mut y = y0.clone();
                for step in 0..=p.steps {
                    if step > 0 {
                        let xn = categorical(&q.matrix, xi, &mut g);
                        y = coupled_step(idx.state(xi), &y, idx.state(xn))?;
                        xi = xn;
                    }
                    let _ = writeln!(
                        out,
                        "{rep}\t{step}\t{}\t{}",
                        join(idx.state(xi).sites()),
                        join(y.sites())
                    );
                }
            }
        }
        Kind::Push | Kind::Block => {
            let coupling = if kind == Kind::Push {
                CouplingKind::Push
            } else {
                CouplingKind::Block
            };
            need(p.s > 0.0 && p.s < TAU, "--s must lie in (0, 2π)")?;
            need(p.r > 0.0 && p.r < TAU, "--r must lie in (0, 2π)")?;
            let y0 = evenly_spaced(p.n)?;
            out.push_str("replica\tstep\tprocess\tcoords\n");
            for rep in 0..p.replicas {
                let run = run_coupling(coupling, &y0, p.r, p.s, p.steps, &mut rng::replica(p.seed, rep as u64))?;
                for (k, (x, y)) in run.x.iter().zip(&run.y).enumerate() {
                    let _ = writeln!(out, "{rep}\t{k}\tx\t{}", join(x.coords()));
                    let _ = writeln!(out, "{rep}\t{k}\ty\t{}", join(y.coords()));
                }
            }
        }
        Kind::Hbm => {
            let x0 = evenly_spaced(p.n)?;
            out.push_str("replica\tprocess\ttime\tcomponent\tvalue\n");
            for rep in 0..p.replicas {
                let path = hbm_simulate(&x0, p.horizon, p.dt, &mut rng::replica(p.seed, rep as u64))?;
                push_path(&mut out, rep, "x", &path);
            }
        }
        Kind::Gamma => {
            need(p.s > 0.0 && p.s < TAU, "--s must lie in (0, 2π)")?;
            let y0 = evenly_spaced(p.n)?;
            out.push_str("replica\tprocess\ttime\tcomponent\tvalue\n");
            for rep in 0..p.replicas {
                let (x, y) = simulate_gamma_pair(&y0, p.s, p.horizon, p.dt, &mut rng::replica(p.seed, rep as u64))?;
                push_path(&mut out, rep, "x", &x);
                push_path(&mut out, rep, "y", &y);
            }
        }
        Kind::BeadChain => {
            need(p.levels >= 1, "--levels must be at least 1")?;
            need(p.n <= 6, "--n must be at most 6 for the CUE start")?;
            let params = BeadParams::new(p.n, p.q)?;
            let paths = rng::par_replicas(p.seed, p.samples, |_, g| sample_bead_path(&params, p.levels, g))?;
            out.push_str("sample\tlevel\tangles\n");
            for (i, path) in paths.iter().enumerate() {
                for (r, x) in path.levels().iter().enumerate() {
                    let _ = writeln!(out, "{i}\t{}\t{}", r + 1, join(x.angles()));
                }
            }
        }
    }
    Ok(out)
}

fn push_path(out: &mut String, rep: usize, name: &str, path: &GridPath) {
    for line in path.to_text().lines().skip(1) {
        let _ = writeln!(out, "{rep}\t{name}\t{line}");
    }
}

fn categorical<R: Rng>(m: &DenseMatrix<f64>, row: usize, g: &mut R) -> usize {
    let mut u: f64 = g.random();
    let probs = m.row(row);
    for (j, &w) in probs.iter().enumerate() {
        if u < w {
            return j;
        }
        u -= w;
    }
    probs.iter().rposition(|&w| w > 0.0).expect("stochastic row")
}

/// Rows `t  Re K  Im K  tail` for `b − a = t` on `points` equally spaced offsets.
fn kernel_table(p: &BeadParams, dr: i64, points: usize) -> (String, f64) {
    let mut out = String::from("t\tre\tim\ttail\n");
    let mut worst = 0.0f64;
    for j in 0..points {
        let t = TAU * j as f64 / points as f64;
        let k = kernel_k(dr, 0.0, 0, t, p);
        worst = worst.max(k.tail_bound);
        let _ = writeln!(out, "{t}\t{}\t{}\t{}", k.value.re, k.value.im, k.tail_bound);
    }
    (out, worst)
}
