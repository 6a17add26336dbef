use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use admg_core::bench::{time_fit, Family};
use admg_core::data::{simulate, Dataset};
use admg_core::fitting::{fit_districts_parallel, FitOptions};
use admg_core::heads::head_tail_table;
use admg_core::moebius::Model;
use admg_core::select::{stepwise, Criterion, SelectOptions};
use admg_core::Admg;
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::warn;

mod report;

use report::{read_params, FitReport};

/// Exit status for a fit that stopped before meeting its tolerance.
const EXIT_NOT_CONVERGED: u8 = 3;
const EXIT_INPUT: u8 = 2;

#[derive(Parser)]
#[command(name = "admg", version, about = "Fit ADMG models to binary data")]
struct Cli {
    /// Worker threads for parallel fitting (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Json,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum CriterionArg {
    Bic,
    Aic,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Fixed,
    Large,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit a graph to data and report estimates and fit statistics.
    Fit {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 1000)]
        max_cycles: usize,
        /// Accept empty cells (the optimum may then lie on the boundary).
        #[arg(long)]
        allow_zero_counts: bool,
        #[arg(long, default_value_t = 1)]
        starts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "json")]
        out: OutFormat,
    },
    /// Greedy stepwise search over one-edge changes.
    Select {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "bic")]
        criterion: CriterionArg,
        /// Starting graph (default: no edges).
        #[arg(long)]
        start: Option<PathBuf>,
        #[arg(long)]
        allow_zero_counts: bool,
    },
    /// Test an m-separation statement.
    Msep {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        x: Vec<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        y: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        given: Vec<String>,
    },
    /// Heads, tails and parameters of a graph.
    Info {
        #[arg(long)]
        graph: PathBuf,
        /// Also dump the per-district M and P matrices.
        #[arg(long)]
        matrices: bool,
    },
    /// Draw data from a parametrized graph; writes aggregated CSV.
    Simulate {
        #[arg(long)]
        graph: PathBuf,
        /// JSON array of parameters in canonical order, or a fit report.
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Time fits over a growing graph family; writes CSV.
    Bench {
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[arg(long, default_value_t = 5)]
        k_max: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn read_graph(path: &Path) -> Result<Admg> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Admg::parse(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_data(path: &Path) -> Result<Dataset> {
    Dataset::from_path(path).with_context(|| format!("reading {}", path.display()))
}

fn run(cli: Cli) -> Result<u8> {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .context("configuring worker threads")?;
    }
    let mut stdout = io::stdout().lock();
    match cli.cmd {
        Cmd::Fit {
            graph,
            data,
            tol,
            max_cycles,
            allow_zero_counts,
            starts,
            seed,
            out,
        } => {
            let g = read_graph(&graph)?;
            let counts = read_data(&data)?.counts_for(&g)?;
            let opts = FitOptions {
                tol,
                max_cycles,
                allow_zero_counts,
                starts,
                seed,
                ..FitOptions::default()
            };
            let model = Model::new(&g);
            let res = fit_districts_parallel(&model, &counts, &opts)?;
            let rep = FitReport::new(&model, &res, &counts);
            match out {
                OutFormat::Json => writeln!(stdout, "{}", serde_json::to_string_pretty(&rep)?)?,
                OutFormat::Text => write!(stdout, "{}", rep.to_text())?,
            }
            if !res.converged {
                warn!("no convergence within {max_cycles} cycles");
                return Ok(EXIT_NOT_CONVERGED);
            }
        }
        Cmd::Select {
            data,
            criterion,
            start,
            allow_zero_counts,
        } => {
            let ds = read_data(&data)?;
            let start = match start {
                Some(p) => read_graph(&p)?,
                None => Admg::edgeless(ds.names.clone())?,
            };
            let counts = ds.counts_for(&start)?;
            let opts = SelectOptions {
                criterion: match criterion {
                    CriterionArg::Bic => Criterion::Bic,
                    CriterionArg::Aic => Criterion::Aic,
                },
                fit: FitOptions {
                    allow_zero_counts,
                    ..FitOptions::default()
                },
                ..SelectOptions::default()
            };
            let state = stepwise(&counts, &start, &opts)?;
            let mut g = start.clone();
            for (t, step) in state.history.iter().enumerate() {
                let mv = step.mv.map_or("start".to_string(), |m| m.describe(&g));
                writeln!(
                    stdout,
                    "step {t}\t{mv}\t{}={:.4}\tdeviance={:.4}\tdf={}",
                    opts.criterion, step.score, step.deviance, step.df
                )?;
                g = step.graph.clone();
            }
            writeln!(stdout)?;
            write!(stdout, "{}", state.graph.to_text())?;
        }
        Cmd::Msep { graph, x, y, given } => {
            let g = read_graph(&graph)?;
            let (x, y, z) = (g.vertex_set(&x)?, g.vertex_set(&y)?, g.vertex_set(&given)?);
            match g.m_connecting_walk(x, y, z)? {
                None => writeln!(stdout, "true")?,
                Some(walk) => writeln!(stdout, "false\n{}", g.fmt_walk(&walk))?,
            }
        }
        Cmd::Info { graph, matrices } => {
            let g = read_graph(&graph)?;
            let model = Model::new(&g);
            write!(stdout, "{}", head_tail_table(&g))?;
            writeln!(stdout, "\n{} parameters", model.n_params())?;
            for p in &model.params {
                writeln!(stdout, "  {}", p.display(&g))?;
            }
            if matrices {
                for d in &model.districts {
                    writeln!(stdout)?;
                    write!(stdout, "{}", d.dump(&g, &model))?;
                }
            }
        }
        Cmd::Simulate {
            graph,
            params,
            n,
            seed,
        } => {
            let g = read_graph(&graph)?;
            let model = Model::new(&g);
            let text = fs::read_to_string(&params)
                .with_context(|| format!("reading {}", params.display()))?;
            let q = read_params(&text, &model)?;
            let ds = simulate(&model, &q, n, seed)?;
            ds.write_csv(&mut stdout)?;
        }
        Cmd::Bench { family, k_max, seed } => {
            if k_max == 0 {
                bail!("--k-max must be at least 1");
            }
            let family = match family {
                FamilyArg::Fixed => Family::Fixed,
                FamilyArg::Large => Family::Large,
            };
            writeln!(stdout, "family,k,vertices,parameters,seconds,cycles,converged")?;
            for k in 1..=k_max {
                let t = time_fit(family, k, seed, &FitOptions::default())?;
                writeln!(
                    stdout,
                    "{family},{k},{},{},{:.6},{},{}",
                    t.n_vertices,
                    t.n_params,
                    t.elapsed.as_secs_f64(),
                    t.fit.cycles,
                    t.fit.converged
                )?;
                stdout.flush()?;
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
