use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gcgm::config::{Experiment, ExperimentConfig};
use gcgm::experiment::{self, RunReport};
use gcgm::output::{self, ReferenceJson};
use gcgm::Error;
use gcgm_core::{rate_slope, ReferenceOptions};

#[derive(Parser)]
#[command(name = "gcgm", version, about = "Generalized conditional gradient experiments with gap-safe screening")]
struct Cli {
    /// key=value settings applied before any flag
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Gaussian design with all-ones labels, or a dense CSV via --data
    Synthetic {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<String>,
        /// reference JSON used to fill in δ and identified_at
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Two-digit MNIST classification from IDX files
    Mnist {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        mnist: MnistFiles,
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Long-run reference solution for every grid point
    Reference {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        mnist: MnistFiles,
        #[arg(long, value_parser = ["synthetic", "mnist"])]
        experiment: Option<String>,
        #[arg(long)]
        data: Option<String>,
        #[arg(long, default_value_t = 1_000_000)]
        ref_iters: usize,
        #[arg(long, default_value_t = 1e-10)]
        ref_tol: f64,
    },
    /// Residuals of a fresh run against a reference JSON
    Residuals {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        mnist: MnistFiles,
        #[arg(long, value_parser = ["synthetic", "mnist"])]
        experiment: Option<String>,
        #[arg(long)]
        data: Option<String>,
        #[arg(long)]
        reference: PathBuf,
    },
    /// Log-log slope of one CSV column against t
    Rate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "objective_error")]
        column: String,
        #[arg(long, default_value_t = 100.0)]
        t_lo: f64,
        #[arg(long, default_value_t = 10_000.0)]
        t_hi: f64,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    d: Option<String>,
    #[arg(long, value_parser = ["logistic", "quadratic"])]
    loss: Option<String>,
    #[arg(long, value_parser = ["power", "log-barrier", "indicator"])]
    penalty: Option<String>,
    /// comma-separated exponents
    #[arg(long)]
    alpha: Option<String>,
    /// comma-separated weights
    #[arg(long)]
    lambda: Option<String>,
    /// domain cap of the log-barrier and indicator penalties
    #[arg(long)]
    capacity: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    /// magnification C of the atomic set
    #[arg(long)]
    scale: Option<String>,
    /// explicit atom list (`atoms <m> <d>` file)
    #[arg(long)]
    atoms: Option<String>,
    #[arg(long)]
    iters: Option<String>,
    #[arg(long)]
    gap_tol: Option<String>,
    #[arg(long, value_parser = ["prune", "report", "off"])]
    screen: Option<String>,
    #[arg(long)]
    screen_every: Option<String>,
    #[arg(long, value_parser = ["2t1", "4t2"])]
    theta: Option<String>,
    #[arg(long)]
    trace_every: Option<String>,
    /// evaluate σ for screening over every atom
    #[arg(long)]
    conservative: bool,
    /// record wall-clock seconds in elapsed_s (breaks byte-reproducibility)
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct MnistFiles {
    #[arg(long)]
    images: Option<String>,
    #[arg(long)]
    labels: Option<String>,
    #[arg(long)]
    test_images: Option<String>,
    #[arg(long)]
    test_labels: Option<String>,
    /// the digits labelled -1 and +1
    #[arg(long)]
    digits: Option<String>,
}

impl Common {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        let opts = [
            ("seed", &self.seed),
            ("n", &self.n),
            ("d", &self.d),
            ("loss", &self.loss),
            ("penalty", &self.penalty),
            ("alpha", &self.alpha),
            ("lambda", &self.lambda),
            ("capacity", &self.capacity),
            ("beta", &self.beta),
            ("scale", &self.scale),
            ("atoms", &self.atoms),
            ("iters", &self.iters),
            ("gap_tol", &self.gap_tol),
            ("screen", &self.screen),
            ("screen_every", &self.screen_every),
            ("theta", &self.theta),
            ("trace_every", &self.trace_every),
            ("out", &self.out),
        ];
        let mut pairs: Vec<(&'static str, String)> =
            opts.into_iter().filter_map(|(k, v)| v.clone().map(|v| (k, v))).collect();
        if self.conservative {
            pairs.push(("conservative", "true".into()));
        }
        if self.timing {
            pairs.push(("timing", "true".into()));
        }
        pairs
    }
}

impl MnistFiles {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        [
            ("images", &self.images),
            ("labels", &self.labels),
            ("test_images", &self.test_images),
            ("test_labels", &self.test_labels),
            ("digits", &self.digits),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.clone().map(|v| (k, v)))
        .collect()
    }
}

fn configure(
    file: Option<&PathBuf>,
    experiment: Experiment,
    pairs: Vec<(&'static str, String)>,
) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = file {
        cfg.apply_file(path)?;
    }
    cfg.experiment = experiment;
    for (k, v) in pairs {
        cfg.set(k, &v)?;
    }
    fs::create_dir_all(&cfg.out).map_err(|e| Error::Io { path: cfg.out.clone(), source: e })?;
    Ok(cfg)
}

fn experiment_of(file: Option<&PathBuf>, flag: Option<&str>) -> Result<Experiment, Error> {
    let mut probe = ExperimentConfig::default();
    if let Some(path) = file {
        probe.apply_file(path)?;
    }
    if let Some(name) = flag {
        probe.set("experiment", name)?;
    }
    Ok(probe.experiment)
}

fn load_reference(path: Option<&PathBuf>) -> Result<Option<ReferenceJson>, Error> {
    path.map(|p| output::read_reference(p)).transpose()
}

fn single_point(cfg: &ExperimentConfig) -> Result<gcgm::GridPoint, Error> {
    match cfg.grid().as_slice() {
        [p] => Ok(*p),
        _ => Err(Error::Usage("a reference applies to a single (alpha, lambda) point".into())),
    }
}

fn run_experiment(cfg: ExperimentConfig, reference: Option<PathBuf>) -> Result<(), Error> {
    let inst = experiment::load_instance(&cfg)?;
    for (path, sha) in &inst.sources {
        println!("# sha256 {sha}  {}", path.display());
    }
    let reference = load_reference(reference.as_ref())?;
    if let Some(r) = &reference {
        let point = single_point(&cfg)?;
        let penalty = experiment::build_penalty(&cfg, point)?;
        let got = experiment::fingerprint(&inst.loss, &penalty, &inst.set);
        if got != r.fingerprint {
            return Err(Error::FingerprintMismatch { expected: r.fingerprint.clone(), got });
        }
    }
    let reports = experiment::sweep(&cfg, &inst)?;
    for report in &reports {
        experiment::write_run(&cfg.out, &inst, report, reference.as_ref())?;
    }
    let manifest = experiment::manifest_csv(&reports);
    output::write(&cfg.out.join(format!("{}.runs.csv", cfg.hash())), &manifest)?;
    print!("{manifest}");
    first_failure(reports)
}

fn first_failure(reports: Vec<RunReport>) -> Result<(), Error> {
    let mut worst = None;
    for r in reports {
        if let Err(f) = r.result {
            eprintln!("run {}: {}", r.hash, f.error);
            worst.get_or_insert(Error::Solver(f.error));
        }
    }
    worst.map_or(Ok(()), Err)
}

fn run(cli: Cli) -> Result<(), Error> {
    let file = cli.config.as_ref();
    match cli.verb {
        Verb::Synthetic { common, data, reference } => {
            let mut pairs = common.pairs();
            pairs.extend(data.map(|d| ("data", d)));
            run_experiment(configure(file, Experiment::Synthetic, pairs)?, reference)
        }
        Verb::Mnist { common, mnist, reference } => {
            let mut pairs = common.pairs();
            pairs.extend(mnist.pairs());
            run_experiment(configure(file, Experiment::Mnist, pairs)?, reference)
        }
        Verb::Reference { common, mnist, experiment, data, ref_iters, ref_tol } => {
            let exp = experiment_of(file, experiment.as_deref())?;
            let mut pairs = common.pairs();
            pairs.extend(mnist.pairs());
            pairs.extend(data.map(|d| ("data", d)));
            let cfg = configure(file, exp, pairs)?;
            let inst = experiment::load_instance(&cfg)?;
            let opts = ReferenceOptions { iters: ref_iters, tol: ref_tol, ..ReferenceOptions::default() };
            for point in cfg.grid() {
                let r = experiment::solve_reference(&cfg, &inst, point, &opts)?;
                let path = cfg.out.join(format!("{}.reference.json", cfg.at(point).hash()));
                output::write_json(&path, &r)?;
                let delta = r.delta.map_or("inf".to_string(), |d| d.to_string());
                println!(
                    "{} objective={} gap={} support={} delta={delta} reached={}",
                    path.display(),
                    r.objective,
                    r.gap,
                    r.support_ids.len(),
                    r.reached_tolerance
                );
            }
            Ok(())
        }
        Verb::Residuals { common, mnist, experiment, data, reference } => {
            let exp = experiment_of(file, experiment.as_deref())?;
            let mut pairs = common.pairs();
            pairs.extend(mnist.pairs());
            pairs.extend(data.map(|d| ("data", d)));
            let cfg = configure(file, exp, pairs)?;
            let point = single_point(&cfg)?;
            let inst = experiment::load_instance(&cfg)?;
            let r = output::read_reference(&reference)?;
            let series = experiment::residual_series(&cfg, &inst, point, &r)?;
            let path = cfg.out.join(format!("{}.residuals.csv", cfg.at(point).hash()));
            output::write(&path, &output::residual_csv(&series))?;
            println!("{}", path.display());
            Ok(())
        }
        Verb::Rate { input, column, t_lo, t_hi } => {
            let points = output::read_column(&input, &column)?;
            println!("{}", rate_slope(&points, t_lo, t_hi)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    // clap's own status for usage errors is 2, which is reserved for divergence
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gcgm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
