//! Builds problems from a config, runs them, and writes the per-run files.
//!
//! Every run in a sweep writes into the output directory under its own config
//! hash: `<hash>.trace.csv`, `<hash>.screen.csv`, `<hash>.cert.json` and
//! `<hash>.summary.json`. Runs share nothing but that directory.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Instant;

use gcgm_core::{
    reference_solve, residuals, support_of, AtomKind, AtomicSet, DataMatrix, Ext, Loss, LossKind, Penalty,
    PenaltyKind, Problem, ReferenceOptions, ReferenceSolution, ResidualSeries, RunFailure, RunOutput, Solver,
    SupportCertificate, TraceRecord,
};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{Experiment, ExperimentConfig, GridPoint, LossChoice, PenaltyChoice};
use crate::output::{self, CertificateJson, ReferenceJson};
use crate::{gen_synthetic, idx, textio, Error};

/// Relative threshold for counting a ledger coefficient as nonzero.
pub const SUPPORT_TOL: f64 = 1e-6;

/// Loss and atomic set shared by every point of a sweep.
#[derive(Debug, Clone)]
pub struct Instance {
    pub loss: Loss,
    pub set: AtomicSet,
    pub test: Option<DataMatrix>,
    /// `(path, sha256)` of every input file read.
    pub sources: Vec<(PathBuf, String)>,
}

fn require<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path, Error> {
    p.as_deref().ok_or_else(|| Error::Usage(format!("the mnist experiment needs --{what}")))
}

pub fn load_instance(cfg: &ExperimentConfig) -> Result<Instance, Error> {
    let mut sources = Vec::new();
    let (train, test) = match cfg.experiment {
        Experiment::Synthetic => match &cfg.data {
            Some(path) => {
                sources.push((path.clone(), idx::checksum(path)?));
                (textio::read_data(path)?, None)
            }
            None => (gen_synthetic(cfg.seed, cfg.n, cfg.d)?, None),
        },
        Experiment::Mnist => {
            let images = require(&cfg.images, "images")?;
            let labels = require(&cfg.labels, "labels")?;
            for p in [images, labels] {
                sources.push((p.to_path_buf(), idx::checksum(p)?));
            }
            let train = idx::load_mnist_pair(images, labels, cfg.digits)?;
            let test = match (&cfg.test_images, &cfg.test_labels) {
                (Some(ti), Some(tl)) => Some(idx::load_mnist_pair(ti, tl, cfg.digits)?),
                (None, None) => None,
                _ => return Err(Error::Usage("--test-images and --test-labels go together".into())),
            };
            (train, test)
        }
    };
    let loss = match cfg.loss {
        LossChoice::Logistic => Loss::logistic(train)?,
        LossChoice::Quadratic => Loss::quadratic(train),
    };
    let set = match &cfg.atoms {
        Some(path) => {
            sources.push((path.clone(), idx::checksum(path)?));
            textio::read_atoms(path, cfg.scale)?
        }
        None => AtomicSet::signed_basis(loss.dim(), cfg.scale)?,
    };
    if set.dim() != loss.dim() {
        return Err(Error::Usage(format!("atoms have dimension {} but the data has {}", set.dim(), loss.dim())));
    }
    Ok(Instance { loss, set, test, sources })
}

pub fn build_penalty(cfg: &ExperimentConfig, point: GridPoint) -> Result<Penalty, Error> {
    Ok(match cfg.penalty {
        PenaltyChoice::Power => Penalty::power(point.alpha, point.lambda)?,
        PenaltyChoice::LogBarrier => Penalty::log_barrier(cfg.capacity, cfg.beta, point.lambda)?,
        PenaltyChoice::Indicator => Penalty::indicator(cfg.capacity)?,
    })
}

/// SHA-256 over the data, targets, atoms and penalty parameters.
pub fn fingerprint(loss: &Loss, penalty: &Penalty, set: &AtomicSet) -> String {
    let mut h = Sha256::new();
    let data = loss.data();
    h.update(match loss.kind() {
        LossKind::Quadratic => b"quadratic",
        LossKind::Logistic => b"logistic_",
    });
    h.update((data.rows() as u64).to_le_bytes());
    h.update((data.cols() as u64).to_le_bytes());
    for v in data.entries().iter().chain(data.targets()) {
        h.update(v.to_bits().to_le_bytes());
    }
    let kind: &[u8] = match set.kind() {
        AtomKind::SignedBasis => b"signed",
        AtomKind::HypercubeVertices => b"cube__",
        AtomKind::ExplicitList => b"list__",
    };
    h.update(kind);
    h.update(set.scale().to_bits().to_le_bytes());
    if set.kind() == AtomKind::ExplicitList {
        for id in 0..set.atom_count() {
            for v in set.atom(id).expect("id in range") {
                h.update(v.to_bits().to_le_bytes());
            }
        }
    }
    let params = match penalty.kind() {
        PenaltyKind::Power { alpha } => [0.0, alpha, 0.0],
        PenaltyKind::LogBarrier { cap, beta } => [1.0, cap, beta],
        PenaltyKind::Indicator { cap } => [2.0, cap, 0.0],
    };
    for v in params.iter().chain([penalty.weight()].iter()) {
        h.update(v.to_bits().to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// First traced iterate with `√(L·min_gap) < δ/4`.
pub fn identified_at(trace: &[TraceRecord], smoothness: f64, delta: Ext) -> Option<usize> {
    trace
        .iter()
        .find(|r| match delta {
            Ext::PosInf => true,
            Ext::Finite(d) => (smoothness * r.min_gap).sqrt() < d / 4.0,
        })
        .map(|r| r.t)
}

/// Fraction of rows where `sign(aᵀx)` (zero counted as `+1`) misses the label.
pub fn misclassification(data: &DataMatrix, x: &[f64]) -> f64 {
    let wrong = data
        .apply(x)
        .iter()
        .zip(data.targets())
        .filter(|(p, b)| if **p >= 0.0 { **b < 0.0 } else { **b > 0.0 })
        .count();
    wrong as f64 / data.rows() as f64
}

pub struct RunReport {
    pub hash: String,
    pub config: ExperimentConfig,
    pub point: GridPoint,
    pub result: Result<RunOutput, RunFailure>,
    pub test_error: Option<f64>,
}

impl RunReport {
    pub fn trace(&self) -> &[TraceRecord] {
        match &self.result {
            Ok(o) => &o.trace,
            Err(f) => &f.trace,
        }
    }

    pub fn error(&self) -> Option<&gcgm_core::Error> {
        self.result.as_ref().err().map(|f| &f.error)
    }

    fn status(&self) -> String {
        match &self.result {
            Ok(o) if o.converged => "converged".into(),
            Ok(_) => "max_iters".into(),
            Err(f) => f.error.to_string(),
        }
    }

    /// The certificate for this run; `δ` and `identified_at` need a reference.
    pub fn certificate(&self, reference: Option<&ReferenceSolution>) -> CertificateJson {
        let (state, smoothness) = match &self.result {
            Ok(o) => (&o.state, o.smoothness),
            Err(f) => (&f.state, f.smoothness),
        };
        let min_gap = state.min_gap.to_f64();
        match reference {
            Some(r) => CertificateJson::from(&SupportCertificate {
                support_ids: r.support_ids.clone(),
                delta: r.delta,
                identified_at: identified_at(self.trace(), smoothness, r.delta),
                smoothness,
                min_gap,
            }),
            None => CertificateJson {
                support_ids: support_of(&state.coeffs, SUPPORT_TOL),
                delta: None,
                identified_at: None,
                smoothness,
                min_gap: min_gap.is_finite().then_some(min_gap),
            },
        }
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    hash: &'a str,
    experiment: &'a str,
    penalty: &'a str,
    alpha: f64,
    lambda: f64,
    status: String,
    iterations: usize,
    objective: f64,
    min_gap: f64,
    active_atoms: usize,
    nonzeros: usize,
    test_error: Option<f64>,
    reference: Option<&'a str>,
    sources: Vec<(String, &'a str)>,
}

/// Runs one grid point. Never touches the filesystem.
pub fn run_point(cfg: &ExperimentConfig, inst: &Instance, point: GridPoint) -> Result<RunReport, Error> {
    let run_cfg = cfg.at(point);
    let penalty = build_penalty(cfg, point)?;
    let problem = Problem::new(&inst.loss, &penalty, &inst.set)?;
    let solver = Solver::new(problem, run_cfg.solver_config())?;
    let start = Instant::now();
    let timing = cfg.timing;
    let result = solver.run(move || if timing { start.elapsed().as_secs_f64() } else { 0.0 });
    let test_error = match (&inst.test, &result) {
        (Some(test), Ok(out)) => Some(misclassification(test, &out.state.x)),
        _ => None,
    };
    Ok(RunReport { hash: run_cfg.hash(), config: run_cfg, point, result, test_error })
}

/// Writes the trace, screening events, certificate and summary of a run.
pub fn write_run(
    dir: &Path,
    inst: &Instance,
    report: &RunReport,
    reference: Option<&ReferenceJson>,
) -> Result<(), Error> {
    let file = |ext: &str| dir.join(format!("{}.{ext}", report.hash));
    output::write(&file("trace.csv"), &output::trace_csv(report.trace()))?;
    let events = match &report.result {
        Ok(o) => &o.screen_events,
        Err(f) => &f.screen_events,
    };
    output::write(&file("screen.csv"), &output::screen_csv(events))?;
    let solution = reference.map(ReferenceJson::solution);
    output::write_json(&file("cert.json"), &report.certificate(solution.as_ref()))?;
    let last = report.trace().last().expect("every run traces its first iterate");
    let summary = Summary {
        hash: &report.hash,
        experiment: report.config.experiment.name(),
        penalty: report.config.penalty.name(),
        alpha: report.point.alpha,
        lambda: report.point.lambda,
        status: report.status(),
        iterations: last.t,
        objective: last.objective,
        min_gap: last.min_gap,
        active_atoms: last.active_atoms,
        nonzeros: last.nonzero_coeffs,
        test_error: report.test_error,
        reference: reference.map(|r| r.fingerprint.as_str()),
        sources: inst.sources.iter().map(|(p, h)| (p.display().to_string(), h.as_str())).collect(),
    };
    output::write_json(&file("summary.json"), &summary)?;
    Ok(())
}

/// One run per grid point on up to `available_parallelism` worker threads.
/// Reports come back in grid order regardless of scheduling.
pub fn sweep(cfg: &ExperimentConfig, inst: &Instance) -> Result<Vec<RunReport>, Error> {
    let points = cfg.grid();
    let workers = thread::available_parallelism().map_or(1, |n| n.get()).min(points.len()).max(1);
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<RunReport, Error>>>> = Mutex::new((0..points.len()).map(|_| None).collect());
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= points.len() {
                    break;
                }
                let report = run_point(cfg, inst, points[i]);
                slots.lock().expect("no worker panics while holding the lock")[i] = Some(report);
            });
        }
    });
    slots
        .into_inner()
        .expect("workers joined")
        .into_iter()
        .map(|r| r.expect("every point was claimed"))
        .collect()
}

/// One line per run: `hash,alpha,lambda,status,iterations,objective,min_gap,active_atoms`.
pub fn manifest_csv(reports: &[RunReport]) -> String {
    let mut s = String::from("hash,alpha,lambda,status,iterations,objective,min_gap,active_atoms\n");
    for r in reports {
        let last = r.trace().last().expect("nonempty trace");
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.hash,
            r.point.alpha,
            r.point.lambda,
            r.status().replace(',', ";"),
            last.t,
            last.objective,
            last.min_gap,
            last.active_atoms
        ));
    }
    s
}

pub fn solve_reference(
    cfg: &ExperimentConfig,
    inst: &Instance,
    point: GridPoint,
    opts: &ReferenceOptions,
) -> Result<ReferenceJson, Error> {
    let penalty = build_penalty(cfg, point)?;
    let problem = Problem::new(&inst.loss, &penalty, &inst.set)?;
    let solution = reference_solve(problem, opts)?;
    Ok(ReferenceJson::new(fingerprint(&inst.loss, &penalty, &inst.set), &solution))
}

/// Reruns the configured solver keeping traced iterates and measures them
/// against `reference`, which must come from the same problem.
pub fn residual_series(
    cfg: &ExperimentConfig,
    inst: &Instance,
    point: GridPoint,
    reference: &ReferenceJson,
) -> Result<ResidualSeries, Error> {
    let penalty = build_penalty(cfg, point)?;
    let got = fingerprint(&inst.loss, &penalty, &inst.set);
    if got != reference.fingerprint {
        return Err(Error::FingerprintMismatch { expected: reference.fingerprint.clone(), got });
    }
    let problem = Problem::new(&inst.loss, &penalty, &inst.set)?;
    let mut solver_cfg = cfg.solver_config();
    solver_cfg.keep_iterates = true;
    let out = Solver::new(problem, solver_cfg)?.run(|| 0.0).map_err(|f| f.error)?;
    let sym = inst.set.symmetrize()?;
    Ok(residuals(&inst.loss, &sym, &out.trace, &out.iterates, &reference.solution(), out.smoothness)?)
}
