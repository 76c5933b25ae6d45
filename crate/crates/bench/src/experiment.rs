//! Sinkhorn versus screened Sinkhorn sweeps over eta, budget and trials.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::sync::mpsc;
use std::time::Instant;

use screenkhorn::diagnostics::{
    marginal_norm_certificates, pinsker_check, relative_divergence, violation_certificate_cols,
    violation_certificate_rows, Certificate,
};
use screenkhorn::{
    decimation_to_budget, gibbs_kernel, plan_from_potentials, screenkhorn_with, sinkhorn, CostMatrix,
    DiscreteMeasure, GibbsKernel, ScreenkhornOptions, ScreenkhornResult, SinkhornConfig,
};

use crate::data::{generate_gaussian_pair, pairwise_euclidean};
use crate::error::BenchError;
use crate::io::fmt17;
use crate::rng::trial_seed;

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub n: usize,
    pub m: usize,
    pub eta_list: Vec<f64>,
    pub budget_list: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub normalize_cost: bool,
    pub output_path: Option<PathBuf>,
    pub certify: bool,
    /// Worker threads over trials. Keep at or below the physical core count for timing.
    pub jobs: usize,
    pub sinkhorn: SinkhornConfig,
    pub screenkhorn: ScreenkhornOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            m: 1000,
            eta_list: vec![0.1, 0.5, 1.0, 5.0],
            budget_list: vec![0.1, 0.5, 0.99],
            trials: 30,
            seed: 42,
            normalize_cost: true,
            output_path: None,
            certify: false,
            jobs: 1,
            sinkhorn: SinkhornConfig::default(),
            screenkhorn: ScreenkhornOptions {
                materialize_plan: false,
                ..Default::default()
            },
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.n == 0 || self.m == 0 {
            return Err(BenchError::Input("n and m must be positive".into()));
        }
        if self.eta_list.is_empty() || self.budget_list.is_empty() {
            return Err(BenchError::Input("eta and budget lists must be nonempty".into()));
        }
        if self.trials == 0 || self.jobs == 0 {
            return Err(BenchError::Input("trials and jobs must be at least 1".into()));
        }
        if let Some(e) = self.eta_list.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(BenchError::Input(format!("eta {e} must be positive")));
        }
        if let Some(b) = self.budget_list.iter().find(|b| !(**b > 0.0 && **b <= 1.0)) {
            return Err(BenchError::Input(format!("budget {b} must lie in (0, 1]")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub eta: f64,
    pub budget: f64,
    pub trial: usize,
    pub seed: u64,
    pub time_sinkhorn: f64,
    pub time_screenkhorn: f64,
    pub speedup: f64,
    pub row_violation: f64,
    pub col_violation: f64,
    pub rel_divergence: f64,
    pub kappa: f64,
    pub epsilon: f64,
    pub active_rows: usize,
    pub active_cols: usize,
    pub converged: bool,
}

pub const HEADER: [&str; 15] = [
    "eta",
    "budget",
    "trial",
    "seed",
    "time_sinkhorn",
    "time_screenkhorn",
    "speedup",
    "row_violation",
    "col_violation",
    "rel_divergence",
    "kappa",
    "epsilon",
    "active_rows",
    "active_cols",
    "converged",
];

impl ResultRow {
    pub fn record(&self) -> Vec<String> {
        vec![
            fmt17(self.eta),
            fmt17(self.budget),
            self.trial.to_string(),
            self.seed.to_string(),
            fmt17(self.time_sinkhorn),
            fmt17(self.time_screenkhorn),
            fmt17(self.speedup),
            fmt17(self.row_violation),
            fmt17(self.col_violation),
            fmt17(self.rel_divergence),
            fmt17(self.kappa),
            fmt17(self.epsilon),
            self.active_rows.to_string(),
            self.active_cols.to_string(),
            self.converged.to_string(),
        ]
    }
}

/// Outcome of the per-row checks run under `--certify`.
#[derive(Debug, Clone)]
pub struct CertificateReport {
    pub eta: f64,
    pub budget: f64,
    pub trial: usize,
    pub contained: bool,
    pub certificates: Vec<Certificate>,
}

impl CertificateReport {
    pub fn passed(&self) -> bool {
        self.contained && self.certificates.iter().all(|c| c.satisfied)
    }
}

pub struct ExperimentOutcome {
    pub rows: Vec<ResultRow>,
    pub certificates: Vec<CertificateReport>,
}

impl ExperimentOutcome {
    pub fn certificate_failures(&self) -> usize {
        self.certificates.iter().filter(|c| !c.passed()).count()
    }
}

/// Every certificate applicable to one converged screened solve.
pub fn certify(
    result: &ScreenkhornResult,
    kernel: &GibbsKernel,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> Result<(bool, Vec<Certificate>), BenchError> {
    let sr = &result.screening;
    let u: Vec<f64> = sr.active_rows.iter().map(|&i| result.potentials.u[i]).collect();
    let v: Vec<f64> = sr.active_cols.iter().map(|&j| result.potentials.v[j]).collect();
    let contained = result.bounds.contains(&u, &v);
    let mut out = vec![
        pinsker_check(mu.weights().as_slice().unwrap(), result.row_marginal.as_slice().unwrap())?,
        pinsker_check(nu.weights().as_slice().unwrap(), result.col_marginal.as_slice().unwrap())?,
        violation_certificate_rows(result, kernel, mu, nu)?,
        violation_certificate_cols(result, kernel, mu, nu)?,
    ];
    let (a, b) = marginal_norm_certificates(result, kernel, mu, nu)?;
    out.push(a);
    out.push(b);
    Ok((contained, out))
}

/// Baseline and screened solve on one problem, timed from kernel construction on.
pub struct Comparison {
    pub row: ResultRow,
    pub screened: Option<ScreenkhornResult>,
    pub kernel: GibbsKernel,
}

#[allow(clippy::too_many_arguments)]
pub fn compare_once(
    cost: &CostMatrix,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    eta: f64,
    budget: f64,
    sinkhorn_config: &SinkhornConfig,
    options: &ScreenkhornOptions,
    trial: usize,
    seed: u64,
) -> Result<Comparison, BenchError> {
    let (n, m) = cost.dim();
    let (n_b, m_b) = decimation_to_budget(n, m, budget)?;

    let t0 = Instant::now();
    let kernel = gibbs_kernel(cost, eta)?;
    let baseline = sinkhorn(mu, nu, &kernel, sinkhorn_config)?;
    let time_sinkhorn = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let screened = screenkhorn_with(cost, eta, mu, nu, n_b, m_b, options);
    let time_screenkhorn = t1.elapsed().as_secs_f64();

    if !baseline.converged {
        eprintln!(
            "warning: sinkhorn hit {} iterations (violation {:e}) at eta {eta}, trial {trial}",
            baseline.iterations, baseline.violation
        );
    }
    let mut row = ResultRow {
        eta,
        budget,
        trial,
        seed,
        time_sinkhorn,
        time_screenkhorn,
        speedup: time_sinkhorn / time_screenkhorn,
        row_violation: f64::NAN,
        col_violation: f64::NAN,
        rel_divergence: f64::NAN,
        kappa: f64::NAN,
        epsilon: f64::NAN,
        active_rows: 0,
        active_cols: 0,
        converged: false,
    };
    let screened = match screened {
        Ok(r) => r,
        Err(e) => {
            eprintln!("warning: screened solve failed at eta {eta}, budget {budget}, trial {trial}: {e}");
            return Ok(Comparison {
                row,
                screened: None,
                kernel,
            });
        }
    };
    let reference = plan_from_potentials(&baseline.potentials, &kernel)?;
    let plan = plan_from_potentials(&screened.potentials, &kernel)?;
    let (rv, cv) = screenkhorn::diagnostics::marginal_violations(&plan, mu, nu)?;
    row.row_violation = rv;
    row.col_violation = cv;
    row.rel_divergence = relative_divergence(&reference, &plan, cost)?;
    row.kappa = screened.kappa();
    row.epsilon = screened.epsilon();
    row.active_rows = screened.screening.active_rows.len();
    row.active_cols = screened.screening.active_cols.len();
    row.converged = screened.converged();
    Ok(Comparison {
        row,
        screened: Some(screened),
        kernel,
    })
}

fn problem(cfg: &ExperimentConfig, seed: u64) -> Result<(CostMatrix, DiscreteMeasure, DiscreteMeasure), BenchError> {
    let (x, y) = generate_gaussian_pair(cfg.n, cfg.m, seed);
    let cost = pairwise_euclidean(&x, &y, cfg.normalize_cost)?;
    Ok((cost, DiscreteMeasure::uniform(cfg.n)?, DiscreteMeasure::uniform(cfg.m)?))
}

type Unit = (Vec<ResultRow>, Vec<CertificateReport>);

fn run_trial(cfg: &ExperimentConfig, eta: f64, trial: usize) -> Result<Unit, BenchError> {
    let seed = trial_seed(cfg.seed, trial as u64);
    let (cost, mu, nu) = problem(cfg, seed)?;
    let mut rows = Vec::with_capacity(cfg.budget_list.len());
    let mut reports = Vec::new();
    for &budget in &cfg.budget_list {
        let c = compare_once(&cost, &mu, &nu, eta, budget, &cfg.sinkhorn, &cfg.screenkhorn, trial, seed)?;
        if cfg.certify && c.row.converged {
            let result = c.screened.as_ref().expect("converged rows carry a result");
            let (contained, certificates) = certify(result, &c.kernel, &mu, &nu)?;
            reports.push(CertificateReport {
                eta,
                budget,
                trial,
                contained,
                certificates,
            });
        }
        rows.push(c.row);
    }
    Ok((rows, reports))
}

/// Runs the sweep. Rows are written to `output_path` as they complete, in
/// `(eta, trial, budget)` order, so an interrupted run leaves a valid prefix.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, BenchError> {
    cfg.validate()?;
    let mut writer = match &cfg.output_path {
        Some(p) => {
            let file = std::fs::File::create(p).map_err(|source| BenchError::Io {
                path: p.display().to_string(),
                source,
            })?;
            let mut w = csv::Writer::from_writer(file);
            w.write_record(HEADER)?;
            w.flush().map_err(|source| BenchError::Io {
                path: p.display().to_string(),
                source,
            })?;
            Some(w)
        }
        None => None,
    };
    let mut outcome = ExperimentOutcome {
        rows: Vec::new(),
        certificates: Vec::new(),
    };

    for &eta in &cfg.eta_list {
        // warm-up: caches, allocator and page faults; result discarded
        let (cost, mu, nu) = problem(cfg, trial_seed(cfg.seed, 0))?;
        compare_once(&cost, &mu, &nu, eta, cfg.budget_list[0], &cfg.sinkhorn, &cfg.screenkhorn, 0, 0)?;

        let (tx, rx) = mpsc::channel::<(usize, Result<Unit, BenchError>)>();
        let next = std::sync::atomic::AtomicUsize::new(0);
        let mut pending: BTreeMap<usize, Unit> = BTreeMap::new();
        let mut expected = 0;
        let mut failure = None;
        std::thread::scope(|s| {
            for _ in 0..cfg.jobs.min(cfg.trials) {
                let tx = tx.clone();
                let next = &next;
                s.spawn(move || loop {
                    let trial = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                    if trial >= cfg.trials {
                        break;
                    }
                    if tx.send((trial, run_trial(cfg, eta, trial))).is_err() {
                        break;
                    }
                });
            }
            drop(tx);
            for (trial, unit) in rx {
                match unit {
                    Ok(u) => {
                        pending.insert(trial, u);
                    }
                    Err(e) => {
                        failure.get_or_insert(e);
                        next.store(cfg.trials, std::sync::atomic::Ordering::SeqCst);
                    }
                }
                while let Some((rows, reports)) = pending.remove(&expected) {
                    if let Some(w) = writer.as_mut() {
                        for r in &rows {
                            w.write_record(r.record())?;
                        }
                        w.flush().map_err(|source| BenchError::Io {
                            path: cfg.output_path.as_ref().unwrap().display().to_string(),
                            source,
                        })?;
                    }
                    outcome.rows.extend(rows);
                    outcome.certificates.extend(reports);
                    expected += 1;
                }
            }
            Ok::<(), BenchError>(())
        })?;
        if let Some(e) = failure {
            return Err(e);
        }
    }
    Ok(outcome)
}

/// Parses `0.1,0.5,1` or an inclusive range `start:stop:step`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, BenchError> {
    let bad = |s: &str| BenchError::Input(format!("cannot parse `{s}` in `{text}`"));
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [single] => single
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad(s)))
            .collect(),
        [start, stop, step] => {
            let (a, b, h): (f64, f64, f64) = (
                start.trim().parse().map_err(|_| bad(start))?,
                stop.trim().parse().map_err(|_| bad(stop))?,
                step.trim().parse().map_err(|_| bad(step))?,
            );
            if !(h > 0.0) || a > b {
                return Err(BenchError::Input(format!("empty range `{text}`")));
            }
            let count = ((b - a) / h + 1e-9).floor() as usize + 1;
            // round away accumulated binary error, e.g. 0.01 + 3 * 0.05
            Ok((0..count).map(|k| ((a + k as f64 * h) * 1e12).round() / 1e12).collect())
        }
        _ => Err(BenchError::Input(format!("expected a list or start:stop:step, got `{text}`"))),
    }
}

pub fn write_rows<W: Write>(out: W, rows: &[ResultRow]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush().map_err(|source| BenchError::Io {
        path: "<output>".into(),
        source,
    })
}
