use anyhow::{bail, Context, Result};
use fraccd::baselines::{run_dpa, run_pgsa, run_power_method, run_qtpa, Baseline, BaselineConfig};
use fraccd::cd::run_cd;
use fraccd::data::{gaussian_matrix, load_libsvm, randn, seeded_rng, sparse_instance_from_matrix, spectral_norm_sq, CscMatrix};
use fraccd::problems::{EigL4Problem, SparseRecoveryProblem};
use fraccd::{CoordinateRule, Method, SolverConfig, Trace};
use serde::{Deserialize, Serialize};

use crate::args::{MethodKind, ProblemArgs, ProblemKind, RuleKind, SolverArgs, Source};

/// Resolved description of one problem instance, recorded in manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDescriptor {
    pub name: String,
    pub source: Source,
    pub problem: ProblemKind,
    pub m: usize,
    pub n: usize,
    /// Seed of the Gaussian design matrix (synthetic sources only).
    pub matrix_seed: Option<u64>,
    pub support: Option<usize>,
    pub noise: Option<f64>,
    pub gamma: Option<f64>,
    pub k: Option<usize>,
    pub vartheta: Option<f64>,
    /// Lipschitz constant handed to the baselines and the greedy rule.
    pub lipschitz: f64,
}

pub enum Built {
    Sparse(SparseRecoveryProblem),
    Eigl4(EigL4Problem),
}

/// A design matrix with its problem parameters; the planted signal and the
/// start point are drawn per run.
pub struct Prepared {
    pub descriptor: InstanceDescriptor,
    g: CscMatrix,
}

pub fn load_matrix(source: &Source, matrix_seed: u64) -> Result<CscMatrix> {
    Ok(match source {
        Source::Synth(s) => gaussian_matrix(s.m, s.n, 1.0, &mut seeded_rng(matrix_seed))?,
        Source::File(p) => load_libsvm(p).with_context(|| format!("reading {}", p.display()))?,
    })
}

pub fn prepare(source: &Source, pargs: &ProblemArgs, matrix_seed: u64) -> Result<Prepared> {
    let g = load_matrix(source, matrix_seed)?;
    let (m, n) = (g.nrows(), g.ncols());
    let synth_support = match source {
        Source::Synth(s) => s.support,
        Source::File(_) => None,
    };
    let mut d = InstanceDescriptor {
        name: source.describe(),
        source: source.clone(),
        problem: pargs.problem,
        m,
        n,
        matrix_seed: matches!(source, Source::Synth(_)).then_some(matrix_seed),
        support: None,
        noise: None,
        gamma: None,
        k: None,
        vartheta: None,
        lipschitz: 2.0,
    };
    if pargs.problem == ProblemKind::Sparse {
        let support = synth_support.or(pargs.support).unwrap_or(n.min(100));
        if support > n {
            bail!("support size {support} exceeds n = {n}");
        }
        d.support = Some(support);
        d.noise = Some(pargs.noise);
        d.gamma = Some(pargs.gamma.unwrap_or(0.1 / m as f64));
        d.k = Some(pargs.k.unwrap_or(n.min(100)));
        d.vartheta = pargs.vartheta;
        d.lipschitz = spectral_norm_sq(&g, 10_000, 1e-10)?;
    }
    Ok(Prepared { descriptor: d, g })
}

impl Prepared {
    /// Problem with the signal planted from `seed`, and the start point.
    pub fn build(&self, seed: u64) -> Result<(Built, Vec<f64>)> {
        let d = &self.descriptor;
        let x0 = randn(d.n, &mut seeded_rng(seed ^ 0x5eed));
        let built = match d.problem {
            ProblemKind::Sparse => {
                let inst = sparse_instance_from_matrix(&d.name, self.g.clone(), d.support.unwrap_or(0), d.noise.unwrap_or(0.0), seed)?;
                let y = inst.y.context("instance without observations")?;
                let mut p = SparseRecoveryProblem::new(inst.g, y, d.gamma.unwrap_or(0.0), d.k.unwrap_or(1))?;
                if let Some(v) = d.vartheta {
                    p = p.with_vartheta(v)?;
                }
                Built::Sparse(p)
            }
            ProblemKind::Eigl4 => Built::Eigl4(EigL4Problem::new(self.g.clone())),
        };
        Ok((built, x0))
    }
}

/// Solver or baseline configuration actually used for a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunConfig {
    Cd(SolverConfig),
    Baseline(BaselineConfig),
}

pub fn run_config(method: MethodKind, sargs: &SolverArgs, lipschitz: f64, seed: u64) -> RunConfig {
    let max_iters = sargs.max_iters.unwrap_or(u64::MAX);
    let cd = |method| {
        RunConfig::Cd(SolverConfig {
            method,
            rule: match sargs.rule {
                RuleKind::Cyclic => CoordinateRule::Cyclic,
                RuleKind::Random => CoordinateRule::Random,
                RuleKind::Greedy => CoordinateRule::Greedy { lipschitz },
            },
            theta: sargs.theta,
            eps: sargs.eps,
            window: sargs.window,
            max_time_s: sargs.max_time,
            max_iters,
            seed,
            verify: false,
            trace_every: sargs.trace_every,
        })
    };
    let baseline = |alg| {
        let mut c = BaselineConfig::new(alg, lipschitz);
        c.inner_iters = sargs.inner_iters;
        c.eps = sargs.eps;
        c.window = sargs.window;
        c.max_time_s = sargs.max_time;
        c.max_iters = max_iters;
        c.seed = seed;
        c.trace_every = sargs.trace_every;
        RunConfig::Baseline(c)
    };
    match method {
        MethodKind::Fcd => cd(Method::Fcd),
        MethodKind::Pcd => cd(Method::Pcd),
        MethodKind::Dpa => baseline(Baseline::Dpa),
        MethodKind::Pgsa => baseline(Baseline::Pgsa),
        MethodKind::Qtpa => baseline(Baseline::Qtpa),
        MethodKind::Power => baseline(Baseline::Power),
    }
}

pub fn check_pairing(problem: ProblemKind, method: MethodKind) -> Result<()> {
    match (problem, method) {
        (ProblemKind::Sparse, MethodKind::Fcd) => bail!("FCD needs a differentiable denominator; use pcd on sparse"),
        (ProblemKind::Sparse, MethodKind::Power) => bail!("the power method only applies to eigl4"),
        (ProblemKind::Eigl4, MethodKind::Pcd) => bail!("PCD is not supported on eigl4; use fcd"),
        _ => Ok(()),
    }
}

pub fn execute(built: &Built, config: &RunConfig, x0: &[f64]) -> Result<Trace> {
    let (_, trace) = match (built, config) {
        (Built::Sparse(p), RunConfig::Cd(c)) => run_cd(p, c, x0)?,
        (Built::Eigl4(p), RunConfig::Cd(c)) => run_cd(p, c, x0)?,
        (Built::Eigl4(p), RunConfig::Baseline(c)) if c.algorithm == Baseline::Power => run_power_method(p, c, x0)?,
        (Built::Sparse(_), RunConfig::Baseline(c)) if c.algorithm == Baseline::Power => {
            bail!("the power method only applies to eigl4")
        }
        (Built::Sparse(p), RunConfig::Baseline(c)) => baseline_fn(c.algorithm)(p, c, x0)?,
        (Built::Eigl4(p), RunConfig::Baseline(c)) => baseline_fn(c.algorithm)(p, c, x0)?,
    };
    Ok(trace)
}

type BaselineFn<P> = fn(&P, &BaselineConfig, &[f64]) -> fraccd::Result<(Vec<f64>, Trace)>;

fn baseline_fn<P: fraccd::FractionalProblem>(alg: Baseline) -> BaselineFn<P> {
    match alg {
        Baseline::Dpa => run_dpa::<P>,
        Baseline::Qtpa => run_qtpa::<P>,
        _ => run_pgsa::<P>,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sparse_args() -> ProblemArgs {
        ProblemArgs {
            problem: ProblemKind::Sparse,
            gamma: None,
            k: None,
            vartheta: None,
            support: None,
            noise: 0.1,
        }
    }

    #[test]
    fn sparse_defaults_follow_the_problem_size() {
        let p = prepare(&Source::Synth("20,40".parse().unwrap()), &sparse_args(), 1).unwrap();
        let d = &p.descriptor;
        assert_eq!((d.m, d.n, d.support, d.k), (20, 40, Some(40), Some(40)));
        assert!((d.gamma.unwrap() - 0.005).abs() < 1e-15);
        assert!(d.lipschitz > 0.0);
    }

    #[test]
    fn build_is_deterministic_per_seed() {
        let p = prepare(&Source::Synth("10,20,3".parse().unwrap()), &sparse_args(), 4).unwrap();
        let (_, a) = p.build(9).unwrap();
        let (_, b) = p.build(9).unwrap();
        let (_, c) = p.build(10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_pairings_are_rejected() {
        assert!(check_pairing(ProblemKind::Sparse, MethodKind::Fcd).is_err());
        assert!(check_pairing(ProblemKind::Eigl4, MethodKind::Pcd).is_err());
        assert!(check_pairing(ProblemKind::Sparse, MethodKind::Power).is_err());
        assert!(check_pairing(ProblemKind::Eigl4, MethodKind::Pgsa).is_ok());
    }
}
