use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Sparse,
    Eigl4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Fcd,
    Pcd,
    Dpa,
    Pgsa,
    Qtpa,
    Power,
}

impl MethodKind {
    /// Column label used in benchmark tables.
    pub fn label(self) -> &'static str {
        match self {
            MethodKind::Fcd => "FCD",
            MethodKind::Pcd => "PCD",
            MethodKind::Dpa => "DPA",
            MethodKind::Pgsa => "PGSA",
            MethodKind::Qtpa => "QTPA",
            MethodKind::Power => "Power Method",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleKind {
    Cyclic,
    Random,
    Greedy,
}

/// `m,n` or `m,n,s` (s = support size of the planted signal).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub m: usize,
    pub n: usize,
    pub support: Option<usize>,
}

impl FromStr for SynthSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse::<usize>().map_err(|e| format!("'{p}': {e}")))
            .collect::<Result<_, _>>()?;
        match parts[..] {
            [m, n] if m > 0 && n > 0 => Ok(Self { m, n, support: None }),
            [m, n, s] if m > 0 && n > 0 => Ok(Self { m, n, support: Some(s) }),
            _ => Err(format!("expected m,n or m,n,s with m,n > 0, got '{s}'")),
        }
    }
}

impl fmt::Display for SynthSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.support {
            Some(s) => write!(f, "{},{},{}", self.m, self.n, s),
            None => write!(f, "{},{}", self.m, self.n),
        }
    }
}

/// Where the design matrix comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Synth(SynthSpec),
    File(PathBuf),
}

impl Source {
    pub fn describe(&self) -> String {
        match self {
            Source::Synth(s) => format!("synth-{}", s.to_string().replace(',', "x")),
            Source::File(p) => p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| p.display().to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ProblemArgs {
    #[arg(long, value_enum)]
    pub problem: ProblemKind,
    /// Weight of the top-k denominator [default: 0.1/m]
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Number of largest magnitudes in the denominator [default: min(100, n)]
    #[arg(long)]
    pub k: Option<usize>,
    /// Box bound ‖x‖∞ ≤ ϑ [default: unbounded]
    #[arg(long)]
    pub vartheta: Option<f64>,
    /// Support size of the planted signal for file inputs [default: min(100, n)]
    #[arg(long)]
    pub support: Option<usize>,
    /// Relative noise level of the observations
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 1e-6)]
    pub theta: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub eps: f64,
    /// Length of the stopping window
    #[arg(long, default_value_t = 500)]
    pub window: usize,
    /// Time budget per run in seconds
    #[arg(long = "max-time", default_value_t = 100.0)]
    pub max_time: f64,
    /// Iteration budget per run [default: unlimited]
    #[arg(long = "max-iters")]
    pub max_iters: Option<u64>,
    /// Coordinate rule for FCD and PCD
    #[arg(long, value_enum, default_value_t = RuleKind::Cyclic)]
    pub rule: RuleKind,
    /// FISTA iterations per DPA outer step
    #[arg(long = "inner-iters", default_value_t = 50)]
    pub inner_iters: usize,
    /// Keep every n-th trace record
    #[arg(long = "trace-every", default_value_t = 1)]
    pub trace_every: u64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, value_enum)]
    pub method: MethodKind,
    /// LIBSVM design matrix
    #[arg(long, conflicts_with = "synth", required_unless_present = "synth")]
    pub input: Option<PathBuf>,
    /// Gaussian design matrix of size m×n (m,n,s also sets the support size)
    #[arg(long)]
    pub synth: Option<SynthSpec>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Objective-vs-time trace CSV
    #[arg(long, default_value = "trace.csv")]
    pub trace: PathBuf,
}

impl SolveArgs {
    pub fn source(&self) -> Source {
        match (&self.synth, &self.input) {
            (Some(s), _) => Source::Synth(*s),
            (None, Some(p)) => Source::File(p.clone()),
            (None, None) => unreachable!("clap requires --input or --synth"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct BenchArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Methods to compare [default: dpa,pgsa,qtpa,pcd for sparse; pgsa,power,fcd for eigl4]
    #[arg(long, value_enum, value_delimiter = ',')]
    pub methods: Vec<MethodKind>,
    /// LIBSVM design matrix (repeatable)
    #[arg(long)]
    pub input: Vec<PathBuf>,
    /// Gaussian design matrix m,n[,s] (repeatable)
    #[arg(long)]
    pub synth: Vec<SynthSpec>,
    #[arg(long, default_value_t = 10)]
    pub repeats: u64,
    /// Base seed; repeat r uses seed + r
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads [default: available parallelism]
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Table CSV; a long-format copy goes next to it
    #[arg(long, default_value = "bench.csv")]
    pub out: PathBuf,
}

impl BenchArgs {
    pub fn sources(&self) -> Vec<Source> {
        self.synth.iter().map(|s| Source::Synth(*s)).chain(self.input.iter().map(|p| Source::File(p.clone()))).collect()
    }

    pub fn method_list(&self) -> Vec<MethodKind> {
        if !self.methods.is_empty() {
            return self.methods.clone();
        }
        match self.problem.problem {
            ProblemKind::Sparse => vec![MethodKind::Dpa, MethodKind::Pgsa, MethodKind::Qtpa, MethodKind::Pcd],
            ProblemKind::Eigl4 => vec![MethodKind::Pgsa, MethodKind::Power, MethodKind::Fcd],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synth_spec_round_trip() {
        let s: SynthSpec = "50,100,10".parse().unwrap();
        assert_eq!(s, SynthSpec { m: 50, n: 100, support: Some(10) });
        assert_eq!(s.to_string(), "50,100,10");
        assert_eq!("3,4".parse::<SynthSpec>().unwrap().support, None);
        assert!("3".parse::<SynthSpec>().is_err());
        assert!("0,4".parse::<SynthSpec>().is_err());
        assert!("a,4".parse::<SynthSpec>().is_err());
    }

    #[test]
    fn source_names() {
        assert_eq!(Source::Synth("5,6,2".parse().unwrap()).describe(), "synth-5x6x2");
        assert_eq!(Source::File("data/e2006.svm".into()).describe(), "e2006");
    }
}
