//! `fraccd` command-line front end: single solves, benchmark sweeps and the
//! verification suite.

mod args;
mod run;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use fraccd::data::RNG_ALGORITHM;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use args::{BenchArgs, SolveArgs};
use run::{check_pairing, execute, prepare, run_config, InstanceDescriptor, RunConfig};

#[derive(Parser)]
#[command(name = "fraccd", version, about = "Coordinate descent for fractional minimization")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one instance and write its trace
    Solve(SolveArgs),
    /// Compare methods over repeated seeded runs
    Bench(BenchArgs),
    /// Run the invariant checks and the golden test
    Verify {
        /// Only the checks of this module
        #[arg(long)]
        only: Option<String>,
        /// Also run the acceptance criteria (takes minutes)
        #[arg(long)]
        acceptance: bool,
    },
    /// Repeat the run recorded in a manifest
    Rerun {
        manifest: PathBuf,
        /// Write the output here instead of the recorded path
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Invocation {
    Solve(SolveArgs),
    Bench(BenchArgs),
}

/// Everything needed to repeat a run, written next to each output.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RunManifest {
    command: Vec<String>,
    version: String,
    rng_algorithm: String,
    invocation: Invocation,
    instances: Vec<InstanceDescriptor>,
    /// Seed of each repeat; the start point uses `seed ^ 0x5eed`.
    seeds: Vec<u64>,
    configs: Vec<RunConfig>,
    outputs: Vec<PathBuf>,
}

fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

fn write_manifest(out: &Path, manifest: &RunManifest) -> Result<PathBuf> {
    let path = manifest_path(out);
    fs::write(&path, serde_json::to_string_pretty(manifest)?).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn manifest(invocation: Invocation, instances: Vec<InstanceDescriptor>, seeds: Vec<u64>, configs: Vec<RunConfig>, outputs: Vec<PathBuf>) -> RunManifest {
    RunManifest {
        command: std::env::args().collect(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        rng_algorithm: RNG_ALGORITHM.to_string(),
        invocation,
        instances,
        seeds,
        configs,
        outputs,
    }
}

fn cmd_solve(a: &SolveArgs) -> Result<()> {
    check_pairing(a.problem.problem, a.method)?;
    let prepared = prepare(&a.source(), &a.problem, a.seed)?;
    let (built, x0) = prepared.build(a.seed)?;
    let config = run_config(a.method, &a.solver, prepared.descriptor.lipschitz, a.seed);
    let trace = execute(&built, &config, &x0)?;
    trace.write_csv(&a.trace).with_context(|| format!("writing {}", a.trace.display()))?;
    let m = manifest(
        Invocation::Solve(a.clone()),
        vec![prepared.descriptor.clone()],
        vec![a.seed],
        vec![config],
        vec![a.trace.clone()],
    );
    let mpath = write_manifest(&a.trace, &m)?;
    println!("instance: {}", prepared.descriptor.name);
    println!("method: {}", a.method.label());
    println!("status: {:?}", trace.status);
    println!("iterations: {}", trace.iterations);
    println!("final F: {:.12e}", trace.final_objective);
    println!("trace: {}", a.trace.display());
    println!("manifest: {}", mpath.display());
    Ok(())
}

/// Mean and sample standard deviation.
fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn long_path(out: &Path) -> PathBuf {
    out.with_extension("long.csv")
}

fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let sources = a.sources();
    if sources.is_empty() {
        bail!("give at least one --synth or --input instance");
    }
    if a.repeats == 0 {
        bail!("--repeats must be >= 1");
    }
    let methods = a.method_list();
    for &m in &methods {
        check_pairing(a.problem.problem, m)?;
    }
    let prepared = sources.iter().map(|s| prepare(s, &a.problem, a.seed)).collect::<Result<Vec<_>>>()?;
    let seeds: Vec<u64> = (0..a.repeats).map(|r| a.seed.wrapping_add(r)).collect();
    let jobs: Vec<(usize, usize, u64)> = (0..prepared.len())
        .flat_map(|i| (0..methods.len()).flat_map(move |j| (0..a.repeats).map(move |r| (i, j, r))))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(a.jobs.unwrap_or(0)).build()?;
    let start = Instant::now();
    let finals: Vec<f64> = pool.install(|| {
        jobs.par_iter()
            .map(|&(i, j, r)| -> Result<f64> {
                let seed = seeds[r as usize];
                let (built, x0) = prepared[i].build(seed)?;
                let config = run_config(methods[j], &a.solver, prepared[i].descriptor.lipschitz, seed);
                Ok(execute(&built, &config, &x0)?.final_objective)
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    let runs = finals.len();
    let r = a.repeats as usize;
    let cell = |i: usize, j: usize| mean_std(&finals[(i * methods.len() + j) * r..][..r]);

    let long = long_path(&a.out);
    let mut long_csv = String::from("instance,method,mean,std\n");
    let mut table = format!("instance,{}\n", methods.iter().map(|m| csv_field(m.label())).collect::<Vec<_>>().join(","));
    for (i, p) in prepared.iter().enumerate() {
        let name = csv_field(&p.descriptor.name);
        let mut row = vec![name.clone()];
        for (j, m) in methods.iter().enumerate() {
            let (mean, std) = cell(i, j);
            long_csv.push_str(&format!("{name},{},{mean:e},{std:e}\n", csv_field(m.label())));
            row.push(format!("{mean:.3} ± {std:.3}"));
        }
        table.push_str(&row.join(","));
        table.push('\n');
    }
    fs::write(&a.out, &table).with_context(|| format!("writing {}", a.out.display()))?;
    fs::write(&long, &long_csv).with_context(|| format!("writing {}", long.display()))?;
    let lipschitz = prepared.first().map_or(2.0, |p| p.descriptor.lipschitz);
    let m = manifest(
        Invocation::Bench(a.clone()),
        prepared.iter().map(|p| p.descriptor.clone()).collect(),
        seeds.clone(),
        methods.iter().map(|&m| run_config(m, &a.solver, lipschitz, a.seed)).collect(),
        vec![a.out.clone(), long.clone()],
    );
    let mpath = write_manifest(&a.out, &m)?;
    let mut stdout = std::io::stdout().lock();
    write!(stdout, "{table}")?;
    writeln!(stdout, "{runs} runs in {:.2} s", start.elapsed().as_secs_f64())?;
    writeln!(stdout, "table: {}", a.out.display())?;
    writeln!(stdout, "long: {}", long.display())?;
    writeln!(stdout, "manifest: {}", mpath.display())?;
    Ok(())
}

fn cmd_verify(only: Option<&str>, acceptance: bool) -> ExitCode {
    let checks = match fraccd_verify::select(only, acceptance) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let mut failed = Vec::new();
    for check in &checks {
        let r = fraccd_verify::run_check(check);
        let tag = if r.passed { "PASS" } else { "FAIL" };
        println!("{tag} {}/{} ({:.2} s): {}", r.module, r.name, r.elapsed_s, r.detail);
        if !r.passed {
            failed.push(r.name);
        }
    }
    println!("{} of {} checks passed", checks.len() - failed.len(), checks.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("failed: {}", failed.join(", "));
        ExitCode::from(1)
    }
}

fn cmd_rerun(path: &Path, out: Option<&PathBuf>) -> Result<()> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let recorded: RunManifest = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if recorded.rng_algorithm != RNG_ALGORITHM {
        bail!("manifest uses RNG {}, this build uses {}", recorded.rng_algorithm, RNG_ALGORITHM);
    }
    match recorded.invocation {
        Invocation::Solve(mut a) => {
            if let Some(o) = out {
                a.trace = o.clone();
            }
            cmd_solve(&a)
        }
        Invocation::Bench(mut a) => {
            if let Some(o) = out {
                a.out = o.clone();
            }
            cmd_bench(&a)
        }
    }
}

fn report(result: Result<()>) -> ExitCode {
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.cmd {
        Cmd::Solve(a) => report(cmd_solve(a)),
        Cmd::Bench(a) => report(cmd_bench(a)),
        Cmd::Verify { only, acceptance } => cmd_verify(only.as_deref(), *acceptance),
        Cmd::Rerun { manifest, out } => report(cmd_rerun(manifest, out.as_ref())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
        assert_eq!(mean_std(&[4.0]), (4.0, 0.0));
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("PGSA"), "PGSA");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
    }

    #[test]
    fn sibling_paths() {
        let out = Path::new("res/table1.csv");
        assert_eq!(manifest_path(out), Path::new("res/table1.manifest.json"));
        assert_eq!(long_path(out), Path::new("res/table1.long.csv"));
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
