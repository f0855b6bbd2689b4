//! The `run`, `norms` and `weights-check` subcommands.

use crate::config::{ExperimentConfig, NormsConfig, Source, WeightProbe, WeightsConfig};
use crate::error::CliError;
use finsec::algebra::{self, NormReport};
use finsec::diagnostics::{
    convergence_study, solve_pipeline, Pipeline, PipelineSolve, RowRule, StudyConfig, StudyReport,
};
use finsec::models::finite_section;
use finsec::weights::{
    beurling_domar, check_grs, check_moderate, check_subconvolutive, check_submultiplicative,
    BeurlingDomarReport, ModerateReport, SubconvReport, SubmultReport,
};
use rayon::prelude::*;
use serde::Serialize;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const DEFAULT_OUT: &str = "finsec-out";

#[derive(Clone, Debug, Default)]
pub struct Options {
    /// overrides the config's `output_dir`
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub verbose: bool,
}

fn out_dir(opts: &Options, configured: Option<&Path>) -> Result<PathBuf, CliError> {
    let dir = opts
        .out
        .clone()
        .or_else(|| configured.map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    fs::create_dir_all(&dir).map_err(|source| CliError::Io {
        path: dir.clone(),
        source,
    })?;
    Ok(dir)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("artifacts serialize");
    text.push('\n');
    write_file(path, text.as_bytes())
}

/// Everything needed to regenerate a run's artifacts.
#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    command: &'a str,
    library_version: &'static str,
    cli_version: &'static str,
    config_path: String,
    config: serde_json::Value,
    artifacts: Vec<&'a str>,
}

fn write_manifest(
    dir: &Path,
    command: &str,
    src: &Source,
    artifacts: Vec<&str>,
) -> Result<(), CliError> {
    let manifest = Manifest {
        tool: "finsec",
        command,
        library_version: finsec::VERSION,
        cli_version: env!("CARGO_PKG_VERSION"),
        config_path: src.path.display().to_string(),
        config: src.value(),
        artifacts,
    };
    write_json(&dir.join("manifest.json"), &manifest)
}

#[derive(Clone, Debug, Serialize)]
pub struct Failure {
    pub n: usize,
    pub error: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct PipelineSummary {
    pub pipeline: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<RowRule>,
    /// `ok` or `failed`
    pub status: &'static str,
    pub expect_failure: bool,
    pub as_expected: bool,
    /// the first failure, if any
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub failures: Vec<Failure>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fitted_exponent: Option<f64>,
    /// largest entrywise error at each `n`
    pub max_abs_error: Vec<(usize, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub study: Option<StudyReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub model: String,
    pub ns: Vec<usize>,
    pub ok: bool,
    pub pipelines: Vec<PipelineSummary>,
}

#[derive(Serialize)]
struct SolveRecord<'a> {
    pipeline: &'a str,
    n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    r: Option<usize>,
    residual: f64,
    /// `[k..., re, im]` per nonzero entry, lexicographic
    x: Vec<Vec<f64>>,
}

fn solve_record<'a>(pipeline: &'a str, s: &PipelineSolve) -> SolveRecord<'a> {
    let x =
        s.x.iter()
            .map(|(k, v)| {
                let mut row: Vec<f64> = k.iter().map(|&c| c as f64).collect();
                row.push(v.re);
                row.push(v.im);
                row
            })
            .collect();
    SolveRecord {
        pipeline,
        n: s.n,
        r: s.r,
        residual: s.residual,
        x,
    }
}

fn study_csv(summaries: &[PipelineSummary]) -> String {
    let mut out = String::from("pipeline,n,r,error,max_abs_error,phi,ratio,excluded\n");
    for s in summaries {
        let Some(study) = &s.study else { continue };
        for p in &study.points {
            let r = p.r.map(|r| r.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{:e},{:e},{:e},{:e},{}\n",
                s.pipeline, p.n, r, p.error, p.max_abs_error, p.phi, p.ratio, p.excluded
            ));
        }
    }
    out
}

/// Runs every pipeline of an experiment and writes `study.csv`,
/// `summary.json`, `solves.json` and `manifest.json`.
///
/// Each pipeline is first solved at every `n` on its own, so a failing
/// pipeline reports all the `n` at which it fails; the study (errors,
/// reference, rate fit) runs only when every solve succeeded.
pub fn run(config: &Path, opts: &Options) -> Result<RunSummary, CliError> {
    let src = Source::read(config)?;
    let (cfg, exp) = ExperimentConfig::load(&src)?;
    let dir = out_dir(opts, cfg.output_dir.as_deref())?;
    let mut summaries = Vec::new();
    let mut solves = Vec::new();
    for (pipeline, expect_failure) in &exp.pipelines {
        let name = pipeline.name();
        if opts.verbose {
            eprintln!("{name}: solving at n = {:?}", exp.ns);
        }
        let results: Vec<_> = exp
            .ns
            .par_iter()
            .map(|&n| solve_pipeline(&exp.model, &exp.rhs, n, pipeline))
            .collect();
        let mut failures = Vec::new();
        for (&n, res) in exp.ns.iter().zip(&results) {
            match res {
                Ok(s) => solves.push(solve_record(name, s)),
                Err(e) => failures.push(Failure {
                    n,
                    error: e.to_string(),
                }),
            }
        }
        let mut error = failures
            .first()
            .map(|f| format!("{name} pipeline failed at n = {}: {}", f.n, f.error));
        let study = if failures.is_empty() {
            if opts.verbose {
                eprintln!("{name}: running the study");
            }
            let study_cfg = StudyConfig {
                ns: exp.ns.clone(),
                in_space: exp.in_space.clone(),
                out_space: exp.out_space.clone(),
                pipeline: pipeline.clone(),
                reference: exp.reference.clone(),
                trace: exp.trace.clone(),
            };
            match convergence_study(&exp.model, &exp.rhs, &study_cfg) {
                Ok(r) => Some(r),
                Err(e) => {
                    error = Some(format!("{name} study failed: {e}"));
                    None
                }
            }
        } else {
            None
        };
        let failed = error.is_some();
        if opts.verbose {
            match &error {
                Some(e) => eprintln!("{name}: {e}"),
                None => eprintln!("{name}: ok"),
            }
        }
        summaries.push(PipelineSummary {
            pipeline: name.to_string(),
            rows: match pipeline {
                Pipeline::Nonsymmetric { rows, .. } => Some(rows.clone()),
                Pipeline::Symmetric => None,
            },
            status: if failed { "failed" } else { "ok" },
            expect_failure: *expect_failure,
            as_expected: failed == *expect_failure,
            error,
            failures,
            fitted_exponent: study.as_ref().and_then(|s| s.fitted_exponent),
            max_abs_error: study
                .as_ref()
                .map(|s| s.points.iter().map(|p| (p.n, p.max_abs_error)).collect())
                .unwrap_or_default(),
            study,
        });
    }
    let summary = RunSummary {
        model: exp.model.label().to_string(),
        ns: exp.ns.clone(),
        ok: summaries.iter().all(|s| s.as_expected),
        pipelines: summaries,
    };
    write_file(
        &dir.join("study.csv"),
        study_csv(&summary.pipelines).as_bytes(),
    )?;
    write_json(&dir.join("summary.json"), &summary)?;
    write_json(&dir.join("solves.json"), &solves)?;
    write_manifest(
        &dir,
        "run",
        &src,
        vec!["study.csv", "summary.json", "solves.json"],
    )?;

    if let Some(bad) = summary.pipelines.iter().find(|s| !s.as_expected) {
        let msg = match &bad.error {
            Some(e) => e.clone(),
            None => format!(
                "{} pipeline succeeded but was expected to fail",
                bad.pipeline
            ),
        };
        return Err(CliError::Numerical(msg));
    }
    Ok(summary)
}

/// Section norms of a model across `n`; writes `norms.csv` and
/// `manifest.json`.
pub fn norms(config: &Path, opts: &Options) -> Result<Vec<(String, usize, NormReport)>, CliError> {
    let src = Source::read(config)?;
    let (cfg, model) = NormsConfig::load(&src)?;
    let dir = out_dir(opts, cfg.output_dir.as_deref())?;
    let labels: Vec<String> = cfg
        .algebras
        .iter()
        .enumerate()
        .map(|(i, kind)| {
            let repeated = cfg
                .algebras
                .iter()
                .filter(|k| k.name() == kind.name())
                .count()
                > 1;
            if repeated {
                format!("{}_{i}", kind.name())
            } else {
                kind.name().to_string()
            }
        })
        .collect();
    let sections: Vec<_> = cfg
        .ns
        .par_iter()
        .map(|&n| finite_section(&model, n))
        .collect();
    let mut rows = Vec::new();
    for (label, kind) in labels.iter().zip(&cfg.algebras) {
        for (&n, sec) in cfg.ns.iter().zip(&sections) {
            rows.push((label.clone(), n, algebra::norm(sec, kind)));
        }
        if opts.verbose {
            eprintln!("{label}: done");
        }
    }
    let mut csv = Vec::new();
    algebra::write_norm_csv(&rows, &mut csv).expect("writing to memory");
    write_file(&dir.join("norms.csv"), &csv)?;
    write_manifest(&dir, "norms", &src, vec!["norms.csv"])?;
    Ok(rows)
}

#[derive(Clone, Debug, Serialize)]
pub struct GrsReport {
    pub holds: bool,
    pub direction: Vec<i64>,
    /// `(j, v(j k)^(1/j))` at powers of two
    pub trajectory: Vec<(usize, f64)>,
    /// `ln v(j k) / j` at the last step over its value 1024 times earlier
    pub decay_ratio: f64,
}

/// GRS holds when `ln v(j k) / j` vanishes or still shrinks by a factor
/// below `0.9` over the last ten doublings of `j`.
fn grs_report(v: &finsec::WeightSpec, k: &[i64], steps: usize) -> Result<GrsReport, CliError> {
    let traj = check_grs(v, k, steps).map_err(|e| CliError::numerical("GRS probe", e))?;
    let ln_at = |j: usize| traj[j - 1].ln();
    let last = traj.len();
    let early = (last / 1024).max(1);
    let (a, b) = (ln_at(early), ln_at(last));
    let decay_ratio = if a > 0.0 { b / a } else { 0.0 };
    let holds = b <= 1e-12 || decay_ratio < 0.9;
    let trajectory = (0..)
        .map(|e| 1usize << e)
        .take_while(|&j| j <= last)
        .map(|j| (j, traj[j - 1]))
        .collect();
    Ok(GrsReport {
        holds,
        direction: k.to_vec(),
        trajectory,
        decay_ratio,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ModerateSummary {
    pub holds: bool,
    pub report: ModerateReport,
    /// constant on the half-radius cube
    pub c_half: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct WeightSummary {
    pub label: String,
    pub v: finsec::WeightSpec,
    pub all_pass: bool,
    pub submultiplicative: SubmultReport,
    pub grs: GrsReport,
    pub subconvolutive: SubconvReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub moderate: Option<ModerateSummary>,
    pub beurling_domar: Vec<BeurlingDomarReport>,
}

fn probe_weight(p: &WeightProbe) -> Result<WeightSummary, CliError> {
    let v = &p.v;
    let submultiplicative = check_submultiplicative(v, p.radius);
    let direction = p.grs_direction.clone().unwrap_or_else(|| {
        let mut e = vec![0; v.dim];
        e[0] = 1;
        e
    });
    let grs = grs_report(v, &direction, p.grs_steps)?;
    let subconvolutive = check_subconvolutive(v, p.subconvolutive_radius);
    let moderate = match &p.m {
        Some(m) => {
            let full = check_moderate(m, v, p.radius)
                .map_err(|e| CliError::numerical("moderate probe", e))?;
            let half = check_moderate(m, v, p.radius / 2)
                .map_err(|e| CliError::numerical("moderate probe", e))?;
            Some(ModerateSummary {
                holds: full.c_est <= half.c_est * (1.0 + 1e-9),
                c_half: half.c_est,
                report: full,
            })
        }
        None => None,
    };
    let beurling_domar: Vec<_> = p
        .beurling_domar_x
        .iter()
        .map(|&x| beurling_domar(v, x, &p.beurling_domar_checkpoints))
        .collect();
    let all_pass = submultiplicative.holds
        && grs.holds
        && !subconvolutive.divergent
        && moderate.as_ref().is_none_or(|m| m.holds)
        && beurling_domar.iter().all(|b| b.cauchy);
    Ok(WeightSummary {
        label: p.label.clone(),
        v: v.clone(),
        all_pass,
        submultiplicative,
        grs,
        subconvolutive,
        moderate,
        beurling_domar,
    })
}

/// Weight property probes; writes `weights.json` and `manifest.json`.
pub fn weights_check(config: &Path, opts: &Options) -> Result<Vec<WeightSummary>, CliError> {
    let src = Source::read(config)?;
    let cfg = WeightsConfig::load(&src)?;
    let dir = out_dir(opts, cfg.output_dir.as_deref())?;
    let reports: Vec<WeightSummary> = cfg
        .weights
        .par_iter()
        .map(probe_weight)
        .collect::<Result<_, _>>()?;
    if opts.verbose {
        let mut err = std::io::stderr();
        for r in &reports {
            let _ = writeln!(
                err,
                "{}: {}",
                r.label,
                if r.all_pass {
                    "all checks pass"
                } else {
                    "some checks fail"
                }
            );
        }
    }
    write_json(&dir.join("weights.json"), &reports)?;
    write_manifest(&dir, "weights-check", &src, vec!["weights.json"])?;
    Ok(reports)
}
