//! Convergence studies against the tail functional `phi(n)`, rate fits,
//! uniform inverse traces and the two-term error decomposition.

use crate::algebra::{norm, AlgebraKind};
use crate::error::{FsmError, Result};
use crate::lattice;
use crate::models::{finite_section, Embedded, MatrixModel};
use crate::sections::{section_inverse, solve_dense, SpectralBounds};
use crate::solver::{
    certify_positive, probe_radius, solve_fsm, solve_fsm_nonsym, Backend, FsmConfig, LambdaSource,
    NonSymConfig, Positivity,
};
use crate::weights::{lp_norm, tail_phi, SpaceSpec, SparseVector, WeightSpec};
use crate::C64;
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{self, Write};
use std::sync::Arc;
use std::time::Instant;

/// A right-hand side `b`, either finitely supported or given by a rule that
/// is sampled on whatever cube a pipeline needs.
#[derive(Clone)]
pub enum Rhs {
    Sparse(SparseVector),
    /// `b_k = amplitude (1 + |k|_inf)^-s`
    Power {
        dim: usize,
        s: f64,
        amplitude: f64,
    },
    Rule {
        dim: usize,
        rule: Arc<dyn Fn(&[i64]) -> C64 + Send + Sync>,
        /// `|b|` in the study's input space, supplied by the caller
        norm: f64,
    },
}

impl std::fmt::Debug for Rhs {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Rhs::Sparse(v) => f.debug_tuple("Sparse").field(v).finish(),
            Rhs::Power { dim, s, amplitude } => f
                .debug_struct("Power")
                .field("dim", dim)
                .field("s", s)
                .field("amplitude", amplitude)
                .finish(),
            Rhs::Rule { dim, norm, .. } => f
                .debug_struct("Rule")
                .field("dim", dim)
                .field("norm", norm)
                .finish(),
        }
    }
}

impl Rhs {
    pub fn dim(&self) -> usize {
        match self {
            Rhs::Sparse(v) => v.dim(),
            Rhs::Power { dim, .. } | Rhs::Rule { dim, .. } => *dim,
        }
    }

    /// `P_n b`.
    pub fn sample(&self, n: usize) -> SparseVector {
        match self {
            Rhs::Sparse(v) => v.restrict(n),
            Rhs::Power { dim, s, amplitude } => SparseVector::from_fn(*dim, n, |k| {
                C64::new(
                    amplitude * (1.0 + lattice::sup_norm(k) as f64).powf(-s),
                    0.0,
                )
            }),
            Rhs::Rule { dim, rule, .. } => SparseVector::from_fn(*dim, n, |k| rule(k)),
        }
    }

    /// `|b|` in `l^p_m`.
    pub fn norm_in(&self, space: &SpaceSpec) -> Result<f64> {
        match self {
            Rhs::Sparse(v) => Ok(lp_norm(v, space)),
            Rhs::Power { dim, s, amplitude } => {
                // (sum_k (m(k) (1 + |k|)^-s)^p)^(1/p), sup for p = inf
                let decay = WeightSpec::polynomial(*s, *dim);
                Ok(amplitude.abs() * tail_phi(&decay, &space.m, f64::INFINITY, space.p, -1)?)
            }
            Rhs::Rule { norm, .. } => Ok(*norm),
        }
    }
}

/// How the row cube of the non-symmetric method follows `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowRule {
    /// `n + band_width`, or `ceil(n^alpha)` from the envelope decay
    Schedule { alpha: Option<f64> },
    /// `r = factor * n`
    Factor { factor: usize },
    /// `r = n + margin`
    Margin { margin: usize },
}

impl RowRule {
    fn config(&self, n: usize, backend: Backend) -> NonSymConfig {
        let mut cfg = match self {
            RowRule::Schedule { alpha } => NonSymConfig::scheduled(n, *alpha),
            RowRule::Factor { factor } => NonSymConfig::new(n, (factor * n).max(n)),
            RowRule::Margin { margin } => NonSymConfig::new(n, n + margin),
        };
        cfg.backend = backend;
        cfg
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Pipeline {
    Symmetric,
    Nonsymmetric {
        rows: RowRule,
        #[serde(default)]
        backend: Backend,
    },
}

impl Pipeline {
    pub fn name(&self) -> &'static str {
        match self {
            Pipeline::Symmetric => "symmetric",
            Pipeline::Nonsymmetric { .. } => "nonsymmetric",
        }
    }
}

/// Reference solution against which errors are measured.
#[derive(Clone, Debug, PartialEq)]
pub enum Reference {
    /// the known solution
    Exact(SparseVector),
    /// the same pipeline at `N = factor * max(ns)`, doubled while the
    /// solutions at `N` and `N/2` differ by more than a tenth of the
    /// smallest measured error, up to `max_n`
    Section { factor: usize, max_n: usize },
}

impl Default for Reference {
    fn default() -> Self {
        Reference::Section {
            factor: 4,
            max_n: 1024,
        }
    }
}

#[derive(Clone, Debug)]
pub struct StudyConfig {
    pub ns: Vec<usize>,
    pub in_space: SpaceSpec,
    pub out_space: SpaceSpec,
    pub pipeline: Pipeline,
    pub reference: Reference,
    /// algebra for the uniform inverse trace (symmetric pipeline only)
    pub trace: Option<AlgebraKind>,
}

impl StudyConfig {
    pub fn new(ns: Vec<usize>, dim: usize, pipeline: Pipeline) -> Self {
        StudyConfig {
            ns,
            in_space: SpaceSpec::l2(dim),
            out_space: SpaceSpec::l2(dim),
            pipeline,
            reference: Reference::default(),
            trace: None,
        }
    }
}

/// One solve of a study.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudyPoint {
    pub n: usize,
    pub r: Option<usize>,
    /// `|x - x_n|` in the output space
    pub error: f64,
    pub max_abs_error: f64,
    pub phi: f64,
    /// `error / (|b| phi(n))`
    pub ratio: f64,
    /// `|A_n x_n - P_n b|` (symmetric) or `|P_W (A x - b)|` (non-symmetric)
    pub residual: f64,
    pub wall_time: f64,
    /// left out of the rate fit (below the reference accuracy floor)
    pub excluded: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReferenceInfo {
    /// `None` for an exact reference
    pub n_ref: Option<usize>,
    pub r_ref: Option<usize>,
    /// `|x_N - x_{N/2}|` in the output space
    pub stability: f64,
    pub floor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudyReport {
    pub pipeline: String,
    pub ns: Vec<usize>,
    pub errors: Vec<f64>,
    pub phi: Vec<f64>,
    pub fitted_exponent: Option<f64>,
    pub c_ratio_range: (f64, f64),
    pub uniform_inverse_trace: Vec<f64>,
    pub b_norm: f64,
    pub points: Vec<StudyPoint>,
    pub reference: ReferenceInfo,
    pub bounds: Option<SpectralBounds>,
}

/// One solve of a pipeline at a single `n`.
#[derive(Clone, Debug)]
pub struct PipelineSolve {
    pub n: usize,
    /// row cube of the non-symmetric pipeline
    pub r: Option<usize>,
    pub x: SparseVector,
    pub residual: f64,
    pub wall_time: f64,
}

/// Runs `pipeline` once at `n`, as a study does for each of its `ns`.
pub fn solve_pipeline(
    a: &MatrixModel,
    b: &Rhs,
    n: usize,
    pipeline: &Pipeline,
) -> Result<PipelineSolve> {
    let start = Instant::now();
    match pipeline {
        Pipeline::Symmetric => {
            let cfg = FsmConfig::new(n, a.dim()).classical();
            let sol = solve_fsm(a, &b.sample(n), &cfg)?;
            Ok(PipelineSolve {
                n,
                r: None,
                x: sol.x,
                residual: sol.section_residual,
                wall_time: start.elapsed().as_secs_f64(),
            })
        }
        Pipeline::Nonsymmetric { rows, backend } => {
            let cfg = rows.config(n, *backend);
            let (r, _) = crate::solver::resolve_r(a, &cfg)?;
            let sol = solve_fsm_nonsym(a, &b.sample(r), &cfg)?;
            Ok(PipelineSolve {
                n,
                r: Some(sol.r),
                x: sol.x,
                residual: sol.residual,
                wall_time: start.elapsed().as_secs_f64(),
            })
        }
    }
}

fn check_ns(ns: &[usize]) -> Result<()> {
    if ns.is_empty() {
        return Err(FsmError::invalid("ns must be nonempty"));
    }
    if ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(FsmError::invalid("ns must be strictly increasing"));
    }
    Ok(())
}

/// Certifies positivity for a symmetric study of a hermitian model. Other
/// models are solved without a check, so singular sections surface as
/// errors.
fn study_bounds(a: &MatrixModel, cfg: &StudyConfig) -> Result<Option<SpectralBounds>> {
    if cfg.pipeline != Pipeline::Symmetric || !a.is_hermitian() {
        return Ok(None);
    }
    let n_max = *cfg.ns.last().expect("nonempty");
    certify_positive(a, probe_radius(n_max, a.dim()), LambdaSource::Eigen).map(Some)
}

pub fn convergence_study(a: &MatrixModel, b: &Rhs, cfg: &StudyConfig) -> Result<StudyReport> {
    check_ns(&cfg.ns)?;
    cfg.in_space.validate()?;
    cfg.out_space.validate()?;
    if a.dim() != b.dim() {
        return Err(FsmError::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let bounds = study_bounds(a, cfg)?;
    let b_norm = b.norm_in(&cfg.in_space)?;

    let solved: Vec<PipelineSolve> = cfg
        .ns
        .par_iter()
        .map(|&n| solve_pipeline(a, b, n, &cfg.pipeline))
        .collect::<Result<_>>()?;

    let phi: Vec<f64> = cfg
        .ns
        .iter()
        .map(|&n| {
            tail_phi(
                &cfg.in_space.m,
                &cfg.out_space.m,
                cfg.in_space.p,
                cfg.out_space.p,
                n as i64,
            )
        })
        .collect::<Result<_>>()?;

    let measure = |x_ref: &SparseVector| -> Vec<(f64, f64)> {
        solved
            .iter()
            .map(|s| {
                let diff = x_ref.sub(&s.x);
                (
                    lp_norm(&diff, &cfg.out_space),
                    diff.iter().map(|(_, v)| v.norm()).fold(0.0, f64::max),
                )
            })
            .collect()
    };

    let (errors, reference) = match &cfg.reference {
        Reference::Exact(x) => {
            let floor = 1e-12 * lp_norm(x, &cfg.out_space);
            (
                measure(x),
                ReferenceInfo {
                    n_ref: None,
                    r_ref: None,
                    stability: 0.0,
                    floor,
                },
            )
        }
        Reference::Section { factor, max_n } => {
            let mut n_ref = factor * cfg.ns.last().expect("nonempty");
            let mut half = solve_pipeline(a, b, n_ref / 2, &cfg.pipeline)?;
            loop {
                let full = solve_pipeline(a, b, n_ref, &cfg.pipeline)?;
                let errors = measure(&full.x);
                let x_norm = lp_norm(&full.x, &cfg.out_space);
                let stability = lp_norm(&full.x.sub(&half.x), &cfg.out_space);
                let min_err = errors.iter().map(|e| e.0).fold(f64::INFINITY, f64::min);
                let allowed = (0.1 * min_err).max(1e-13 * x_norm);
                if stability <= allowed {
                    break (
                        errors,
                        ReferenceInfo {
                            n_ref: Some(n_ref),
                            r_ref: full.r,
                            stability,
                            floor: (10.0 * stability).max(1e-12 * x_norm),
                        },
                    );
                }
                if 2 * n_ref > *max_n {
                    return Err(FsmError::ReferenceUnstable {
                        difference: stability,
                        allowed,
                    });
                }
                n_ref *= 2;
                half = full;
            }
        }
    };

    let points: Vec<StudyPoint> = solved
        .iter()
        .zip(&errors)
        .zip(&phi)
        .map(|((s, &(error, max_abs_error)), &phi)| {
            let scale = b_norm * phi;
            StudyPoint {
                n: s.n,
                r: s.r,
                error,
                max_abs_error,
                phi,
                ratio: if scale > 0.0 { error / scale } else { f64::NAN },
                residual: s.residual,
                wall_time: s.wall_time,
                excluded: error < reference.floor,
            }
        })
        .collect();

    let fit: Vec<&StudyPoint> = points.iter().filter(|p| !p.excluded).collect();
    let fitted_exponent = if fit.len() >= 3 {
        let ns: Vec<f64> = fit.iter().map(|p| p.n as f64).collect();
        let vals: Vec<f64> = fit.iter().map(|p| p.error).collect();
        fit_rate(&ns, &vals).ok()
    } else {
        None
    };
    let ratios: Vec<f64> = points
        .iter()
        .map(|p| p.ratio)
        .filter(|r| r.is_finite())
        .collect();
    let c_ratio_range = (
        ratios.iter().cloned().fold(f64::INFINITY, f64::min),
        ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );

    let uniform_inverse_trace = match (&cfg.trace, &cfg.pipeline) {
        (Some(kind), Pipeline::Symmetric) => uniform_inverse_trace(a, &cfg.ns, kind)?,
        _ => Vec::new(),
    };

    Ok(StudyReport {
        pipeline: cfg.pipeline.name().to_string(),
        ns: cfg.ns.clone(),
        errors: points.iter().map(|p| p.error).collect(),
        phi,
        fitted_exponent,
        c_ratio_range,
        uniform_inverse_trace,
        b_norm,
        points,
        reference,
        bounds,
    })
}

impl StudyReport {
    /// Columns `n,r,error,phi,ratio`; `r` is empty for the symmetric method.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "n,r,error,phi,ratio")?;
        for p in &self.points {
            let r = p.r.map(|r| r.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{:e},{:e},{:e}", p.n, r, p.error, p.phi, p.ratio)?;
        }
        Ok(())
    }
}

/// Least-squares slope of `ln values` against `ln ns`.
pub fn fit_rate(ns: &[f64], values: &[f64]) -> Result<f64> {
    if ns.len() != values.len() {
        return Err(FsmError::DimensionMismatch {
            expected: ns.len(),
            got: values.len(),
        });
    }
    if ns.len() < 3 {
        return Err(FsmError::invalid("a rate fit needs at least three points"));
    }
    if let Some(bad) = ns
        .iter()
        .chain(values)
        .find(|v| !(**v > 0.0) || !v.is_finite())
    {
        return Err(FsmError::invalid(format!(
            "rate fit needs positive finite data, got {bad}"
        )));
    }
    let xs: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(FsmError::invalid("rate fit needs at least two distinct n"));
    }
    Ok(sxy / sxx)
}

/// `|A_n^-1|` under `kind` for each `n`.
pub fn uniform_inverse_trace(
    a: &MatrixModel,
    ns: &[usize],
    kind: &AlgebraKind,
) -> Result<Vec<f64>> {
    ns.par_iter()
        .map(|&n| Ok(norm(&section_inverse(&finite_section(a, n))?, kind).value))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorDecomposition {
    /// `|A^-1 (b - P_n b)|_2`
    pub term_i: f64,
    /// `|A^-1 (A_n - A) A_n^-1 P_n b|_2`
    pub term_ii: f64,
    /// `|x - x_n|_2`
    pub error: f64,
    pub n_ref: usize,
}

/// Splits `x - x_n` into the truncation of `b` and the section defect, with
/// `A` replaced by its section on `C_{n_ref}`. On that surrogate the identity
/// `x - x_n = I + II` is exact.
pub fn error_decomposition(
    a: &MatrixModel,
    b: &Rhs,
    n: usize,
    n_ref: usize,
) -> Result<ErrorDecomposition> {
    if n_ref < n {
        return Err(FsmError::invalid("reference cube must contain C_n"));
    }
    let d = a.dim();
    let big = finite_section(a, n_ref);
    let lu = crate::sections::LuFactor::new(big.matrix())?;
    let bn = b.sample(n);
    let x_n = solve_dense(&finite_section(a, n), &bn.to_dense(n))?.x;
    let x_n = SparseVector::from_dense(d, n, &x_n);

    let x = lu.solve(&b.sample(n_ref).to_dense(n_ref));
    let term_i_vec = lu.solve(&b.sample(n_ref).sub(&bn).to_dense(n_ref));

    // (A_n - A) x_n on C_N, with A_n = P_n A_N P_n
    let xn_big = DVector::from_column_slice(&x_n.to_dense(n_ref));
    let a_xn = big.matrix() * &xn_big;
    let pts = lattice::cube_points(n_ref, d, &vec![0; d]);
    let mut defect = vec![C64::default(); a_xn.len()];
    for (i, k) in pts.chunks(d).enumerate() {
        let inside = lattice::in_cube(k, n as i64);
        defect[i] = if inside { C64::default() } else { -a_xn[i] };
    }
    // inside C_n, A_n x_n - P_n A x_n vanishes since x_n lives on C_n
    let term_ii_vec = lu.solve(&defect);

    let xn_dense = x_n.to_dense(n_ref);
    let err: Vec<C64> = x.iter().zip(&xn_dense).map(|(a, b)| a - b).collect();
    Ok(ErrorDecomposition {
        term_i: crate::sections::l2(&term_i_vec),
        term_ii: crate::sections::l2(&term_ii_vec),
        error: crate::sections::l2(&err),
        n_ref,
    })
}

/// Positivity policy the study applies, for reporting.
pub fn study_positivity(a: &MatrixModel, pipeline: &Pipeline) -> Positivity {
    if *pipeline == Pipeline::Symmetric && a.is_hermitian() {
        Positivity::Certify
    } else {
        Positivity::Classical
    }
}
