//! The symmetric finite section method `A_n x_n = P_n b` and the
//! non-symmetric one, which solves the truncated normal equations
//! `A*_{r,n} A_{r,n} x = A*_{r,n} P_r b`.

use crate::algebra::norm_av1;
use crate::error::{FsmError, Result};
use crate::lattice;
use crate::models::{apply, finite_section, rect_section, Embedded, FiniteSection, MatrixModel};
use crate::sections::{
    estimate_spectral_bounds_with, l2, solve_dense, solve_matrix, ExtensionHandle, SpectralBounds,
    SpectralMethod,
};
use crate::weights::{inverse_power_tail, lp_norm, SpaceSpec, SparseVector, WeightSpec};
use crate::C64;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Largest cube size used to probe spectral bounds.
const PROBE_MAX_POINTS: usize = 1100;

/// Probe radius for certifying positivity alongside a solve at `n`.
pub fn probe_radius(n: usize, dim: usize) -> usize {
    let mut m = n.clamp(8, 32);
    while m > 1 && lattice::cube_len(m, dim) > PROBE_MAX_POINTS {
        m -= 1;
    }
    m
}

/// How `lambda_+` (and `lambda_-`) are obtained when positivity is certified.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaSource {
    #[default]
    Eigen,
    Schur,
    Given(f64),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Positivity {
    /// require a hermitian model with certified `lambda_- > 0`
    #[default]
    Certify,
    /// solve the section system without any check
    Classical,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FsmConfig {
    pub n: usize,
    /// space in which the solution norm is reported
    pub space: SpaceSpec,
    pub lambda_source: LambdaSource,
    pub positivity: Positivity,
}

impl FsmConfig {
    pub fn new(n: usize, dim: usize) -> Self {
        FsmConfig {
            n,
            space: SpaceSpec::l2(dim),
            lambda_source: LambdaSource::Eigen,
            positivity: Positivity::Certify,
        }
    }

    pub fn classical(mut self) -> Self {
        self.positivity = Positivity::Classical;
        self
    }
}

#[derive(Clone, Debug)]
pub struct FsmSolution {
    pub n: usize,
    pub x: SparseVector,
    /// `|A_n x_n - P_n b|_2`
    pub section_residual: f64,
    /// `|x_n|` in the configured space
    pub norm: f64,
    pub bounds: Option<SpectralBounds>,
}

/// Certifies `lambda_- > 0` on a hermitian model.
pub fn certify_positive(
    a: &MatrixModel,
    n_probe: usize,
    source: LambdaSource,
) -> Result<SpectralBounds> {
    let method = match source {
        LambdaSource::Schur => SpectralMethod::SchurBound,
        _ => SpectralMethod::EigOfLargestSection,
    };
    let mut bounds = estimate_spectral_bounds_with(a, n_probe, method)?;
    if let LambdaSource::Given(lp) = source {
        bounds.lambda_plus = lp;
    }
    if !bounds.is_positive() {
        return Err(FsmError::NotPositiveDefinite {
            lambda_minus: bounds.lambda_minus,
        });
    }
    Ok(bounds)
}

fn dense_on_cube(b: &SparseVector, n: usize) -> Vec<C64> {
    b.to_dense(n)
}

pub fn solve_fsm(a: &MatrixModel, b: &SparseVector, cfg: &FsmConfig) -> Result<FsmSolution> {
    check_dim(a, b)?;
    let bounds = match cfg.positivity {
        Positivity::Certify => Some(certify_positive(
            a,
            probe_radius(cfg.n, a.dim()),
            cfg.lambda_source,
        )?),
        Positivity::Classical => None,
    };
    let section = finite_section(a, cfg.n);
    let sol = solve_dense(&section, &dense_on_cube(b, cfg.n))?;
    let x = SparseVector::from_dense(a.dim(), cfg.n, &sol.x);
    Ok(FsmSolution {
        n: cfg.n,
        norm: lp_norm(&x, &cfg.space),
        x,
        section_residual: sol.residual,
        bounds,
    })
}

fn check_dim(a: &MatrixModel, b: &SparseVector) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(FsmError::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(())
}

/// Row cube radius `r(n) = ceil(n^alpha)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RChoice {
    pub r: usize,
    pub alpha: f64,
    /// `2s / (2s - d)`, above which convergence is proven
    pub threshold: f64,
    pub below_threshold: bool,
}

/// Default schedule exponent: the proven threshold plus a quarter.
pub fn default_alpha(s: f64, d: usize) -> Result<f64> {
    let d = d as f64;
    if !(2.0 * s > d) {
        return Err(FsmError::invalid(format!(
            "decay s = {s} must exceed d/2 = {}",
            d / 2.0
        )));
    }
    Ok(2.0 * s / (2.0 * s - d) + 0.25)
}

pub fn choose_r(n: usize, s: f64, d: usize, alpha: Option<f64>) -> Result<RChoice> {
    let threshold = if 2.0 * s > d as f64 {
        2.0 * s / (2.0 * s - d as f64)
    } else {
        f64::INFINITY
    };
    let alpha = match alpha {
        Some(a) => a,
        None => default_alpha(s, d)?,
    };
    if !(alpha > 0.0) {
        return Err(FsmError::invalid(format!(
            "schedule exponent alpha = {alpha} must be positive"
        )));
    }
    let r = ((n as f64).powf(alpha) - 1e-9).ceil().max(0.0) as usize;
    Ok(RChoice {
        r: r.max(n + 1),
        alpha,
        threshold,
        below_threshold: alpha <= threshold,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// form `A* A` and eliminate
    #[default]
    Normal,
    /// Householder QR of the tall section
    Qr,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NonSymConfig {
    pub n: usize,
    /// explicit row cube; otherwise derived from the model
    pub r: Option<usize>,
    pub alpha: Option<f64>,
    pub backend: Backend,
    /// radius of the window on which `|A x - b|` is reported (default `r`)
    pub residual_radius: Option<usize>,
}

impl NonSymConfig {
    pub fn new(n: usize, r: usize) -> Self {
        NonSymConfig {
            n,
            r: Some(r),
            ..Default::default()
        }
    }

    pub fn scheduled(n: usize, alpha: Option<f64>) -> Self {
        NonSymConfig {
            n,
            alpha,
            ..Default::default()
        }
    }
}

/// Row radius for `A_{r,n}`: explicit, `n + w` for banded models, the power
/// schedule for polynomial envelopes, and a margin where `e^(-2a m^b)`
/// drops below `1e-16` for (sub)exponential ones.
pub fn resolve_r(a: &MatrixModel, cfg: &NonSymConfig) -> Result<(usize, Option<RChoice>)> {
    if let Some(r) = cfg.r {
        if r < cfg.n {
            return Err(FsmError::invalid(format!(
                "row cube r = {r} smaller than n = {}",
                cfg.n
            )));
        }
        return Ok((r, None));
    }
    if let Some(w) = a.band_width() {
        return Ok((cfg.n + w, None));
    }
    let v = &a.envelope().weight;
    if v.table.is_none() && v.a > 0.0 && v.b > 0.0 {
        let m = (16.0 * std::f64::consts::LN_10 / (2.0 * v.a))
            .powf(1.0 / v.b)
            .ceil() as usize;
        return Ok((cfg.n + m.clamp(1, 4 * cfg.n + 64), None));
    }
    let s = match &v.table {
        Some(t) => t.tail_exponent,
        None => v.s,
    };
    let choice = choose_r(cfg.n, s, a.dim(), cfg.alpha)?;
    Ok((choice.r, Some(choice)))
}

#[derive(Clone, Debug)]
pub struct NonSymSolution {
    pub n: usize,
    pub r: usize,
    pub x: SparseVector,
    pub schedule: Option<RChoice>,
    pub backend: Backend,
    /// `|P_W (A x - b)|_2` on the window `W`
    pub residual: f64,
    /// bound on the part of `|A x - b|_2` outside the window
    pub residual_tail_bound: f64,
    pub residual_radius: usize,
}

pub fn solve_fsm_nonsym(
    a: &MatrixModel,
    b: &SparseVector,
    cfg: &NonSymConfig,
) -> Result<NonSymSolution> {
    check_dim(a, b)?;
    let (r, schedule) = resolve_r(a, cfg)?;
    let n = cfg.n;
    let d = a.dim();
    let window = cfg.residual_radius.unwrap_or(r);

    let x = if b.is_zero() {
        SparseVector::zeros(d)
    } else {
        let arn = rect_section(a, r, n).into_matrix();
        let pb = DVector::from_column_slice(&b.to_dense(r));
        let coeffs = match cfg.backend {
            Backend::Normal => normal_solve(&arn, &pb)?,
            Backend::Qr => qr_solve(&arn, &pb)?,
        };
        SparseVector::from_dense(d, n, &coeffs)
    };

    let applied = apply(a, &x, window);
    let res = applied.y.sub(&b.restrict(window));
    let residual = l2(&res.iter().map(|(_, v)| v).collect::<Vec<_>>());
    let b_tail = l2(&b.tail(window).iter().map(|(_, v)| v).collect::<Vec<_>>());
    Ok(NonSymSolution {
        n,
        r,
        x,
        schedule,
        backend: cfg.backend,
        residual,
        residual_tail_bound: applied.truncation_bound + b_tail,
        residual_radius: window,
    })
}

fn normal_solve(arn: &DMatrix<C64>, pb: &DVector<C64>) -> Result<Vec<C64>> {
    let adj = arn.adjoint();
    let normal = &adj * arn;
    let rhs = adj * pb;
    Ok(solve_matrix(&normal, rhs.as_slice())?.x)
}

fn qr_solve(arn: &DMatrix<C64>, pb: &DVector<C64>) -> Result<Vec<C64>> {
    let cols = arn.ncols();
    let qr = arn.clone().qr();
    let rmat = qr.r();
    let qtb = qr.q().adjoint() * pb;
    let scale = arn.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let threshold = crate::sections::PIVOT_RTOL * scale;
    for k in 0..cols {
        let piv = rmat[(k, k)].norm();
        if piv <= threshold {
            return Err(FsmError::SingularSection {
                size: cols,
                step: k,
                pivot: piv,
                threshold,
            });
        }
    }
    let mut x = qtb.rows(0, cols).into_owned();
    for k in (0..cols).rev() {
        let mut acc = x[k];
        for j in k + 1..cols {
            acc -= rmat[(k, j)] * x[j];
        }
        x[k] = acc / rmat[(k, k)];
    }
    Ok(x.as_slice().to_vec())
}

/// `E_{r,n}` with a bound on the part of the `j`-sum that was not evaluated.
#[derive(Clone, Debug)]
pub struct Defect {
    pub section: FiniteSection,
    /// entrywise bound on the omitted rows `j` outside `C_outer`
    pub remainder: f64,
    pub outer: usize,
}

/// Target for the omitted part of the defect sum.
pub const DEFECT_TOL: f64 = 1e-12;
const DEFECT_MAX_ROWS: usize = 4_000_000;

pub fn defect_matrix(a: &MatrixModel, r: usize, n: usize) -> Result<FiniteSection> {
    Ok(defect_with_bound(a, r, n)?.section)
}

/// `(E_{r,n})_{kl} = sum_{j not in C_r} conj(a_jk) a_jl` for `k, l` in `C_n`.
/// Rows are summed shell by shell until the Cauchy-Schwarz bound
/// `C^2 sum_{i not in C_{R-n}} v(i)^-2` on the rest is below `DEFECT_TOL`.
pub fn defect_with_bound(a: &MatrixModel, r: usize, n: usize) -> Result<Defect> {
    if r < n {
        return Err(FsmError::invalid(format!(
            "row cube r = {r} smaller than n = {n}"
        )));
    }
    let d = a.dim();
    let size = lattice::cube_len(n, d);
    let env = a.envelope();
    let (outer, remainder) = match a.band_width() {
        Some(w) => ((n + w).max(r), 0.0),
        None if env.constant == 0.0 => (r, 0.0),
        None => {
            let c2 = env.constant * env.constant;
            let bound = |m: usize| -> Result<f64> {
                Ok(c2 * inverse_power_tail(&env.weight, 2.0, m as i64)?)
            };
            let mut m = (r - n).max(1);
            while bound(m)? > DEFECT_TOL && rows_between(r, n + 2 * m, d) <= DEFECT_MAX_ROWS {
                m *= 2;
            }
            // shrink back to the smallest sufficient margin
            let (mut lo, mut hi) = (m / 2, m);
            while hi - lo > 1 && lo >= r - n {
                let mid = (lo + hi) / 2;
                if bound(mid)? <= DEFECT_TOL {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let outer = (n + hi).max(r);
            (outer, bound(outer - n)?)
        }
    };

    let cols = lattice::cube_points(n, d, &vec![0; d]);
    let rows: Vec<i64> = (r + 1..=outer)
        .flat_map(|t| lattice::shell_points(t, d))
        .collect();
    let partials: Vec<DMatrix<C64>> = rows
        .par_chunks(256 * d)
        .map(|chunk| {
            let mut acc = DMatrix::<C64>::zeros(size, size);
            let mut row = vec![C64::default(); size];
            for j in chunk.chunks(d) {
                for (slot, l) in row.iter_mut().zip(cols.chunks(d)) {
                    *slot = a.entry(j, l);
                }
                for (li, al) in row.iter().enumerate() {
                    if *al == C64::default() {
                        continue;
                    }
                    for (ki, ak) in row.iter().enumerate() {
                        acc[(ki, li)] += ak.conj() * al;
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = DMatrix::<C64>::zeros(size, size);
    for p in &partials {
        total += p;
    }
    Ok(Defect {
        section: FiniteSection::from_matrix(n, d, total)?,
        remainder,
        outer,
    })
}

fn rows_between(r: usize, outer: usize, d: usize) -> usize {
    lattice::cube_len(outer, d).saturating_sub(lattice::cube_len(r, d))
}

/// Right-hand side of the defect estimate
/// `|A|_{A_v}^2 sup_{k in C_2n} v(k)^2 sum_{j not in C_{r-n}} v(j)^-2`.
pub fn defect_bound(norm_av_a: f64, v: &WeightSpec, n: usize, r: usize) -> Result<f64> {
    if r < n {
        return Err(FsmError::invalid("defect bound needs r >= n"));
    }
    // radial weights grow with the radius, so the sup sits at a corner
    let corner = vec![(2 * n) as i64; v.dim];
    let sup = v.eval(&corner).powi(2);
    Ok(norm_av_a * norm_av_a * sup * inverse_power_tail(v, 2.0, (r - n) as i64)?)
}

/// `B_n = P_n A* A P_n` up to the defect remainder.
pub fn gram_section(a: &MatrixModel, n: usize) -> Result<(FiniteSection, f64)> {
    let arn = rect_section(a, n, n).into_matrix();
    let defect = defect_with_bound(a, n, n)?;
    let b = arn.adjoint() * arn + defect.section.matrix();
    Ok((FiniteSection::from_matrix(n, a.dim(), b)?, defect.remainder))
}

/// Extension of `D_{r,n}` with `lambda_+` a Schur upper bound for
/// `sigma(A* A)` measured on `B_{n_probe}`.
pub fn nonsym_extension(
    a: &MatrixModel,
    r: usize,
    n: usize,
    n_probe: usize,
) -> Result<ExtensionHandle> {
    let (b, rem) = gram_section(a, n_probe)?;
    let lambda_plus = norm_av1(&b, &WeightSpec::constant(a.dim())).value + rem * b.size() as f64;
    let arn = rect_section(a, r, n).into_matrix();
    let d = FiniteSection::from_matrix(n, a.dim(), arn.adjoint() * arn)?;
    ExtensionHandle::new(d, lambda_plus)
}
