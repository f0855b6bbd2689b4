//! Certified evaluation of radial lattice tails
//! `sum_{k not in C_n} g(k)` and `sup_{k not in C_n} g(k)`.
//!
//! The summand is a function of the radius `d(k)` only. Beyond a threshold
//! radius it is described by a [`LogForm`], i.e.
//! `ln g(t) = c + sum_i a_i t^(b_i) + sigma ln(1 + t)`, which is what every
//! ratio of parametric weights reduces to. The explicit part of the sum runs
//! over sup-norm shells; the remainder is either closed form (polynomial
//! decay, via Hurwitz zeta) or bounded by an incomplete gamma integral
//! (stretched exponential decay).

use super::zeta::hurwitz_zeta;
use super::NormKind;
use crate::lattice::{shell_count, shell_points};
use statrs::function::gamma::{gamma, gamma_ur};

/// Target relative size of the certified remainder.
pub(crate) const REL_TOL: f64 = 1e-9;

/// Largest sup radius enumerated point by point for non-radial norms.
const MAX_ENUM_POINTS: f64 = 4.0e6;

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct LogForm {
    pub constant: f64,
    /// `(coefficient, power)` with `0 < power <= 1`
    pub terms: Vec<(f64, f64)>,
    pub poly: f64,
    /// radius from which the form is exact
    pub valid_from: f64,
}

impl LogForm {
    #[cfg(test)]
    pub fn zero() -> Self {
        LogForm {
            constant: 0.0,
            terms: Vec::new(),
            poly: 0.0,
            valid_from: 0.0,
        }
    }

    pub fn scale(&self, r: f64) -> Self {
        LogForm {
            constant: self.constant * r,
            terms: self.terms.iter().map(|&(c, p)| (c * r, p)).collect(),
            poly: self.poly * r,
            valid_from: self.valid_from,
        }
    }

    pub fn sub(&self, other: &LogForm) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().map(|&(c, p)| (-c, p)));
        LogForm {
            constant: self.constant - other.constant,
            terms,
            poly: self.poly - other.poly,
            valid_from: self.valid_from.max(other.valid_from),
        }
        .normalized()
    }

    pub fn normalized(mut self) -> Self {
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for &(c, p) in &self.terms {
            if p == 0.0 {
                self.constant += c;
                continue;
            }
            match merged.iter_mut().find(|(_, q)| *q == p) {
                Some(slot) => slot.0 += c,
                None => merged.push((c, p)),
            }
        }
        merged.retain(|&(c, _)| c != 0.0);
        merged.sort_by(|a, b| a.1.total_cmp(&b.1));
        self.terms = merged;
        self
    }

    #[cfg(test)]
    pub fn eval(&self, t: f64) -> f64 {
        self.constant
            + self.terms.iter().map(|&(c, p)| c * t.powf(p)).sum::<f64>()
            + self.poly * (1.0 + t).ln()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Decay {
    Poly { sigma: f64 },
    Stretched { alpha: f64, beta: f64 },
    Grows,
}

fn classify(form: &LogForm) -> Decay {
    match form.terms.last() {
        None => Decay::Poly { sigma: form.poly },
        Some(&(c, _)) if c > 0.0 => Decay::Grows,
        Some(&(c, p)) => Decay::Stretched { alpha: -c, beta: p },
    }
}

/// A radial summand on `Z^d`.
pub(crate) struct Radial<'a> {
    pub dim: usize,
    pub norm: NormKind,
    /// exact `ln g` at a radius
    pub ln_g: &'a dyn Fn(f64) -> f64,
    pub form: LogForm,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct TailSum {
    /// certified upper bound of the tail
    pub value: f64,
    /// `value` minus a certified lower bound
    pub slack: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Divergence;

impl Radial<'_> {
    fn radial_exact(&self) -> bool {
        self.dim == 1 || self.norm == NormKind::Sup
    }

    /// Exact sum over the sup-norm shell of radius `t`.
    fn shell_sum(&self, t: u64) -> f64 {
        if self.radial_exact() {
            shell_count(t, self.dim) * (self.ln_g)(t as f64).exp()
        } else {
            shell_points(t as usize, self.dim)
                .chunks(self.dim)
                .map(|p| (self.ln_g)(self.norm.radius(p)).exp())
                .sum()
        }
    }

    /// Exact maximum over the sup-norm shell of radius `t`.
    fn shell_max(&self, t: u64) -> f64 {
        if self.radial_exact() {
            (self.ln_g)(t as f64)
        } else {
            shell_points(t as usize, self.dim)
                .chunks(self.dim)
                .map(|p| (self.ln_g)(self.norm.radius(p)))
                .fold(f64::NEG_INFINITY, f64::max)
        }
    }

    fn enumeration_cap(&self) -> u64 {
        if self.radial_exact() {
            u64::MAX / 4
        } else {
            ((MAX_ENUM_POINTS.powf(1.0 / self.dim as f64) - 1.0) / 2.0).max(4.0) as u64
        }
    }

    /// Upper bound of `ln(shell(t)) + ln g(t)` as `P(t) - alpha t^beta`;
    /// returns `P(t)`.
    fn majorant(&self, t: f64, dominant: f64) -> f64 {
        let d = self.dim as f64;
        let mut p = self.form.constant.max(0.0) + (2.0 * d).ln() + (d - 1.0) * 2f64.ln();
        for &(c, q) in &self.form.terms {
            if q < dominant {
                p += c.max(0.0) * t.powf(q);
            }
        }
        p + (self.form.poly.max(0.0) + d - 1.0) * (1.0 + t).ln()
    }

    /// Smallest radius (up to doubling) beyond which the summand, together
    /// with the shell multiplicity, is below `exp(-(alpha / 2) t^beta)`.
    fn stretched_threshold(&self, alpha: f64, beta: f64) -> f64 {
        let mut t = (1.0f64 / beta).exp().max(self.form.valid_from).max(1.0);
        while self.majorant(t, beta) > 0.5 * alpha * t.powf(beta) {
            t *= 2.0;
        }
        t
    }
}

/// `sum_{u >= start} shell(u - 1) u^sigma` with `u = 1 + t`, exactly.
fn poly_shell_tail(dim: usize, sigma: f64, start_t: u64) -> f64 {
    // (2u - 1)^d - (2u - 3)^d = sum_j binom(d, j) (2u)^j ((-1)^(d-j) - (-3)^(d-j))
    let a = start_t as f64 + 1.0;
    let mut total = 0.0;
    let mut binom = 1.0;
    for j in 0..dim {
        if j > 0 {
            binom = binom * (dim - j + 1) as f64 / j as f64;
        }
        let e = (dim - j) as i32;
        let c = binom * 2f64.powi(j as i32) * ((-1f64).powi(e) - (-3f64).powi(e));
        if c != 0.0 {
            total += c * hurwitz_zeta(-sigma - j as f64, a);
        }
    }
    if start_t == 0 {
        // shell(0) = 1, not the polynomial value at u = 1
        total += 1.0 - ((1.0f64).powi(dim as i32) - (-1.0f64).powi(dim as i32));
    }
    total
}

/// `int_T^inf exp(-a t^b) dt`.
fn stretched_integral(a: f64, b: f64, t: f64) -> f64 {
    let shape = 1.0 / b;
    let x = a * t.powf(b);
    if x > 700.0 {
        // Q(s, x) underflows; use Gamma(s, x) <= 2 x^(s-1) e^-x for x >= 2(s - 1)
        let bound = 2.0 * x.powf(shape - 1.0).max(1.0) * (-x).exp();
        return shape * a.powf(-shape) * bound;
    }
    shape * a.powf(-shape) * gamma(shape) * gamma_ur(shape, x)
}

/// `sum_{k not in C_n} g(k)`; `n < 0` includes the origin.
pub(crate) fn tail_sum(rad: &Radial, n: i64) -> Result<TailSum, Divergence> {
    let start = (n + 1).max(0) as u64;
    let cap = rad.enumeration_cap();
    match classify(&rad.form) {
        Decay::Grows => Err(Divergence),
        Decay::Poly { sigma } if sigma >= -(rad.dim as f64) => Err(Divergence),
        Decay::Poly { sigma } => {
            let form_start = rad.form.valid_from.ceil().max(0.0) as u64;
            let mut t_end = form_start.max(start); // first radius covered by the remainder
            let mut partial: f64 = (start..t_end).map(|t| rad.shell_sum(t)).sum();
            loop {
                let rem = rad.form.constant.exp() * poly_shell_tail(rad.dim, sigma, t_end);
                if rad.radial_exact() {
                    return Ok(TailSum {
                        value: partial + rem,
                        slack: 0.0,
                    });
                }
                if rem <= REL_TOL * partial || t_end >= cap {
                    return Ok(TailSum {
                        value: partial + rem,
                        slack: rem,
                    });
                }
                let next = (2 * t_end + 1).min(cap);
                partial += (t_end..next).map(|t| rad.shell_sum(t)).sum::<f64>();
                t_end = next;
            }
        }
        Decay::Stretched { alpha, beta } => {
            let t0 = rad.stretched_threshold(alpha, beta).ceil() as u64;
            let mut t_end = t0.max(start);
            let mut partial: f64 = (start..t_end).map(|t| rad.shell_sum(t)).sum();
            loop {
                // terms t >= t_end: sum_{t >= T} f(t) <= f(T) + int_T^inf f
                let f_t = (-(0.5 * alpha) * (t_end as f64).powf(beta)).exp();
                let rem = f_t + stretched_integral(0.5 * alpha, beta, t_end as f64);
                if rem <= REL_TOL * partial || rem < 1e-300 || t_end >= cap {
                    return Ok(TailSum {
                        value: partial + rem,
                        slack: rem,
                    });
                }
                let next = (2 * t_end + 1).min(cap);
                partial += (t_end..next).map(|t| rad.shell_sum(t)).sum::<f64>();
                t_end = next;
            }
        }
    }
}

/// `sup_{k not in C_n} g(k)`.
pub(crate) fn tail_sup(rad: &Radial, n: i64) -> Result<f64, Divergence> {
    let start = (n + 1).max(0) as u64;
    match classify(&rad.form) {
        Decay::Grows => Err(Divergence),
        Decay::Poly { sigma } if sigma > 0.0 => Err(Divergence),
        Decay::Poly { .. } => {
            // nonincreasing from valid_from on; the first shell beyond it
            // contains the smallest radius still to be covered
            let last = (rad.form.valid_from.ceil().max(0.0) as u64).max(start);
            let best = (start..=last)
                .map(|t| rad.shell_max(t))
                .fold(f64::NEG_INFINITY, f64::max);
            Ok(best.exp())
        }
        Decay::Stretched { alpha, beta } => {
            let t0 = rad.stretched_threshold(alpha, beta).ceil() as u64;
            let mut t_end = t0.max(start);
            let mut best = (start..=t_end)
                .map(|t| rad.shell_max(t))
                .fold(f64::NEG_INFINITY, f64::max);
            loop {
                let bound = -(0.5 * alpha) * (t_end as f64).powf(beta);
                if bound <= best {
                    return Ok(best.exp());
                }
                let next = 2 * t_end + 1;
                best = (t_end + 1..=next)
                    .map(|t| rad.shell_max(t))
                    .fold(best, f64::max);
                t_end = next;
            }
        }
    }
}
