//! Constructors for the matrix families used in the experiments.

use super::{Embedded, Envelope, FiniteSection, MatrixModel};
use crate::error::{FsmError, Result};
use crate::lattice;
use crate::weights::WeightSpec;
use crate::C64;
use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::sync::Arc;

/// Laurent (bi-infinite Toeplitz) operator `a_kl = h_{k-l}` with finitely
/// many nonzero coefficients. The envelope uses `v(m) = e^|m|`.
pub fn laurent_from_symbol(coeffs: &BTreeMap<i64, C64>) -> MatrixModel {
    let coeffs: BTreeMap<i64, C64> = coeffs
        .iter()
        .filter(|(_, v)| **v != C64::default())
        .map(|(k, v)| (*k, *v))
        .collect();
    let band = coeffs
        .keys()
        .map(|m| m.unsigned_abs() as usize)
        .max()
        .unwrap_or(0);
    let constant = coeffs
        .iter()
        .map(|(m, v)| v.norm() * (m.unsigned_abs() as f64).exp())
        .fold(0.0, f64::max);
    let hermitian = coeffs
        .iter()
        .all(|(m, v)| coeffs.get(&-m).copied().unwrap_or_default() == v.conj());
    let table = coeffs.clone();
    MatrixModel::new(
        1,
        move |k, l| table.get(&(k[0] - l[0])).copied().unwrap_or_default(),
        Envelope::new(constant, WeightSpec::subexponential(1.0, 1.0, 1)),
    )
    .with_hermitian(hermitian)
    .with_band_width(Some(band))
    .with_label("laurent")
}

/// Laurent operator from a coefficient rule `m -> h_m` with a caller
/// supplied envelope.
pub fn laurent_from_rule<F>(rule: F, envelope: Envelope, hermitian: bool) -> MatrixModel
where
    F: Fn(i64) -> C64 + Send + Sync + 'static,
{
    MatrixModel::new(1, move |k, l| rule(k[0] - l[0]), envelope)
        .with_hermitian(hermitian)
        .with_label("laurent")
}

/// `h_m = c^(m-1)` for `m >= 1`, zero otherwise. All finite sections are
/// strictly lower triangular although the operator is invertible.
pub fn laurent_geometric(c: f64) -> Result<MatrixModel> {
    if !(c.abs() < 1.0) {
        return Err(FsmError::invalid(format!(
            "geometric symbol needs |c| < 1, got {c}"
        )));
    }
    if c == 0.0 {
        return Ok(
            laurent_from_symbol(&[(1, C64::new(1.0, 0.0))].into()).with_label("laurent_geometric")
        );
    }
    // |h_m| e^(rho m) = |c|^(m-1) |c|^(-m) = 1/|c| with rho = ln(1/|c|)
    let rho = -c.abs().ln();
    let envelope = Envelope::new(1.0 / c.abs(), WeightSpec::subexponential(rho, 1.0, 1));
    let rule = move |m: i64| {
        if m >= 1 {
            C64::new(geometric_power(c, m - 1), 0.0)
        } else {
            C64::default()
        }
    };
    Ok(laurent_from_rule(rule, envelope, false).with_label("laurent_geometric"))
}

fn geometric_power(c: f64, e: i64) -> f64 {
    match i32::try_from(e) {
        Ok(e) => c.powi(e),
        Err(_) => 0.0,
    }
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn pair_hash(seed: u64, k: &[i64], l: &[i64]) -> u64 {
    let mut h = splitmix64(seed);
    for &c in k.iter().chain(l) {
        h = splitmix64(h ^ c as u64);
    }
    h
}

fn unit_phase(h: u64) -> C64 {
    let u = (h >> 11) as f64 / (1u64 << 53) as f64;
    C64::from_polar(1.0, TAU * u)
}

/// Synthetic matrix with `|a_kl| = amplitude / (1 + |k - l|)^s` and
/// pseudo-random unit-modulus phases keyed by `(seed, k, l)`. In the
/// hermitian case the phase of `(l, k)` is the conjugate of that of `(k, l)`
/// and the diagonal carries real signs.
pub fn jaffard_synthetic(
    s: f64,
    amplitude: f64,
    seed: u64,
    dim: usize,
    hermitian: bool,
) -> Result<MatrixModel> {
    if !(s > dim as f64) {
        return Err(FsmError::invalid(format!(
            "decay s = {s} must exceed the dimension {dim}"
        )));
    }
    let entry = move |k: &[i64], l: &[i64]| {
        let decay =
            amplitude * (-s * (lattice::sup_norm(&lattice::diff(k, l)) as f64).ln_1p()).exp();
        let g = if !hermitian {
            unit_phase(pair_hash(seed, k, l))
        } else if k == l {
            let sign = if pair_hash(seed, k, l) >> 63 == 0 {
                1.0
            } else {
                -1.0
            };
            C64::new(sign, 0.0)
        } else if k < l {
            unit_phase(pair_hash(seed, k, l))
        } else {
            unit_phase(pair_hash(seed, l, k)).conj()
        };
        g * decay
    };
    Ok(MatrixModel::new(
        dim,
        entry,
        Envelope::new(amplitude.abs(), WeightSpec::polynomial(s, dim)),
    )
    .with_hermitian(hermitian)
    .with_label(format!("jaffard(s={s}, seed={seed})")))
}

fn cubes_overlap(a: &[i64], n: usize, b: &[i64], m: usize) -> bool {
    a.iter()
        .zip(b)
        .all(|(x, y)| (x - y).unsigned_abs() <= (n + m) as u64)
}

/// Places each block `B_m` on the cube `anchors[m] + C_{n_m}` and zero
/// elsewhere.
pub fn block_stack(blocks: &[FiniteSection], anchors: &[Vec<i64>]) -> Result<MatrixModel> {
    if blocks.len() != anchors.len() {
        return Err(FsmError::DimensionMismatch {
            expected: blocks.len(),
            got: anchors.len(),
        });
    }
    let dim = blocks.first().map(|b| b.dim()).unwrap_or(1);
    for (b, a) in blocks.iter().zip(anchors) {
        if a.len() != dim || b.dim() != dim {
            return Err(FsmError::DimensionMismatch {
                expected: dim,
                got: a.len(),
            });
        }
    }
    for i in 0..blocks.len() {
        for j in i + 1..blocks.len() {
            if cubes_overlap(&anchors[i], blocks[i].n(), &anchors[j], blocks[j].n()) {
                return Err(FsmError::OverlappingBlocks {
                    first: i,
                    second: j,
                });
            }
        }
    }
    let placed: Arc<Vec<FiniteSection>> = Arc::new(
        blocks
            .iter()
            .zip(anchors)
            .map(|(b, a)| b.clone().with_anchor(a))
            .collect(),
    );
    let constant = placed.iter().map(|b| b.max_abs()).fold(0.0, f64::max);
    let band = placed.iter().map(|b| 2 * b.n()).max().unwrap_or(0);
    let hermitian = placed.iter().all(|b| b.is_hermitian(0.0));
    let entry = move |k: &[i64], l: &[i64]| {
        for b in placed.iter() {
            if let Some(i) = lattice::position(k, b.n(), b.anchor()) {
                return match lattice::position(l, b.n(), b.anchor()) {
                    Some(j) => b.matrix()[(i, j)],
                    None => C64::default(),
                };
            }
        }
        C64::default()
    };
    Ok(MatrixModel::new(
        dim,
        entry,
        Envelope::new(constant, WeightSpec::constant(dim)),
    )
    .with_hermitian(hermitian)
    .with_band_width(Some(band))
    .with_label("block_stack"))
}

/// Discrete transmission model
/// `a_kl = sum_t sum_u phi(t - kR) h(u) phi(t - u - lT)` for a sampled pulse
/// `phi` and a causal channel `h`, both indexed from zero.
pub fn channel_matrix(pulse: &[f64], channel: &[f64], t: usize, r: usize) -> Result<MatrixModel> {
    channel_matrix_with_decay(pulse, channel, t, r, 0.0)
}

/// As [`channel_matrix`], with the envelope weight `e^(rate |k-l|)` when
/// `T = R`.
pub fn channel_matrix_with_decay(
    pulse: &[f64],
    channel: &[f64],
    t: usize,
    r: usize,
    rate: f64,
) -> Result<MatrixModel> {
    if t == 0 || r == 0 {
        return Err(FsmError::invalid(
            "symbol spacing T and sampling spacing R must be >= 1",
        ));
    }
    if pulse.is_empty() || channel.is_empty() {
        return Err(FsmError::invalid("pulse and channel must be nonempty"));
    }
    if !(rate >= 0.0) {
        return Err(FsmError::invalid(format!("decay rate {rate} must be >= 0")));
    }
    // g = h * phi, then c(m) = sum_tau phi(tau) g(tau + m)
    let mut g = vec![0.0; pulse.len() + channel.len() - 1];
    for (u, hu) in channel.iter().enumerate() {
        for (s, ps) in pulse.iter().enumerate() {
            g[u + s] += hu * ps;
        }
    }
    let lo = -(pulse.len() as i64 - 1);
    let hi = g.len() as i64 - 1;
    let corr: Vec<f64> = (lo..=hi)
        .map(|m| {
            pulse
                .iter()
                .enumerate()
                .filter_map(|(tau, p)| {
                    let idx = tau as i64 + m;
                    (0..g.len() as i64)
                        .contains(&idx)
                        .then(|| p * g[idx as usize])
                })
                .sum()
        })
        .collect();
    let at = |m: i64| at_owned(&corr, lo, hi, m);
    let (ti, ri) = (t as i64, r as i64);

    let mut model = if t == r {
        let offsets: Vec<i64> = (lo.div_euclid(ri)..=hi.div_euclid(ri) + 1)
            .filter(|m| at(m * ri) != 0.0)
            .collect();
        let band = offsets
            .iter()
            .map(|m| m.unsigned_abs() as usize)
            .max()
            .unwrap_or(0);
        let constant = offsets
            .iter()
            .map(|&m| at(m * ri).abs() * (rate * m.unsigned_abs() as f64).exp())
            .fold(0.0, f64::max);
        let hermitian = offsets.iter().all(|&m| at(m * ri) == at(-m * ri));
        let weight = if rate > 0.0 {
            WeightSpec::subexponential(rate, 1.0, 1)
        } else {
            WeightSpec::constant(1)
        };
        let entry =
            move |k: &[i64], l: &[i64]| C64::new(at_owned(&corr, lo, hi, (k[0] - l[0]) * ri), 0.0);
        MatrixModel::new(1, entry, Envelope::new(constant, weight))
            .with_hermitian(hermitian)
            .with_band_width(Some(band))
    } else {
        let constant = corr.iter().map(|x| x.abs()).fold(0.0, f64::max);
        let entry = move |k: &[i64], l: &[i64]| {
            C64::new(at_owned(&corr, lo, hi, k[0] * ri - l[0] * ti), 0.0)
        };
        MatrixModel::new(1, entry, Envelope::new(constant, WeightSpec::constant(1)))
    };
    model = model.with_label(format!("channel(T={t}, R={r})"));
    Ok(model)
}

fn at_owned(corr: &[f64], lo: i64, hi: i64, m: i64) -> f64 {
    if (lo..=hi).contains(&m) {
        corr[(m - lo) as usize]
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::finite_section;
    use nalgebra::DMatrix;

    #[test]
    fn zero_amplitude_gives_zero_model() {
        let a = jaffard_synthetic(2.0, 0.0, 3, 1, true).unwrap();
        assert!(finite_section(&a, 3)
            .matrix()
            .iter()
            .all(|z| *z == C64::default()));
    }

    #[test]
    fn jaffard_needs_s_above_dim() {
        assert!(jaffard_synthetic(1.0, 1.0, 0, 1, false).is_err());
        assert!(jaffard_synthetic(2.0, 1.0, 0, 2, false).is_err());
    }

    #[test]
    fn jaffard_is_reproducible() {
        let a = jaffard_synthetic(2.5, 1.0, 17, 2, false).unwrap();
        let b = jaffard_synthetic(2.5, 1.0, 17, 2, false).unwrap();
        assert_eq!(finite_section(&a, 3), finite_section(&b, 3));
        let c = jaffard_synthetic(2.5, 1.0, 18, 2, false).unwrap();
        assert_ne!(finite_section(&a, 3), finite_section(&c, 3));
    }

    #[test]
    fn hermitian_jaffard_sections_are_hermitian() {
        let a = jaffard_synthetic(3.0, 0.5, 5, 2, true).unwrap();
        for n in 0..4 {
            assert!(finite_section(&a, n).is_hermitian(0.0));
        }
    }

    #[test]
    fn identity_blocks_act_as_identity_on_union() {
        let blocks = vec![FiniteSection::identity(1, 1), FiniteSection::identity(2, 1)];
        let a = block_stack(&blocks, &[vec![0], vec![10]]).unwrap();
        for k in -3..15i64 {
            let on = (-1..=1).contains(&k) || (8..=12).contains(&k);
            let want = if on { 1.0 } else { 0.0 };
            assert_eq!(a.entry(&[k], &[k]).re, want);
            assert_eq!(a.entry(&[k], &[k + 1]), C64::default());
        }
    }

    #[test]
    fn single_block_at_origin_embeds() {
        let b = FiniteSection::from_rows(&[
            vec![1.0, 2.0, 3.0],
            vec![4.0, 5.0, 6.0],
            vec![7.0, 8.0, 9.0],
        ])
        .unwrap();
        let a = block_stack(std::slice::from_ref(&b), &[vec![0]]).unwrap();
        let s = finite_section(&a, 3);
        assert_eq!(s.principal(1), b);
        assert_eq!(s.get(&[2], &[2]), C64::default());
    }

    #[test]
    fn overlapping_blocks_are_rejected() {
        let blocks = vec![FiniteSection::identity(2, 1), FiniteSection::identity(2, 1)];
        assert_eq!(
            block_stack(&blocks, &[vec![0], vec![4]]).unwrap_err(),
            FsmError::OverlappingBlocks {
                first: 0,
                second: 1
            }
        );
        assert!(block_stack(&blocks, &[vec![0], vec![5]]).is_ok());
    }

    #[test]
    fn delta_channel_is_identity() {
        let a = channel_matrix(&[1.0], &[1.0], 1, 1).unwrap();
        assert_eq!(finite_section(&a, 4), FiniteSection::identity(4, 1));
        assert_eq!(a.band_width(), Some(0));
    }

    #[test]
    fn geometric_channel_is_lower_toeplitz() {
        let c: f64 = 0.5;
        let h: Vec<f64> = (0..30).map(|m| c.powi(m)).collect();
        let a = channel_matrix(&[1.0], &h, 1, 1).unwrap();
        // direct convolution oracle: sum over t, u of delta(t-k) h(u) delta(t-u-l)
        let oracle = |k: i64, l: i64| -> f64 {
            let mut acc = 0.0;
            for t in -50..50i64 {
                for (u, hu) in h.iter().enumerate() {
                    if t == k && t - u as i64 == l {
                        acc += hu;
                    }
                }
            }
            acc
        };
        for k in -6..=6 {
            for l in -6..=6 {
                assert_eq!(a.entry(&[k], &[l]).re, oracle(k, l));
            }
        }
    }

    #[test]
    fn oversampled_channel_bookkeeping() {
        let pulse = [1.0, 0.5];
        let h = [1.0, 0.25];
        let a = channel_matrix(&pulse, &h, 2, 1).unwrap();
        let direct = |k: i64, l: i64| -> f64 {
            let phi = |t: i64| {
                if (0..2).contains(&t) {
                    pulse[t as usize]
                } else {
                    0.0
                }
            };
            let mut acc = 0.0;
            for t in -30..30i64 {
                for (u, hu) in h.iter().enumerate() {
                    acc += phi(t - k) * hu * phi(t - u as i64 - 2 * l);
                }
            }
            acc
        };
        let window = DMatrix::from_fn(5, 5, |i, j| a.entry(&[i as i64 - 2], &[j as i64 - 2]).re);
        let oracle = DMatrix::from_fn(5, 5, |i, j| direct(i as i64 - 2, j as i64 - 2));
        assert_eq!(window, oracle);
        // column l is supported near row 2l: spacing T in columns, R in rows
        assert_eq!(a.entry(&[4], &[2]).re, direct(4, 2));
        assert!(a.entry(&[4], &[2]).re != 0.0);
        assert_eq!(a.entry(&[0], &[2]).re, 0.0);
        assert!(a.band_width().is_none());
    }

    #[test]
    fn block_stack_section_matrix_access() {
        let b = FiniteSection::identity(1, 2);
        let a = block_stack(&[b], &[vec![3, 3]]).unwrap();
        assert_eq!(a.dim(), 2);
        assert_eq!(a.entry(&[3, 3], &[3, 3]).re, 1.0);
        assert_eq!(
            finite_section(&a, 1)
                .matrix()
                .iter()
                .filter(|z| z.re != 0.0)
                .count(),
            0
        );
    }
}
