//! Integer cubes `C_n = [-n, n]^d` and their lexicographic enumeration.
//!
//! Points are stored flat: point `i` of a cube occupies
//! `points[i * dim..(i + 1) * dim]`. The first coordinate is the most
//! significant one, so in `d = 1` the enumeration is simply `-n..=n`.

/// Side length `2n + 1` of the cube `C_n`.
pub fn side(n: usize) -> usize {
    2 * n + 1
}

/// Number of points `(2n + 1)^d` in `C_n`.
pub fn cube_len(n: usize, dim: usize) -> usize {
    side(n).pow(dim as u32)
}

/// Lexicographic enumeration of `anchor + C_n`.
pub fn cube_points(n: usize, dim: usize, anchor: &[i64]) -> Vec<i64> {
    debug_assert_eq!(anchor.len(), dim);
    let len = cube_len(n, dim);
    let s = side(n);
    let mut out = Vec::with_capacity(len * dim);
    let mut digits = vec![0usize; dim];
    for _ in 0..len {
        for (c, &dg) in digits.iter().enumerate() {
            out.push(anchor[c] + dg as i64 - n as i64);
        }
        for c in (0..dim).rev() {
            digits[c] += 1;
            if digits[c] < s {
                break;
            }
            digits[c] = 0;
        }
    }
    out
}

/// Position of `p` in the lexicographic enumeration of `anchor + C_n`.
pub fn position(p: &[i64], n: usize, anchor: &[i64]) -> Option<usize> {
    let s = side(n) as i64;
    let mut pos = 0usize;
    for (c, &x) in p.iter().enumerate() {
        let off = x - anchor[c] + n as i64;
        if off < 0 || off >= s {
            return None;
        }
        pos = pos * s as usize + off as usize;
    }
    Some(pos)
}

/// Sup norm `|k|_inf`.
pub fn sup_norm(p: &[i64]) -> u64 {
    p.iter().map(|x| x.unsigned_abs()).max().unwrap_or(0)
}

/// Whether `p` lies in `C_n` (`n < 0` denotes the empty cube).
pub fn in_cube(p: &[i64], n: i64) -> bool {
    n >= 0 && sup_norm(p) <= n as u64
}

pub fn diff(k: &[i64], l: &[i64]) -> Vec<i64> {
    k.iter().zip(l).map(|(a, b)| a - b).collect()
}

/// Number of lattice points on the sup-norm shell `{|k|_inf = t}`.
pub fn shell_count(t: u64, dim: usize) -> f64 {
    if t == 0 {
        return 1.0;
    }
    let t = t as f64;
    (2.0 * t + 1.0).powi(dim as i32) - (2.0 * t - 1.0).powi(dim as i32)
}

/// Points of the sup-norm shell `{|k|_inf = t}` in lexicographic order.
pub fn shell_points(t: usize, dim: usize) -> Vec<i64> {
    let t = t as i64;
    let mut out = Vec::with_capacity(dim * shell_count(t as u64, dim) as usize);
    let mut point = vec![-t; dim];
    shell_rec(&mut point, 0, t, false, &mut out);
    out
}

fn shell_rec(point: &mut [i64], i: usize, t: i64, on_face: bool, out: &mut Vec<i64>) {
    if i == point.len() {
        if on_face || t == 0 {
            out.extend_from_slice(point);
        }
        return;
    }
    let last = i + 1 == point.len();
    let mut x = -t;
    while x <= t {
        point[i] = x;
        shell_rec(point, i + 1, t, on_face || x.abs() == t, out);
        // the last coordinate only needs the two faces unless one is already hit
        x = if last && !on_face && x == -t {
            t.max(x + 1)
        } else {
            x + 1
        };
    }
}
