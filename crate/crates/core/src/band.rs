//! Symmetric banded matrices and a selected-eigenpair solver.
//!
//! Eigenvalues come from bisection on the inertia of `A − σI`, counted from a
//! banded `LDLᵀ` factorization (Sylvester's law). An orthogonal (Givens)
//! reduction to tridiagonal form is available as an independent route.
//! Eigenvectors come from inverse iteration with a pivoted band LU.

use crate::error::{Error, Result};

/// Real symmetric band matrix storing the diagonal and `bandwidth` lower
/// diagonals. Entry `(i, i - d)` lives at `data[i * (bandwidth + 1) + d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBand {
    n: usize,
    bandwidth: usize,
    data: Vec<f64>,
}

impl SymBand {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        Self {
            n,
            bandwidth,
            data: vec![0.0; n * (bandwidth + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let d = r - c;
        if d > self.bandwidth {
            0.0
        } else {
            self.data[r * (self.bandwidth + 1) + d]
        }
    }

    /// Sets `(i, j)` and, implicitly, `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let d = r - c;
        assert!(d <= self.bandwidth, "entry ({i},{j}) outside the band");
        self.data[r * (self.bandwidth + 1) + d] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let cur = self.get(i, j);
        self.set(i, j, cur + v);
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bandwidth);
            let hi = (i + self.bandwidth).min(self.n - 1);
            y[i] = (lo..=hi).map(|j| self.get(i, j) * x[j]).sum();
        }
        y
    }

    /// Infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.bandwidth);
                let hi = (i + self.bandwidth).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j).abs()).sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Number of eigenvalues strictly below `sigma`: negative pivots of the
    /// banded `LDLᵀ` factorization of `A − σI`.
    pub fn count_below(&self, sigma: f64) -> usize {
        let n = self.n;
        let b = self.bandwidth;
        let tiny = f64::EPSILON * self.norm_inf().max(sigma.abs()).max(f64::MIN_POSITIVE);
        let mut d = vec![0.0; n];
        // l[i * b + (i - c - 1)] = L(i, c)
        let mut l = vec![0.0; n * b.max(1)];
        let mut negatives = 0;
        for i in 0..n {
            let lo = i.saturating_sub(b);
            for c in lo..i {
                let mut acc = self.data[i * (b + 1) + (i - c)];
                for j in lo.max(c.saturating_sub(b))..c {
                    acc -= l[i * b + (i - j - 1)] * l[c * b + (c - j - 1)] * d[j];
                }
                l[i * b + (i - c - 1)] = acc / d[c];
            }
            let mut piv = self.data[i * (b + 1)] - sigma;
            for j in lo..i {
                let lij = l[i * b + (i - j - 1)];
                piv -= lij * lij * d[j];
            }
            if piv.abs() < tiny {
                piv = -tiny;
            }
            if piv < 0.0 {
                negatives += 1;
            }
            d[i] = piv;
        }
        negatives
    }

    /// The `index`-th smallest eigenvalue (0-based) by inertia bisection.
    pub fn eigenvalue(&self, index: usize) -> f64 {
        let r = self.norm_inf();
        bisect(-r, r, index, |s| self.count_below(s))
    }

    /// Orthogonally similar tridiagonal matrix.
    pub fn tridiagonal(&self) -> Tridiagonal {
        if self.bandwidth <= 1 {
            let diag = (0..self.n).map(|i| self.get(i, i)).collect();
            let off = (1..self.n).map(|i| self.get(i, i - 1)).collect();
            return Tridiagonal { diag, off };
        }
        band_to_tridiagonal(self)
    }
}

/// Working copy with one extra diagonal to hold the bulge.
struct Work {
    n: usize,
    w: usize,
    data: Vec<f64>,
}

impl Work {
    #[inline]
    fn idx(&self, i: usize, j: usize) -> Option<usize> {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let d = r - c;
        (d <= self.w).then(|| r * (self.w + 1) + d)
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.idx(i, j).map_or(0.0, |k| self.data[k])
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        match self.idx(i, j) {
            Some(k) => self.data[k] = v,
            None => debug_assert!(v.abs() < 1e-300, "fill outside working band at ({i},{j})"),
        }
    }

    /// Applies `G A Gᵀ` with `G` rotating rows/columns `p` and `p + 1`.
    fn rotate(&mut self, p: usize, c: f64, s: f64) {
        let q = p + 1;
        let lo = p.saturating_sub(self.w);
        let hi = (q + self.w).min(self.n - 1);
        for k in lo..=hi {
            if k == p || k == q {
                continue;
            }
            let apk = self.get(p, k);
            let aqk = self.get(q, k);
            if apk == 0.0 && aqk == 0.0 {
                continue;
            }
            self.set(p, k, c * apk + s * aqk);
            self.set(q, k, -s * apk + c * aqk);
        }
        let app = self.get(p, p);
        let aqq = self.get(q, q);
        let apq = self.get(p, q);
        self.set(p, p, c * c * app + 2.0 * c * s * apq + s * s * aqq);
        self.set(q, q, s * s * app - 2.0 * c * s * apq + c * c * aqq);
        self.set(p, q, (c * c - s * s) * apq + c * s * (aqq - app));
    }

    /// Rotates rows `r-1, r` so that entry `(r, col)` vanishes.
    fn annihilate(&mut self, r: usize, col: usize) {
        let x = self.get(r - 1, col);
        let y = self.get(r, col);
        if y == 0.0 {
            return;
        }
        let h = x.hypot(y);
        let (c, s) = (x / h, y / h);
        self.rotate(r - 1, c, s);
        self.set(r, col, 0.0);
    }
}

fn band_to_tridiagonal(a: &SymBand) -> Tridiagonal {
    let n = a.n;
    let b = a.bandwidth;
    let w = b + 1;
    let mut work = Work {
        n,
        w,
        data: vec![0.0; n * (w + 1)],
    };
    for i in 0..n {
        for d in 0..=b.min(i) {
            let v = a.get(i, i - d);
            work.data[i * (w + 1) + d] = v;
        }
    }
    for j in 0..n.saturating_sub(2) {
        for d in (2..=b).rev() {
            let mut r = j + d;
            if r >= n {
                continue;
            }
            let mut col = j;
            // Zero (r, col), then chase the bulge that appears at (r + b, r - 1).
            loop {
                work.annihilate(r, col);
                let next = r + b;
                if next >= n || work.get(next, r - 1) == 0.0 {
                    break;
                }
                col = r - 1;
                r = next;
            }
        }
    }
    let diag = (0..n).map(|i| work.get(i, i)).collect();
    let off = (1..n).map(|i| work.get(i, i - 1)).collect();
    Tridiagonal { diag, off }
}

/// Symmetric tridiagonal matrix: `diag[i]` and `off[i] = T(i+1, i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl Tridiagonal {
    /// Number of eigenvalues strictly below `sigma` (Sturm count).
    pub fn count_below(&self, sigma: f64) -> usize {
        let tiny = f64::MIN_POSITIVE.sqrt();
        let mut count = 0;
        let mut q = self.diag[0] - sigma;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.diag.len() {
            let qq = if q.abs() < tiny { -tiny } else { q };
            q = (self.diag[i] - sigma) - self.off[i - 1] * self.off[i - 1] / qq;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.diag.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// The `index`-th smallest eigenvalue (0-based) by bisection.
    pub fn eigenvalue(&self, index: usize) -> f64 {
        let (lo, hi) = self.gershgorin();
        bisect(lo, hi, index, |s| self.count_below(s))
    }
}

fn bisect<F: Fn(f64) -> usize>(mut lo: f64, mut hi: f64, index: usize, count: F) -> f64 {
    let abs_floor = 2.0 * f64::EPSILON * lo.abs().max(hi.abs());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= abs_floor.max(4.0 * f64::EPSILON * mid.abs()) || mid <= lo || mid >= hi {
            break;
        }
        if count(mid) > index {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Pivoted LU factorization of a general band matrix (LAPACK `gbtf2` layout).
struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    ab: Vec<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    fn ldab(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        (self.kl + self.ku + i - j) + j * self.ldab()
    }

    /// Factors `A - shift * I` for symmetric band `A`.
    fn factor(a: &SymBand, shift: f64) -> Self {
        let n = a.n;
        let kl = a.bandwidth;
        let ku = a.bandwidth;
        let mut lu = BandLu {
            n,
            kl,
            ku,
            ab: vec![0.0; (2 * kl + ku + 1) * n],
            piv: vec![0; n],
        };
        for j in 0..n {
            let lo = j.saturating_sub(ku);
            let hi = (j + kl).min(n - 1);
            for i in lo..=hi {
                let v = a.get(i, j) - if i == j { shift } else { 0.0 };
                let k = lu.at(i, j);
                lu.ab[k] = v;
            }
        }
        let kv = kl + ku;
        let tiny = f64::EPSILON * a.norm_inf().max(f64::MIN_POSITIVE);
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut p = 0;
            let mut best = lu.ab[lu.at(j, j)].abs();
            for r in 1..=km {
                let v = lu.ab[lu.at(j + r, j)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            lu.piv[j] = j + p;
            if p != 0 {
                for c in j..=(j + kv).min(n - 1) {
                    let x = lu.at(j, c);
                    let y = lu.at(j + p, c);
                    lu.ab.swap(x, y);
                }
            }
            let pivot_idx = lu.at(j, j);
            if lu.ab[pivot_idx].abs() < tiny {
                lu.ab[pivot_idx] = tiny.copysign(lu.ab[pivot_idx]);
            }
            let pivot = lu.ab[pivot_idx];
            for r in 1..=km {
                let k = lu.at(j + r, j);
                lu.ab[k] /= pivot;
            }
            for c in (j + 1)..=(j + kv).min(n - 1) {
                let ujc = lu.ab[lu.at(j, c)];
                if ujc == 0.0 {
                    continue;
                }
                for r in 1..=km {
                    let l = lu.ab[lu.at(j + r, j)];
                    let k = lu.at(j + r, c);
                    lu.ab[k] -= l * ujc;
                }
            }
        }
        lu
    }

    fn solve(&self, rhs: &mut [f64]) {
        let n = self.n;
        let kv = self.kl + self.ku;
        for j in 0..n {
            let p = self.piv[j];
            if p != j {
                rhs.swap(j, p);
            }
            let km = self.kl.min(n - 1 - j);
            let bj = rhs[j];
            for r in 1..=km {
                rhs[j + r] -= self.ab[self.at(j + r, j)] * bj;
            }
        }
        for j in (0..n).rev() {
            let mut acc = rhs[j];
            for c in (j + 1)..=(j + kv).min(n - 1) {
                acc -= self.ab[self.at(j, c)] * rhs[c];
            }
            rhs[j] = acc / self.ab[self.at(j, j)];
        }
    }
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
}

/// Deterministic, generic start vector for inverse iteration.
fn start_vector(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 1.0 + 0.5 * ((i as f64 + 1.0) * 0.618_033_988_749_895).fract())
        .collect()
}

/// Euclidean-normalized eigenvector for an (accurate) eigenvalue estimate.
///
/// Returns the vector and the Euclidean residual `‖A v − λ v‖`, with `λ`
/// replaced by the Rayleigh quotient of the returned vector.
pub fn inverse_iteration(a: &SymBand, eigenvalue: f64) -> (Vec<f64>, f64, f64) {
    let lu = BandLu::factor(a, eigenvalue);
    let mut v = start_vector(a.n);
    for _ in 0..3 {
        lu.solve(&mut v);
        normalize(&mut v);
    }
    let av = a.matvec(&v);
    let rq: f64 = av.iter().zip(&v).map(|(x, y)| x * y).sum();
    let res = av
        .iter()
        .zip(&v)
        .map(|(x, y)| (x - rq * y).powi(2))
        .sum::<f64>()
        .sqrt();
    (v, rq, res)
}

/// Lowest `count` eigenvalues (ascending) of a symmetric band matrix.
pub fn lowest_eigenvalues(a: &SymBand, count: usize) -> Result<Vec<f64>> {
    if count > a.n {
        return Err(Error::Config(format!(
            "requested {count} eigenvalues of a {}x{} matrix",
            a.n, a.n
        )));
    }
    Ok((0..count).map(|i| a.eigenvalue(i)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_sym(n: usize, b: usize, seed: u64) -> SymBand {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut a = SymBand::zeros(n, b);
        for i in 0..n {
            for d in 0..=b.min(i) {
                a.set(i, i - d, next() + if d == 0 { 3.0 } else { 0.0 });
            }
        }
        a
    }

    /// Jacobi rotation eigenvalue oracle for small dense matrices.
    fn jacobi_eigenvalues(a: &SymBand) -> Vec<f64> {
        let n = a.dim();
        let mut m: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| a.get(i, j)).collect()).collect();
        for _ in 0..100 {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += m[p][q] * m[p][q];
                    if m[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let mkp = m[k][p];
                        let mkq = m[k][q];
                        m[k][p] = c * mkp - s * mkq;
                        m[k][q] = s * mkp + c * mkq;
                    }
                    for k in 0..n {
                        let mpk = m[p][k];
                        let mqk = m[q][k];
                        m[p][k] = c * mpk - s * mqk;
                        m[q][k] = s * mpk + c * mqk;
                    }
                }
            }
            if off < 1e-30 {
                break;
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    #[test]
    fn band_reduction_preserves_spectrum() {
        for (n, b) in [(9, 2), (17, 3), (12, 1), (30, 2)] {
            let a = dense_sym(n, b, (n * 31 + b) as u64);
            let want = jacobi_eigenvalues(&a);
            let got = lowest_eigenvalues(&a, n).unwrap();
            let t = a.tridiagonal();
            for (i, (x, y)) in got.iter().zip(&want).enumerate() {
                assert!((x - y).abs() < 1e-11, "n={n} b={b}: {x} vs {y}");
                assert!((t.eigenvalue(i) - y).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn inertia_count_matches_tridiagonal_sturm_count() {
        let a = dense_sym(60, 2, 99);
        let t = a.tridiagonal();
        for i in 0..41 {
            let sigma = -2.0 + 0.1 * i as f64;
            assert_eq!(a.count_below(sigma), t.count_below(sigma), "sigma={sigma}");
        }
    }

    #[test]
    fn inverse_iteration_recovers_eigenvectors() {
        let a = dense_sym(40, 2, 7);
        let evs = lowest_eigenvalues(&a, 5).unwrap();
        for &ev in &evs {
            let (v, rq, res) = inverse_iteration(&a, ev);
            assert!((rq - ev).abs() < 1e-11);
            assert!(res < 1e-11, "residual {res}");
            let norm: f64 = v.iter().map(|x| x * x).sum();
            assert!((norm - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn sturm_count_of_identity_shift() {
        let t = Tridiagonal {
            diag: vec![1.0, 2.0, 3.0],
            off: vec![0.0, 0.0],
        };
        assert_eq!(t.count_below(0.5), 0);
        assert_eq!(t.count_below(2.5), 2);
        assert_eq!(t.count_below(10.0), 3);
    }
}
