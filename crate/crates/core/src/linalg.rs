//! Small dense-band direct solver and a restarted GMRES.

use crate::error::{Error, Result};

/// Square band matrix with `kl` sub- and `ku` super-diagonals, stored with
/// room for the extra `kl` super-diagonals produced by row pivoting.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    /// Adds `v` at `(i, j)`; panics if outside the declared band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "entry ({i}, {j}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku + self.kl {
            return 0.0;
        }
        self.data[self.idx(i, j)]
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            let mut s = 0.0;
            for j in lo..=hi {
                s += self.data[self.idx(i, j)] * x[j];
            }
            y[i] = s;
        }
    }

    /// LU factorization with partial pivoting, consuming the matrix.
    pub fn factor(mut self) -> Result<BandLu> {
        let n = self.n;
        let reach = self.ku + self.kl;
        let mut pivots = vec![0usize; n];
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.idx(k, k)].abs();
            for i in k + 1..=last_row {
                let v = self.data[self.idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > 0.0) || !best.is_finite() {
                return Err(Error::LinearSolve(format!(
                    "singular band matrix at column {k}"
                )));
            }
            pivots[k] = p;
            let last_col = (k + reach).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let a = self.idx(k, j);
                    let b = self.idx(p, j);
                    self.data.swap(a, b);
                }
            }
            let diag = self.data[self.idx(k, k)];
            for i in k + 1..=last_row {
                let ik = self.idx(i, k);
                let l = self.data[ik] / diag;
                self.data[ik] = l;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        let kj = self.data[self.idx(k, j)];
                        let ij = self.idx(i, j);
                        self.data[ij] -= l * kj;
                    }
                }
            }
        }
        Ok(BandLu { m: self, pivots })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
    pivots: Vec<usize>,
}

impl BandLu {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let m = &self.m;
        let n = m.n;
        let reach = m.ku + m.kl;
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for i in k + 1..=(k + m.kl).min(n - 1) {
                    b[i] -= m.data[m.idx(i, k)] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in k + 1..=(k + reach).min(n - 1) {
                s -= m.data[m.idx(k, j)] * b[j];
            }
            b[k] = s / m.data[m.idx(k, k)];
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOptions {
    /// Convergence when `||r|| <= rel_tol * ||b|| + abs_tol`.
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 0.0,
            restart: 40,
            max_iter: 400,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresStats {
    pub iterations: usize,
    pub residual: f64,
    pub rhs_norm: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Right-preconditioned restarted GMRES for `A x = b`. `x` holds the initial
/// guess on entry.
pub fn gmres<A, P>(
    mut apply: A,
    precond: P,
    b: &[f64],
    x: &mut [f64],
    opts: GmresOptions,
) -> Result<GmresStats>
where
    A: FnMut(&[f64], &mut [f64]) -> Result<()>,
    P: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let bnorm = norm(b);
    let target = opts.rel_tol * bnorm + opts.abs_tol;
    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut iterations = 0;

    let residual = |apply: &mut A, x: &[f64], r: &mut [f64], w: &mut [f64]| -> Result<f64> {
        apply(x, w)?;
        for i in 0..n {
            r[i] = b[i] - w[i];
        }
        Ok(norm(r))
    };

    let mut rnorm = residual(&mut apply, x, &mut r, &mut w)?;
    if rnorm <= target || bnorm == 0.0 && rnorm == 0.0 {
        return Ok(GmresStats {
            iterations,
            residual: rnorm,
            rhs_norm: bnorm,
        });
    }
    let m = opts.restart.max(1);
    while iterations < opts.max_iter {
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = rnorm;
        basis.push(r.iter().map(|v| v / rnorm).collect());
        let mut k_used = 0;
        for k in 0..m {
            iterations += 1;
            precond(&basis[k], &mut z);
            apply(&z, &mut w)?;
            for (i, v) in basis.iter().enumerate() {
                let hik: f64 = w.iter().zip(v).map(|(a, b)| a * b).sum();
                h[i][k] = hik;
                for (wj, vj) in w.iter_mut().zip(v) {
                    *wj -= hik * vj;
                }
            }
            let hnext = norm(&w);
            h[k + 1][k] = hnext;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let denom = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            if denom == 0.0 {
                k_used = k;
                break;
            }
            cs[k] = h[k][k] / denom;
            sn[k] = h[k + 1][k] / denom;
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            if g[k + 1].abs() <= target || iterations >= opts.max_iter || hnext == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / hnext).collect());
        }
        // back substitution for the Krylov coefficients
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        let mut update = vec![0.0; n];
        for (j, yj) in y.iter().enumerate() {
            for (u, v) in update.iter_mut().zip(&basis[j]) {
                *u += yj * v;
            }
        }
        precond(&update, &mut z);
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi += zi;
        }
        rnorm = residual(&mut apply, x, &mut r, &mut w)?;
        if rnorm <= target {
            return Ok(GmresStats {
                iterations,
                residual: rnorm,
                rhs_norm: bnorm,
            });
        }
        if k_used == 0 {
            break;
        }
    }
    Err(Error::LinearSolve(format!(
        "GMRES did not reach {target:.3e} after {iterations} iterations (residual {rnorm:.3e})"
    )))
}

/// Anderson mixing for a fixed-point map `x = g(x)`.
///
/// Each call to [`Anderson::mix`] takes the current iterate and its image
/// and returns the next iterate, combining up to `depth` previous residuals
/// in the least-squares sense.
#[derive(Debug, Clone)]
pub struct Anderson {
    depth: usize,
    last: Option<(Vec<f64>, Vec<f64>)>,
    d_res: Vec<Vec<f64>>,
    d_img: Vec<Vec<f64>>,
}

impl Anderson {
    pub fn new(depth: usize) -> Self {
        Self {
            depth,
            last: None,
            d_res: Vec::new(),
            d_img: Vec::new(),
        }
    }

    pub fn mix(&mut self, x: &[f64], gx: &[f64]) -> Vec<f64> {
        let res: Vec<f64> = gx.iter().zip(x).map(|(g, x)| g - x).collect();
        if let Some((prev_res, prev_img)) = self.last.take() {
            if prev_res.len() == res.len() {
                self.d_res
                    .push(res.iter().zip(&prev_res).map(|(a, b)| a - b).collect());
                self.d_img
                    .push(gx.iter().zip(&prev_img).map(|(a, b)| a - b).collect());
                if self.d_res.len() > self.depth {
                    self.d_res.remove(0);
                    self.d_img.remove(0);
                }
            }
        }
        self.last = Some((res.clone(), gx.to_vec()));
        let mut out = gx.to_vec();
        if let Some(gamma) = least_squares(&self.d_res, &res) {
            for (k, gk) in gamma.iter().enumerate() {
                for (o, d) in out.iter_mut().zip(&self.d_img[k]) {
                    *o -= gk * d;
                }
            }
        }
        out
    }
}

/// Minimize `|b - sum_k gamma_k a_k|` by modified Gram-Schmidt, dropping
/// nearly dependent columns.
fn least_squares(cols: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    if cols.is_empty() {
        return None;
    }
    let m = cols.len();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut r = vec![vec![0.0; m]; m];
    let mut kept: Vec<usize> = Vec::with_capacity(m);
    for (k, a) in cols.iter().enumerate() {
        let norm0 = dot(a, a).sqrt();
        let mut v = a.clone();
        for (qi, &ki) in q.iter().zip(&kept) {
            let h = dot(qi, &v);
            r[ki][k] = h;
            for (vj, qj) in v.iter_mut().zip(qi) {
                *vj -= h * qj;
            }
        }
        let n = dot(&v, &v).sqrt();
        if n <= 1e-10 * norm0 || n == 0.0 {
            continue;
        }
        r[k][k] = n;
        v.iter_mut().for_each(|x| *x /= n);
        q.push(v);
        kept.push(k);
    }
    let mut gamma = vec![0.0; m];
    let rhs: Vec<f64> = q.iter().map(|qi| dot(qi, b)).collect();
    for (idx, &k) in kept.iter().enumerate().rev() {
        let mut s = rhs[idx];
        for &l in &kept[idx + 1..] {
            s -= r[k][l] * gamma[l];
        }
        gamma[k] = s / r[k][k];
    }
    Some(gamma)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}


#[cfg(test)]
mod anderson_tests {
    use super::*;

    #[test]
    fn anderson_solves_a_linear_contraction_quickly() {
        // x = A x + b with spectral radius 0.95
        let a = [[0.95, 0.0, 0.0], [0.1, 0.9, 0.0], [0.0, 0.2, 0.5]];
        let b = [1.0, -2.0, 0.5];
        let apply = |x: &[f64]| -> Vec<f64> {
            (0..3)
                .map(|i| (0..3).map(|j| a[i][j] * x[j]).sum::<f64>() + b[i])
                .collect()
        };
        let mut x = vec![0.0; 3];
        let mut mixer = Anderson::new(5);
        for _ in 0..8 {
            let gx = apply(&x);
            x = mixer.mix(&x, &gx);
        }
        let gx = apply(&x);
        let err = x
            .iter()
            .zip(&gx)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }
}
