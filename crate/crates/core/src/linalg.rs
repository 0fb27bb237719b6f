//! Sparse symmetric factorization and the generalized eigensolver.
//!
//! `EnvelopeCholesky` factors a sparse SPD matrix after a reverse
//! Cuthill–McKee reordering, storing each row of the factor from its first
//! nonzero to the diagonal. `smallest_generalized` finds the lowest
//! eigenpairs of `W x = λ M x` by shift-invert subspace iteration with a
//! Rayleigh–Ritz step every sweep.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Reverse Cuthill–McKee ordering of the symmetric pattern of `m`.
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(m: &CsrMatrix) -> Vec<usize> {
    let n = m.nrows();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|r| m.row(r).map(|(c, _)| c).filter(|&c| c != r).collect())
        .collect();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut level = vec![usize::MAX; n];

    // breadth-first levels from `s`, restricted to the unvisited component
    let bfs_last_level = |s: usize, level: &mut Vec<usize>, visited: &[bool]| -> (usize, Vec<usize>) {
        let mut touched = vec![s];
        level[s] = 0;
        let mut q = VecDeque::from([s]);
        let mut depth = 0;
        while let Some(v) = q.pop_front() {
            depth = depth.max(level[v]);
            for &w in &adj[v] {
                if !visited[w] && level[w] == usize::MAX {
                    level[w] = level[v] + 1;
                    touched.push(w);
                    q.push_back(w);
                }
            }
        }
        let last: Vec<usize> = touched.iter().copied().filter(|&v| level[v] == depth).collect();
        for &v in &touched {
            level[v] = usize::MAX;
        }
        (depth, last)
    };

    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        // lowest degree vertex of this component, then a pseudo-peripheral one
        let mut start = seed;
        {
            let mut q = VecDeque::from([seed]);
            let mut seen = vec![seed];
            level[seed] = 0;
            while let Some(v) = q.pop_front() {
                if (degree[v], v) < (degree[start], start) {
                    start = v;
                }
                for &w in &adj[v] {
                    if !visited[w] && level[w] == usize::MAX {
                        level[w] = 0;
                        seen.push(w);
                        q.push_back(w);
                    }
                }
            }
            for v in seen {
                level[v] = usize::MAX;
            }
        }
        let (mut depth, mut last) = bfs_last_level(start, &mut level, &visited);
        for _ in 0..8 {
            let cand = *last.iter().min_by_key(|&&v| (degree[v], v)).unwrap();
            let (d2, l2) = bfs_last_level(cand, &mut level, &visited);
            if d2 <= depth {
                break;
            }
            start = cand;
            depth = d2;
            last = l2;
        }

        let begin = order.len();
        visited[start] = true;
        order.push(start);
        let mut head = begin;
        let mut nbrs = Vec::new();
        while head < order.len() {
            let v = order[head];
            head += 1;
            nbrs.clear();
            nbrs.extend(adj[v].iter().copied().filter(|&w| !visited[w]));
            nbrs.sort_unstable_by_key(|&w| (degree[w], w));
            nbrs.dedup();
            for &w in &nbrs {
                visited[w] = true;
                order.push(w);
            }
        }
    }
    order.reverse();
    order
}

/// Cholesky factor `P M Pᵀ = L Lᵀ` in envelope (skyline) storage.
#[derive(Clone, Debug)]
pub struct EnvelopeCholesky {
    perm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(m: &CsrMatrix) -> Result<Self> {
        let n = m.nrows();
        assert_eq!(n, m.ncols());
        let perm = reverse_cuthill_mckee(m);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let first: Vec<usize> = (0..n)
            .map(|i| {
                m.row(perm[i])
                    .map(|(c, _)| inv[c])
                    .filter(|&j| j <= i)
                    .min()
                    .unwrap_or(i)
                    .min(i)
            })
            .collect();
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            start.push(start[i] + i - first[i] + 1);
        }
        let mut data = vec![0.0; start[n]];
        for i in 0..n {
            for (c, v) in m.row(perm[i]) {
                let j = inv[c];
                if j <= i {
                    data[start[i] + j - first[i]] += v;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            let (done, rest) = data.split_at_mut(start[i]);
            let row_i = &mut rest[..i - fi + 1];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let row_j = &done[start[j]..start[j + 1]];
                let s = dot(&row_i[k0 - fi..j - fi], &row_j[k0 - fj..j - fj]);
                let ljj = row_j[j - fj];
                row_i[j - fi] = (row_i[j - fi] - s) / ljj;
            }
            let off = &row_i[..i - fi];
            let d = row_i[i - fi] - dot(off, off);
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { row: perm[i], pivot: d });
            }
            row_i[i - fi] = d.sqrt();
        }
        Ok(EnvelopeCholesky {
            perm,
            first,
            start,
            data,
        })
    }

    pub fn n(&self) -> usize {
        self.perm.len()
    }

    /// Stored entries of the factor.
    pub fn envelope_size(&self) -> usize {
        self.data.len()
    }

    /// Solves `M x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n();
        assert_eq!(b.len(), n);
        let mut y: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            let s = dot(&row[..i - fi], &y[fi..i]);
            y[i] = (y[i] - s) / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            y[i] /= row[i - fi];
            let yi = y[i];
            for (yk, l) in y[fi..i].iter_mut().zip(&row[..i - fi]) {
                *yk -= l * yi;
            }
        }
        for (i, &o) in self.perm.iter().enumerate() {
            b[o] = y[i];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `λmin / λmax` of an SPD operator, from power iteration on `apply` and
/// inverse iteration on `solve`.
pub fn extreme_eigenvalue_ratio(
    n: usize,
    apply: impl Fn(&[f64]) -> Vec<f64>,
    solve: impl Fn(&mut [f64]),
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let start: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
    let normalize = |v: &mut Vec<f64>| {
        let s = dot(v, v).sqrt();
        v.iter_mut().for_each(|x| *x /= s);
    };
    let mut v = start.clone();
    normalize(&mut v);
    let mut lmax = 0.0;
    for _ in 0..60 {
        let mut w = apply(&v);
        lmax = dot(&v, &w);
        normalize(&mut w);
        v = w;
    }
    let mut v = start;
    normalize(&mut v);
    let mut inv_min = 0.0;
    for _ in 0..60 {
        let mut w = v.clone();
        solve(&mut w);
        inv_min = dot(&v, &w);
        normalize(&mut w);
        v = w;
    }
    (1.0 / inv_min) / lmax
}

/// Lowest `k` eigenpairs of the dense pencil `W x = λ M x`, `M` SPD.
/// Vectors are `M`-orthonormal and ascending in `λ`.
pub fn dense_generalized(w: &DMatrix<f64>, m: &DMatrix<f64>, k: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    let chol = m.clone().cholesky().ok_or(Error::NotPositiveDefinite { row: 0, pivot: f64::NAN })?;
    let l = chol.l();
    let y = l
        .solve_lower_triangular(w)
        .expect("cholesky factor has a positive diagonal");
    let mut c = l
        .solve_lower_triangular(&y.transpose())
        .expect("cholesky factor has a positive diagonal");
    c = (&c + c.transpose()) * 0.5;
    let (values, v) = sorted_symmetric_eigen(c);
    let k = k.min(n);
    let vk = v.columns(0, k).into_owned();
    let x = l
        .transpose()
        .solve_upper_triangular(&vk)
        .expect("cholesky factor has a positive diagonal");
    Ok((values[..k].to_vec(), x))
}

/// Symmetric eigendecomposition with eigenvalues ascending.
pub fn sorted_symmetric_eigen(a: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let eig = a.symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]).then(i.cmp(&j)));
    let values = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, idx[c])]);
    (values, vectors)
}

/// Flips each column so its first entry of non-negligible magnitude is positive.
pub fn fix_signs(v: &mut DMatrix<f64>) {
    for mut col in v.column_iter_mut() {
        let scale = col.amax();
        if let Some(x) = col.iter().find(|x| x.abs() > 1e-10 * scale) {
            if *x < 0.0 {
                col.neg_mut();
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct EigenOptions {
    pub shift: f64,
    /// Largest accepted `‖W x − λ M x‖₂` per wanted column.
    pub tol: f64,
    pub max_iter: usize,
    /// Subspace size; defaults to `k + max(10, k/2)`.
    pub block: Option<usize>,
    pub seed: u64,
    /// Below this size the pencil is solved densely.
    pub dense_below: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            shift: -1e-8,
            tol: 1e-6,
            max_iter: 2000,
            block: None,
            seed: 0,
            dense_below: 400,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EigenResult {
    pub values: Vec<f64>,
    /// `n × k`, `M`-orthonormal columns.
    pub vectors: DMatrix<f64>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

fn residuals(w: &CsrMatrix, m: &CsrMatrix, values: &[f64], x: &DMatrix<f64>) -> Vec<f64> {
    let wx = w.mul_dense(x);
    let mx = m.mul_dense(x);
    (0..values.len())
        .map(|i| (wx.column(i) - mx.column(i) * values[i]).norm())
        .collect()
}

/// Lowest `k` eigenpairs of the sparse symmetric pencil `W x = λ M x`,
/// `W` positive semi-definite, `M` positive definite.
pub fn smallest_generalized(
    w: &CsrMatrix,
    m: &CsrMatrix,
    k: usize,
    opts: &EigenOptions,
) -> Result<EigenResult> {
    let n = w.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("requested {k} eigenpairs of a size-{n} problem")));
    }
    let block = opts.block.unwrap_or(k + (k / 2).max(10)).max(k).min(n);
    if n <= opts.dense_below || 2 * block >= n {
        let (values, mut vectors) = dense_generalized(&w.to_dense(), &m.to_dense(), k)?;
        fix_signs(&mut vectors);
        let residuals = residuals(w, m, &values, &vectors);
        return Ok(EigenResult {
            values,
            vectors,
            residuals,
            iterations: 0,
        });
    }

    let shifted = {
        let mut t: Vec<(usize, usize, f64)> = w.triplets().collect();
        t.extend(m.triplets().map(|(r, c, v)| (r, c, -opts.shift * v)));
        CsrMatrix::from_triplets(n, n, &t)
    };
    let factor = EnvelopeCholesky::factor(&shifted)?;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x = DMatrix::from_fn(n, block, |_, c| if c == 0 { 1.0 } else { rng.gen_range(-1.0..1.0) });
    let mut mx = m.mul_dense(&x);
    let mut worst = f64::INFINITY;
    // the random start mixes in kernel directions amplified by 1/|σ|, so the
    // first block (and any block that lost directions) is re-orthogonalized
    let mut reorthogonalize = true;
    for it in 1..=opts.max_iter {
        let mut y = mx;
        y.as_mut_slice().par_chunks_mut(n).for_each(|col| {
            factor.solve_in_place(col);
            let s = col.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if s > 0.0 {
                col.iter_mut().for_each(|v| *v /= s);
            }
        });
        if reorthogonalize {
            m_orthonormalize(&mut y, m, &mut rng);
        }
        let wy = w.mul_dense(&y);
        let my = m.mul_dense(&y);
        let q = rayleigh_ritz(&y, &wy, &my)?;
        if q.theta.len() < k {
            reorthogonalize = true;
            x = DMatrix::from_fn(n, block, |_, _| rng.gen_range(-1.0..1.0));
            mx = m.mul_dense(&x);
            continue;
        }
        x = &y * &q.q;
        let wx = &wy * &q.q;
        mx = &my * &q.q;
        reorthogonalize = q.theta.len() < block;
        if reorthogonalize {
            let kept = q.theta.len();
            x = x.resize_horizontally(block, 0.0);
            for c in kept..block {
                x.column_mut(c).apply(|v| *v = rng.gen_range(-1.0..1.0));
            }
            mx = mx.resize_horizontally(block, 0.0);
            let pad = m.mul_dense(&x.columns(kept, block - kept).into_owned());
            mx.columns_mut(kept, block - kept).copy_from(&pad);
        }
        worst = (0..k)
            .map(|i| (wx.column(i) - mx.column(i) * q.theta[i]).norm())
            .fold(0.0, f64::max);
        if worst <= opts.tol {
            let mut vectors = x.columns(0, k).into_owned();
            fix_signs(&mut vectors);
            let values = q.theta[..k].to_vec();
            let residuals = residuals(w, m, &values, &vectors);
            log::debug!("subspace iteration converged in {it} sweeps, residual {worst:e}");
            return Ok(EigenResult {
                values,
                vectors,
                residuals,
                iterations: it,
            });
        }
    }
    Err(Error::Convergence { iterations: opts.max_iter, residual: worst })
}

/// Column-wise Gram–Schmidt in the `M` inner product, applied twice per
/// column. A column that collapses onto earlier ones is replaced by a fresh
/// random vector.
fn m_orthonormalize(y: &mut DMatrix<f64>, m: &CsrMatrix, rng: &mut ChaCha8Rng) {
    let (n, cols) = y.shape();
    let mut mq = DMatrix::<f64>::zeros(n, cols);
    for j in 0..cols {
        let mut v = y.column(j).into_owned();
        let mut accepted = false;
        for _attempt in 0..4 {
            let before = v.dot(&DVector::from_vec(m.mul_vec(v.as_slice()))).sqrt();
            if j > 0 {
                for _pass in 0..2 {
                    let c = mq.columns(0, j).tr_mul(&v);
                    v.gemv(-1.0, &y.columns(0, j), &c, 1.0);
                }
            }
            let mv = DVector::from_vec(m.mul_vec(v.as_slice()));
            let after = v.dot(&mv).sqrt();
            if after > 1e-10 * before && after > 0.0 {
                y.column_mut(j).copy_from(&(v / after));
                mq.column_mut(j).copy_from(&(mv / after));
                accepted = true;
                break;
            }
            v = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        }
        if !accepted {
            // Rayleigh–Ritz drops the zero column
            y.column_mut(j).fill(0.0);
        }
    }
}

struct Ritz {
    theta: Vec<f64>,
    q: DMatrix<f64>,
}

/// Ritz pairs of the pencil projected on `span(Y)`; directions along which
/// `YᵀMY` is numerically singular are dropped.
fn rayleigh_ritz(y: &DMatrix<f64>, wy: &DMatrix<f64>, my: &DMatrix<f64>) -> Result<Ritz> {
    let wr = y.transpose() * wy;
    let mr = y.transpose() * my;
    let wr = (&wr + wr.transpose()) * 0.5;
    let mr = (&mr + mr.transpose()) * 0.5;
    let (mu, e) = sorted_symmetric_eigen(mr);
    let top = mu.last().copied().unwrap_or(0.0);
    let keep: Vec<usize> = (0..mu.len()).filter(|&i| mu[i] > 1e-13 * top).collect();
    if keep.is_empty() {
        return Err(Error::Convergence { iterations: 0, residual: f64::INFINITY });
    }
    let t = DMatrix::from_fn(e.nrows(), keep.len(), |r, c| e[(r, keep[c])] / mu[keep[c]].sqrt());
    let h = t.transpose() * wr * &t;
    let h = (&h + h.transpose()) * 0.5;
    let (theta, v) = sorted_symmetric_eigen(h);
    Ok(Ritz { theta, q: t * v })
}
