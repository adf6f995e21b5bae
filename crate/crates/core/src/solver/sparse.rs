//! Compressed sparse rows, Jacobi-preconditioned CG with fixed rows, and a
//! primal-dual active-set method for box-constrained quadratics.

use rayon::prelude::*;

#[derive(Clone, Debug)]
pub struct Csr {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl Csr {
    /// Sums duplicate entries. Deterministic: triplets are sorted first.
    pub fn from_triplets(n: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0; n + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut data: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in t {
            if last == Some((i, j)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(j);
                data.push(v);
                indptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i];
        }
        Csr { n, indptr, indices, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.data[r].iter().copied())
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).find(|&(j, _)| j == i).map_or(0.0, |e| e.1)).collect()
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).into_par_iter().map(|i| self.row(i).map(|(j, a)| a * x[j]).sum()).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.n]; self.n];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, a) in self.row(i) {
                row[j] += a;
            }
        }
        m
    }

    /// `½ xᵀ A x`.
    pub fn quad(&self, x: &[f64]) -> f64 {
        0.5 * dot(x, &self.mul(x))
    }
}

/// Dot product in fixed-size chunks, independent of the thread count.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    const CHUNK: usize = 4096;
    let parts: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum())
        .collect();
    parts.iter().sum()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Solves `A x = b` on the rows where `free` is set, with `x` fixed elsewhere.
/// Stops when `‖r‖ <= tol ‖b_f - A_fd x_d‖`.
pub fn cg(a: &Csr, b: &[f64], x: &mut [f64], free: &[bool], tol: f64, max_iter: usize) -> CgReport {
    let n = a.n();
    let diag = a.diag();
    let mask = |v: &mut [f64]| {
        for (vi, &f) in v.iter_mut().zip(free) {
            if !f {
                *vi = 0.0;
            }
        }
    };
    // right-hand side with the fixed values moved over
    let mut xd = x.to_vec();
    mask_inv(&mut xd, free);
    let ad = a.mul(&xd);
    let mut rhs: Vec<f64> = (0..n).map(|i| b[i] - ad[i]).collect();
    mask(&mut rhs);
    let scale = dot(&rhs, &rhs).sqrt();
    let ax = a.mul(x);
    let mut r: Vec<f64> = (0..n).map(|i| b[i] - ax[i]).collect();
    mask(&mut r);
    let target = tol * scale;
    let mut rn = dot(&r, &r).sqrt();
    if rn <= target || scale == 0.0 {
        return CgReport { iterations: 0, residual: rn, converged: true };
    }
    let prec = |r: &[f64]| -> Vec<f64> { r.iter().zip(&diag).map(|(ri, &d)| if d > 0.0 { ri / d } else { *ri }).collect() };
    let mut z = prec(&r);
    mask(&mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        let mut ap = a.mul(&p);
        mask(&mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return CgReport { iterations: it, residual: rn, converged: false };
        }
        let alpha = rz / pap;
        x.par_iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.par_iter_mut().zip(&ap).for_each(|(ri, api)| *ri -= alpha * api);
        rn = dot(&r, &r).sqrt();
        if rn <= target {
            return CgReport { iterations: it, residual: rn, converged: true };
        }
        z = prec(&r);
        mask(&mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.par_iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    CgReport { iterations: max_iter, residual: rn, converged: false }
}

fn mask_inv(v: &mut [f64], free: &[bool]) {
    for (vi, &f) in v.iter_mut().zip(free) {
        if f {
            *vi = 0.0;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxReport {
    pub outer: usize,
    pub cg_iterations: usize,
    pub converged: bool,
}

/// `min ½ xᵀHx - bᵀx` subject to `lo <= x <= hi` on free rows (`x` fixed
/// elsewhere), by primal-dual active sets started from the clamped
/// unconstrained solution.
pub fn box_qp(
    h: &Csr,
    b: &[f64],
    x: &mut [f64],
    free: &[bool],
    lo: f64,
    hi: f64,
    tol: f64,
    max_cg: usize,
) -> BoxReport {
    let n = h.n();
    let diag = h.diag();
    let mut cg_its = 0;
    let mut rep = cg(h, b, x, free, tol, max_cg);
    cg_its += rep.iterations;
    if !rep.converged {
        return BoxReport { outer: 0, cg_iterations: cg_its, converged: false };
    }
    // 0 inactive, -1 at lo, +1 at hi
    let mut state: Vec<i8> = (0..n)
        .map(|i| {
            if !free[i] {
                0
            } else if x[i] < lo {
                -1
            } else if x[i] > hi {
                1
            } else {
                0
            }
        })
        .collect();
    let max_outer = 200;
    for outer in 1..=max_outer {
        for i in 0..n {
            match state[i] {
                -1 => x[i] = lo,
                1 => x[i] = hi,
                _ => {}
            }
        }
        let inactive: Vec<bool> = (0..n).map(|i| free[i] && state[i] == 0).collect();
        rep = cg(h, b, x, &inactive, tol, max_cg);
        cg_its += rep.iterations;
        if !rep.converged {
            return BoxReport { outer, cg_iterations: cg_its, converged: false };
        }
        // gradient g = Hx - b is the (signed) multiplier on active rows
        let hx = h.mul(x);
        let mut next = state.clone();
        for i in 0..n {
            if !free[i] {
                continue;
            }
            let g = hx[i] - b[i];
            let c = if diag[i] > 0.0 { 1.0 / diag[i] } else { 1.0 };
            let y = x[i] - c * g;
            next[i] = if y < lo {
                -1
            } else if y > hi {
                1
            } else {
                0
            };
        }
        if next == state {
            for xi in x.iter_mut().zip(free) {
                if *xi.1 {
                    *xi.0 = xi.0.clamp(lo, hi);
                }
            }
            return BoxReport { outer, cg_iterations: cg_its, converged: true };
        }
        state = next;
    }
    BoxReport { outer: max_outer, cg_iterations: cg_its, converged: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn laplace(n: usize, shift: f64) -> Csr {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + shift));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        Csr::from_triplets(n, t)
    }

    #[test]
    fn duplicates_are_summed() {
        let a = Csr::from_triplets(2, vec![(1, 0, 1.0), (0, 0, 2.0), (1, 0, 0.5)]);
        assert_eq!(a.to_dense(), vec![vec![2.0, 0.0], vec![1.5, 0.0]]);
    }

    #[test]
    fn cg_matches_dense() {
        let n = 40;
        let a = laplace(n, 0.1);
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut x = vec![0.0; n];
        x[0] = 1.0;
        x[n - 1] = -2.0;
        let free: Vec<bool> = (0..n).map(|i| i != 0 && i != n - 1).collect();
        let rep = cg(&a, &b, &mut x, &free, 1e-13, 500);
        assert!(rep.converged);
        // dense oracle on the free block
        let d = a.to_dense();
        let idx: Vec<usize> = (1..n - 1).collect();
        let m = DMatrix::from_fn(idx.len(), idx.len(), |i, j| d[idx[i]][idx[j]]);
        let r = DVector::from_fn(idx.len(), |i, _| b[idx[i]] - d[idx[i]][0] * 1.0 - d[idx[i]][n - 1] * -2.0);
        let sol = m.lu().solve(&r).unwrap();
        for (k, &i) in idx.iter().enumerate() {
            assert!((x[i] - sol[k]).abs() < 1e-10);
        }
        assert_eq!(x[0], 1.0);
    }

    #[test]
    fn box_qp_satisfies_kkt() {
        let n = 60;
        let a = laplace(n, 0.05);
        let b: Vec<f64> = (0..n).map(|i| 3.0 * (i as f64 * 0.2).sin()).collect();
        let mut x = vec![0.5; n];
        let free = vec![true; n];
        let rep = box_qp(&a, &b, &mut x, &free, 0.0, 1.0, 1e-13, 1000);
        assert!(rep.converged);
        let g: Vec<f64> = a.mul(&x).iter().zip(&b).map(|(p, q)| p - q).collect();
        for i in 0..n {
            assert!((0.0..=1.0).contains(&x[i]));
            if x[i] > 1e-12 && x[i] < 1.0 - 1e-12 {
                assert!(g[i].abs() < 1e-9, "{i} {}", g[i]);
            } else if x[i] <= 1e-12 {
                assert!(g[i] >= -1e-9);
            } else {
                assert!(g[i] <= 1e-9);
            }
        }
    }
}
