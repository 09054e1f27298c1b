//! Compressed sparse rows, preconditioned conjugate gradients, and a
//! cell-centered geometric multigrid preconditioner for masked grids.

use nalgebra::{DMatrix, DVector};

pub(crate) const INACTIVE: usize = usize::MAX;

#[derive(Debug, Clone)]
pub(crate) struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<f64>,
}

impl Csr {
    /// Builds from per-row `(col, val)` lists; duplicate columns are summed
    /// and exact zeros dropped.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, f64)>>) -> Csr {
        let nrows = rows.len();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col = Vec::new();
        let mut val = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_unstable_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut v = 0.0;
                while k < row.len() && row[k].0 == c {
                    v += row[k].1;
                    k += 1;
                }
                if v != 0.0 {
                    col.push(c);
                    val.push(v);
                }
            }
            row_ptr.push(col.len());
        }
        Csr {
            nrows,
            ncols,
            row_ptr,
            col,
            val,
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.nrows {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.val[k] * x[self.col[k]];
            }
            y[i] = s;
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.nrows)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .find(|&k| self.col[k] == i)
                    .map_or(0.0, |k| self.val[k])
            })
            .collect()
    }

    pub fn transpose(&self) -> Csr {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col {
            counts[c + 1] += 1;
        }
        for i in 0..self.ncols {
            counts[i + 1] += counts[i];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col = vec![0; self.col.len()];
        let mut val = vec![0.0; self.val.len()];
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let c = self.col[k];
                let dst = next[c];
                col[dst] = i;
                val[dst] = self.val[k];
                next[c] += 1;
            }
        }
        Csr {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr,
            col,
            val,
        }
    }

    /// Sparse product `self · other` (Gustavson).
    pub fn matmul(&self, other: &Csr) -> Csr {
        assert_eq!(self.ncols, other.nrows);
        let mut marker = vec![INACTIVE; other.ncols];
        let mut acc = vec![0.0; other.ncols];
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        let mut col = Vec::new();
        let mut val = Vec::new();
        row_ptr.push(0);
        let mut touched = Vec::new();
        for i in 0..self.nrows {
            touched.clear();
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col[k];
                let a = self.val[k];
                for l in other.row_ptr[j]..other.row_ptr[j + 1] {
                    let c = other.col[l];
                    if marker[c] != i {
                        marker[c] = i;
                        acc[c] = 0.0;
                        touched.push(c);
                    }
                    acc[c] += a * other.val[l];
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                if acc[c] != 0.0 {
                    col.push(c);
                    val.push(acc[c]);
                }
            }
            row_ptr.push(col.len());
        }
        Csr {
            nrows: self.nrows,
            ncols: other.ncols,
            row_ptr,
            col,
            val,
        }
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.nrows {
            let mut r = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                r += self.val[k] * y[self.col[k]];
            }
            s += x[i] * r;
        }
        s
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn remove_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

pub(crate) trait Preconditioner {
    fn apply(&mut self, r: &[f64], z: &mut [f64]);
}

pub(crate) struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(a: &Csr) -> Self {
        Jacobi {
            inv_diag: a
                .diag()
                .into_iter()
                .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
                .collect(),
        }
    }
}

impl Preconditioner for Jacobi {
    fn apply(&mut self, r: &[f64], z: &mut [f64]) {
        for ((zi, ri), di) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zi = ri * di;
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct CgOutcome {
    pub iterations: usize,
    pub rel_residual: f64,
    pub converged: bool,
}

/// Preconditioned CG on `A x = b` starting from the given `x`.
///
/// With `project_mean` the iteration is kept in the mean-zero subspace,
/// which is how the singular periodic operator is handled.
pub(crate) fn pcg(
    a: &Csr,
    b: &[f64],
    x: &mut [f64],
    prec: &mut dyn Preconditioner,
    rtol: f64,
    max_iter: usize,
    project_mean: bool,
) -> CgOutcome {
    let n = b.len();
    let mut bb = b.to_vec();
    if project_mean {
        remove_mean(&mut bb);
        remove_mean(x);
    }
    let bnorm = norm(&bb);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return CgOutcome {
            iterations: 0,
            rel_residual: 0.0,
            converged: true,
        };
    }
    let mut r = vec![0.0; n];
    a.matvec(x, &mut r);
    for i in 0..n {
        r[i] = bb[i] - r[i];
    }
    let mut rel = norm(&r) / bnorm;
    if rel <= rtol {
        return CgOutcome {
            iterations: 0,
            rel_residual: rel,
            converged: true,
        };
    }
    let mut z = vec![0.0; n];
    prec.apply(&r, &mut z);
    if project_mean {
        remove_mean(&mut z);
    }
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return CgOutcome {
                iterations: it,
                rel_residual: rel,
                converged: false,
            };
        }
        let alpha = rz / pap;
        axpy(alpha, &p, x);
        axpy(-alpha, &ap, &mut r);
        if project_mean {
            remove_mean(&mut r);
        }
        rel = norm(&r) / bnorm;
        if rel <= rtol {
            if project_mean {
                remove_mean(x);
            }
            return CgOutcome {
                iterations: it,
                rel_residual: rel,
                converged: true,
            };
        }
        prec.apply(&r, &mut z);
        if project_mean {
            remove_mean(&mut z);
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if project_mean {
        remove_mean(x);
    }
    CgOutcome {
        iterations: max_iter,
        rel_residual: rel,
        converged: false,
    }
}

/// Active-cell layout of a rectangular grid.
#[derive(Debug, Clone)]
pub(crate) struct GridLayout {
    pub nx: usize,
    pub ny: usize,
    /// Grid cell → unknown index, or [`INACTIVE`].
    pub index: Vec<usize>,
}

impl GridLayout {
    fn active_count(&self) -> usize {
        self.index.iter().filter(|&&i| i != INACTIVE).count()
    }

    /// 2× coarsening: a coarse cell is active iff one of its children is.
    fn coarsen(&self) -> GridLayout {
        let nx = self.nx.div_ceil(2);
        let ny = self.ny.div_ceil(2);
        let mut active = vec![false; nx * ny];
        for j in 0..self.ny {
            for i in 0..self.nx {
                if self.index[j * self.nx + i] != INACTIVE {
                    active[(j / 2) * nx + i / 2] = true;
                }
            }
        }
        let mut index = vec![INACTIVE; nx * ny];
        let mut next = 0;
        for (slot, &a) in index.iter_mut().zip(&active) {
            if a {
                *slot = next;
                next += 1;
            }
        }
        GridLayout { nx, ny, index }
    }

    /// Bilinear cell-centered prolongation from `coarse` (weights 9/16, 3/16,
    /// 3/16, 1/16); weights pointing at inactive coarse cells are dropped.
    fn prolongation(&self, coarse: &GridLayout) -> Csr {
        let n = self.active_count();
        let mut rows = vec![Vec::new(); n];
        for j in 0..self.ny {
            for i in 0..self.nx {
                let f = self.index[j * self.nx + i];
                if f == INACTIVE {
                    continue;
                }
                let ci = (i / 2) as isize;
                let cj = (j / 2) as isize;
                let oi = if i % 2 == 0 { ci - 1 } else { ci + 1 };
                let oj = if j % 2 == 0 { cj - 1 } else { cj + 1 };
                for (x, wx) in [(ci, 0.75), (oi, 0.25)] {
                    for (y, wy) in [(cj, 0.75), (oj, 0.25)] {
                        if x < 0 || y < 0 || x >= coarse.nx as isize || y >= coarse.ny as isize {
                            continue;
                        }
                        let c = coarse.index[y as usize * coarse.nx + x as usize];
                        if c != INACTIVE {
                            rows[f].push((c, wx * wy));
                        }
                    }
                }
            }
        }
        Csr::from_rows(coarse.active_count(), rows)
    }
}

struct MgLevel {
    a: Csr,
    diag: Vec<f64>,
    p: Csr,
    r: Csr,
    // scratch
    x: Vec<f64>,
    b: Vec<f64>,
    res: Vec<f64>,
}

enum CoarseSolve {
    Dense(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Smooth(Csr, Vec<f64>),
}

/// V(1,1)-cycle with symmetric Gauss–Seidel smoothing and Galerkin coarse
/// operators; symmetric, so it is a valid CG preconditioner.
pub(crate) struct Multigrid {
    levels: Vec<MgLevel>,
    coarse: CoarseSolve,
    coarse_b: Vec<f64>,
    coarse_x: Vec<f64>,
}

const COARSE_SIZE: usize = 300;

impl Multigrid {
    pub fn new(a: &Csr, layout: &GridLayout) -> Multigrid {
        let mut levels = Vec::new();
        let mut cur_a = a.clone();
        let mut cur_layout = layout.clone();
        while cur_a.nrows > COARSE_SIZE && levels.len() < 16 {
            let coarse_layout = cur_layout.coarsen();
            if coarse_layout.active_count() >= cur_a.nrows {
                break;
            }
            let p = cur_layout.prolongation(&coarse_layout);
            let r = p.transpose();
            let coarse_a = r.matmul(&cur_a.matmul(&p));
            let n = cur_a.nrows;
            levels.push(MgLevel {
                diag: cur_a.diag(),
                a: cur_a,
                p,
                r,
                x: vec![0.0; n],
                b: vec![0.0; n],
                res: vec![0.0; n],
            });
            cur_a = coarse_a;
            cur_layout = coarse_layout;
        }
        let n = cur_a.nrows;
        let mut dense = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for k in cur_a.row_ptr[i]..cur_a.row_ptr[i + 1] {
                dense[(i, cur_a.col[k])] = cur_a.val[k];
            }
        }
        let coarse = match nalgebra::Cholesky::new(dense) {
            Some(ch) => CoarseSolve::Dense(ch),
            None => {
                let d = cur_a.diag();
                CoarseSolve::Smooth(cur_a, d)
            }
        };
        Multigrid {
            levels,
            coarse,
            coarse_b: vec![0.0; n],
            coarse_x: vec![0.0; n],
        }
    }

    fn gauss_seidel(a: &Csr, diag: &[f64], b: &[f64], x: &mut [f64], forward: bool) {
        let mut sweep = |i: usize| {
            let d = diag[i];
            if d <= 0.0 {
                return;
            }
            let mut s = b[i];
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                let c = a.col[k];
                if c != i {
                    s -= a.val[k] * x[c];
                }
            }
            x[i] = s / d;
        };
        if forward {
            (0..a.nrows).for_each(&mut sweep);
        } else {
            (0..a.nrows).rev().for_each(&mut sweep);
        }
    }

    fn solve_coarse(&mut self) {
        match &self.coarse {
            CoarseSolve::Dense(ch) => {
                let sol = ch.solve(&DVector::from_column_slice(&self.coarse_b));
                self.coarse_x.copy_from_slice(sol.as_slice());
            }
            CoarseSolve::Smooth(a, d) => {
                self.coarse_x.iter_mut().for_each(|v| *v = 0.0);
                for _ in 0..50 {
                    Self::gauss_seidel(a, d, &self.coarse_b, &mut self.coarse_x, true);
                    Self::gauss_seidel(a, d, &self.coarse_b, &mut self.coarse_x, false);
                }
            }
        }
    }

    fn cycle(&mut self, lvl: usize) {
        if lvl == self.levels.len() {
            self.solve_coarse();
            return;
        }
        {
            let l = &mut self.levels[lvl];
            l.x.iter_mut().for_each(|v| *v = 0.0);
            Self::gauss_seidel(&l.a, &l.diag, &l.b, &mut l.x, true);
            l.a.matvec(&l.x, &mut l.res);
            for i in 0..l.res.len() {
                l.res[i] = l.b[i] - l.res[i];
            }
        }
        let coarse_rhs = {
            let l = &self.levels[lvl];
            let mut v = vec![0.0; l.r.nrows];
            l.r.matvec(&l.res, &mut v);
            v
        };
        if lvl + 1 == self.levels.len() {
            self.coarse_b.copy_from_slice(&coarse_rhs);
        } else {
            self.levels[lvl + 1].b.copy_from_slice(&coarse_rhs);
        }
        self.cycle(lvl + 1);
        let coarse_x = if lvl + 1 == self.levels.len() {
            self.coarse_x.clone()
        } else {
            self.levels[lvl + 1].x.clone()
        };
        let l = &mut self.levels[lvl];
        l.p.matvec(&coarse_x, &mut l.res);
        for i in 0..l.x.len() {
            l.x[i] += l.res[i];
        }
        Self::gauss_seidel(&l.a, &l.diag, &l.b, &mut l.x, false);
    }
}

impl Preconditioner for Multigrid {
    fn apply(&mut self, r: &[f64], z: &mut [f64]) {
        if self.levels.is_empty() {
            self.coarse_b.copy_from_slice(r);
            self.solve_coarse();
            z.copy_from_slice(&self.coarse_x);
            return;
        }
        self.levels[0].b.copy_from_slice(r);
        self.cycle(0);
        z.copy_from_slice(&self.levels[0].x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> (Csr, GridLayout) {
        let mut rows = vec![Vec::new(); n * n];
        for j in 0..n {
            for i in 0..n {
                let p = j * n + i;
                rows[p].push((p, 4.0));
                if i > 0 {
                    rows[p].push((p - 1, -1.0));
                }
                if i + 1 < n {
                    rows[p].push((p + 1, -1.0));
                }
                if j > 0 {
                    rows[p].push((p - n, -1.0));
                }
                if j + 1 < n {
                    rows[p].push((p + n, -1.0));
                }
            }
        }
        let layout = GridLayout {
            nx: n,
            ny: n,
            index: (0..n * n).collect(),
        };
        (Csr::from_rows(n * n, rows), layout)
    }

    #[test]
    fn transpose_and_matmul_agree_with_dense() {
        let (a, _) = laplacian(4);
        let t = a.transpose();
        let aa = a.matmul(&t);
        let x: Vec<f64> = (0..16).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut y1 = vec![0.0; 16];
        let mut y2 = vec![0.0; 16];
        let mut tmp = vec![0.0; 16];
        aa.matvec(&x, &mut y1);
        t.matvec(&x, &mut tmp);
        a.matvec(&tmp, &mut y2);
        for i in 0..16 {
            assert!((y1[i] - y2[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn multigrid_cg_converges_fast() {
        let (a, layout) = laplacian(96);
        let b: Vec<f64> = (0..a.nrows).map(|i| 1.0 + (i % 7) as f64).collect();
        let mut x = vec![0.0; a.nrows];
        let mut mg = Multigrid::new(&a, &layout);
        let out = pcg(&a, &b, &mut x, &mut mg, 1e-10, 200, false);
        assert!(out.converged);
        assert!(out.iterations < 40, "iterations {}", out.iterations);
        let mut jac = Jacobi::new(&a);
        let mut x2 = vec![0.0; a.nrows];
        let out2 = pcg(&a, &b, &mut x2, &mut jac, 1e-10, 5000, false);
        assert!(out2.converged);
        for i in 0..a.nrows {
            assert!((x[i] - x2[i]).abs() < 1e-6 * (1.0 + x2[i].abs()));
        }
    }
}
