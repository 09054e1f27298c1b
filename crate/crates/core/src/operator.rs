//! Assembly of the discrete divergence-form operator.
//!
//! The discrete energy of a grid function `u` (values at cell centers) is
//!
//! ```text
//! Σ_x-faces a₁₁ (Δ₁u)² + Σ_y-faces a₂₂ (Δ₂u)² + Σ_corners 2 a₁₂ D₁u D₂u
//! ```
//!
//! where `D₁`, `D₂` are the averaged differences of the four cells around a
//! corner. In two dimensions the factors of `h` cancel, so the stiffness
//! matrix `K` satisfies `uᵀKu = ∫ a∇u·∇u` and the mass matrix is `h²·I`.
//! On masks the Dirichlet condition sits on the cell faces between occupied
//! and empty cells (ghost value `−u`), which gives a face term `2a·u²`.

use crate::coeff::Coefficients;
use crate::error::{Error, Result};
use crate::geometry::DomainMask;
use crate::sparse::{Csr, GridLayout, INACTIVE};

/// Weights of `D₁` and `D₂` on the (SW, SE, NW, NE) cells of a corner.
const W1: [f64; 4] = [-0.5, 0.5, -0.5, 0.5];
const W2: [f64; 4] = [-0.5, -0.5, 0.5, 0.5];

pub(crate) struct MaskedOperator {
    pub layout: GridLayout,
    /// Unknown → window cell index `j·nx + i`.
    pub cells: Vec<usize>,
    pub k: Csr,
    pub h: f64,
}

impl MaskedOperator {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    /// Restricts a window grid function to the unknowns.
    pub fn gather(&self, full: &[f64]) -> Vec<f64> {
        self.cells.iter().map(|&c| full[c]).collect()
    }

    /// Expands unknowns to a window grid function (zero off the mask).
    pub fn scatter(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.layout.nx * self.layout.ny];
        for (&c, &x) in self.cells.iter().zip(v) {
            out[c] = x;
        }
        out
    }
}

/// Global lattice index of the window's cell `(0, 0)`, as used for
/// coefficient lookups.
pub(crate) fn coefficient_offset<C: Coefficients + ?Sized>(
    a: &C,
    mask: &DomainMask,
) -> Result<(i64, i64)> {
    a.check_spacing(mask.h())?;
    if a.is_uniform() {
        let o = mask.origin();
        return Ok(((o[0] / mask.h()).round() as i64, (o[1] / mask.h()).round() as i64));
    }
    mask.global_offset()
}

pub(crate) fn assemble_dirichlet<C: Coefficients + ?Sized>(
    a: &C,
    mask: &DomainMask,
) -> Result<MaskedOperator> {
    if mask.is_empty() {
        return Err(Error::EmptyDomain);
    }
    let (gi0, gj0) = coefficient_offset(a, mask)?;
    let (nx, ny) = (mask.nx(), mask.ny());
    let mut index = vec![INACTIVE; nx * ny];
    let mut cells = Vec::new();
    for (c, &occ) in mask.cells().iter().enumerate() {
        if occ {
            index[c] = cells.len();
            cells.push(c);
        }
    }
    let n = cells.len();
    let at = |i: i64, j: i64| -> usize {
        if i < 0 || j < 0 || i >= nx as i64 || j >= ny as i64 {
            INACTIVE
        } else {
            index[j as usize * nx + i as usize]
        }
    };
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::with_capacity(9); n];
    for (p, &c) in cells.iter().enumerate() {
        let (i, j) = ((c % nx) as i64, (c / nx) as i64);
        let (gi, gj) = (gi0 + i, gj0 + j);
        let faces = [
            (at(i - 1, j), a.x_face(gi, gj).xx),
            (at(i + 1, j), a.x_face(gi + 1, gj).xx),
            (at(i, j - 1), a.y_face(gi, gj).yy),
            (at(i, j + 1), a.y_face(gi, gj + 1).yy),
        ];
        for (q, w) in faces {
            if q == INACTIVE {
                rows[p].push((p, 2.0 * w));
            } else {
                rows[p].push((p, w));
                rows[p].push((q, -w));
            }
        }
    }
    if !a.is_diagonal() {
        for cj in 0..=ny as i64 {
            for ci in 0..=nx as i64 {
                let around = [
                    at(ci - 1, cj - 1),
                    at(ci, cj - 1),
                    at(ci - 1, cj),
                    at(ci, cj),
                ];
                if around.iter().all(|&q| q == INACTIVE) {
                    continue;
                }
                let a12 = a.corner(gi0 + ci, gj0 + cj).xy;
                if a12 == 0.0 {
                    continue;
                }
                for r in 0..4 {
                    if around[r] == INACTIVE {
                        continue;
                    }
                    for s in 0..4 {
                        if around[s] == INACTIVE {
                            continue;
                        }
                        let m = a12 * (W1[r] * W2[s] + W2[r] * W1[s]);
                        rows[around[r]].push((around[s], m));
                    }
                }
            }
        }
    }
    Ok(MaskedOperator {
        layout: GridLayout { nx, ny, index },
        cells,
        k: Csr::from_rows(n, rows),
        h: mask.h(),
    })
}

/// Gradient of `q·x + ψ` sampled on every face and corner of the `n × n`
/// torus, where `psi` is a corrector divided by `h`.
struct TorusGradients {
    x_face: Vec<f64>,
    y_face: Vec<f64>,
    corner: [Vec<f64>; 2],
}

fn torus_gradients(n: usize, q: [f64; 2], psi: &[f64]) -> TorusGradients {
    let w = |i: usize, j: usize| psi[(j % n) * n + (i % n)];
    let mut x_face = vec![0.0; n * n];
    let mut y_face = vec![0.0; n * n];
    let mut c1 = vec![0.0; n * n];
    let mut c2 = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            let k = j * n + i;
            let (im, jm) = (i + n - 1, j + n - 1);
            x_face[k] = q[0] + w(i, j) - w(im, j);
            y_face[k] = q[1] + w(i, j) - w(i, jm);
            let v = [w(im, jm), w(i, jm), w(im, j), w(i, j)];
            c1[k] = q[0] + (0..4).map(|r| W1[r] * v[r]).sum::<f64>();
            c2[k] = q[1] + (0..4).map(|r| W2[r] * v[r]).sum::<f64>();
        }
    }
    TorusGradients {
        x_face,
        y_face,
        corner: [c1, c2],
    }
}

/// Periodic operator on the `n × n` unit torus (spacing `1/n`).
pub(crate) fn assemble_torus<C: Coefficients + ?Sized>(a: &C, n: usize) -> Csr {
    let idx = |i: i64, j: i64| -> usize {
        (j.rem_euclid(n as i64) * n as i64 + i.rem_euclid(n as i64)) as usize
    };
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::with_capacity(9); n * n];
    for j in 0..n as i64 {
        for i in 0..n as i64 {
            let p = idx(i, j);
            let faces = [
                (idx(i - 1, j), a.x_face(i, j).xx),
                (idx(i + 1, j), a.x_face(i + 1, j).xx),
                (idx(i, j - 1), a.y_face(i, j).yy),
                (idx(i, j + 1), a.y_face(i, j + 1).yy),
            ];
            for (q, w) in faces {
                rows[p].push((p, w));
                rows[p].push((q, -w));
            }
        }
    }
    if !a.is_diagonal() {
        for cj in 0..n as i64 {
            for ci in 0..n as i64 {
                let a12 = a.corner(ci, cj).xy;
                if a12 == 0.0 {
                    continue;
                }
                let around = [
                    idx(ci - 1, cj - 1),
                    idx(ci, cj - 1),
                    idx(ci - 1, cj),
                    idx(ci, cj),
                ];
                for r in 0..4 {
                    for s in 0..4 {
                        rows[around[r]].push((around[s], a12 * (W1[r] * W2[s] + W2[r] * W1[s])));
                    }
                }
            }
        }
    }
    Csr::from_rows(n * n, rows)
}

/// Right-hand side `−b` of the corrector system `Kψ = −b` for direction `q`.
pub(crate) fn torus_rhs<C: Coefficients + ?Sized>(a: &C, n: usize, q: [f64; 2]) -> Vec<f64> {
    let idx = |i: i64, j: i64| -> usize {
        (j.rem_euclid(n as i64) * n as i64 + i.rem_euclid(n as i64)) as usize
    };
    let mut b = vec![0.0; n * n];
    for j in 0..n as i64 {
        for i in 0..n as i64 {
            let fx = a.x_face(i, j).xx * q[0];
            b[idx(i, j)] += fx;
            b[idx(i - 1, j)] -= fx;
            let fy = a.y_face(i, j).yy * q[1];
            b[idx(i, j)] += fy;
            b[idx(i, j - 1)] -= fy;
            let a12 = a.corner(i, j).xy;
            if a12 != 0.0 {
                let around = [idx(i - 1, j - 1), idx(i, j - 1), idx(i - 1, j), idx(i, j)];
                for r in 0..4 {
                    b[around[r]] += a12 * (q[1] * W1[r] + q[0] * W2[r]);
                }
            }
        }
    }
    b.iter_mut().for_each(|v| *v = -*v);
    b
}

/// Cell average of `(q + ∇φ_q)·a(r + ∇φ_r)` with `psi_* = φ_*/h`.
pub(crate) fn torus_bilinear<C: Coefficients + ?Sized>(
    a: &C,
    n: usize,
    q: [f64; 2],
    psi_q: &[f64],
    r: [f64; 2],
    psi_r: &[f64],
) -> f64 {
    let gq = torus_gradients(n, q, psi_q);
    let gr = torus_gradients(n, r, psi_r);
    let mut s = 0.0;
    for j in 0..n as i64 {
        for i in 0..n as i64 {
            let k = (j * n as i64 + i) as usize;
            s += a.x_face(i, j).xx * gq.x_face[k] * gr.x_face[k];
            s += a.y_face(i, j).yy * gq.y_face[k] * gr.y_face[k];
            let a12 = a.corner(i, j).xy;
            if a12 != 0.0 {
                s += a12
                    * (gq.corner[0][k] * gr.corner[1][k] + gq.corner[1][k] * gr.corner[0][k]);
            }
        }
    }
    s / (n * n) as f64
}
