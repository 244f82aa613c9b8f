//! Sparse symmetric systems for the implicit solvers.
//!
//! Both solvers reduce to `A x = b` with `A = D + eps * L`: `D` the identity
//! (diffusion) or the lumped mass matrix (spring), `L` a graph Laplacian
//! whose edge weights are 3x3 tensors or scalars. `A` is symmetric positive
//! definite by construction, so a Jacobi-preconditioned conjugate gradient
//! solves it to tight residuals; every operation is elementwise-parallel and
//! bit-deterministic for fixed inputs.

use rayon::prelude::*;

use crate::{Error, Mat3, Point3, Result};

/// Compressed sparse row matrix (square, symmetric by construction).
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Build from unordered triplets; duplicate entries accumulate.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> CsrMatrix {
        let mut counts = vec![0usize; n + 1];
        for &(r, _, _) in triplets {
            counts[r + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut entries: Vec<(usize, f64)> = vec![(0, 0.0); triplets.len()];
        let mut cursor = counts.clone();
        for &(r, c, v) in triplets {
            entries[cursor[r]] = (c, v);
            cursor[r] += 1;
        }

        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        for r in 0..n {
            let row = &mut entries[counts[r]..counts[r + 1]];
            row.sort_unstable_by_key(|&(c, _)| c);
            let mut last_col = usize::MAX;
            for &(c, v) in row.iter() {
                if c == last_col {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last_col = c;
                }
            }
            row_ptr.push(cols.len());
        }
        CsrMatrix {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `y = A x`; rows computed independently, so the result does not depend
    /// on scheduling.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        y.par_iter_mut().enumerate().for_each(|(r, out)| {
            let mut acc = 0.0;
            for idx in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[idx] * x[self.cols[idx]];
            }
            *out = acc;
        });
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for r in 0..self.n {
            for idx in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.cols[idx] == r {
                    d[r] = self.vals[idx];
                }
            }
        }
        d
    }

    /// Dense copy for small-system oracles.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for idx in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[idx])] = self.vals[idx];
            }
        }
        m
    }

    /// Largest asymmetry `|A - A^t|` entry, for tests.
    pub fn asymmetry(&self) -> f64 {
        let d = self.to_dense();
        (&d - d.transpose()).amax()
    }
}

/// Jacobi-preconditioned conjugate gradient.
///
/// Converges to a relative residual of 1e-12 (or stagnation below the 1e-10
/// contract); a non-positive curvature direction means the matrix is not
/// positive definite and is an error. Dot products are sequential to keep
/// results bit-deterministic.
pub fn solve_cg(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    const TARGET_REL: f64 = 1e-12;
    const CONTRACT_REL: f64 = 1e-10;

    let n = a.dim();
    let norm_b = dot(b, b).sqrt();
    if norm_b == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| {
            if d > 0.0 {
                1.0 / d
            } else {
                1.0
            }
        })
        .collect();

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];

    let max_iter = 40 * n + 100;
    let mut best_rel = f64::INFINITY;
    for _ in 0..max_iter {
        let rel = dot(&r, &r).sqrt() / norm_b;
        best_rel = best_rel.min(rel);
        if rel < TARGET_REL {
            return Ok(x);
        }
        a.mul_vec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::SolverFailure(format!(
                "matrix is not positive definite (p.Ap = {pap:e})"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    let rel = dot(&r, &r).sqrt() / norm_b;
    if rel < CONTRACT_REL {
        Ok(x)
    } else {
        Err(Error::SolverFailure(format!(
            "conjugate gradient stalled at relative residual {rel:e}"
        )))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A ready-to-solve symmetric positive-definite system. Diffusion packs the
/// three coordinates into one 3V-dimensional solve; the spring system reuses
/// one V-dimensional matrix for all three right-hand sides.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<Vec<f64>>,
}

impl SparseSystem {
    pub fn solve(&self) -> Result<Vec<Vec<f64>>> {
        self.rhs.iter().map(|b| solve_cg(&self.matrix, b)).collect()
    }
}

/// Graph Laplacian over 3V unknowns with one 3x3 tensor weight per edge:
/// row block i carries `sum_j W_ij` on the diagonal and `-W_ij` off it.
pub fn laplacian_blocks_csr(
    n_verts: usize,
    edges: &[[usize; 2]],
    weights: &[Mat3],
) -> CsrMatrix {
    let mut triplets = Vec::with_capacity(edges.len() * 36);
    for (e, w) in edges.iter().zip(weights) {
        let [i, j] = *e;
        for r in 0..3 {
            for c in 0..3 {
                let v = w[(r, c)];
                if v == 0.0 {
                    continue;
                }
                triplets.push((3 * i + r, 3 * i + c, v));
                triplets.push((3 * j + r, 3 * j + c, v));
                triplets.push((3 * i + r, 3 * j + c, -v));
                triplets.push((3 * j + r, 3 * i + c, -v));
            }
        }
    }
    CsrMatrix::from_triplets(3 * n_verts, &triplets)
}

/// Scalar graph Laplacian over V unknowns.
pub fn laplacian_scalar_csr(
    n_verts: usize,
    edges: &[[usize; 2]],
    weights: &[f64],
) -> CsrMatrix {
    let mut triplets = Vec::with_capacity(edges.len() * 4);
    for (e, &w) in edges.iter().zip(weights) {
        let [i, j] = *e;
        triplets.push((i, i, w));
        triplets.push((j, j, w));
        triplets.push((i, j, -w));
        triplets.push((j, i, -w));
    }
    CsrMatrix::from_triplets(n_verts, &triplets)
}

/// Backward-Euler diffusion system `(I + eps L) x = phi` over 3V unknowns.
pub fn diffusion_system(
    n_verts: usize,
    edges: &[[usize; 2]],
    weights: &[Mat3],
    epsilon: f64,
    positions: &[Point3],
) -> SparseSystem {
    mass_diffusion_system(n_verts, edges, weights, epsilon, &vec![1.0; n_verts], positions)
}

/// Backward-Euler diffusion with a lumped vertex mass matrix:
/// `(M + eps L) x = M phi`. Masses restore the dual-cell Hodge star that the
/// bare graph stencil drops, making the step size resolution-independent.
pub fn mass_diffusion_system(
    n_verts: usize,
    edges: &[[usize; 2]],
    weights: &[Mat3],
    epsilon: f64,
    masses: &[f64],
    positions: &[Point3],
) -> SparseSystem {
    debug_assert_eq!(masses.len(), n_verts);
    let scaled: Vec<Mat3> = weights.iter().map(|w| w * epsilon).collect();
    let mut triplets = Vec::with_capacity(3 * n_verts);
    for (i, &m) in masses.iter().enumerate() {
        for c in 0..3 {
            triplets.push((3 * i + c, 3 * i + c, m));
        }
    }
    let lap = laplacian_blocks_csr(n_verts, edges, &scaled);
    let mut merged = triplets;
    append_csr_triplets(&lap, &mut merged);
    let matrix = CsrMatrix::from_triplets(3 * n_verts, &merged);

    let mut rhs = vec![0.0; 3 * n_verts];
    for (i, p) in positions.iter().enumerate() {
        rhs[3 * i] = masses[i] * p.x;
        rhs[3 * i + 1] = masses[i] * p.y;
        rhs[3 * i + 2] = masses[i] * p.z;
    }
    SparseSystem {
        matrix,
        rhs: vec![rhs],
    }
}

/// Spring system `(M + eps L_k) x = M phi` per coordinate, with lumped
/// masses `m_i = sum of incident spring constants`.
pub fn spring_system(
    n_verts: usize,
    edges: &[[usize; 2]],
    constants: &[f64],
    epsilon: f64,
    positions: &[Point3],
) -> SparseSystem {
    let mut mass = vec![0.0; n_verts];
    for (e, &k) in edges.iter().zip(constants) {
        mass[e[0]] += k;
        mass[e[1]] += k;
    }

    let scaled: Vec<f64> = constants.iter().map(|k| k * epsilon).collect();
    let lap = laplacian_scalar_csr(n_verts, edges, &scaled);
    let mut triplets: Vec<(usize, usize, f64)> =
        mass.iter().enumerate().map(|(i, &m)| (i, i, m)).collect();
    append_csr_triplets(&lap, &mut triplets);
    let matrix = CsrMatrix::from_triplets(n_verts, &triplets);

    let rhs = (0..3)
        .map(|c| {
            positions
                .iter()
                .enumerate()
                .map(|(i, p)| mass[i] * p[c])
                .collect()
        })
        .collect();
    SparseSystem { matrix, rhs }
}

fn append_csr_triplets(m: &CsrMatrix, out: &mut Vec<(usize, usize, f64)>) {
    for r in 0..m.n {
        for idx in m.row_ptr[r]..m.row_ptr[r + 1] {
            out.push((r, m.cols[idx], m.vals[idx]));
        }
    }
}
