//! Cyclic Jacobi eigenvalues for small dense Hermitian matrices.

use num_complex::Complex64;

use crate::{Error, Result};

pub(crate) const MAX_SWEEPS: usize = 100;
pub(crate) const OFF_DIAGONAL_TOL: f64 = 1e-12;

/// Eigenvalues (unsorted) of the Hermitian matrix stored row-major in `a`.
///
/// Each step first rotates the phase of basis vector `q` so that `a[p][q]`
/// becomes real, then applies the real Jacobi rotation that annihilates it.
/// Converges when the off-diagonal Frobenius norm drops below
/// [`OFF_DIAGONAL_TOL`].
pub(crate) fn hermitian_eigenvalues(mut a: Vec<Complex64>, dim: usize) -> Result<Vec<f64>> {
    assert_eq!(a.len(), dim * dim);
    let idx = |r: usize, c: usize| r * dim + c;

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..dim)
            .flat_map(|r| (0..dim).filter(move |&c| c != r).map(move |c| (r, c)))
            .map(|(r, c)| a[idx(r, c)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off < OFF_DIAGONAL_TOL {
            return Ok((0..dim).map(|i| a[idx(i, i)].re).collect());
        }

        for p in 0..dim {
            for q in (p + 1)..dim {
                let apq = a[idx(p, q)];
                let mag = apq.norm();
                if mag < 1e-300 {
                    continue;
                }
                let w = apq / mag;
                let wbar = w.conj();
                let app = a[idx(p, p)].re;
                let aqq = a[idx(q, q)].re;

                let zeta = (aqq - app) / (2.0 * mag);
                let t = if zeta.is_infinite() {
                    0.0
                } else {
                    zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                // A <- A G with G = diag(1, w̄) * [[c, s], [-s, c]] on (p, q).
                for r in 0..dim {
                    let x = a[idx(r, p)];
                    let y = a[idx(r, q)] * wbar;
                    a[idx(r, p)] = x * c - y * s;
                    a[idx(r, q)] = x * s + y * c;
                }
                // A <- G^† A.
                for col in 0..dim {
                    let x = a[idx(p, col)];
                    let y = a[idx(q, col)] * w;
                    a[idx(p, col)] = x * c - y * s;
                    a[idx(q, col)] = x * s + y * c;
                }
                a[idx(p, q)] = Complex64::new(0.0, 0.0);
                a[idx(q, p)] = Complex64::new(0.0, 0.0);
                a[idx(p, p)].im = 0.0;
                a[idx(q, q)].im = 0.0;
            }
        }
    }
    Err(Error::numerical(format!(
        "Jacobi eigensolver did not converge in {MAX_SWEEPS} sweeps (dim {dim})"
    )))
}
