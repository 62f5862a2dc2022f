use crate::error::{Error, Result};

/// Cholesky factor of a symmetric positive definite banded matrix.
///
/// Lower band storage: `band[n * (bw + 1) + d]` holds entry `(n, n - d)`.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    band: Vec<f64>,
}

impl BandedCholesky {
    /// Factor a matrix given in lower band storage (consumed in place).
    pub fn factor(n: usize, bw: usize, mut band: Vec<f64>) -> Result<Self> {
        let w = bw + 1;
        if band.len() != n * w {
            return Err(Error::Shape(format!(
                "band storage has {} entries, expected {}",
                band.len(),
                n * w
            )));
        }
        for j in 0..n {
            // diagonal
            let lo = j.saturating_sub(bw);
            let mut d = band[j * w];
            for k in lo..j {
                let l = band[j * w + (j - k)];
                d -= l * l;
            }
            if !(d > 0.0) {
                return Err(Error::Precondition(format!(
                    "banded matrix is not positive definite at row {j} (pivot {d:.3e})"
                )));
            }
            let d = d.sqrt();
            band[j * w] = d;
            // column j below the diagonal
            for i in j + 1..(j + w).min(n) {
                let lo_i = i.saturating_sub(bw).max(lo);
                let mut s = band[i * w + (i - j)];
                for k in lo_i..j {
                    s -= band[i * w + (i - k)] * band[j * w + (j - k)];
                }
                band[i * w + (i - j)] = s / d;
            }
        }
        Ok(BandedCholesky { n, bw, band })
    }

    /// Solves `A x = b` in place.
    #[allow(clippy::needless_range_loop)]
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        for i in 0..n {
            let mut s = x[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.band[i * w + (i - k)] * x[k];
            }
            x[i] = s / self.band[i * w];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..(i + w).min(n) {
                s -= self.band[k * w + (k - i)] * x[k];
            }
            x[i] = s / self.band[i * w];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_tridiagonal_system() {
        // -x'' style matrix: 2 on diagonal, -1 off diagonal
        let n = 20;
        let mut band = vec![0.0; n * 2];
        for i in 0..n {
            band[i * 2] = 2.0;
            if i > 0 {
                band[i * 2 + 1] = -1.0;
            }
        }
        let chol = BandedCholesky::factor(n, 1, band).unwrap();
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut b = vec![0.0; n];
        for i in 0..n {
            b[i] = 2.0 * x_true[i];
            if i > 0 {
                b[i] -= x_true[i - 1];
            }
            if i + 1 < n {
                b[i] -= x_true[i + 1];
            }
        }
        chol.solve_in_place(&mut b);
        for (a, e) in b.iter().zip(&x_true) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let band = vec![1.0, 0.0, 1.0, 2.0];
        assert!(BandedCholesky::factor(2, 1, band).is_err());
    }
}
