//! Banded LU with partial pivoting.

use super::PdeError;

/// `n x n` matrix with `kl` sub- and `ku` super-diagonals, factorized in place.
/// Row `i` stores columns `i - kl ..= i + ku + kl` (the extra `kl` hold pivoting fill).
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandedMatrix { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl, "({i}, {j}) outside the band");
        i * self.width + (j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku + self.kl {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "({i}, {j}) outside the band");
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    pub fn factorize(mut self) -> Result<BandedLu, PdeError> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let p = (k..=last)
                .max_by(|&a, &b| self.get(a, k).abs().total_cmp(&self.get(b, k).abs()))
                .expect("non-empty range");
            if self.get(p, k) == 0.0 {
                return Err(PdeError::Singular { row: k });
            }
            piv[k] = p;
            let jmax = (k + ku + kl).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let (a, b) = (self.slot(k, j), self.slot(p, j));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.get(k, k);
            for r in (k + 1)..=last {
                let sr = self.slot(r, k);
                let l = self.data[sr] / pivot;
                self.data[sr] = l;
                if l == 0.0 {
                    continue;
                }
                for j in (k + 1)..=jmax {
                    let u = self.data[self.slot(k, j)];
                    let s = self.slot(r, j);
                    self.data[s] -= l * u;
                }
            }
        }
        Ok(BandedLu { m: self, piv })
    }
}

#[derive(Debug, Clone)]
pub struct BandedLu {
    m: BandedMatrix,
    piv: Vec<usize>,
}

impl BandedLu {
    pub fn n(&self) -> usize {
        self.m.n
    }

    /// Solves `A x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        let (n, kl, ku) = (self.m.n, self.m.kl, self.m.ku);
        for k in 0..n {
            b.swap(k, self.piv[k]);
            let bk = b[k];
            for r in (k + 1)..=(k + kl).min(n - 1) {
                b[r] -= self.m.data[self.m.slot(r, k)] * bk;
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in (k + 1)..=(k + ku + kl).min(n - 1) {
                s -= self.m.data[self.m.slot(k, j)] * b[j];
            }
            b[k] = s / self.m.data[self.m.slot(k, k)];
        }
    }

    /// Solves `A^T x = b` in place.
    pub fn solve_transpose(&self, b: &mut [f64]) {
        let (n, kl, ku) = (self.m.n, self.m.kl, self.m.ku);
        for k in 0..n {
            let mut s = b[k];
            for i in k.saturating_sub(ku + kl)..k {
                s -= self.m.data[self.m.slot(i, k)] * b[i];
            }
            b[k] = s / self.m.data[self.m.slot(k, k)];
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for r in (k + 1)..=(k + kl).min(n - 1) {
                s -= self.m.data[self.m.slot(r, k)] * b[r];
            }
            b[k] = s;
            b.swap(k, self.piv[k]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_band(n: usize, kl: usize, ku: usize, seed: u64) -> (BandedMatrix, nalgebra::DMatrix<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = BandedMatrix::zeros(n, kl, ku);
        let mut d = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                // Small diagonal so pivoting is exercised.
                let v = if i == j { 0.01 * rng.gen::<f64>() } else { rng.gen_range(-1.0..1.0) };
                b.add(i, j, v);
                d[(i, j)] = v;
            }
        }
        (b, d)
    }

    #[test]
    fn matches_dense_solves() {
        let (n, kl, ku) = (40, 5, 5);
        let (b, d) = random_band(n, kl, ku, 3);
        let lu = b.factorize().unwrap();
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let dense = d.clone().lu();
        let want = dense.solve(&nalgebra::DVector::from_vec(rhs.clone())).unwrap();
        let mut x = rhs.clone();
        lu.solve(&mut x);
        let want_t = d.transpose().lu().solve(&nalgebra::DVector::from_vec(rhs.clone())).unwrap();
        let mut y = rhs;
        lu.solve_transpose(&mut y);
        for i in 0..n {
            assert!((x[i] - want[i]).abs() < 1e-9 * (1.0 + want[i].abs()), "solve {i}");
            assert!((y[i] - want_t[i]).abs() < 1e-9 * (1.0 + want_t[i].abs()), "transpose {i}");
        }
    }

    #[test]
    fn zero_column_is_singular() {
        let mut b = BandedMatrix::zeros(3, 1, 1);
        b.add(0, 0, 1.0);
        b.add(2, 2, 1.0);
        assert!(matches!(b.factorize(), Err(PdeError::Singular { row: 1 })));
    }
}
