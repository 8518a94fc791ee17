//! Banded linear algebra: LU factorization with partial pivoting in
//! LAPACK-style band storage.
//!
//! The collocation Jacobian is block bidiagonal with separated boundary
//! rows, which fits in a band of half-width ~2*dim.  Pivoting stays inside
//! the band (classic `gbtrf` scheme), so factorization is O(n·kl·(kl+ku))
//! and fully deterministic.

/// Banded matrix with `kl` sub- and `ku` superdiagonals.
///
/// Column-major band storage with `kl` extra rows on top for pivoting fill:
/// entry `(i, j)` lives at `ab[j * ldab + kl + ku + i - j]`.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            ldab,
            ab: vec![0.0; ldab * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n && j < self.n);
        debug_assert!(i + self.ku >= j && j + self.kl >= i, "entry ({i},{j}) outside band");
        j * self.ldab + self.kl + self.ku + i - j
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.ab[k] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.ab[k] += v;
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i + self.ku < j || j + self.kl < i {
            return 0.0;
        }
        self.ab[j * self.ldab + self.kl + self.ku + i - j]
    }

    /// In-place LU factorization with partial pivoting.  Returns `None` if a
    /// pivot is exactly zero (singular to working precision).
    pub fn lu_factor(mut self) -> Option<BandLu> {
        let (n, kl, ku, ldab) = (self.n, self.kl, self.ku, self.ldab);
        let kv = kl + ku; // effective upper bandwidth after pivoting
        let mut ipiv = vec![0usize; n];
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            // Pivot search in column j among rows j..=j+km.
            let mut p = 0usize;
            let mut pmax = 0.0f64;
            for i in 0..=km {
                let v = self.ab[j * ldab + kv + i].abs();
                if v > pmax {
                    pmax = v;
                    p = i;
                }
            }
            if pmax == 0.0 {
                return None;
            }
            ipiv[j] = j + p;
            let jmax = (j + kv).min(n - 1);
            if p != 0 {
                for c in j..=jmax {
                    let a = c * ldab + kv + j - c;
                    let b = a + p;
                    self.ab.swap(a, b);
                }
            }
            let pivot = self.ab[j * ldab + kv];
            for i in 1..=km {
                let m = self.ab[j * ldab + kv + i] / pivot;
                self.ab[j * ldab + kv + i] = m;
                if m != 0.0 {
                    for c in (j + 1)..=jmax {
                        let base = c * ldab + kv + j - c;
                        let u = self.ab[base];
                        if u != 0.0 {
                            self.ab[base + i] -= m * u;
                        }
                    }
                }
            }
        }
        Some(BandLu {
            n,
            kl,
            ku,
            ldab,
            ab: self.ab,
            ipiv,
        })
    }
}

/// Factored form produced by [`BandMatrix::lu_factor`].
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandLu {
    /// Solve `A x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let (n, kl, ldab) = (self.n, self.kl, self.ldab);
        let kv = self.kl + self.ku;
        // Forward: P L y = b.
        for j in 0..n {
            let piv = self.ipiv[j];
            if piv != j {
                b.swap(j, piv);
            }
            let km = kl.min(n - 1 - j);
            let bj = b[j];
            if bj != 0.0 {
                for i in 1..=km {
                    b[j + i] -= self.ab[j * ldab + kv + i] * bj;
                }
            }
        }
        // Backward: U x = y.
        for j in (0..n).rev() {
            let x = b[j] / self.ab[j * ldab + kv];
            b[j] = x;
            if x != 0.0 {
                let lo = j.saturating_sub(kv);
                for i in lo..j {
                    b[i] -= self.ab[j * ldab + kv + i - j] * x;
                }
            }
        }
    }
}
