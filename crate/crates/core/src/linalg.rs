//! Banded complex LU with partial pivoting, plus a sparse-row builder that
//! equilibrates rows and columns before factoring.

use num_complex::Complex64;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Square system assembled row by row from sparse entries.
#[derive(Clone, Debug, Default)]
pub struct SparseRows {
    ncols: usize,
    rows: Vec<Vec<(usize, Complex64)>>,
}

impl SparseRows {
    pub fn new(ncols: usize) -> Self {
        SparseRows {
            ncols,
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, entries: Vec<(usize, Complex64)>) {
        debug_assert!(entries.iter().all(|&(c, _)| c < self.ncols));
        self.rows.push(entries);
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }


    /// Equilibrate and factor. Returns `None` when a pivot vanishes.
    pub fn factor(&self) -> Option<EquilibratedLu> {
        let n = self.ncols;
        assert_eq!(self.rows.len(), n, "system must be square");
        let mut row_scale = vec![1.0; n];
        for (i, row) in self.rows.iter().enumerate() {
            let m = row.iter().fold(0.0f64, |a, (_, v)| a.max(v.norm()));
            if m == 0.0 {
                return None;
            }
            row_scale[i] = 1.0 / m;
        }
        let mut col_max = vec![0.0f64; n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                col_max[c] = col_max[c].max(v.norm() * row_scale[i]);
            }
        }
        if col_max.iter().any(|&m| m == 0.0) {
            return None;
        }
        let col_scale: Vec<f64> = col_max.iter().map(|m| 1.0 / m).collect();

        let (mut kl, mut ku) = (0usize, 0usize);
        for (i, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                if v != ZERO {
                    if c < i {
                        kl = kl.max(i - c);
                    } else {
                        ku = ku.max(c - i);
                    }
                }
            }
        }
        let mut band = BandMatrix::zeros(n, kl, ku);
        for (i, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                if v != ZERO {
                    band.add(i, c, v * row_scale[i] * col_scale[c]);
                }
            }
        }
        let lu = band.factor()?;
        Some(EquilibratedLu {
            lu,
            row_scale,
            col_scale,
        })
    }
}

pub struct EquilibratedLu {
    lu: BandLu,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
}

impl EquilibratedLu {
    pub fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let mut b: Vec<Complex64> = rhs
            .iter()
            .zip(&self.row_scale)
            .map(|(v, s)| v * s)
            .collect();
        self.lu.solve_in_place(&mut b);
        b.iter().zip(&self.col_scale).map(|(v, s)| v * s).collect()
    }

    /// 1-norm condition number of the equilibrated matrix.
    pub fn condition(&self) -> f64 {
        self.lu.condition()
    }
}

/// Band storage with room for the `kl` extra super-diagonals created by
/// row interchanges.
#[derive(Clone, Debug)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<Complex64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            width,
            data: vec![ZERO; n * width],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * self.width + (j + self.kl - i)
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[self.idx(i, j)]
    }

    pub fn add(&mut self, i: usize, j: usize, v: Complex64) {
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "entry ({i}, {j}) outside band"
        );
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    fn norm1(&self) -> f64 {
        let mut cols = vec![0.0f64; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku + self.kl + 1).min(self.n);
            for (j, col) in cols.iter_mut().enumerate().take(hi).skip(lo) {
                *col += self.get(i, j).norm();
            }
        }
        cols.into_iter().fold(0.0, f64::max)
    }

    pub fn factor(mut self) -> Option<BandLu> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let norm1 = self.norm1();
        let max_entry = self.data.iter().fold(0.0f64, |a, v| a.max(v.norm()));
        let tiny = max_entry * f64::EPSILON * (n as f64).max(1.0);
        let mut pivots = vec![0usize; n];
        for k in 0..n {
            let last_row = (k + kl + 1).min(n);
            let mut p = k;
            let mut best = self.get(k, k).norm();
            for i in k + 1..last_row {
                let v = self.get(i, k).norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= tiny {
                return None;
            }
            pivots[k] = p;
            let last_col = (k + kl + ku + 1).min(n);
            if p != k {
                for j in k..last_col {
                    let a = self.idx(k, j);
                    let b = self.idx(p, j);
                    self.data.swap(a, b);
                }
            }
            let pivot = self.get(k, k);
            for i in k + 1..last_row {
                let ik = self.idx(i, k);
                let l = self.data[ik] / pivot;
                self.data[ik] = l;
                if l == ZERO {
                    continue;
                }
                for j in k + 1..last_col {
                    let kj = self.get(k, j);
                    let ij = self.idx(i, j);
                    self.data[ij] -= l * kj;
                }
            }
        }
        Some(BandLu {
            m: self,
            pivots,
            norm1,
        })
    }
}

#[derive(Clone, Debug)]
pub struct BandLu {
    m: BandMatrix,
    pivots: Vec<usize>,
    norm1: f64,
}

impl BandLu {
    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        let n = self.m.n;
        let (kl, ku) = (self.m.kl, self.m.ku);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for i in k + 1..(k + kl + 1).min(n) {
                b[i] -= self.m.get(i, k) * bk;
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in k + 1..(k + kl + ku + 1).min(n) {
                s -= self.m.get(k, j) * b[j];
            }
            b[k] = s / self.m.get(k, k);
        }
    }

    /// Exact 1-norm condition number from the explicit inverse. Systems here
    /// are small, so the `n` extra solves are cheap.
    pub fn condition(&self) -> f64 {
        let n = self.m.n;
        let mut inv_norm = 0.0f64;
        let mut e = vec![ZERO; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = ZERO);
            e[j] = Complex64::new(1.0, 0.0);
            self.solve_in_place(&mut e);
            inv_norm = inv_norm.max(e.iter().map(|v| v.norm()).sum());
        }
        self.norm1 * inv_norm
    }
}
