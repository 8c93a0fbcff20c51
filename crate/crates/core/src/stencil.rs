//! Fourth-order meridian stencils and a banded LU solver.
//!
//! Interior rows are the five-point central formulas. Rows 0 and 1 use the
//! even reflection `s(−β) = s(β)` through the pole. Rows `N−1` and `N` come
//! from the quintic that interpolates the last five nodes and satisfies
//! `∂_β s(θ) = cotθ·s(θ)`, so the boundary condition is built into the
//! operator.

use crate::error::{CapError, Result};

/// Sparse row: `(column, weight)` pairs.
pub(crate) type Row = Vec<(usize, f64)>;

#[derive(Debug, Clone)]
pub(crate) struct Stencil {
    d1: Vec<Row>,
    d2: Vec<Row>,
    d2_norm: f64,
}

impl Stencil {
    pub fn new(len: usize, h: f64, cot: f64) -> Self {
        let last = len - 1;
        let h2 = h * h;
        let mut d1: Vec<Row> = Vec::with_capacity(len);
        let mut d2: Vec<Row> = Vec::with_capacity(len);

        d1.push(Vec::new());
        d2.push(vec![(0, -30.0 / (12.0 * h2)), (1, 32.0 / (12.0 * h2)), (2, -2.0 / (12.0 * h2))]);
        d1.push(vec![(0, -8.0 / (12.0 * h)), (1, 1.0 / (12.0 * h)), (2, 8.0 / (12.0 * h)), (3, -1.0 / (12.0 * h))]);
        d2.push(vec![
            (0, 16.0 / (12.0 * h2)),
            (1, -31.0 / (12.0 * h2)),
            (2, 16.0 / (12.0 * h2)),
            (3, -1.0 / (12.0 * h2)),
        ]);
        for i in 2..last - 1 {
            d1.push(vec![
                (i - 2, 1.0 / (12.0 * h)),
                (i - 1, -8.0 / (12.0 * h)),
                (i + 1, 8.0 / (12.0 * h)),
                (i + 2, -1.0 / (12.0 * h)),
            ]);
            d2.push(vec![
                (i - 2, -1.0 / (12.0 * h2)),
                (i - 1, 16.0 / (12.0 * h2)),
                (i, -30.0 / (12.0 * h2)),
                (i + 1, 16.0 / (12.0 * h2)),
                (i + 2, -1.0 / (12.0 * h2)),
            ]);
        }

        let fit = boundary_fit(h * cot);
        let row = |coeffs: [f64; 5], scale: f64| -> Row {
            (0..5).map(|k| (last - 4 + k, coeffs[k] * scale)).collect()
        };
        d1.push(row(fit.d1_prev, 1.0 / h));
        d2.push(row(fit.d2_prev, 1.0 / h2));
        d1.push(vec![(last, cot)]);
        d2.push(row(fit.d2_last, 1.0 / h2));

        let d2_norm = d2
            .iter()
            .map(|r| r.iter().map(|(_, w)| w.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        Stencil { d1, d2, d2_norm }
    }

    pub fn d1_rows(&self) -> &[Row] {
        &self.d1
    }

    pub fn d2_rows(&self) -> &[Row] {
        &self.d2
    }

    /// Largest absolute row sum of the second-derivative operator.
    pub fn d2_norm(&self) -> f64 {
        self.d2_norm
    }

    pub fn d1(&self, s: &[f64]) -> Vec<f64> {
        apply_rows(&self.d1, s)
    }

    pub fn d2(&self, s: &[f64]) -> Vec<f64> {
        apply_rows(&self.d2, s)
    }
}

fn apply_rows(rows: &[Row], s: &[f64]) -> Vec<f64> {
    rows.iter().map(|r| dot2(r.iter().map(|&(j, w)| (w, s[j])))).collect()
}

/// Compensated dot product: as accurate as if summed in twice the working
/// precision and rounded once. Stencil rows cancel terms of size `|s|/h²`
/// down to `O(|s|)`, so a plain sum would lose `log₁₀(1/h²)` digits.
pub(crate) fn dot2(terms: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    let (mut p, mut c) = (0.0f64, 0.0f64);
    for (a, b) in terms {
        let h = a * b;
        let r = a.mul_add(b, -h);
        let t = p + h;
        let z = t - p;
        let q = (p - (t - z)) + (h - z);
        p = t;
        c += q + r;
    }
    p + c
}

struct BoundaryFit {
    d1_prev: [f64; 5],
    d2_prev: [f64; 5],
    d2_last: [f64; 5],
}

/// Weights (in units of `h`) on `s[N−4..=N]` of the quintic with
/// `q(x_k) = s_k`, `x_k = k − 4`, and `q'(0) = g·s_N`, where `g = h·cotθ`.
fn boundary_fit(g: f64) -> BoundaryFit {
    // Row k of the 6×6 system: value at x_k for k < 5, slope at 0 for k = 5.
    let mut m = [[0.0f64; 6]; 6];
    for (k, row) in m.iter_mut().enumerate().take(5) {
        let x = k as f64 - 4.0;
        for (j, v) in row.iter_mut().enumerate() {
            *v = x.powi(j as i32);
        }
    }
    m[5][1] = 1.0;
    let inv = invert6(m);
    // q^{(r)}(x) = Σ_j a_j · d^r/dx^r x^j, a = inv · data.
    let weights = |x: f64, order: usize| -> [f64; 6] {
        let mut out = [0.0; 6];
        for (c, o) in out.iter_mut().enumerate() {
            *o = (order..6)
                .map(|j| {
                    let falling: f64 = (0..order).map(|t| (j - t) as f64).product();
                    falling * x.powi((j - order) as i32) * inv[j][c]
                })
                .sum();
        }
        out
    };
    let fold = |w: [f64; 6]| -> [f64; 5] {
        let mut out = [w[0], w[1], w[2], w[3], w[4]];
        out[4] += w[5] * g;
        out
    };
    BoundaryFit {
        d1_prev: fold(weights(-1.0, 1)),
        d2_prev: fold(weights(-1.0, 2)),
        d2_last: fold(weights(0.0, 2)),
    }
}

fn invert6(mut a: [[f64; 6]; 6]) -> [[f64; 6]; 6] {
    let mut inv = [[0.0; 6]; 6];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for col in 0..6 {
        let piv = (col..6)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap_or(col);
        a.swap(col, piv);
        inv.swap(col, piv);
        let d = a[col][col];
        for j in 0..6 {
            a[col][j] /= d;
            inv[col][j] /= d;
        }
        for r in 0..6 {
            if r != col {
                let f = a[r][col];
                for j in 0..6 {
                    a[r][j] -= f * a[col][j];
                    inv[r][j] -= f * inv[col][j];
                }
            }
        }
    }
    inv
}

/// Square band matrix with `kl` sub- and `ku` super-diagonals; LU with
/// partial pivoting stores the fill in `kl` extra super-diagonals.
#[derive(Debug, Clone)]
pub(crate) struct Banded {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl Banded {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Banded { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * self.width + (j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.kl + self.ku {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if j + self.kl < i || j > i + self.ku {
            panic!("entry ({i}, {j}) outside band ({}, {})", self.kl, self.ku);
        }
        let k = self.slot(i, j);
        self.data[k] += v;
    }

    pub fn solve(mut self, mut rhs: Vec<f64>) -> Result<Vec<f64>> {
        let n = self.n;
        let reach = self.kl + self.ku;
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let rows_end = (k + self.kl).min(n - 1);
            let cols_end = (k + reach).min(n - 1);
            let p = (k..=rows_end)
                .max_by(|&x, &y| self.get(x, k).abs().total_cmp(&self.get(y, k).abs()))
                .unwrap_or(k);
            if p != k {
                for j in k..=cols_end {
                    let (a, b) = (self.slot(k, j), self.slot(p, j));
                    self.data.swap(a, b);
                }
                rhs.swap(k, p);
            }
            let pivot = self.get(k, k);
            if pivot.abs() <= 1e-14 * scale {
                return Err(CapError::Singular { row: k, pivot });
            }
            for r in k + 1..=rows_end {
                let l = self.get(r, k) / pivot;
                if l == 0.0 {
                    continue;
                }
                for j in k..=cols_end {
                    let v = self.get(k, j);
                    let idx = self.slot(r, j);
                    self.data[idx] -= l * v;
                }
                rhs[r] -= l * rhs[k];
            }
        }
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let cols_end = (k + reach).min(n - 1);
            let acc: f64 = (k + 1..=cols_end).map(|j| self.get(k, j) * x[j]).sum();
            x[k] = (rhs[k] - acc) / self.get(k, k);
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_rows_exact_for_quintics_with_bc() {
        // q(β) = c0 + c1(β−θ) + … with c1 = cot·q(θ) satisfies the condition.
        let (len, h, cot) = (21usize, 0.05, 0.7);
        let theta = h * (len - 1) as f64;
        let c = [1.3, 0.0, -0.4, 0.25, 0.1, -0.05];
        let c1 = cot * c[0];
        let q = |b: f64| {
            let x = b - theta;
            c[0] + c1 * x + c[2] * x * x + c[3] * x.powi(3) + c[4] * x.powi(4) + c[5] * x.powi(5)
        };
        let q2 = |b: f64| {
            let x = b - theta;
            2.0 * c[2] + 6.0 * c[3] * x + 12.0 * c[4] * x * x + 20.0 * c[5] * x.powi(3)
        };
        let q1 = |b: f64| {
            let x = b - theta;
            c1 + 2.0 * c[2] * x + 3.0 * c[3] * x * x + 4.0 * c[4] * x.powi(3) + 5.0 * c[5] * x.powi(4)
        };
        let st = Stencil::new(len, h, cot);
        let s: Vec<f64> = (0..len).map(|i| q(i as f64 * h)).collect();
        let d2 = st.d2(&s);
        let d1 = st.d1(&s);
        for i in [len - 2, len - 1] {
            assert!((d2[i] - q2(i as f64 * h)).abs() < 1e-8, "{i}");
        }
        assert!((d1[len - 2] - q1((len - 2) as f64 * h)).abs() < 1e-9);
        assert!((d1[len - 1] - q1(theta)).abs() < 1e-12);
    }

    #[test]
    fn interior_and_pole_rows_are_fourth_order() {
        let cot = 1.0 / 0.9f64.tan();
        let mut errs = Vec::new();
        for len in [41usize, 81] {
            let h = 0.9 / (len - 1) as f64;
            let st = Stencil::new(len, h, cot);
            // Even, and meets the boundary condition for this choice of `a`.
            let a = (-0.9f64.sin() - cot * 0.9f64.cos()) / (cot * (1.8f64).cos() + 2.0 * 1.8f64.sin());
            let g = |b: f64| b.cos() + a * (2.0 * b).cos();
            let g2 = |b: f64| -b.cos() - 4.0 * a * (2.0 * b).cos();
            let s: Vec<f64> = (0..len).map(|i| g(i as f64 * h)).collect();
            let d2 = st.d2(&s);
            let e = (0..len).map(|i| (d2[i] - g2(i as f64 * h)).abs()).fold(0.0, f64::max);
            errs.push(e);
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 3.7, "order {order}, errs {errs:?}");
    }

    #[test]
    fn banded_solve_matches_dense() {
        let n = 9;
        let (kl, ku) = (4, 2);
        let mut a = Banded::zeros(n, kl, ku);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                let v = if i == j { 0.3 } else { 1.0 / (1.0 + (i + 2 * j) as f64) };
                a.add(i, j, v);
            }
        }
        let x_true: Vec<f64> = (0..n).map(|i| 1.0 - 0.2 * i as f64).collect();
        let rhs: Vec<f64> = (0..n)
            .map(|i| (i.saturating_sub(kl)..=(i + ku).min(n - 1)).map(|j| a.get(i, j) * x_true[j]).sum())
            .collect();
        let x = a.solve(rhs).unwrap();
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-12, "{u} {v}");
        }
    }

    #[test]
    fn singular_band_reported() {
        let mut a = Banded::zeros(3, 1, 1);
        a.add(0, 0, 1.0);
        a.add(1, 0, 1.0);
        a.add(2, 2, 1.0);
        assert!(matches!(a.solve(vec![1.0, 1.0, 1.0]), Err(CapError::Singular { .. })));
    }
}
