//! Small numerical helpers: cached FFTs and QR-based least squares.

use std::cell::RefCell;

use rustfft::FftPlanner;

use crate::{C64, CMatrix, CVector, Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Unnormalized forward DFT, X[k] = sum_n x[n] exp(-j 2 pi k n / N).
pub fn fft(buf: &mut [C64]) {
    if buf.len() <= 1 {
        return;
    }
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    plan.process(buf);
}

/// Unnormalized inverse DFT, x[n] = sum_k X[k] exp(+j 2 pi k n / N).
pub fn ifft(buf: &mut [C64]) {
    if buf.len() <= 1 {
        return;
    }
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    plan.process(buf);
}

/// Relative pivot size below which a triangular factor is treated as singular.
const RANK_TOL: f64 = 1e-10;

/// Least-squares solver for a fixed tall matrix, backed by a thin QR
/// factorization. `solve` returns argmin_x ||b - A x||_2.
#[derive(Clone, Debug)]
pub struct LeastSquares {
    /// R^{-1} Q^H, the Moore-Penrose pseudo-inverse for full column rank A.
    pinv: CMatrix,
}

impl LeastSquares {
    /// Factor `a`. Fails with `RankDeficient` (subcarrier 0) when `a` does not
    /// have full column rank; callers re-tag the subcarrier.
    pub fn new(a: &CMatrix) -> Result<Self> {
        let (m, n) = a.shape();
        if m < n {
            return Err(Error::RankDeficient { subcarrier: 0 });
        }
        let qr = a.clone().qr();
        let r = qr.r();
        let max_diag = (0..n).map(|j| r[(j, j)].norm()).fold(0.0, f64::max);
        if max_diag == 0.0 || (0..n).any(|j| r[(j, j)].norm() < RANK_TOL * max_diag) {
            return Err(Error::RankDeficient { subcarrier: 0 });
        }
        let q_h = qr.q().adjoint();
        let r_inv = r
            .solve_upper_triangular(&CMatrix::identity(n, n))
            .ok_or(Error::RankDeficient { subcarrier: 0 })?;
        Ok(Self { pinv: r_inv * q_h })
    }

    pub fn solve(&self, b: &CVector) -> CVector {
        &self.pinv * b
    }

    pub fn pinv(&self) -> &CMatrix {
        &self.pinv
    }
}

/// One-shot least squares.
pub fn least_squares(a: &CMatrix, b: &CVector) -> Result<CVector> {
    Ok(LeastSquares::new(a)?.solve(b))
}

/// Median of a slice of finite values (averages the two middle values).
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median + k * median absolute deviation.
pub fn robust_threshold(values: &[f64], k: f64) -> f64 {
    let med = median(values);
    let dev: Vec<f64> = values.iter().map(|v| (v - med).abs()).collect();
    med + k * median(&dev)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fft_roundtrip() {
        let x: Vec<C64> = (0..16).map(|k| C64::new(k as f64, -(k as f64) * 0.5)).collect();
        let mut y = x.clone();
        fft(&mut y);
        ifft(&mut y);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b / 16.0).norm() < 1e-12);
        }
    }

    #[test]
    fn ls_exact_on_consistent_system() {
        let a = CMatrix::from_fn(6, 3, |r, c| C64::new((r * 3 + c) as f64 % 5.0 + 1.0, (r as f64 - c as f64).sin()));
        let x = CVector::from_vec(vec![C64::new(1.0, 2.0), C64::new(-0.5, 0.0), C64::new(0.0, 3.0)]);
        let b = &a * &x;
        let xh = least_squares(&a, &b).unwrap();
        assert!((xh - x).norm() < 1e-10);
    }

    #[test]
    fn ls_rejects_rank_deficient() {
        let a = CMatrix::from_fn(5, 2, |r, _| C64::new(r as f64, 0.0));
        assert!(matches!(LeastSquares::new(&a), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn robust_threshold_of_constant_is_constant() {
        assert_eq!(robust_threshold(&[2.0; 9], 10.0), 2.0);
        assert_eq!(median(&[3.0, 1.0, 2.0, 4.0]), 2.5);
    }
}
