//! Quintic boundary-value polynomials.

use serde::{Deserialize, Serialize};

use super::ControlError;

/// `x(t) = c0 + c1 t + ... + c5 t^5` on `[0, duration]`; held with constant
/// end velocity beyond it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quintic {
    pub coeffs: [f64; 6],
    pub duration: f64,
}

impl Quintic {
    /// Solves for the quintic matching position, velocity and acceleration at
    /// both ends.
    pub fn solve(start: [f64; 3], end: [f64; 3], duration: f64) -> Result<Self, ControlError> {
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(ControlError::InvalidDuration(duration));
        }
        if start.iter().chain(end.iter()).any(|v| !v.is_finite()) {
            return Err(ControlError::NonFinite);
        }
        let [x0, v0, a0] = start;
        let [x1, v1, a1] = end;
        let t = duration;
        let (t2, t3) = (t * t, t * t * t);
        let r0 = x1 - (x0 + v0 * t + 0.5 * a0 * t2);
        let r1 = v1 - (v0 + a0 * t);
        let r2 = a1 - a0;
        let c3 = (10.0 * r0 - 4.0 * r1 * t + 0.5 * r2 * t2) / t3;
        let c4 = (-15.0 * r0 + 7.0 * r1 * t - r2 * t2) / (t3 * t);
        let c5 = (6.0 * r0 - 3.0 * r1 * t + 0.5 * r2 * t2) / (t3 * t2);
        Ok(Self { coeffs: [x0, v0, 0.5 * a0, c3, c4, c5], duration })
    }

    /// Constant value.
    pub fn hold(x: f64) -> Self {
        Self { coeffs: [x, 0.0, 0.0, 0.0, 0.0, 0.0], duration: 1.0 }
    }

    fn raw(&self, t: f64) -> [f64; 4] {
        let c = &self.coeffs;
        let x = c[0] + t * (c[1] + t * (c[2] + t * (c[3] + t * (c[4] + t * c[5]))));
        let v = c[1] + t * (2.0 * c[2] + t * (3.0 * c[3] + t * (4.0 * c[4] + t * 5.0 * c[5])));
        let a = 2.0 * c[2] + t * (6.0 * c[3] + t * (12.0 * c[4] + t * 20.0 * c[5]));
        let j = 6.0 * c[3] + t * (24.0 * c[4] + t * 60.0 * c[5]);
        [x, v, a, j]
    }

    /// Position, velocity, acceleration and jerk at `t`.
    pub fn eval(&self, t: f64) -> [f64; 4] {
        if t <= self.duration {
            return self.raw(t.max(0.0));
        }
        let [x, v, _, _] = self.raw(self.duration);
        [x + v * (t - self.duration), v, 0.0, 0.0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Dense 6x6 solve by Gaussian elimination with partial pivoting.
    fn oracle(start: [f64; 3], end: [f64; 3], t: f64) -> [f64; 6] {
        let row = |t: f64, d: usize| -> [f64; 6] {
            let mut r = [0.0; 6];
            for (k, v) in r.iter_mut().enumerate() {
                if k >= d {
                    let mut coef = 1.0;
                    for j in 0..d {
                        coef *= (k - j) as f64;
                    }
                    *v = coef * t.powi((k - d) as i32);
                }
            }
            r
        };
        let mut m = [[0.0; 7]; 6];
        for d in 0..3 {
            m[d][..6].copy_from_slice(&row(0.0, d));
            m[d][6] = start[d];
            m[d + 3][..6].copy_from_slice(&row(t, d));
            m[d + 3][6] = end[d];
        }
        for col in 0..6 {
            let piv = (col..6).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs())).unwrap();
            m.swap(col, piv);
            for r in 0..6 {
                if r != col {
                    let f = m[r][col] / m[col][col];
                    for c in col..7 {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
        core::array::from_fn(|i| m[i][6] / m[i][i])
    }

    #[test]
    fn matches_dense_solver() {
        let cases = [
            ([0.0, 5.0, 0.0], [37.5, 10.0, 1.0], 5.0),
            ([3.0, -1.0, 2.0], [-4.0, 0.5, -1.0], 2.3),
            ([0.0, 8.0, 0.0], [10.667, 0.0, 0.0], 2.667),
            ([1.0, 0.0, 0.0], [1.0, 0.0, 0.0], 0.1),
        ];
        for (s, e, t) in cases {
            let q = Quintic::solve(s, e, t).unwrap();
            let o = oracle(s, e, t);
            for k in 0..6 {
                assert!((q.coeffs[k] - o[k]).abs() < 1e-8 * (1.0 + o[k].abs()), "{k}: {q:?} vs {o:?}");
            }
        }
    }

    #[test]
    fn reaches_end_state() {
        let q = Quintic::solve([0.0, 5.0, 0.0], [37.5, 10.0, 1.0], 5.0).unwrap();
        let [x, v, a, _] = q.eval(5.0);
        assert!((x - 37.5).abs() < 1e-10 && (v - 10.0).abs() < 1e-10 && (a - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_zero_duration() {
        assert_eq!(Quintic::solve([0.0; 3], [1.0, 0.0, 0.0], 0.0), Err(ControlError::InvalidDuration(0.0)));
    }

    #[test]
    fn extrapolates_with_end_velocity() {
        let q = Quintic::solve([0.0, 1.0, 0.0], [1.0, 1.0, 0.0], 1.0).unwrap();
        let [x, v, a, j] = q.eval(3.0);
        assert!((x - 3.0).abs() < 1e-12 && v == 1.0 && a == 0.0 && j == 0.0);
    }
}
