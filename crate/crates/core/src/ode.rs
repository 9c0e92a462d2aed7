//! Dormand-Prince 5(4) integration of a scalar autonomous ODE `y' = f(y)`,
//! with the standard fourth-order continuous extension for dense output.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions<T> {
    pub rtol: T,
    pub atol: T,
    pub max_steps: usize,
    /// Snap negative values within `atol` of zero back to zero.
    pub clamp_nonnegative: bool,
}

impl<T: Real> SolverOptions<T> {
    pub fn with_tolerance(tol: T) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            max_steps: 1_000_000,
            clamp_nonnegative: false,
        }
    }
}

/// One accepted step and its interpolating polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSegment<T> {
    pub t0: T,
    pub h: T,
    coeffs: [T; 5],
}

impl<T: Real> DenseSegment<T> {
    pub fn t1(&self) -> T {
        self.t0 + self.h
    }

    pub fn y0(&self) -> T {
        self.coeffs[0]
    }

    pub fn y1(&self) -> T {
        self.coeffs[0] + self.coeffs[1]
    }

    pub fn eval(&self, t: T) -> T {
        let theta = (t - self.t0) / self.h;
        let theta1 = T::one() - theta;
        let [r1, r2, r3, r4, r5] = self.coeffs;
        r1 + theta * (r2 + theta1 * (r3 + theta * (r4 + theta1 * r5)))
    }
}

/// Accepted steps covering `[0, t_end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub y0: T,
    pub t_end: T,
    pub segments: Vec<DenseSegment<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn y_end(&self) -> T {
        self.segments.last().map_or(self.y0, |s| s.y1())
    }

    /// Index of the segment containing `t`.
    pub fn locate(&self, t: T) -> Option<usize> {
        if self.segments.is_empty() || t < T::zero() || t > self.t_end {
            return None;
        }
        let i = self.segments.partition_point(|s| s.t1() < t);
        Some(i.min(self.segments.len() - 1))
    }

    /// Dense value at `t ∈ [0, t_end]`.
    pub fn eval(&self, t: T) -> Option<T> {
        if t == T::zero() {
            return Some(self.y0);
        }
        if t == self.t_end {
            return Some(self.y_end());
        }
        self.locate(t).map(|i| self.segments[i].eval(t))
    }

    /// `(t, y)` at every step boundary.
    pub fn grid(&self) -> Vec<(T, T)> {
        let mut out = Vec::with_capacity(self.segments.len() + 1);
        out.push((T::zero(), self.y0));
        out.extend(self.segments.iter().map(|s| (s.t1(), s.y1())));
        out
    }
}

struct Tableau<T> {
    a: [[T; 6]; 6],
    b: [T; 6],
    e: [T; 7],
    d: [T; 7],
}

impl<T: Real> Tableau<T> {
    fn new() -> Self {
        let r = |n: f64, d: f64| T::lit(n / d);
        let z = T::zero();
        Self {
            a: [
                [z; 6],
                [r(1.0, 5.0), z, z, z, z, z],
                [r(3.0, 40.0), r(9.0, 40.0), z, z, z, z],
                [r(44.0, 45.0), r(-56.0, 15.0), r(32.0, 9.0), z, z, z],
                [
                    r(19372.0, 6561.0),
                    r(-25360.0, 2187.0),
                    r(64448.0, 6561.0),
                    r(-212.0, 729.0),
                    z,
                    z,
                ],
                [
                    r(9017.0, 3168.0),
                    r(-355.0, 33.0),
                    r(46732.0, 5247.0),
                    r(49.0, 176.0),
                    r(-5103.0, 18656.0),
                    z,
                ],
            ],
            b: [
                r(35.0, 384.0),
                z,
                r(500.0, 1113.0),
                r(125.0, 192.0),
                r(-2187.0, 6784.0),
                r(11.0, 84.0),
            ],
            e: [
                r(71.0, 57600.0),
                z,
                r(-71.0, 16695.0),
                r(71.0, 1920.0),
                r(-17253.0, 339200.0),
                r(22.0, 525.0),
                r(-1.0, 40.0),
            ],
            d: [
                r(-12715105075.0, 11282082432.0),
                z,
                r(87487479700.0, 32700410799.0),
                r(-10690763975.0, 1880347072.0),
                r(701980252875.0, 199316789632.0),
                r(-1453857185.0, 822651844.0),
                r(69997945.0, 29380423.0),
            ],
        }
    }
}

/// Integrates `y' = f(y)`, `y(0) = y0` on `[0, t_end]`.
pub fn integrate<T: Real, F: Fn(T) -> T>(f: F, y0: T, t_end: T, opts: &SolverOptions<T>) -> Result<Trajectory<T>> {
    let tab = Tableau::<T>::new();
    let mut segments = Vec::new();
    if t_end <= T::zero() {
        return Ok(Trajectory {
            y0,
            t_end: T::zero().max(t_end),
            segments,
        });
    }

    let mut t = T::zero();
    let mut y = y0;
    let mut k1 = f(y);
    let mut h = initial_step(&f, y, k1, t_end, opts);
    let fifth = T::lit(0.2);
    let safety = T::lit(0.9);
    let tiny = T::lit(1e-14);

    for _ in 0..opts.max_steps {
        if t >= t_end {
            return Ok(Trajectory { y0, t_end, segments });
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        if h <= tiny * t.abs().max(T::one()) {
            return Err(Error::StepSizeUnderflow {
                t: t.as_f64(),
                h: h.as_f64(),
            });
        }

        let mut k = [T::zero(); 7];
        k[0] = k1;
        for s in 1..6 {
            let incr: T = (0..s).map(|j| tab.a[s][j] * k[j]).sum();
            k[s] = f(y + h * incr);
        }
        let incr: T = (0..6).map(|j| tab.b[j] * k[j]).sum();
        let mut y1 = y + h * incr;
        k[6] = f(y1);

        let err_est = h * (0..7).map(|j| tab.e[j] * k[j]).sum::<T>();
        let scale = opts.atol + opts.rtol * y.abs().max(y1.abs());
        let err = (err_est / scale).abs();

        let negative = opts.clamp_nonnegative && y1 < T::zero();
        if err <= T::one() && !(negative && y1 < -opts.atol) {
            if negative {
                y1 = T::zero();
                k[6] = f(y1);
            }
            let ydiff = y1 - y;
            let bspl = h * k[0] - ydiff;
            let dense = h * (0..7).map(|j| tab.d[j] * k[j]).sum::<T>();
            segments.push(DenseSegment {
                t0: t,
                h,
                coeffs: [y, ydiff, bspl, ydiff - h * k[6] - bspl, dense],
            });
            t = if last { t_end } else { t + h };
            y = y1;
            k1 = k[6];
            let factor = if err == T::zero() {
                T::lit(5.0)
            } else {
                (safety * err.powf(-fifth)).min(T::lit(5.0)).max(T::lit(0.2))
            };
            h = h * factor;
        } else {
            let factor = if err.is_finite() {
                (safety * err.powf(-fifth)).max(T::lit(0.2))
            } else {
                T::lit(0.2)
            };
            h = h * factor.min(T::lit(0.5));
        }
    }
    if t >= t_end {
        return Ok(Trajectory { y0, t_end, segments });
    }
    Err(Error::TooManySteps {
        max_steps: opts.max_steps,
    })
}

fn initial_step<T: Real, F: Fn(T) -> T>(f: &F, y0: T, f0: T, t_end: T, opts: &SolverOptions<T>) -> T {
    // Hairer-Wanner heuristic for order 5
    let sk = opts.atol + opts.rtol * y0.abs();
    let d0 = (y0 / sk).abs();
    let d1 = (f0 / sk).abs();
    let h0 = if d0 < T::lit(1e-5) || d1 < T::lit(1e-5) {
        T::lit(1e-6)
    } else {
        T::lit(0.01) * d0 / d1
    };
    let h0 = h0.min(t_end);
    let f1 = f(y0 + h0 * f0);
    let d2 = ((f1 - f0) / sk).abs() / h0;
    let dmax = d1.max(d2);
    let h1 = if dmax <= T::lit(1e-15) {
        (h0 * T::lit(1e-3)).max(T::lit(1e-6))
    } else {
        (T::lit(0.01) / dmax).powf(T::lit(0.2))
    };
    (T::lit(100.0) * h0).min(h1).min(t_end)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exponential_decay() {
        let opts = SolverOptions::with_tolerance(1e-12);
        let tr = integrate(|y: f64| -y, 1.0, 3.0, &opts).unwrap();
        assert_abs_diff_eq!(tr.y_end(), (-3.0f64).exp(), epsilon = 1e-10);
        for t in [0.0, 0.123, 1.5, 2.999, 3.0] {
            assert_abs_diff_eq!(tr.eval(t).unwrap(), (-t).exp(), epsilon = 1e-9);
        }
        assert!(tr.eval(3.5).is_none());
    }

    #[test]
    fn constant_flow() {
        let opts = SolverOptions::with_tolerance(1e-10);
        let tr = integrate(|_: f64| 0.0, 0.7, 2.0, &opts).unwrap();
        assert_eq!(tr.y_end(), 0.7);
        assert_eq!(tr.eval(1.3).unwrap(), 0.7);
    }

    #[test]
    fn zero_horizon() {
        let opts = SolverOptions::with_tolerance(1e-10);
        let tr = integrate(|y: f64| y, 2.0, 0.0, &opts).unwrap();
        assert!(tr.segments.is_empty());
        assert_eq!(tr.y_end(), 2.0);
        assert_eq!(tr.eval(0.0), Some(2.0));
    }

    #[test]
    fn riccati_dense_output() {
        // y' = -y², y(0) = 1 → y = 1/(1+t)
        let opts = SolverOptions::with_tolerance(1e-11);
        let tr = integrate(|y: f64| -y * y, 1.0, 4.0, &opts).unwrap();
        for i in 0..=400 {
            let t = i as f64 * 0.01;
            assert_abs_diff_eq!(tr.eval(t).unwrap(), 1.0 / (1.0 + t), epsilon = 1e-9);
        }
    }

    #[test]
    fn blow_up_is_reported() {
        // y' = y² from 1 explodes at t = 1
        let opts = SolverOptions::with_tolerance(1e-10);
        let err = integrate(|y: f64| y * y, 1.0, 2.0, &opts).unwrap_err();
        assert!(matches!(
            err,
            Error::StepSizeUnderflow { .. } | Error::TooManySteps { .. }
        ));
    }

    #[test]
    fn single_precision() {
        let opts = SolverOptions::with_tolerance(1e-5f32);
        let tr = integrate(|y: f32| -y, 1.0, 1.0, &opts).unwrap();
        assert!((tr.y_end() - (-1.0f32).exp()).abs() < 1e-4);
    }
}
