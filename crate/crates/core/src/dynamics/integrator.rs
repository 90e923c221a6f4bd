//! Dormand–Prince 5(4) with PI step-size control and fourth-order dense output.
//!
//! Coefficients and the controller follow Hairer, Nørsett & Wanner's DOPRI5.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A first-order system `y′ = f(t, y)` of fixed dimension.
pub trait OdeSystem<T, const N: usize> {
    fn rhs(&self, t: T, y: &[T; N]) -> [T; N];
}

impl<T, F, const N: usize> OdeSystem<T, N> for F
where
    F: Fn(T, &[T; N]) -> [T; N],
{
    fn rhs(&self, t: T, y: &[T; N]) -> [T; N] {
        self(t, y)
    }
}

/// Which instants end up in the output.
#[derive(Clone, Debug, PartialEq)]
pub enum Sampling<T> {
    /// Every accepted step.
    Steps,
    /// A uniform grid `t0, t0 + dt, ...`, always closed by `t_end`.
    Interval(T),
    /// Explicit instants, strictly increasing, inside `(t0, t_end]`.
    Times(Vec<T>),
}

#[derive(Clone, Debug)]
pub struct IntegratorOptions<T> {
    pub rtol: T,
    pub atol: T,
    pub h_init: Option<T>,
    pub h_max: Option<T>,
    pub max_steps: usize,
    pub sampling: Sampling<T>,
}

impl<T: Scalar> IntegratorOptions<T> {
    pub fn with_tolerance(tol: T) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            h_init: None,
            h_max: None,
            max_steps: usize::MAX,
            sampling: Sampling::Steps,
        }
    }

    pub fn sampling(mut self, sampling: Sampling<T>) -> Self {
        self.sampling = sampling;
        self
    }

    pub fn h_max(mut self, h_max: T) -> Self {
        self.h_max = Some(h_max);
        self
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct IntegrationStats {
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub rhs_evaluations: usize,
    pub rtol: f64,
    pub atol: f64,
}

#[derive(Clone, Debug)]
pub struct Solution<T, const N: usize> {
    pub times: Vec<T>,
    pub states: Vec<[T; N]>,
    pub stats: IntegrationStats,
}

// Butcher tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// Difference between the fifth- and fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Dense output.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

struct Tableau<T> {
    c: [T; 4],
    a: [[T; 6]; 6],
    e: [T; 7],
    d: [T; 7],
}

impl<T: Scalar> Tableau<T> {
    fn new() -> Self {
        let l = T::lit;
        let z = T::zero();
        Self {
            c: [l(C2), l(C3), l(C4), l(C5)],
            a: [
                [l(A21), z, z, z, z, z],
                [l(A31), l(A32), z, z, z, z],
                [l(A41), l(A42), l(A43), z, z, z],
                [l(A51), l(A52), l(A53), l(A54), z, z],
                [l(A61), l(A62), l(A63), l(A64), l(A65), z],
                [l(A71), z, l(A73), l(A74), l(A75), l(A76)],
            ],
            e: [l(E1), z, l(E3), l(E4), l(E5), l(E6), l(E7)],
            d: [l(D1), z, l(D3), l(D4), l(D5), l(D6), l(D7)],
        }
    }
}

fn all_finite<T: Scalar, const N: usize>(y: &[T; N]) -> bool {
    y.iter().all(|v| v.is_finite())
}

fn to_f64_vec<T: Scalar, const N: usize>(y: &[T; N]) -> Vec<f64> {
    y.iter().map(|v| v.as_f64()).collect()
}

/// Continuous extension over one accepted step.
struct DenseStep<T, const N: usize> {
    t0: T,
    h: T,
    r: [[T; N]; 5],
}

impl<T: Scalar, const N: usize> DenseStep<T, N> {
    fn eval(&self, t: T) -> [T; N] {
        let theta = (t - self.t0) / self.h;
        let theta1 = T::one() - theta;
        std::array::from_fn(|i| {
            let r = &self.r;
            r[0][i] + theta * (r[1][i] + theta1 * (r[2][i] + theta * (r[3][i] + theta1 * r[4][i])))
        })
    }
}

fn initial_step<T: Scalar, S: OdeSystem<T, N>, const N: usize>(
    system: &S,
    t0: T,
    y0: &[T; N],
    f0: &[T; N],
    span: T,
    rtol: T,
    atol: T,
) -> T {
    let n = T::from_usize(N).unwrap();
    let norm = |v: &[T; N]| -> T {
        let sum = v.iter().zip(y0).fold(T::zero(), |acc, (x, y)| {
            let sc = atol + rtol * y.abs();
            acc + (*x / sc) * (*x / sc)
        });
        (sum / n).sqrt()
    };
    let d0 = norm(y0);
    let d1 = norm(f0);
    let tiny = T::lit(1e-5);
    let mut h0 = if d0 < tiny || d1 < tiny {
        T::lit(1e-6)
    } else {
        T::lit(0.01) * d0 / d1
    };
    h0 = h0.min(span);
    let y1: [T; N] = std::array::from_fn(|i| y0[i] + h0 * f0[i]);
    let f1 = system.rhs(t0 + h0, &y1);
    let df: [T; N] = std::array::from_fn(|i| f1[i] - f0[i]);
    let d2 = norm(&df) / h0;
    let dmax = d1.max(d2);
    let h1 = if dmax <= T::lit(1e-15) {
        (T::lit(1e-6)).max(h0 * T::lit(1e-3))
    } else {
        (T::lit(0.01) / dmax).powf(T::lit(0.2))
    };
    (T::lit(100.0) * h0).min(h1).min(span)
}

/// Integrates `system` from `(t0, y0)` to `t_end`.
///
/// The first output sample is always `(t0, y0)` and, for `t_end > t0`, the
/// last is `t_end`.
pub fn dopri5<T, S, const N: usize>(
    system: &S,
    t0: T,
    y0: [T; N],
    t_end: T,
    options: &IntegratorOptions<T>,
) -> Result<Solution<T, N>>
where
    T: Scalar,
    S: OdeSystem<T, N>,
{
    let IntegratorOptions {
        rtol,
        atol,
        h_init,
        h_max,
        max_steps,
        ref sampling,
    } = *options;
    if !(rtol > T::zero()) || !(atol >= T::zero()) {
        return Err(Error::param("tol", "tolerances must be positive"));
    }
    if !t0.is_finite() || !t_end.is_finite() || t_end < t0 {
        return Err(Error::param("t_end", "must be finite and not before the start time"));
    }
    if !all_finite(&y0) {
        return Err(Error::NonFinite {
            t: t0.as_f64(),
            state: to_f64_vec(&y0),
        });
    }

    let mut stats = IntegrationStats {
        rtol: rtol.as_f64(),
        atol: atol.as_f64(),
        ..Default::default()
    };
    let mut times = vec![t0];
    let mut states = vec![y0];
    if t_end == t0 {
        return Ok(Solution {
            times,
            states,
            stats,
        });
    }

    let requested: Vec<T> = match sampling {
        Sampling::Steps => Vec::new(),
        Sampling::Interval(dt) => {
            if !(*dt > T::zero()) {
                return Err(Error::param("sample_interval", "must be positive"));
            }
            let mut grid = Vec::new();
            let mut j = 1usize;
            loop {
                let t = t0 + *dt * T::from_usize(j).unwrap();
                // Points within a rounding error of t_end collapse onto it.
                if t >= t_end - *dt * T::lit(1e-9) {
                    break;
                }
                grid.push(t);
                j += 1;
            }
            grid.push(t_end);
            grid
        }
        Sampling::Times(ts) => {
            let mut prev = t0;
            for &t in ts {
                if !(t > prev) || t > t_end {
                    return Err(Error::param(
                        "sample_times",
                        "must increase strictly inside (t0, t_end]",
                    ));
                }
                prev = t;
            }
            ts.clone()
        }
    };
    let mut next_sample = 0usize;

    let tab = Tableau::<T>::new();
    let span = t_end - t0;
    let h_max = h_max.unwrap_or(span).min(span);
    let expo1 = T::lit(0.2 - BETA * 0.75);
    let beta = T::lit(BETA);
    let safety = T::lit(SAFETY);
    let facc1 = T::lit(1.0 / FAC_MIN);
    let facc2 = T::lit(1.0 / FAC_MAX);
    let n = T::from_usize(N).unwrap();

    let mut t = t0;
    let mut y = y0;
    let mut k1 = system.rhs(t, &y);
    stats.rhs_evaluations += 1;
    let mut h = match h_init {
        Some(h) => h.min(h_max),
        None => initial_step(system, t, &y, &k1, h_max, rtol, atol).min(h_max),
    };
    stats.rhs_evaluations += 1;
    let mut fac_old = T::lit(1e-4);
    let mut last_rejected = false;
    let mut steps = 0usize;

    loop {
        if steps >= max_steps {
            return Err(Error::TooManySteps(max_steps));
        }
        let remaining = t_end - t;
        let last = h >= remaining * (T::one() - T::lit(1e-12));
        if last {
            h = remaining;
        }
        if h.abs() <= T::lit(16.0) * T::epsilon() * t.abs().max(span) {
            return Err(Error::StepSizeUnderflow {
                t: t.as_f64(),
                h: h.as_f64(),
                state: to_f64_vec(&y),
            });
        }

        let stage = |coeffs: &[T; 6], ks: &[[T; N]], h: T| -> [T; N] {
            std::array::from_fn(|i| {
                let mut acc = T::zero();
                for (c, k) in coeffs.iter().zip(ks) {
                    acc += *c * k[i];
                }
                y[i] + h * acc
            })
        };
        let mut ks: Vec<[T; N]> = Vec::with_capacity(7);
        ks.push(k1);
        for s in 0..4 {
            let ys = stage(&tab.a[s], &ks, h);
            ks.push(system.rhs(t + tab.c[s] * h, &ys));
        }
        let ys = stage(&tab.a[4], &ks, h);
        ks.push(system.rhs(t + h, &ys));
        let y_new = stage(&tab.a[5], &ks, h);
        let t_new = if last { t_end } else { t + h };
        let k7 = system.rhs(t_new, &y_new);
        ks.push(k7);
        stats.rhs_evaluations += 6;
        steps += 1;

        let mut err_sq = T::zero();
        for i in 0..N {
            let mut e = T::zero();
            for (c, k) in tab.e.iter().zip(&ks) {
                e += *c * k[i];
            }
            let sc = atol + rtol * y[i].abs().max(y_new[i].abs());
            let ratio = h * e / sc;
            err_sq += ratio * ratio;
        }
        let err = (err_sq / n).sqrt();

        if !err.is_finite() {
            // Overflow in a trial step: shrink hard and retry.
            stats.steps_rejected += 1;
            last_rejected = true;
            h *= T::lit(0.1);
            continue;
        }

        let fac11 = err.powf(expo1);
        if err <= T::one() {
            if !all_finite(&y_new) || !all_finite(&k7) {
                return Err(Error::NonFinite {
                    t: t_new.as_f64(),
                    state: to_f64_vec(&y_new),
                });
            }
            let fac = (fac11 / fac_old.powf(beta) / safety).max(facc2).min(facc1);
            let mut h_new = h / fac;
            fac_old = err.max(T::lit(1e-4));
            stats.steps_accepted += 1;

            if !requested.is_empty() && next_sample < requested.len() {
                let mut dense: Option<DenseStep<T, N>> = None;
                while next_sample < requested.len() && requested[next_sample] <= t_new {
                    let ts = requested[next_sample];
                    let state = if ts == t_new {
                        y_new
                    } else {
                        let d = dense.get_or_insert_with(|| {
                            let mut r = [[T::zero(); N]; 5];
                            for i in 0..N {
                                let dy = y_new[i] - y[i];
                                let bspl = h * ks[0][i] - dy;
                                r[0][i] = y[i];
                                r[1][i] = dy;
                                r[2][i] = bspl;
                                r[3][i] = dy - h * k7[i] - bspl;
                                let mut acc = T::zero();
                                for (c, k) in tab.d.iter().zip(&ks) {
                                    acc += *c * k[i];
                                }
                                r[4][i] = h * acc;
                            }
                            DenseStep { t0: t, h, r }
                        });
                        d.eval(ts)
                    };
                    times.push(ts);
                    states.push(state);
                    next_sample += 1;
                }
            } else if matches!(sampling, Sampling::Steps) {
                times.push(t_new);
                states.push(y_new);
            }

            t = t_new;
            y = y_new;
            k1 = k7;
            if last {
                break;
            }
            if last_rejected {
                h_new = h_new.min(h);
            }
            last_rejected = false;
            h = h_new.min(h_max);
        } else {
            stats.steps_rejected += 1;
            last_rejected = true;
            h /= (fac11 / safety).min(facc1);
        }
    }

    Ok(Solution {
        times,
        states,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exponential_decay() {
        let f = |_t: f64, y: &[f64; 1]| [-y[0]];
        let opts = IntegratorOptions::with_tolerance(1e-10).sampling(Sampling::Interval(0.5));
        let sol = dopri5(&f, 0.0, [1.0], 3.0, &opts).unwrap();
        assert_eq!(sol.times.len(), 7);
        assert_eq!(*sol.times.last().unwrap(), 3.0);
        for (t, y) in sol.times.iter().zip(&sol.states) {
            assert_abs_diff_eq!(y[0], (-t).exp(), epsilon = 1e-9);
        }
    }

    #[test]
    fn dense_output_is_accurate() {
        // Force long steps so most samples come from interpolation.
        let f = |_t: f64, y: &[f64; 2]| [y[1], -y[0]];
        let ts: Vec<f64> = (1..500).map(|i| i as f64 * 0.02).collect();
        let opts = IntegratorOptions::with_tolerance(1e-8).sampling(Sampling::Times(ts));
        let sol = dopri5(&f, 0.0, [0.0, 1.0], 9.98, &opts).unwrap();
        assert!(sol.stats.steps_accepted < 250, "{:?}", sol.stats);
        assert_eq!(sol.times.len(), 500);
        for (t, y) in sol.times.iter().zip(&sol.states) {
            assert_abs_diff_eq!(y[0], t.sin(), epsilon = 1e-6);
        }
    }

    #[test]
    fn zero_span_returns_initial_state() {
        let f = |_t: f64, y: &[f64; 1]| [y[0]];
        let sol = dopri5(&f, 2.0, [3.0], 2.0, &IntegratorOptions::with_tolerance(1e-8)).unwrap();
        assert_eq!(sol.times, vec![2.0]);
        assert_eq!(sol.states, vec![[3.0]]);
    }

    #[test]
    fn blow_up_is_reported() {
        // y' = y², y(0) = 1 escapes at t = 1.
        let f = |_t: f64, y: &[f64; 1]| [y[0] * y[0]];
        let err = dopri5(&f, 0.0, [1.0], 2.0, &IntegratorOptions::with_tolerance(1e-8)).unwrap_err();
        assert!(
            matches!(err, Error::StepSizeUnderflow { .. } | Error::NonFinite { .. }),
            "{err}"
        );
    }

    #[test]
    fn step_budget() {
        let f = |_t: f64, y: &[f64; 2]| [y[1], -y[0]];
        let mut opts = IntegratorOptions::with_tolerance(1e-10);
        opts.max_steps = 10;
        assert!(matches!(
            dopri5(&f, 0.0, [1.0, 0.0], 100.0, &opts),
            Err(Error::TooManySteps(10))
        ));
    }

    #[test]
    fn rejects_bad_sampling() {
        let f = |_t: f64, y: &[f64; 1]| [y[0]];
        let opts = IntegratorOptions::with_tolerance(1e-8).sampling(Sampling::Times(vec![0.5, 0.2]));
        assert!(dopri5(&f, 0.0, [1.0], 1.0, &opts).is_err());
    }

    #[test]
    fn deterministic() {
        let f = |t: f64, y: &[f64; 2]| [y[1], -(2.0 * y[0]).sin() - 0.1 * y[1] + t.cos()];
        let opts = IntegratorOptions::with_tolerance(1e-9);
        let a = dopri5(&f, 0.0, [0.3, 0.0], 50.0, &opts).unwrap();
        let b = dopri5(&f, 0.0, [0.3, 0.0], 50.0, &opts).unwrap();
        assert_eq!(a.states, b.states);
        assert_eq!(a.times, b.times);
    }

    #[test]
    fn single_precision() {
        let f = |_t: f32, y: &[f32; 1]| [-y[0]];
        let sol = dopri5(&f, 0.0, [1.0f32], 1.0, &IntegratorOptions::with_tolerance(1e-5)).unwrap();
        assert!((sol.states.last().unwrap()[0] - (-1.0f32).exp()).abs() < 1e-4);
    }
}
