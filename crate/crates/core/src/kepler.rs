//! Kepler's equation and the eccentricity expansions of `(a/ρ)³` and of the
//! equation of the centre.
//!
//! The dynamics only ever consume the Fourier coefficients
//!
//! ```text
//! (a/ρ)³   = Σ_{n≥0} a_n(e) eⁿ cos(nM)
//! ϑ − M    = Σ_{n≥1} c_n(e) eⁿ sin(nM)
//! ```
//!
//! which are obtained here by trapezoidal quadrature over one orbit. The
//! integrands are smooth and periodic, so the rule converges spectrally.
//! The single harmonic strength the dynamics need, `a_k eᵏ`, also has an
//! exact Bessel series that stays accurate where `eᵏ` is far below round-off.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default truncation order of an [`ExpansionTable`].
pub const DEFAULT_MAX_ORDER: usize = 8;

const INITIAL_POINTS: usize = 1 << 12;
const MAX_POINTS: usize = 1 << 20;

/// Eccentricities at which the `e → 0` limits are extrapolated from.
const LIMIT_NODES: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

pub(crate) fn check_eccentricity<T: Scalar>(e: T) -> Result<()> {
    if e >= T::zero() && e < T::one() {
        Ok(())
    } else {
        Err(Error::Eccentricity(e.as_f64()))
    }
}

/// Shape of a bound Keplerian orbit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OrbitGeometry<T> {
    pub e: T,
    /// Semi-major axis in metres.
    pub a: T,
}

impl<T: Scalar> OrbitGeometry<T> {
    pub fn new(e: T, a: T) -> Result<Self> {
        check_eccentricity(e)?;
        if !(a > T::zero()) || !a.is_finite() {
            return Err(Error::param("a", "semi-major axis must be positive"));
        }
        Ok(Self { e, a })
    }

    /// Distance to the focus at mean anomaly `m`.
    pub fn radius(&self, m: T) -> Result<T> {
        let ecc = solve_kepler(m, self.e)?;
        Ok(self.a * (T::one() - self.e * ecc.cos()))
    }

    pub fn true_anomaly(&self, m: T) -> Result<T> {
        true_anomaly(m, self.e)
    }

    pub fn radius_ratio_cubed(&self, m: T) -> Result<T> {
        radius_ratio_cubed(m, self.e)
    }
}

/// Splits `m` into `m − 2πj ∈ [−π, π]` and the number of turns `j`.
fn reduce_angle<T: Scalar>(m: T) -> (T, T) {
    let two_pi = T::two_pi();
    let turns = (m / two_pi).round();
    (m - turns * two_pi, turns)
}

/// Kepler's equation for a mean anomaly already reduced to `[−π, π]`.
///
/// Newton iteration seeded with `M + e·sin M`, safeguarded by the bracket
/// `[M − e, M + e]` which always contains the root.
fn solve_reduced<T: Scalar>(m: T, e: T) -> T {
    if e == T::zero() {
        return m;
    }
    let tol = T::tolerance(0.0, 4.0) * (T::one() + m.abs());
    let mut lo = m - e;
    let mut hi = m + e;
    let mut ecc = m + e * m.sin();
    for _ in 0..200 {
        let f = ecc - e * ecc.sin() - m;
        if f.abs() <= tol {
            return ecc;
        }
        if f < T::zero() {
            lo = ecc;
        } else {
            hi = ecc;
        }
        let slope = T::one() - e * ecc.cos();
        let mut next = ecc - f / slope;
        if !(next > lo && next < hi) {
            next = (lo + hi) / T::lit(2.0);
        }
        if next == ecc || hi - lo <= T::epsilon() * (T::one() + ecc.abs()) {
            return next;
        }
        ecc = next;
    }
    ecc
}

/// Eccentric anomaly `E` solving `E − e·sin E = M`.
///
/// Any real `M` is accepted; the winding number is carried through so the
/// result is continuous in `M`.
pub fn solve_kepler<T: Scalar>(mean_anomaly: T, e: T) -> Result<T> {
    check_eccentricity(e)?;
    let (m, turns) = reduce_angle(mean_anomaly);
    Ok(solve_reduced(m, e) + turns * T::two_pi())
}

/// `(a/ρ)³ = (1 − e·cos E)⁻³`, evaluated exactly.
pub fn radius_ratio_cubed<T: Scalar>(mean_anomaly: T, e: T) -> Result<T> {
    check_eccentricity(e)?;
    let (m, _) = reduce_angle(mean_anomaly);
    let ecc = solve_reduced(m, e);
    Ok((T::one() - e * ecc.cos()).powi(-3))
}

/// True anomaly `ϑ(M)`, unwound so that `ϑ(M + 2π) = ϑ(M) + 2π`.
pub fn true_anomaly<T: Scalar>(mean_anomaly: T, e: T) -> Result<T> {
    check_eccentricity(e)?;
    let (m, turns) = reduce_angle(mean_anomaly);
    Ok(reduced_true_anomaly(m, e) + turns * T::two_pi())
}

fn reduced_true_anomaly<T: Scalar>(m: T, e: T) -> T {
    let ecc = solve_reduced(m, e);
    let s = (T::one() - e * e).sqrt() * ecc.sin();
    (s).atan2(ecc.cos() - e)
}

/// Raw Fourier coefficients `A_n = a_n(e)·eⁿ` and `S_n = c_n(e)·eⁿ`, n = 0..=n_max
/// (`S_0` is always zero).
#[derive(Clone, Debug)]
struct RawCoefficients<T> {
    cosine: Vec<T>,
    sine: Vec<T>,
}

fn sample_coefficients<T: Scalar>(e: T, n_max: usize, points: usize) -> RawCoefficients<T> {
    let two_pi = T::two_pi();
    let n_pts = T::from_usize(points).unwrap();
    let mut cosine = vec![T::zero(); n_max + 1];
    let mut sine = vec![T::zero(); n_max + 1];
    for j in 0..points {
        let m = two_pi * T::from_usize(j).unwrap() / n_pts;
        // Keep the sample in [−π, π] so the centre equation is continuous.
        let (m_red, _) = reduce_angle(m);
        let ecc = solve_reduced(m_red, e);
        // (1 − x)⁻³ − 1 without cancellation, so that the harmonics keep
        // their relative accuracy as e → 0.
        let excess = (-T::lit(3.0) * (-e * ecc.cos()).ln_1p()).exp_m1();
        let centre = (T::one() - e * e).sqrt() * ecc.sin();
        let centre = centre.atan2(ecc.cos() - e) - m_red;
        cosine[0] += excess;
        for n in 1..=n_max {
            let arg = T::from_usize(n).unwrap() * m_red;
            cosine[n] += excess * arg.cos();
            sine[n] += centre * arg.sin();
        }
    }
    let two = T::lit(2.0);
    cosine[0] = T::one() + cosine[0] / n_pts;
    for n in 1..=n_max {
        cosine[n] = cosine[n] * two / n_pts;
        sine[n] = sine[n] * two / n_pts;
    }
    RawCoefficients { cosine, sine }
}

/// Trapezoidal quadrature on 2¹² points, doubled until successive results agree.
fn raw_coefficients<T: Scalar>(e: T, n_max: usize) -> Result<RawCoefficients<T>> {
    check_eccentricity(e)?;
    let tol = T::tolerance(1e-11, 64.0);
    let mut points = INITIAL_POINTS;
    let mut current = sample_coefficients(e, n_max, points);
    loop {
        let next_points = points * 2;
        let next = sample_coefficients(e, n_max, next_points);
        let change = current
            .cosine
            .iter()
            .zip(&next.cosine)
            .chain(current.sine.iter().zip(&next.sine))
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), T::max);
        if change <= tol {
            return Ok(next);
        }
        if next_points >= MAX_POINTS {
            return Err(Error::Quadrature {
                points: next_points,
                change: change.as_f64(),
            });
        }
        points = next_points;
        current = next;
    }
}

/// `J_0(x) ..= J_{m_max}(x)` for `x ≥ 0`.
fn bessel_j_sequence<T: Scalar>(m_max: usize, x: T) -> Vec<T> {
    let mut out = vec![T::zero(); m_max + 1];
    if x == T::zero() {
        out[0] = T::one();
        return out;
    }
    let half = x / T::lit(2.0);
    if x <= T::lit(4.0) {
        // Power series; at this size the terms never outgrow the sum.
        let q = -half * half;
        let mut lead = T::one();
        for (m, slot) in out.iter_mut().enumerate() {
            if m > 0 {
                lead = lead * half / T::from_usize(m).unwrap();
            }
            let (mut term, mut sum) = (lead, lead);
            for j in 1..200 {
                term = term * q / T::from_usize(j * (j + m)).unwrap();
                sum += term;
                if term.abs() <= T::epsilon() * sum.abs() {
                    break;
                }
            }
            *slot = sum;
        }
        return out;
    }
    // Miller's backward recurrence, normalised by J_0 + 2ΣJ_2j = 1.
    let start = m_max + 20 + x.to_usize().unwrap_or(0) * 2;
    let big = T::lit(1e10);
    let (mut above, mut here) = (T::zero(), T::lit(1e-20));
    let mut norm = T::zero();
    for m in (0..=start).rev() {
        if m <= m_max {
            out[m] = here;
        }
        if m % 2 == 0 {
            norm += if m == 0 { here } else { T::lit(2.0) * here };
        }
        if m == 0 {
            break;
        }
        let below = T::from_usize(2 * m).unwrap() / x * here - above;
        above = here;
        here = below;
        if here.abs() > big {
            let scale = big.recip();
            for v in out.iter_mut() {
                *v *= scale;
            }
            above *= scale;
            here *= scale;
            norm *= scale;
        }
    }
    out.iter().map(|&v| v / norm).collect()
}

/// `A_k(e) = a_k(e)·eᵏ`, the strength of the k-th harmonic of `(a/ρ)³`.
///
/// Evaluated from the exact series `A_k = 2Σ_m J_m(ke)·g_|k−m|`, where `g_j`
/// are the Fourier coefficients of `(1 − e cos E)⁻²` in the eccentric
/// anomaly. Every leading term is positive, so unlike a quadrature the
/// result keeps full relative precision when `eᵏ` is tiny. Well defined at
/// `e = 0`.
pub fn harmonic_strength<T: Scalar>(k: usize, e: T) -> Result<T> {
    check_eccentricity(e)?;
    if e == T::zero() {
        return Ok(if k == 0 { T::one() } else { T::zero() });
    }
    let one = T::one();
    let w = one - e * e;
    let beta = e / (one + w.sqrt());
    let b2 = beta * beta;
    let shift = T::lit(2.0) * b2 / (one - b2);
    // g_j = βʲ((j + 1) + 2β²/(1 − β²))/(1 − e²)
    let reach = ((T::lit(1e-40).ln() / beta.ln()).to_usize().unwrap_or(0) + 8).min(4000);
    let mut g = Vec::with_capacity(k + reach + 1);
    let mut power = one;
    for j in 0..=k + reach {
        g.push(power * (T::from_usize(j + 1).unwrap() + shift) / w);
        power *= beta;
    }
    if k == 0 {
        return Ok(g[0]);
    }
    let x = T::from_usize(k).unwrap() * e;
    let bessel = bessel_j_sequence(k + reach, x);
    // Terms in increasing order of size: far tails first.
    let mut sum = T::zero();
    for m in (1..=reach).rev() {
        let sign = if m % 2 == 0 { one } else { -one };
        sum += sign * bessel[m] * g[k + m];
    }
    for m in (k + 1..=k + reach).rev() {
        sum += bessel[m] * g[m - k];
    }
    for m in (0..=k).rev() {
        sum += bessel[m] * g[k - m];
    }
    Ok(T::lit(2.0) * sum)
}

/// `a_n(e)`: the n-th cosine coefficient of `(a/ρ)³` divided by `eⁿ`.
///
/// Round-off in the quadrature is amplified by `e⁻ⁿ`, so orders where `eⁿ`
/// approaches machine precision lose accuracy.
pub fn fourier_a<T: Scalar>(n: usize, e: T) -> Result<T> {
    check_eccentricity(e)?;
    if e == T::zero() {
        if n == 0 {
            return Ok(T::one());
        }
        return Err(Error::Domain(format!(
            "a_{n}(e) at e = 0 requires the limit form (fourier_a_limit0)"
        )));
    }
    let raw = raw_coefficients(e, n)?;
    Ok(raw.cosine[n] / e.powi(n as i32))
}

/// `c_n(e)`: the n-th sine coefficient of `ϑ − M` divided by `eⁿ`.
pub fn fourier_c<T: Scalar>(n: usize, e: T) -> Result<T> {
    check_eccentricity(e)?;
    if n == 0 {
        return Err(Error::Domain("c_n is defined for n >= 1".into()));
    }
    if e == T::zero() {
        return Err(Error::Domain(format!(
            "c_{n}(e) at e = 0 requires the limit form (fourier_c_limit0)"
        )));
    }
    let raw = raw_coefficients(e, n)?;
    Ok(raw.sine[n] / e.powi(n as i32))
}

/// Two Richardson passes in `h = e²` over nodes `h, h/4, h/16`.
fn richardson_e2<T: Scalar>(values: [T; 3]) -> T {
    let [f0, f1, f2] = values;
    let four = T::lit(4.0);
    let three = T::lit(3.0);
    let r01 = (four * f1 - f0) / three;
    let r12 = (four * f2 - f1) / three;
    (T::lit(16.0) * r12 - r01) / T::lit(15.0)
}

fn limit0<T: Scalar>(f: impl Fn(T) -> Result<T>) -> Result<T> {
    let mut values = [T::zero(); 3];
    for (slot, e) in values.iter_mut().zip(LIMIT_NODES) {
        *slot = f(T::lit(e))?;
    }
    Ok(richardson_e2(values))
}

/// `a_n(0)`, extrapolated from small eccentricities.
pub fn fourier_a_limit0<T: Scalar>(n: usize) -> Result<T> {
    if n == 0 {
        return Ok(T::one());
    }
    limit0(|e| fourier_a(n, e))
}

/// `c_n(0)`, extrapolated from small eccentricities.
pub fn fourier_c_limit0<T: Scalar>(n: usize) -> Result<T> {
    limit0(|e| fourier_c(n, e))
}

/// `a_n(e)` and `c_n(e)` for `n = 0..=max_order` at one eccentricity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpansionTable<T> {
    pub e: T,
    pub max_order: usize,
    pub a_coeffs: Vec<T>,
    /// `c_coeffs[0]` is a zero placeholder so both lists share indexing.
    pub c_coeffs: Vec<T>,
}

impl<T: Scalar> ExpansionTable<T> {
    /// At `e = 0` the entries are the extrapolated limits.
    pub fn compute(e: T, max_order: usize) -> Result<Self> {
        check_eccentricity(e)?;
        let (a_coeffs, c_coeffs) = if e == T::zero() {
            let mut a = Vec::with_capacity(max_order + 1);
            let mut c = vec![T::zero()];
            a.push(T::one());
            for n in 1..=max_order {
                a.push(fourier_a_limit0(n)?);
                c.push(fourier_c_limit0(n)?);
            }
            (a, c)
        } else {
            let raw = raw_coefficients(e, max_order)?;
            let mut scale = T::one();
            let mut a = Vec::with_capacity(max_order + 1);
            let mut c = Vec::with_capacity(max_order + 1);
            for n in 0..=max_order {
                a.push(raw.cosine[n] / scale);
                c.push(raw.sine[n] / scale);
                scale *= e;
            }
            (a, c)
        };
        Ok(Self {
            e,
            max_order,
            a_coeffs,
            c_coeffs,
        })
    }

    /// Truncated series for `(a/ρ)³`.
    pub fn radius_series(&self, m: T) -> T {
        let mut power = T::one();
        let mut sum = T::zero();
        for (n, a) in self.a_coeffs.iter().enumerate() {
            sum += *a * power * (T::from_usize(n).unwrap() * m).cos();
            power *= self.e;
        }
        sum
    }

    /// Truncated series for `ϑ(M)`.
    pub fn true_anomaly_series(&self, m: T) -> T {
        let mut power = T::one();
        let mut sum = m;
        for (n, c) in self.c_coeffs.iter().enumerate() {
            sum += *c * power * (T::from_usize(n).unwrap() * m).sin();
            power *= self.e;
        }
        sum
    }
}
