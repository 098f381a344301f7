//! Slow reference implementations used to check the fast engines.
//!
//! [`exhaustive_stepdown`] restates the step-down rule literally, and
//! [`exact_fdr_stepdown`] integrates `E[V / max(R, 1)]` over the unit cube for
//! tiny `m` with nested adaptive Gauss–Kronrod quadrature. Each coordinate is
//! integrated in probability space `u = F(p)`, split at the images of the
//! critical constants so every panel sees an integrand that is constant in
//! that coordinate.

use crate::error::{Error, Result};
use crate::normal;
use crate::pvalues::{CriticalConstants, PValueVector, RejectionSet};

/// Largest `m` accepted by [`exhaustive_stepdown`].
pub const EXHAUSTIVE_MAX_M: usize = 16;

/// Largest `m` accepted by [`exact_fdr_stepdown`].
pub const EXACT_MAX_M: usize = 3;

/// Absolute tolerance of each one-dimensional quadrature.
pub const QUADRATURE_TOLERANCE: f64 = 1e-6;

const MAX_BISECTIONS: u32 = 30;

/// Step-down by brute force: try every `i` from `m` down to 1 and test the
/// whole prefix condition each time.
pub fn exhaustive_stepdown(pv: &PValueVector, c: &CriticalConstants) -> Result<RejectionSet> {
    let m = pv.len();
    if m > EXHAUSTIVE_MAX_M {
        return Err(Error::SizeGuard {
            m,
            max: EXHAUSTIVE_MAX_M,
        });
    }
    if c.len() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            found: c.len(),
        });
    }

    // Insertion sort on (value, id), kept separate from the fast path's sort.
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(m);
    for (&value, &id) in pv.values().iter().zip(pv.ids()) {
        let mut at = order.len();
        while at > 0 && (order[at - 1].0 > value || (order[at - 1].0 == value && order[at - 1].1 > id))
        {
            at -= 1;
        }
        order.insert(at, (value, id));
    }

    let mut k = 0;
    for i in (1..=m).rev() {
        if (1..=i).all(|j| order[j - 1].0 <= c.alphas[j - 1]) {
            k = i;
            break;
        }
    }
    Ok(RejectionSet {
        rejected_ids: order[..k].iter().map(|&(_, id)| id).collect(),
        k,
        threshold: if k == 0 { 0.0 } else { order[k - 1].0 },
    })
}

/// Distribution of a false-null p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AltCdf {
    /// Same as the null.
    Uniform,
    /// One-sided z-test p-value under mean shift `mu`:
    /// `F(t) = 1 - Φ(Φ⁻¹(1 - t) - mu) = Φ(Φ⁻¹(t) + mu)`.
    GaussianShift(f64),
}

impl AltCdf {
    pub fn cdf(&self, t: f64) -> f64 {
        match *self {
            AltCdf::Uniform => t.clamp(0.0, 1.0),
            AltCdf::GaussianShift(mu) => {
                if t <= 0.0 {
                    0.0
                } else if t >= 1.0 {
                    1.0
                } else {
                    normal::cdf(normal::quantile(t) + mu)
                }
            }
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            AltCdf::Uniform => u.clamp(0.0, 1.0),
            AltCdf::GaussianShift(mu) => {
                if u <= 0.0 {
                    0.0
                } else if u >= 1.0 {
                    1.0
                } else {
                    normal::cdf(normal::quantile(u) - mu)
                }
            }
        }
    }
}

/// Inputs of [`exact_fdr_stepdown`]. True nulls occupy the first `m0`
/// coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactFdrSpec {
    pub constants: CriticalConstants,
    pub m0: usize,
    pub alt_cdf: AltCdf,
}

/// Exact FDR of the step-down procedure for `m <= 3` independent p-values.
pub fn exact_fdr_stepdown(spec: &ExactFdrSpec) -> Result<f64> {
    let m = spec.constants.len();
    if m > EXACT_MAX_M {
        return Err(Error::SizeGuard {
            m,
            max: EXACT_MAX_M,
        });
    }
    if spec.m0 > m {
        return Err(Error::Domain(format!(
            "m0 = {} exceeds m = {m}",
            spec.m0
        )));
    }
    if spec.m0 == 0 || m == 0 {
        return Ok(0.0);
    }

    let mut breaks: Vec<f64> = spec
        .constants
        .alphas
        .iter()
        .copied()
        .filter(|&a| a > 0.0 && a < 1.0)
        .collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let mut point = vec![0.0; m];
    integrate_from(spec, &breaks, 0, &mut point)
}

fn integrate_from(spec: &ExactFdrSpec, breaks: &[f64], dim: usize, point: &mut [f64]) -> Result<f64> {
    let m = point.len();
    if dim == m {
        return Ok(fdp_at(spec, point));
    }
    let dist = if dim < spec.m0 {
        AltCdf::Uniform
    } else {
        spec.alt_cdf
    };

    let mut edges = Vec::with_capacity(breaks.len() + 2);
    edges.push(0.0);
    edges.extend(breaks.iter().map(|&b| dist.cdf(b)));
    edges.push(1.0);

    let mut total = 0.0;
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        total += adaptive_gauss_kronrod(
            &mut |u| {
                point[dim] = dist.quantile(u);
                integrate_from(spec, breaks, dim + 1, point)
            },
            lo,
            hi,
            QUADRATURE_TOLERANCE,
        )?;
    }
    Ok(total)
}

fn fdp_at(spec: &ExactFdrSpec, point: &[f64]) -> f64 {
    // Ties have probability zero; count rejections with the literal rule.
    let mut order: Vec<(f64, usize)> = point.iter().copied().zip(0..).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let alphas = &spec.constants.alphas;
    let mut k = 0;
    for i in (1..=order.len()).rev() {
        if (1..=i).all(|j| order[j - 1].0 <= alphas[j - 1]) {
            k = i;
            break;
        }
    }
    if k == 0 {
        return 0.0;
    }
    let v = order[..k].iter().filter(|&&(_, idx)| idx < spec.m0).count();
    v as f64 / k as f64
}

// 7-point Gauss / 15-point Kronrod nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &mut dyn FnMut(f64) -> Result<f64>, a: f64, b: f64) -> Result<(f64, f64)> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let sum = f(center - dx)? + f(center + dx)?;
        kronrod += WGK[j] * sum;
        // Odd Kronrod indices are the Gauss nodes.
        if j % 2 == 1 {
            gauss += WG[j / 2] * sum;
        }
    }
    Ok((kronrod * half, ((kronrod - gauss) * half).abs()))
}

/// Adaptive bisection on top of a 15-point Gauss–Kronrod rule. Only interior
/// nodes are evaluated, so jumps sitting exactly on `a` or `b` are harmless.
pub fn adaptive_gauss_kronrod(
    f: &mut dyn FnMut(f64) -> Result<f64>,
    a: f64,
    b: f64,
    tolerance: f64,
) -> Result<f64> {
    fn recurse(
        f: &mut dyn FnMut(f64) -> Result<f64>,
        a: f64,
        b: f64,
        tolerance: f64,
        depth: u32,
    ) -> Result<f64> {
        let (value, err) = gk15(f, a, b)?;
        if err <= tolerance.max(1e-15 * value.abs()) {
            return Ok(value);
        }
        if depth == MAX_BISECTIONS {
            return Err(Error::ToleranceFailure {
                tolerance,
                lower: a,
                upper: b,
            });
        }
        let mid = 0.5 * (a + b);
        Ok(recurse(f, a, mid, 0.5 * tolerance, depth + 1)?
            + recurse(f, mid, b, 0.5 * tolerance, depth + 1)?)
    }
    recurse(f, a, b, tolerance, 0)
}
