//! Pearson correlation with exact Student-t p-values.

use alloc::vec::Vec;

use crate::{Error, Result};

const MAX_ITER: usize = 300;
const EPS: f64 = 1e-15;
const TINY: f64 = 1e-300;

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// `I_x(a, b)` for `a, b > 0` and `x` in `[0, 1]`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b) + a * libm::log(x) + b * libm::log1p(-x);
    let front = libm::exp(ln_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// `P(|T| >= |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

/// Pearson correlation coefficient, clamped to `[-1, 1]`.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch {
            op: "pearson",
            left: alloc::vec![x.len()],
            right: alloc::vec![y.len()],
        });
    }
    if x.len() < 2 {
        return Err(Error::SeriesTooShort { len: x.len(), required: 2 });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LagCorrelation {
    pub lag: usize,
    pub n: usize,
    /// `None` when either aligned series is constant.
    pub r: Option<f64>,
    pub p: Option<f64>,
    pub significant: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationReport {
    pub rows: Vec<LagCorrelation>,
    /// Familywise 0.05 divided by the number of lags.
    pub threshold: f64,
}

impl CorrelationReport {
    /// Row with the largest defined `r`.
    pub fn best(&self) -> Option<&LagCorrelation> {
        self.rows
            .iter()
            .filter(|row| row.r.is_some())
            .max_by(|a, b| a.r.partial_cmp(&b.r).expect("finite r"))
    }

    pub fn any_significant(&self) -> bool {
        self.rows.iter().any(|row| row.significant)
    }
}

/// Correlates `social[h - lag]` with `sales[h]` for each lag.
pub fn lagged_correlation(social: &[f64], sales: &[f64], lags: &[usize]) -> Result<CorrelationReport> {
    if social.len() != sales.len() {
        return Err(Error::ShapeMismatch {
            op: "lagged_correlation",
            left: alloc::vec![social.len()],
            right: alloc::vec![sales.len()],
        });
    }
    let threshold = 0.05 / lags.len().max(1) as f64;
    let rows = lags
        .iter()
        .map(|&lag| {
            let n = social.len().saturating_sub(lag);
            if n < 3 {
                return Err(Error::SeriesTooShort { len: n, required: 3 });
            }
            let x = &social[..n];
            let y = &sales[lag..];
            let (r, p) = match pearson(x, y) {
                Ok(r) => {
                    let df = (n - 2) as f64;
                    let t = if r.abs() >= 1.0 {
                        f64::INFINITY
                    } else {
                        r * libm::sqrt(df / (1.0 - r * r))
                    };
                    (Some(r), Some(student_t_two_sided(t, df)))
                }
                Err(Error::ZeroVariance) => (None, None),
                Err(e) => return Err(e),
            };
            Ok(LagCorrelation {
                lag,
                n,
                r,
                p,
                significant: p.is_some_and(|p| p < threshold),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CorrelationReport { rows, threshold })
}
