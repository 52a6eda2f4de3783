//! ParCorr conditional-independence test: residualize x and y on the
//! condition set by ordinary least squares (intercept always included), take
//! the Pearson correlation of the residuals, and convert to a two-sided
//! Student-t p-value with df = n − |Z| − 2.

use ndarray::ArrayView1;

use crate::error::{Error, Result};
use crate::special;

/// Relative sum-of-squares threshold below which residuals count as zero.
const DEGENERATE_RSS: f64 = 1e-24;
/// Ridge levels tried in order when the Gram matrix is ill-conditioned.
const RIDGE_LEVELS: [f64; 4] = [0.0, 1e-10, 1e-6, 1e-2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiTestResult {
    /// Partial correlation r ∈ [-1, 1].
    pub statistic: f64,
    /// Two-sided p-value ∈ [0, 1].
    pub p_value: f64,
    /// Degrees of freedom n − |conditions| − 2.
    pub df: usize,
}

/// Partial correlation of `x` and `y` given `conditions`.
///
/// All series must share one length n with n > |conditions| + 2. Degenerate
/// inputs (zero-variance residuals) yield r = 0, p = 1; a rank-deficient
/// condition set falls back to a ridge-regularized solve.
pub fn parcorr(
    x: ArrayView1<f64>,
    y: ArrayView1<f64>,
    conditions: &[ArrayView1<f64>],
) -> Result<CiTestResult> {
    let n = x.len();
    if y.len() != n || conditions.iter().any(|c| c.len() != n) {
        return Err(Error::Contract(format!(
            "parcorr: series lengths differ (x has {n})"
        )));
    }
    let k = conditions.len();
    if n <= k + 2 {
        return Err(Error::Contract(format!(
            "parcorr: need n > |conditions| + 2, got n = {n}, |conditions| = {k}"
        )));
    }
    let df = n - k - 2;

    let xc = centered(x);
    let yc = centered(y);
    let ss_x0 = dot(&xc, &xc);
    let ss_y0 = dot(&yc, &yc);

    let (rx, ry) = if k == 0 {
        (xc, yc)
    } else {
        let design = Design::build(conditions, n);
        (design.residualize(xc), design.residualize(yc))
    };

    let ss_x = dot(&rx, &rx);
    let ss_y = dot(&ry, &ry);
    if ss_x <= ss_x0 * DEGENERATE_RSS || ss_y <= ss_y0 * DEGENERATE_RSS {
        return Ok(CiTestResult {
            statistic: 0.0,
            p_value: 1.0,
            df,
        });
    }

    let r = (dot(&rx, &ry) / (ss_x.sqrt() * ss_y.sqrt())).clamp(-1.0, 1.0);
    let one_minus_r2 = 1.0 - r * r;
    let p_value = if one_minus_r2 <= 0.0 {
        0.0
    } else {
        let t = r * (df as f64 / one_minus_r2).sqrt();
        special::student_t_two_sided_p(t, df as f64)
    };
    Ok(CiTestResult {
        statistic: r,
        p_value,
        df,
    })
}

fn centered(v: ArrayView1<f64>) -> Vec<f64> {
    let mean = v.sum() / v.len() as f64;
    v.iter().map(|&e| e - mean).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Centered, unit-norm condition columns plus the Gram matrix machinery for
/// projecting them out. Constant columns carry no information beyond the
/// intercept and are excluded from the design.
struct Design {
    cols: Vec<Vec<f64>>,
    gram_chol: Vec<f64>,
    m: usize,
}

impl Design {
    fn build(conditions: &[ArrayView1<f64>], n: usize) -> Design {
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(conditions.len());
        for c in conditions {
            let cc = centered(*c);
            let raw_ss: f64 = c.iter().map(|&e| e * e).sum();
            let ss = dot(&cc, &cc);
            if ss <= raw_ss * DEGENERATE_RSS || ss <= 0.0 {
                continue;
            }
            let norm = ss.sqrt();
            cols.push(cc.into_iter().map(|e| e / norm).collect());
        }
        let m = cols.len();
        let mut gram = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..=i {
                let g = dot(&cols[i], &cols[j]);
                gram[i * m + j] = g;
                gram[j * m + i] = g;
            }
        }
        let mut chol = Vec::new();
        for ridge in RIDGE_LEVELS {
            let mut a = gram.clone();
            for i in 0..m {
                a[i * m + i] += ridge;
            }
            if cholesky_in_place(&mut a, m) {
                chol = a;
                break;
            }
        }
        assert!(!chol.is_empty() || m == 0, "parcorr: Gram factorization failed");
        let _ = n;
        Design {
            cols,
            gram_chol: chol,
            m,
        }
    }

    /// v − Z·(ZᵀZ)⁻¹·Zᵀv for a centered vector v.
    fn residualize(&self, v: Vec<f64>) -> Vec<f64> {
        if self.m == 0 {
            return v;
        }
        let mut b: Vec<f64> = self.cols.iter().map(|c| dot(c, &v)).collect();
        chol_solve(&self.gram_chol, self.m, &mut b);
        let mut out = v;
        for (w, col) in b.iter().zip(&self.cols) {
            for (o, &c) in out.iter_mut().zip(col) {
                *o -= w * c;
            }
        }
        out
    }
}

/// In-place lower Cholesky of a symmetric m×m matrix stored row-major.
/// Returns false when a pivot drops below tolerance (matrix not SPD enough).
fn cholesky_in_place(a: &mut [f64], m: usize) -> bool {
    for j in 0..m {
        let mut d = a[j * m + j];
        for k in 0..j {
            d -= a[j * m + k] * a[j * m + k];
        }
        if d <= 1e-13 {
            return false;
        }
        let d = d.sqrt();
        a[j * m + j] = d;
        for i in (j + 1)..m {
            let mut s = a[i * m + j];
            for k in 0..j {
                s -= a[i * m + k] * a[j * m + k];
            }
            a[i * m + j] = s / d;
        }
    }
    true
}

/// Solves L·Lᵀ·x = b in place given the Cholesky factor from above.
fn chol_solve(l: &[f64], m: usize, b: &mut [f64]) {
    for i in 0..m {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * m + k] * b[k];
        }
        b[i] = s / l[i * m + i];
    }
    for i in (0..m).rev() {
        let mut s = b[i];
        for k in (i + 1)..m {
            s -= l[k * m + i] * b[k];
        }
        b[i] = s / l[i * m + i];
    }
}
