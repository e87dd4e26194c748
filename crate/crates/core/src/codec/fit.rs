//! Least-squares fits used to summarize sweeps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeModelFit {
    /// Bits per innovation voxel.
    pub slope: f64,
    pub intercept: f64,
    /// Pearson correlation of the points.
    pub r: f64,
    /// Set when only two points were given: the line passes through both.
    pub degenerate_ok: bool,
    pub points: Vec<(f64, f64)>,
}

struct Line {
    slope: f64,
    intercept: f64,
    sse: f64,
}

fn fit_line(points: &[(f64, f64)]) -> Option<Line> {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    Some(Line { slope, intercept, sse })
}

fn correlation(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if syy == 0.0 {
        // A flat response is fit exactly by a horizontal line.
        return 1.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Fits `bits = slope * |Phi| + intercept`.
pub fn fit_size_model(points: &[(f64, f64)]) -> Result<SizeModelFit> {
    if points.len() < 2 {
        return Err(Error::DegenerateFit("at least two points are needed".into()));
    }
    let line = fit_line(points).ok_or_else(|| Error::DegenerateFit("all sizes are equal".into()))?;
    Ok(SizeModelFit {
        slope: line.slope,
        intercept: line.intercept,
        r: correlation(points),
        degenerate_ok: points.len() == 2,
        points: points.to_vec(),
    })
}

/// Sum of squared residuals of the least-squares line through `(k, y[k])`.
pub fn line_residual(values: &[f64]) -> f64 {
    let points: Vec<(f64, f64)> = values.iter().enumerate().map(|(k, &y)| (k as f64, y)).collect();
    fit_line(&points).map_or(0.0, |l| l.sse)
}

/// Residual of the best non-increasing convex fit made of at most two
/// linear pieces joined at a sample position.
///
/// Only a subset of all convex non-increasing functions is searched, so the
/// result is an upper bound on the residual of the unrestricted convex fit.
pub fn convex_hinge_residual(values: &[f64]) -> f64 {
    let xs: Vec<f64> = (0..values.len()).map(|k| k as f64).collect();
    let mut best = f64::INFINITY;
    let pts: Vec<(f64, f64)> = xs.iter().copied().zip(values.iter().copied()).collect();
    if let Some(l) = fit_line(&pts) {
        if l.slope <= 0.0 {
            best = l.sse;
        }
    }
    if values.len() < 3 {
        return best;
    }
    for knot in 1..values.len() - 1 {
        let x0 = xs[knot];
        if let Some((a, b1, b2)) = hinge_fit(&xs, values, x0) {
            if b1 <= b2 && b2 <= 0.0 {
                let sse: f64 = xs
                    .iter()
                    .zip(values)
                    .map(|(&x, &y)| (y - a - b1 * (x - x0).min(0.0) - b2 * (x - x0).max(0.0)).powi(2))
                    .sum();
                best = best.min(sse);
            }
        }
    }
    best
}

/// Unconstrained least squares for `a + b1*min(x-x0,0) + b2*max(x-x0,0)`.
fn hinge_fit(xs: &[f64], ys: &[f64], x0: f64) -> Option<(f64, f64, f64)> {
    let mut ata = [[0.0; 3]; 3];
    let mut aty = [0.0; 3];
    for (&x, &y) in xs.iter().zip(ys) {
        let row = [1.0, (x - x0).min(0.0), (x - x0).max(0.0)];
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
            aty[i] += row[i] * y;
        }
    }
    let s = solve3(ata, aty)?;
    Some((s[0], s[1], s[2]))
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in 0..3 {
            if row != col {
                let f = a[row][col] / a[col][col];
                let pivot_row = a[col];
                for (x, p) in a[row].iter_mut().zip(pivot_row) {
                    *x -= f * p;
                }
                b[row] -= f * b[col];
            }
        }
    }
    Some([b[0] / a[0][0], b[1] / a[1][1], b[2] / a[2][2]])
}

/// True when `values` falls to a single minimum and rises again, allowing
/// each step against the trend to undo at most `tolerance` of the larger
/// neighbor.
pub fn is_single_basin(values: &[f64], tolerance: f64) -> bool {
    let Some(m) = values.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(k, _)| k) else {
        return true;
    };
    let ok = |far: f64, near: f64| far >= near - tolerance * far.max(near);
    (0..m).all(|k| ok(values[k], values[k + 1])) && (m + 1..values.len()).all(|k| ok(values[k], values[k - 1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_has_unit_correlation() {
        let pts: Vec<(f64, f64)> = (0..10).map(|k| (k as f64, 3.0 * k as f64 + 7.0)).collect();
        let fit = fit_size_model(&pts).unwrap();
        assert!((fit.r - 1.0).abs() < 1e-12);
        assert!((fit.slope - 3.0).abs() < 1e-12);
        assert!((fit.intercept - 7.0).abs() < 1e-9);
        assert!(!fit.degenerate_ok);
    }

    #[test]
    fn two_points_flagged() {
        let fit = fit_size_model(&[(1.0, 2.0), (3.0, 6.0)]).unwrap();
        assert!(fit.degenerate_ok);
        assert!((fit.slope - 2.0).abs() < 1e-12);
    }

    #[test]
    fn equal_sizes_rejected() {
        assert!(matches!(fit_size_model(&[(1.0, 2.0), (1.0, 3.0), (1.0, 4.0)]), Err(Error::DegenerateFit(_))));
        assert!(fit_size_model(&[(1.0, 2.0)]).is_err());
    }

    #[test]
    fn hinge_fits_ramp_then_floor_exactly() {
        let ys: Vec<f64> = (0..50).map(|k| (1.0 - k as f64 / 20.0).max(0.0)).collect();
        assert!(convex_hinge_residual(&ys) < 1e-18);
        assert!(line_residual(&ys) > 1.0);
    }

    #[test]
    fn hinge_rejects_concave_shapes() {
        let ys: Vec<f64> = (0..30).map(|k| 1.0 - (k as f64 / 30.0).powi(2)).collect();
        // Only a straight line is admissible, so the hinge cannot beat it.
        assert!((convex_hinge_residual(&ys) - line_residual(&ys)).abs() < 1e-12);
    }

    #[test]
    fn basin_examples() {
        assert!(is_single_basin(&[5.0, 3.0, 2.0, 2.5, 4.0], 0.0));
        assert!(!is_single_basin(&[5.0, 2.0, 4.0, 1.0, 4.0], 0.05));
        assert!(is_single_basin(&[5.0, 3.0, 3.1, 2.0, 4.0], 0.05));
        assert!(is_single_basin(&[], 0.05));
    }
}
