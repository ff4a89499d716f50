use serde::Serialize;

/// Outcome of comparing an analytic gradient against central differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_coordinate: usize,
    pub step_size: f64,
}

/// Relative error floor: gradients smaller than this are compared absolutely.
const SCALE_FLOOR: f64 = 1e-6;

/// Central-difference check of `analytic` at `at`, over `coords` (all when `None`).
pub fn check_gradient<F>(f: F, at: &[f64], analytic: &[f64], coords: Option<&[usize]>, h: f64) -> GradCheckReport
where
    F: Fn(&[f64]) -> f64,
{
    assert_eq!(at.len(), analytic.len(), "gradient length");
    let all: Vec<usize>;
    let coords = match coords {
        Some(c) => c,
        None => {
            all = (0..at.len()).collect();
            &all
        }
    };
    let mut x = at.to_vec();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_coordinate: coords.first().copied().unwrap_or(0),
        step_size: h,
    };
    for &i in coords {
        let orig = x[i];
        x[i] = orig + h;
        let fp = f(&x);
        x[i] = orig - h;
        let fm = f(&x);
        x[i] = orig;
        let numeric = (fp - fm) / (2.0 * h);
        let a = analytic[i];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(SCALE_FLOOR);
        if err > report.max_relative_error || err.is_nan() {
            report.max_relative_error = if err.is_nan() { f64::INFINITY } else { err };
            report.worst_coordinate = i;
        }
    }
    report
}
