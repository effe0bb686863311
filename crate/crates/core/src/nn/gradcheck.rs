//! Central finite-difference oracle for analytic gradients.

/// Denominator floor for relative errors; below it errors are effectively
/// absolute.
pub const RELATIVE_FLOOR: f64 = 1e-6;

pub const DEFAULT_STEP: f64 = 1e-5;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FdReport {
    pub checked: usize,
    /// Coordinates whose perturbation changed a rectifier's on/off pattern.
    pub skipped: usize,
    pub max_rel_error: f64,
    pub worst_index: Option<usize>,
}

impl FdReport {
    pub fn merge(&mut self, other: &FdReport) {
        self.checked += other.checked;
        self.skipped += other.skipped;
        if other.max_rel_error > self.max_rel_error {
            self.max_rel_error = other.max_rel_error;
            self.worst_index = other.worst_index;
        }
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.checked > 0 && self.max_rel_error <= tolerance
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Compare `analytic[i]` with `(loss(p + h e_i) - loss(p - h e_i)) / 2h` for
/// every index in `coords`.
///
/// `pattern` returns a fingerprint of the non-smooth structure at a
/// parameter vector (for rectifier networks, the on/off state of every
/// unit); coordinates whose perturbation changes it are skipped because the
/// loss is not differentiable across the kink.
pub fn check_gradient<F, P>(
    params: &[f64],
    analytic: &[f64],
    coords: &[usize],
    step: f64,
    mut loss: F,
    mut pattern: P,
) -> FdReport
where
    F: FnMut(&[f64]) -> f64,
    P: FnMut(&[f64]) -> Vec<bool>,
{
    assert_eq!(params.len(), analytic.len());
    let base_pattern = pattern(params);
    let mut p = params.to_vec();
    let mut report = FdReport::default();
    for &i in coords {
        let orig = p[i];
        p[i] = orig + step;
        let plus = loss(&p);
        let plus_pattern = pattern(&p);
        p[i] = orig - step;
        let minus = loss(&p);
        let minus_pattern = pattern(&p);
        p[i] = orig;
        if plus_pattern != base_pattern || minus_pattern != base_pattern {
            report.skipped += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * step);
        let err = relative_error(analytic[i], numeric);
        report.checked += 1;
        if report.worst_index.is_none() || err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst_index = Some(i);
        }
    }
    report
}
