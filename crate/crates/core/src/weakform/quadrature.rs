use crate::error::{QhdError, Result};

/// Composite Simpson weights on `n` uniformly spaced nodes with spacing `h`.
///
/// An odd interval count closes with Simpson's 3/8 rule on the last three intervals.
pub fn simpson_weights(n: usize, h: f64) -> Result<Vec<f64>> {
    if n < 4 {
        return Err(QhdError::TooFewSnapshots { needed: 4, got: n });
    }
    let mut w = vec![0.0; n];
    let intervals = n - 1;
    let simpson_end = if intervals.is_multiple_of(2) { intervals } else { intervals - 3 };
    for k in (0..simpson_end).step_by(2) {
        w[k] += h / 3.0;
        w[k + 1] += 4.0 * h / 3.0;
        w[k + 2] += h / 3.0;
    }
    if simpson_end < intervals {
        let s = simpson_end;
        let c = 3.0 * h / 8.0;
        w[s] += c;
        w[s + 1] += 3.0 * c;
        w[s + 2] += 3.0 * c;
        w[s + 3] += c;
    }
    Ok(w)
}

/// Human-readable description of the rule used for `n` nodes.
pub fn describe(n: usize, h: f64) -> String {
    if (n - 1).is_multiple_of(2) {
        format!("composite Simpson, {n} snapshots, spacing {h:e}")
    } else {
        format!("composite Simpson with closing 3/8 panel, {n} snapshots, spacing {h:e}")
    }
}

/// Checks that `times` are uniformly spaced and returns the spacing.
pub(crate) fn uniform_spacing(times: &[f64], needed: usize) -> Result<f64> {
    if times.len() < needed {
        return Err(QhdError::TooFewSnapshots { needed, got: times.len() });
    }
    let n = times.len();
    let h = (times[n - 1] - times[0]) / (n - 1) as f64;
    if !(h > 0.0) {
        return Err(QhdError::MisalignedSnapshots("times must increase".into()));
    }
    for (i, &t) in times.iter().enumerate() {
        let expected = times[0] + i as f64 * h;
        if (t - expected).abs() > 1e-9 * h.max(1.0) {
            return Err(QhdError::MisalignedSnapshots(format!(
                "snapshot {i} at t={t}, expected {expected}"
            )));
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_cubics() {
        for n in [5, 6, 7, 8, 21, 22] {
            let h = 1.0 / (n - 1) as f64;
            let w = simpson_weights(n, h).unwrap();
            let q: f64 = (0..n).map(|i| w[i] * (i as f64 * h).powi(3)).sum();
            assert!((q - 0.25).abs() < 1e-14, "{n}");
            let s: f64 = w.iter().sum();
            assert!((s - 1.0).abs() < 1e-14);
            assert!(w.iter().all(|&x| x > 0.0));
        }
    }

    #[test]
    fn spacing_checks() {
        assert!(uniform_spacing(&[0.0, 0.1, 0.2, 0.3, 0.4], 5).is_ok());
        assert!(matches!(
            uniform_spacing(&[0.0, 0.1, 0.2, 0.3], 5),
            Err(QhdError::TooFewSnapshots { .. })
        ));
        assert!(matches!(
            uniform_spacing(&[0.0, 0.1, 0.2, 0.3, 0.45], 5),
            Err(QhdError::MisalignedSnapshots(_))
        ));
    }
}
