use super::{AutodiffError, ParameterSet, Tape, Var};

/// Outcome of comparing reverse-mode gradients against central differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// `(parameter name, flat index)` of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub coordinates: usize,
}

/// Relative error `|a − b| / max(1e-8, |a| + |b|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Checks every parameter coordinate of a scalar-valued tape program.
///
/// `forward` must build the same deterministic computation on every call
/// and return a one-element output.
pub fn grad_check<F>(params: &ParameterSet, epsilon: f64, forward: F) -> Result<GradCheckReport, AutodiffError>
where
    F: for<'p> Fn(&mut Tape<'p>) -> Result<Var, AutodiffError>,
{
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(AutodiffError::GradCheck(format!("epsilon {epsilon} outside [1e-7, 1e-3]")));
    }
    let eval = |p: &ParameterSet| -> Result<f64, AutodiffError> {
        let mut tape = Tape::new(p);
        let out = forward(&mut tape)?;
        if tape.size(out) != 1 {
            return Err(AutodiffError::GradCheck(format!("forward produced {} values, expected 1", tape.size(out))));
        }
        let v = tape.value(out)[0];
        if !v.is_finite() {
            return Err(AutodiffError::GradCheck(format!("non-finite forward value {v}")));
        }
        Ok(v)
    };

    let analytic = {
        let mut tape = Tape::new(params);
        let out = forward(&mut tape)?;
        if !tape.value(out).iter().all(|v| v.is_finite()) {
            return Err(AutodiffError::GradCheck("non-finite forward value".into()));
        }
        tape.backward(out)
    };

    let mut probe = params.clone();
    let mut report = GradCheckReport { max_relative_error: 0.0, worst: None, coordinates: 0 };
    let names: Vec<String> = params.names().map(str::to_string).collect();
    for name in names {
        let n = params.get(&name).map_or(0, |t| t.len());
        for i in 0..n {
            let original = params.get(&name).expect("name from set").values()[i];
            probe.get_mut(&name).expect("cloned").values_mut()[i] = original + epsilon;
            let plus = eval(&probe)?;
            probe.get_mut(&name).expect("cloned").values_mut()[i] = original - epsilon;
            let minus = eval(&probe)?;
            probe.get_mut(&name).expect("cloned").values_mut()[i] = original;
            let numeric = (plus - minus) / (2.0 * epsilon);
            let ad = analytic.get(&name).map_or(0.0, |g| g[i]);
            let err = relative_error(ad, numeric);
            report.coordinates += 1;
            if report.worst.is_none() || err > report.max_relative_error {
                report.max_relative_error = err;
                report.worst = Some((name.clone(), i));
            }
        }
    }
    Ok(report)
}
