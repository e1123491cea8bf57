use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::params::ParameterStore;

/// Outcome of comparing analytic gradients against central differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Parameter name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub entries_checked: usize,
}

/// Maximum over every parameter entry of
/// `|analytic − numeric| / max(|analytic|, |numeric|, 1e-8)`.
pub fn gradient_check<F>(f: F, params: &ParameterStore, eps: f64) -> Result<f64>
where
    F: Fn(&Graph, &ParameterStore) -> Result<Var>,
{
    gradient_check_report(f, params, eps).map(|r| r.max_relative_error)
}

pub fn gradient_check_report<F>(f: F, params: &ParameterStore, eps: f64) -> Result<GradCheckReport>
where
    F: Fn(&Graph, &ParameterStore) -> Result<Var>,
{
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::arg(format!("eps must be positive, got {eps}")));
    }
    let graph = Graph::new();
    let loss = f(&graph, params)?;
    let analytic = graph.backward(loss)?;

    let evaluate = |store: &ParameterStore| -> Result<f64> {
        let g = Graph::new();
        let out = f(&g, store)?;
        let v = g.scalar(out)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Numeric("gradient_check objective".into()))
        }
    };

    let mut probe = params.clone();
    let names: Vec<String> = params.names().map(str::to_owned).collect();
    let mut report = GradCheckReport { max_relative_error: 0.0, worst: None, entries_checked: 0 };
    for name in names {
        let len = params.get(&name).map_or(0, |t| t.len());
        let grad = analytic.get(&name);
        for i in 0..len {
            let original = params.get(&name).expect("name from store").data()[i];
            probe.get_mut(&name).expect("name from store").data_mut()[i] = original + eps;
            let plus = evaluate(&probe)?;
            probe.get_mut(&name).expect("name from store").data_mut()[i] = original - eps;
            let minus = evaluate(&probe)?;
            probe.get_mut(&name).expect("name from store").data_mut()[i] = original;

            let numeric = (plus - minus) / (2.0 * eps);
            let exact = grad.map_or(0.0, |g| g.data()[i]);
            let denom = exact.abs().max(numeric.abs()).max(1e-8);
            let rel = (exact - numeric).abs() / denom;
            report.entries_checked += 1;
            if rel > report.max_relative_error || report.worst.is_none() {
                report.max_relative_error = report.max_relative_error.max(rel);
                if rel >= report.max_relative_error {
                    report.worst = Some((name.clone(), i));
                }
            }
        }
    }
    Ok(report)
}
