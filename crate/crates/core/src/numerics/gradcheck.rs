use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::{Gradients, ParameterStore};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheckConfig {
    pub tolerance: f64,
    pub step: f64,
    /// Above this many coordinates a random subsample is checked instead.
    pub max_coordinates: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig { tolerance: 1e-4, step: 1e-5, max_coordinates: 400, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub passed: bool,
}

/// Compares `analytic` against central differences of `loss`.
///
/// Relative error is `|a − n| / max(|a|, |n|, 1e-5)`; the floor keeps
/// coordinates whose true gradient is zero from dividing round-off by zero.
/// Every parameter array contributes coordinates to the sample, so a wholly
/// wrong array cannot be missed.
pub fn check_gradients(
    params: &ParameterStore,
    analytic: &Gradients,
    mut loss: impl FnMut(&ParameterStore) -> f64,
    config: GradCheckConfig,
) -> GradCheckReport {
    let total = params.total_size();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let budget = config.max_coordinates.max(200);
    let mut coords = Vec::new();
    for id in params.ids() {
        let n = params.get(id).len();
        if total <= budget {
            coords.extend((0..n).map(|i| (id, i)));
        } else {
            let share = ((budget * n) as f64 / total as f64).ceil() as usize;
            let k = share.max(4).min(n);
            coords.extend(sample(&mut rng, n, k).into_iter().map(|i| (id, i)));
        }
    }

    let mut work = params.clone();
    let mut report = GradCheckReport { max_relative_error: 0.0, checked: 0, worst: None, passed: true };
    for (id, i) in coords {
        let original = work.get(id).data()[i];
        work.get_mut(id).data_mut()[i] = original + config.step;
        let plus = loss(&work);
        work.get_mut(id).data_mut()[i] = original - config.step;
        let minus = loss(&work);
        work.get_mut(id).data_mut()[i] = original;
        let numeric = (plus - minus) / (2.0 * config.step);
        let a = analytic.get(id).data()[i];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-5);
        report.checked += 1;
        if err > report.max_relative_error || err.is_nan() {
            report.max_relative_error = err;
            report.worst = Some((params.name(id).to_string(), i));
        }
    }
    report.passed = report.max_relative_error < config.tolerance;
    report
}

#[cfg(test)]
mod tests {
    use super::super::{DenseArray, Graph};
    use super::*;

    fn toy() -> ParameterStore {
        let mut s = ParameterStore::new();
        s.add("w", DenseArray::matrix(2, 3, vec![0.1, -0.3, 0.7, 0.2, 0.5, -0.6]).unwrap()).unwrap();
        s.add("b", DenseArray::vector(vec![0.05, -0.02])).unwrap();
        s
    }

    fn forward(s: &ParameterStore, grads: Option<&mut Gradients>) -> f64 {
        let mut g = Graph::new(s);
        let x = g.input(vec![1.0, 2.0, -0.5]);
        let y = g.affine(s.id("w").unwrap(), s.id("b").unwrap(), x);
        let t = g.tanh(y);
        let sq = g.dot(t, t);
        let loss = g.scale(sq, 0.5);
        if let Some(gr) = grads {
            g.backward(loss, gr);
        }
        g.scalar(loss)
    }

    #[test]
    fn quadratic_toy_passes_tightly() {
        let s = toy();
        let mut grads = s.zero_gradients();
        forward(&s, Some(&mut grads));
        let report = check_gradients(&s, &grads, |p| forward(p, None), GradCheckConfig::default());
        assert!(report.max_relative_error < 1e-8, "{report:?}");
        assert_eq!(report.checked, 8);
    }

    #[test]
    fn corrupted_gradient_fails() {
        let s = toy();
        let mut grads = s.zero_gradients();
        forward(&s, Some(&mut grads));
        grads.get_mut(s.id("b").unwrap()).data_mut().iter_mut().for_each(|v| *v = 0.0);
        let report = check_gradients(&s, &grads, |p| forward(p, None), GradCheckConfig::default());
        assert!(!report.passed);
        assert_eq!(report.worst.unwrap().0, "b");
    }
}
