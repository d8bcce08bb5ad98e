use std::collections::BTreeMap;

use super::AutodiffError;

/// Dense row-major `f64` array with an optional gradient slot.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Vec<f64>,
    grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self, AutodiffError> {
        let expected: usize = shape.iter().product();
        if expected != values.len() {
            return Err(AutodiffError::Shape {
                op: "tensor",
                detail: format!("shape {:?} needs {} values, got {}", shape, expected, values.len()),
            });
        }
        Ok(Self { shape, values, grad: None })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self { shape, values: vec![0.0; n], grad: None }
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self { shape: vec![values.len()], values, grad: None }
    }

    pub fn scalar(value: f64) -> Self {
        Self { shape: vec![1], values: vec![value], grad: None }
    }

    /// Enables (and zeroes) the gradient slot.
    pub fn with_grad(mut self) -> Self {
        self.grad = Some(vec![0.0; self.values.len()]);
        self
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    pub fn grad_mut(&mut self) -> Option<&mut [f64]> {
        self.grad.as_deref_mut()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = self.grad.as_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
            && self.grad.as_ref().map_or(true, |g| g.iter().all(|v| v.is_finite()))
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self, AutodiffError> {
        let expected: usize = shape.iter().product();
        if expected != self.values.len() {
            return Err(AutodiffError::Shape {
                op: "reshape",
                detail: format!("{:?} -> {:?}", self.shape, shape),
            });
        }
        self.shape = shape;
        Ok(self)
    }
}

/// Gradients produced by one backward pass, keyed by parameter name.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Gradients {
    by_name: BTreeMap<String, Vec<f64>>,
}

impl Gradients {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.by_name.get(name).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.by_name.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn insert(&mut self, name: impl Into<String>, grad: Vec<f64>) {
        self.by_name.insert(name.into(), grad);
    }

    /// Adds `other` into `self`, name by name.
    pub fn add_assign(&mut self, other: &Gradients) {
        for (name, g) in &other.by_name {
            match self.by_name.get_mut(name) {
                Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
                None => {
                    self.by_name.insert(name.clone(), g.clone());
                }
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.by_name.values_mut() {
            g.iter_mut().for_each(|v| *v *= factor);
        }
    }
}

/// Named, ordered collection of trainable tensors.
///
/// Iteration order is lexicographic by name, which fixes the layout of
/// checkpoints and of every reduction over parameters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParameterSet {
    entries: BTreeMap<String, Tensor>,
}

impl ParameterSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a parameter; the gradient slot is enabled if absent.
    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<(), AutodiffError> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(AutodiffError::DuplicateParameter(name));
        }
        let tensor = if tensor.grad.is_some() { tensor } else { tensor.with_grad() };
        self.entries.insert(name, tensor);
        Ok(())
    }

    /// Inserts without enabling a gradient slot.
    pub fn insert_frozen(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<(), AutodiffError> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(AutodiffError::DuplicateParameter(name));
        }
        self.entries.insert(name, tensor);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.entries.get_mut(name)
    }

    pub fn require(&self, name: &str) -> Result<&Tensor, AutodiffError> {
        self.entries
            .get(name)
            .ok_or_else(|| AutodiffError::UnknownParameter(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.entries.values().map(Tensor::len).sum()
    }

    pub fn zero_grad(&mut self) {
        self.entries.values_mut().for_each(Tensor::zero_grad);
    }

    /// Adds a backward pass's gradients into the per-tensor gradient slots.
    pub fn accumulate(&mut self, grads: &Gradients) -> Result<(), AutodiffError> {
        for (name, g) in grads.iter() {
            let t = self
                .entries
                .get_mut(name)
                .ok_or_else(|| AutodiffError::UnknownParameter(name.to_string()))?;
            let n = t.values.len();
            let slot = t.grad.get_or_insert_with(|| vec![0.0; n]);
            slot.iter_mut().zip(g).for_each(|(a, b)| *a += b);
        }
        Ok(())
    }

    /// True when both sets hold the same names with the same shapes.
    pub fn same_layout(&self, other: &ParameterSet) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|((na, ta), (nb, tb))| na == nb && ta.shape == tb.shape)
    }

    /// Copies every value from `source`, which must share this set's layout.
    pub fn copy_values_from(&mut self, source: &ParameterSet) -> Result<(), AutodiffError> {
        if !self.same_layout(source) {
            return Err(AutodiffError::Config("parameter layouts differ".into()));
        }
        for (dst, src) in self.entries.values_mut().zip(source.entries.values()) {
            dst.values.copy_from_slice(&src.values);
        }
        Ok(())
    }
}

/// Plain gradient descent: `θ ← θ − lr·∂L/∂θ`, then gradients are zeroed.
pub fn sgd_update(params: &mut ParameterSet, learning_rate: f64) -> Result<(), AutodiffError> {
    Sgd::new(learning_rate, 0.0).step(params)
}

/// Gradient descent with optional heavy-ball momentum.
#[derive(Clone, Debug)]
pub struct Sgd {
    pub learning_rate: f64,
    pub momentum: f64,
    velocity: BTreeMap<String, Vec<f64>>,
}

impl Sgd {
    pub fn new(learning_rate: f64, momentum: f64) -> Self {
        Self { learning_rate, momentum, velocity: BTreeMap::new() }
    }

    pub fn step(&mut self, params: &mut ParameterSet) -> Result<(), AutodiffError> {
        if params.entries.values().any(|t| t.grad.is_none()) {
            let name = params.entries.iter().find(|(_, t)| t.grad.is_none()).map(|(n, _)| n.clone());
            return Err(AutodiffError::MissingGradient(name.unwrap_or_default()));
        }
        let lr = self.learning_rate;
        for (name, t) in params.entries.iter_mut() {
            let grad = t.grad.as_mut().expect("checked above");
            if self.momentum == 0.0 {
                t.values.iter_mut().zip(grad.iter()).for_each(|(v, g)| *v -= lr * g);
            } else {
                let vel = self
                    .velocity
                    .entry(name.clone())
                    .or_insert_with(|| vec![0.0; grad.len()]);
                for ((v, g), m) in t.values.iter_mut().zip(grad.iter()).zip(vel.iter_mut()) {
                    *m = self.momentum * *m + g;
                    *v -= lr * *m;
                }
            }
            grad.iter_mut().for_each(|g| *g = 0.0);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(value: f64, grad: f64) -> ParameterSet {
        let mut p = ParameterSet::new();
        p.insert("theta", Tensor::scalar(value)).unwrap();
        p.get_mut("theta").unwrap().grad_mut().unwrap()[0] = grad;
        p
    }

    #[test]
    fn shape_must_match_values() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert_eq!(Tensor::new(vec![2, 3], vec![0.0; 6]).unwrap().len(), 6);
    }

    #[test]
    fn sgd_step_with_default_learning_rate() {
        let mut p = single(1.0, 1.0);
        sgd_update(&mut p, 1.70974e-4).unwrap();
        let theta = p.get("theta").unwrap().values()[0];
        assert!((theta - 0.99982903).abs() < 5e-9, "{theta}");
        assert_eq!(p.get("theta").unwrap().grad().unwrap()[0], 0.0);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = single(0.25, 0.0);
        sgd_update(&mut p, 0.1).unwrap();
        assert_eq!(p.get("theta").unwrap().values()[0], 0.25);
    }

    #[test]
    fn two_updates_equal_one_doubled() {
        let mut a = single(2.0, 0.5);
        sgd_update(&mut a, 0.5).unwrap();
        a.get_mut("theta").unwrap().grad_mut().unwrap()[0] = 0.5;
        sgd_update(&mut a, 0.5).unwrap();
        let mut b = single(2.0, 1.0);
        sgd_update(&mut b, 0.5).unwrap();
        assert_eq!(a.get("theta").unwrap().values(), b.get("theta").unwrap().values());
    }

    #[test]
    fn missing_gradient_names_parameter() {
        let mut p = ParameterSet::new();
        p.insert_frozen("frozen", Tensor::scalar(1.0)).unwrap();
        match sgd_update(&mut p, 0.1) {
            Err(AutodiffError::MissingGradient(name)) => assert_eq!(name, "frozen"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn names_iterate_lexicographically() {
        let mut p = ParameterSet::new();
        for n in ["b", "a", "c"] {
            p.insert(n, Tensor::scalar(0.0)).unwrap();
        }
        assert_eq!(p.names().collect::<Vec<_>>(), ["a", "b", "c"]);
        assert!(p.insert("a", Tensor::scalar(1.0)).is_err());
    }

    #[test]
    fn momentum_accumulates_velocity() {
        let mut p = single(0.0, 1.0);
        let mut opt = Sgd::new(0.1, 0.5);
        opt.step(&mut p).unwrap();
        p.get_mut("theta").unwrap().grad_mut().unwrap()[0] = 1.0;
        opt.step(&mut p).unwrap();
        // v1 = 1, v2 = 1.5
        assert!((p.get("theta").unwrap().values()[0] + 0.25).abs() < 1e-15);
    }
}
