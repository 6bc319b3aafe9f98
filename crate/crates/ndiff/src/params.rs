use std::collections::HashMap;

use crate::error::NdiffError;
use crate::real::Real;
use crate::tensor::Tensor;

/// Index of a parameter inside its [`ParamStore`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// A named trainable tensor with its gradient accumulator. The accumulator
/// is zeroed by the optimizer after each step.
#[derive(Clone, Debug)]
pub struct Parameter<T> {
    pub id: String,
    pub value: Tensor<T>,
    pub grad: Vec<T>,
    pub trainable: bool,
}

/// Ordered collection of parameters. Creation order is part of the model's
/// determinism contract: seeded initialization draws in this order.
#[derive(Clone, Debug, Default)]
pub struct ParamStore<T> {
    params: Vec<Parameter<T>>,
    by_id: HashMap<String, usize>,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            params: Vec::new(),
            by_id: HashMap::new(),
        }
    }

    pub fn add(
        &mut self,
        id: impl Into<String>,
        value: Tensor<T>,
        trainable: bool,
    ) -> Result<ParamId, NdiffError> {
        let id = id.into();
        if self.by_id.contains_key(&id) {
            return Err(NdiffError::DuplicateParameter(id));
        }
        let grad = vec![T::zero(); value.numel()];
        let idx = self.params.len();
        self.by_id.insert(id.clone(), idx);
        self.params.push(Parameter {
            id,
            value,
            grad,
            trainable,
        });
        Ok(ParamId(idx))
    }

    pub fn id_of(&self, name: &str) -> Result<ParamId, NdiffError> {
        self.by_id
            .get(name)
            .map(|&i| ParamId(i))
            .ok_or_else(|| NdiffError::UnknownParameter(name.to_string()))
    }

    pub fn get(&self, id: ParamId) -> &Parameter<T> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter<T> {
        &mut self.params[id.0]
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Parameters in creation order.
    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter<T>)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.iter_mut().for_each(|g| *g = T::zero());
        }
    }

    pub(crate) fn accumulate(&mut self, id: ParamId, grad: &[T]) {
        let acc = &mut self.params[id.0].grad;
        debug_assert_eq!(acc.len(), grad.len());
        for (a, &g) in acc.iter_mut().zip(grad) {
            *a = *a + g;
        }
    }

    /// Overwrite a parameter's values, keeping shape.
    pub fn set_value(&mut self, id: ParamId, value: Tensor<T>) -> Result<(), NdiffError> {
        let p = &mut self.params[id.0];
        if p.value.shape() != value.shape() {
            return Err(NdiffError::ShapeMismatch {
                kernel: "set_value",
                lhs: p.value.shape().to_vec(),
                rhs: value.shape().to_vec(),
            });
        }
        p.value = value;
        Ok(())
    }
}
