//! Parameter storage and AdaDelta updates.

use crate::graph::GradMap;
use crate::tensor::Tensor;

/// Index of a parameter slot in a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub usize);

/// One named parameter with its gradient and AdaDelta accumulators.
///
/// All four tensors share a shape; the accumulators stay non-negative.
#[derive(Clone, Debug)]
pub struct ParamSlot {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
    pub accum_grad_sq: Tensor,
    pub accum_update_sq: Tensor,
}

impl ParamSlot {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        let shape = value.shape().to_vec();
        ParamSlot {
            name: name.into(),
            value,
            grad: Tensor::zeros(shape.clone()),
            accum_grad_sq: Tensor::zeros(shape.clone()),
            accum_update_sq: Tensor::zeros(shape),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct AdaDeltaConfig {
    /// Decay ρ in (0, 1).
    pub decay_rho: f64,
    pub epsilon: f64,
    /// Extra multiplier on the update; 1.0 is standard.
    pub scale: f64,
}

impl Default for AdaDeltaConfig {
    fn default() -> Self {
        AdaDeltaConfig {
            decay_rho: 0.95,
            epsilon: 1e-6,
            scale: 1.0,
        }
    }
}

/// One AdaDelta step on a slot; consumes and zeroes the gradient.
pub fn adadelta_step(slot: &mut ParamSlot, cfg: &AdaDeltaConfig) {
    let rho = cfg.decay_rho;
    let n = slot.value.len();
    for i in 0..n {
        let g = slot.grad.data()[i];
        let ag = rho * slot.accum_grad_sq.data()[i] + (1.0 - rho) * g * g;
        let delta = -cfg.scale * ((slot.accum_update_sq.data()[i] + cfg.epsilon).sqrt()
            / (ag + cfg.epsilon).sqrt())
            * g;
        let au = rho * slot.accum_update_sq.data()[i] + (1.0 - rho) * delta * delta;
        slot.accum_grad_sq.data_mut()[i] = ag;
        slot.accum_update_sq.data_mut()[i] = au;
        slot.value.data_mut()[i] += delta;
    }
    slot.grad.fill(0.0);
}

/// Flat, append-only collection of parameter slots.
///
/// Slot indices double as [`ParamId`]s, so update order is always the
/// allocation order and runs stay deterministic.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    slots: Vec<ParamSlot>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.slots.push(ParamSlot::new(name, value));
        ParamId(self.slots.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slot(&self, id: ParamId) -> &ParamSlot {
        &self.slots[id.0]
    }

    pub fn slot_mut(&mut self, id: ParamId) -> &mut ParamSlot {
        &mut self.slots[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.slots[id.0].value
    }

    pub fn slots(&self) -> &[ParamSlot] {
        &self.slots
    }

    /// Add a batch gradient into the slots, in parameter-id order.
    pub fn accumulate(&mut self, grads: &GradMap) {
        for (id, g) in grads.iter() {
            self.slots[id.0].grad.add_assign(g);
        }
    }

    /// Apply AdaDelta to every slot in allocation order.
    pub fn step_all(&mut self, cfg: &AdaDeltaConfig) {
        for slot in &mut self.slots {
            adadelta_step(slot, cfg);
        }
    }

    /// Snapshot of all values (used for best-epoch selection).
    pub fn snapshot_values(&self) -> Vec<Tensor> {
        self.slots.iter().map(|s| s.value.clone()).collect()
    }

    pub fn restore_values(&mut self, values: &[Tensor]) {
        assert_eq!(values.len(), self.slots.len());
        for (slot, v) in self.slots.iter_mut().zip(values) {
            slot.value = v.clone();
        }
    }
}
