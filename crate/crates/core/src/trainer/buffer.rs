use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::tensor::Tensor;

/// History of generated images shown to a discriminator.
///
/// Until full, every fresh image is stored and returned. Once full, with
/// probability ½ a uniformly chosen stored image is returned and replaced
/// by the fresh one; otherwise the fresh image is returned unchanged.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    images: Vec<Tensor<f32>>,
    rng: ChaCha8Rng,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, rng: ChaCha8Rng) -> Self {
        ReplayBuffer { capacity, images: Vec::with_capacity(capacity), rng }
    }

    pub fn from_parts(capacity: usize, images: Vec<Tensor<f32>>, rng: ChaCha8Rng) -> Self {
        ReplayBuffer { capacity, images, rng }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[Tensor<f32>] {
        &self.images
    }

    pub fn rng(&self) -> &ChaCha8Rng {
        &self.rng
    }

    pub fn exchange(&mut self, fresh: Tensor<f32>) -> Tensor<f32> {
        self.exchange_traced(fresh).0
    }

    /// Like [`exchange`](Self::exchange), also reporting whether the
    /// returned image came from the history.
    pub fn exchange_traced(&mut self, fresh: Tensor<f32>) -> (Tensor<f32>, bool) {
        if self.capacity == 0 {
            return (fresh, false);
        }
        if self.images.len() < self.capacity {
            self.images.push(fresh.clone());
            return (fresh, false);
        }
        if self.rng.random_bool(0.5) {
            let i = self.rng.random_range(0..self.images.len());
            (std::mem::replace(&mut self.images[i], fresh), true)
        } else {
            (fresh, false)
        }
    }
}
