//! One-hidden-layer ReLU network with a shared torso and several linear
//! heads, trained by masked squared error and Adam.

use ndarray::{Array1, Array2, Axis, Zip};
use rand::Rng;

/// `heads` action-value heads sharing one hidden layer.
///
/// Outputs are laid out `[head][action]` along the second axis, so a batch
/// of `B` states maps to a `B × (heads·actions)` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleNet {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    heads: usize,
    actions: usize,
}

/// Same shapes as the network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl Gradients {
    fn zeros_like(net: &EnsembleNet) -> Self {
        Self {
            w1: Array2::zeros(net.w1.raw_dim()),
            b1: Array1::zeros(net.b1.raw_dim()),
            w2: Array2::zeros(net.w2.raw_dim()),
            b2: Array1::zeros(net.b2.raw_dim()),
        }
    }

    /// All entries in a fixed order (w1, b1, w2, b2).
    pub fn flatten(&self) -> Vec<f64> {
        self.w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(&self.b2)
            .copied()
            .collect()
    }
}

/// Regression targets for one update: head `m` of row `i` is pulled towards
/// `targets[[i, m]]` at action `actions[i]` when `mask[[i, m]]` is one.
#[derive(Debug, Clone)]
pub struct TrainBatch {
    pub inputs: Array2<f64>,
    pub actions: Vec<usize>,
    pub targets: Array2<f64>,
    pub mask: Array2<f64>,
}

struct Cache {
    pre: Array2<f64>,
    hidden: Array2<f64>,
    out: Array2<f64>,
}

impl EnsembleNet {
    /// Uniform `±1/sqrt(fan_in)` initialisation for weights and biases.
    pub fn new<R: Rng + ?Sized>(
        inputs: usize,
        hidden: usize,
        heads: usize,
        actions: usize,
        rng: &mut R,
    ) -> Self {
        let mut uniform = |rows: usize, cols: usize, fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..bound))
        };
        let w1 = uniform(inputs, hidden, inputs);
        let b1 = uniform(1, hidden, inputs).remove_axis(Axis(0));
        let w2 = uniform(hidden, heads * actions, hidden);
        let b2 = uniform(1, heads * actions, hidden).remove_axis(Axis(0));
        Self {
            w1,
            b1,
            w2,
            b2,
            heads,
            actions,
        }
    }

    pub fn heads(&self) -> usize {
        self.heads
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn inputs(&self) -> usize {
        self.w1.nrows()
    }

    fn forward_cached(&self, x: &Array2<f64>) -> Cache {
        let mut pre = x.dot(&self.w1);
        pre += &self.b1;
        let hidden = pre.mapv(|z| z.max(0.0));
        let mut out = hidden.dot(&self.w2);
        out += &self.b2;
        Cache { pre, hidden, out }
    }

    /// Head values for a batch of encoded states.
    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        self.forward_cached(x).out
    }

    fn masked_error(&self, out: &Array2<f64>, batch: &TrainBatch) -> (f64, Array2<f64>) {
        let norm = batch.mask.sum();
        let mut d_out = Array2::zeros(out.raw_dim());
        if norm <= 0.0 {
            return (0.0, d_out);
        }
        let mut loss = 0.0;
        for (i, &a) in batch.actions.iter().enumerate() {
            for m in 0..self.heads {
                let w = batch.mask[[i, m]];
                if w == 0.0 {
                    continue;
                }
                let col = m * self.actions + a;
                let err = out[[i, col]] - batch.targets[[i, m]];
                loss += w * err * err;
                d_out[[i, col]] = 2.0 * w * err / norm;
            }
        }
        (loss / norm, d_out)
    }

    /// Mean squared error over the active (row, head) pairs.
    pub fn loss(&self, batch: &TrainBatch) -> f64 {
        self.masked_error(&self.forward(&batch.inputs), batch).0
    }

    pub fn loss_and_grad(&self, batch: &TrainBatch) -> (f64, Gradients) {
        let cache = self.forward_cached(&batch.inputs);
        let (loss, d_out) = self.masked_error(&cache.out, batch);
        let mut g = Gradients::zeros_like(self);
        g.w2 = cache.hidden.t().dot(&d_out);
        g.b2 = d_out.sum_axis(Axis(0));
        let mut d_pre = d_out.dot(&self.w2.t());
        Zip::from(&mut d_pre).and(&cache.pre).for_each(|d, &z| {
            if z <= 0.0 {
                *d = 0.0;
            }
        });
        g.w1 = batch.inputs.t().dot(&d_pre);
        g.b1 = d_pre.sum_axis(Axis(0));
        (loss, g)
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Mutable access to parameter `i` in the order of [`Gradients::flatten`].
    pub fn param_mut(&mut self, mut i: usize) -> &mut f64 {
        let sizes = [self.w1.len(), self.b1.len(), self.w2.len()];
        if i < sizes[0] {
            return self.w1.iter_mut().nth(i).unwrap();
        }
        i -= sizes[0];
        if i < sizes[1] {
            return &mut self.b1[i];
        }
        i -= sizes[1];
        if i < sizes[2] {
            return self.w2.iter_mut().nth(i).unwrap();
        }
        &mut self.b2[i - sizes[2]]
    }
}

/// Adam optimiser state.
///
/// For each parameter θ with gradient g at step t:
/// `m ← β1·m + (1−β1)·g`, `v ← β2·v + (1−β2)·g²`,
/// `θ ← θ − lr·m̂/(sqrt(v̂)+ε)` with `m̂ = m/(1−β1^t)`, `v̂ = v/(1−β2^t)`.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(net: &EnsembleNet, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
        }
    }

    pub fn step(&mut self, net: &mut EnsembleNet, g: &Gradients) {
        self.t += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let lr = self.lr;
        let update = |theta: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *theta -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        Zip::from(&mut net.w1)
            .and(&mut self.m.w1)
            .and(&mut self.v.w1)
            .and(&g.w1)
            .for_each(|t, m, v, &g| update(t, m, v, g));
        Zip::from(&mut net.b1)
            .and(&mut self.m.b1)
            .and(&mut self.v.b1)
            .and(&g.b1)
            .for_each(|t, m, v, &g| update(t, m, v, g));
        Zip::from(&mut net.w2)
            .and(&mut self.m.w2)
            .and(&mut self.v.w2)
            .and(&g.w2)
            .for_each(|t, m, v, &g| update(t, m, v, g));
        Zip::from(&mut net.b2)
            .and(&mut self.m.b2)
            .and(&mut self.v.b2)
            .and(&g.b2)
            .for_each(|t, m, v, &g| update(t, m, v, g));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_batch(net: &EnsembleNet, rows: usize, rng: &mut ChaCha8Rng) -> TrainBatch {
        TrainBatch {
            inputs: Array2::from_shape_simple_fn((rows, net.inputs()), || {
                rng.random_range(0.0..1.0)
            }),
            actions: (0..rows)
                .map(|_| rng.random_range(0..net.actions()))
                .collect(),
            targets: Array2::from_shape_simple_fn((rows, net.heads()), || {
                rng.random_range(-3.0..3.0)
            }),
            mask: Array2::from_shape_simple_fn((rows, net.heads()), || {
                f64::from(rng.random_bool(0.5))
            }),
        }
    }

    /// Norm-wise relative error between analytic and central-difference gradients.
    pub(crate) fn gradient_check(net: &EnsembleNet, batch: &TrainBatch) -> f64 {
        let (_, g) = net.loss_and_grad(batch);
        let analytic = g.flatten();
        let h = 1e-6;
        let mut numeric = Vec::with_capacity(analytic.len());
        let mut probe = net.clone();
        for i in 0..probe.param_count() {
            let orig = *probe.param_mut(i);
            *probe.param_mut(i) = orig + h;
            let up = probe.loss(batch);
            *probe.param_mut(i) = orig - h;
            let down = probe.loss(batch);
            *probe.param_mut(i) = orig;
            numeric.push((up - down) / (2.0 * h));
        }
        let diff: f64 = analytic
            .iter()
            .zip(&numeric)
            .map(|(a, n)| (a - n).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt()
            + numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
        diff / scale.max(1e-300)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let net = EnsembleNet::new(
                rng.random_range(1..4),
                rng.random_range(3..9),
                rng.random_range(1..4),
                rng.random_range(2..5),
                &mut rng,
            );
            let batch = random_batch(&net, 6, &mut rng);
            let rel = gradient_check(&net, &batch);
            assert!(rel <= 1e-4, "relative error {rel}");
        }
    }

    #[test]
    fn gradient_is_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = EnsembleNet::new(3, 32, 4, 5, &mut rng);
        let batch = random_batch(&net, 40, &mut rng);
        let order: Vec<usize> = (0..40).rev().collect();
        let permuted = TrainBatch {
            inputs: batch.inputs.select(Axis(0), &order),
            actions: order.iter().map(|&i| batch.actions[i]).collect(),
            targets: batch.targets.select(Axis(0), &order),
            mask: batch.mask.select(Axis(0), &order),
        };
        let (l1, g1) = net.loss_and_grad(&batch);
        let (l2, g2) = net.loss_and_grad(&permuted);
        assert!((l1 - l2).abs() < 1e-9);
        for (a, b) in g1.flatten().iter().zip(g2.flatten()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn adam_reduces_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut net = EnsembleNet::new(2, 16, 2, 3, &mut rng);
        let batch = random_batch(&net, 32, &mut rng);
        let mut opt = Adam::new(&net, 1e-2);
        let start = net.loss(&batch);
        for _ in 0..300 {
            let (_, g) = net.loss_and_grad(&batch);
            opt.step(&mut net, &g);
        }
        assert!(net.loss(&batch) < 0.5 * start);
    }

    #[test]
    fn empty_mask_gives_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = EnsembleNet::new(2, 4, 2, 3, &mut rng);
        let mut batch = random_batch(&net, 5, &mut rng);
        batch.mask.fill(0.0);
        let (loss, g) = net.loss_and_grad(&batch);
        assert_eq!(loss, 0.0);
        assert!(g.flatten().iter().all(|&x| x == 0.0));
    }
}
