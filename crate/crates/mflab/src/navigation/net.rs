//! Layered polynomial graph filters with hand-rolled reverse-mode gradients.
//!
//! Each layer computes `X_out = sigma( sum_k S^k X_in H_k )` with a bank of
//! tap matrices `H_k` per layer. The spec-scale models are tiny (two features
//! in and out, 5 taps), so gradients are accumulated explicitly rather than
//! through an autodiff framework.

use std::sync::Arc;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

use super::NavDataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nonlinearity {
    Tanh,
    None,
}

#[derive(Debug, Clone)]
pub struct Layer {
    /// taps[k] is the (in_features x out_features) coefficient matrix of the
    /// k-th diffusion power.
    pub taps: Vec<Array2<f64>>,
    pub nonlinearity: Nonlinearity,
}

/// A stack of graph filter layers sharing one graph shift operator.
#[derive(Debug, Clone)]
pub struct FilterNet {
    pub gso: Arc<Array2<f64>>,
    pub layers: Vec<Layer>,
    pub feature_widths: Vec<usize>,
    pub taps_per_layer: usize,
}

/// Training result: the fitted model plus the per-epoch loss history.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: FilterNet,
    pub loss_history: Vec<f64>,
}

/// Serializable parameters (everything except the shift operator).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterNetParams {
    pub feature_widths: Vec<usize>,
    pub taps_per_layer: usize,
    pub nonlinearities: Vec<Nonlinearity>,
    /// layer -> tap -> in-feature -> out-feature
    pub taps: Vec<Vec<Vec<Vec<f64>>>>,
}

impl FilterNet {
    /// Builds a net with zeroed taps. `feature_widths` runs from the input
    /// width to the output width (both 2 for the navigation task); hidden
    /// layers get tanh unless disabled, the last layer is always linear.
    pub fn new(
        gso: Arc<Array2<f64>>,
        feature_widths: &[usize],
        taps_per_layer: usize,
        tanh_hidden: bool,
        seed: u64,
    ) -> Result<Self> {
        if feature_widths.len() < 2 {
            return Err(Error::invalid("need at least one layer"));
        }
        if feature_widths.first() != Some(&2) || feature_widths.last() != Some(&2) {
            return Err(Error::invalid("feature widths must start and end at 2"));
        }
        if taps_per_layer == 0 {
            return Err(Error::invalid("taps_per_layer must be positive"));
        }
        let n_layers = feature_widths.len() - 1;
        let mut layers = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let nonlinearity = if l + 1 == n_layers || !tanh_hidden {
                Nonlinearity::None
            } else {
                Nonlinearity::Tanh
            };
            layers.push(Layer {
                taps: (0..taps_per_layer)
                    .map(|_| Array2::zeros((feature_widths[l], feature_widths[l + 1])))
                    .collect(),
                nonlinearity,
            });
        }
        let mut net = FilterNet {
            gso,
            layers,
            feature_widths: feature_widths.to_vec(),
            taps_per_layer,
        };
        net.reinit(seed);
        Ok(net)
    }

    /// One-layer linear model, 5 taps.
    pub fn one_layer(gso: Arc<Array2<f64>>, seed: u64) -> Result<Self> {
        Self::new(gso, &[2, 2], 5, true, seed)
    }

    /// Two-layer model with a tanh hidden stage.
    pub fn two_layer(gso: Arc<Array2<f64>>, hidden: usize, seed: u64) -> Result<Self> {
        Self::new(gso, &[2, hidden, 2], 5, true, seed)
    }

    /// Deterministic re-initialization: taps uniform in [-0.1, 0.1] drawn in
    /// a fixed (layer, tap, in, out) order.
    pub fn reinit(&mut self, seed: u64) {
        let mut rng = rng_from_seed(seed);
        for layer in &mut self.layers {
            for tap in &mut layer.taps {
                for w in tap.iter_mut() {
                    *w = rng.gen_range(-0.1..0.1);
                }
            }
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.taps.iter().map(|t| t.len()).sum::<usize>())
            .sum()
    }

    /// Forward pass over all nodes: input is (n x in_features).
    pub fn forward(&self, input: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_cached(input)?.into_output())
    }

    fn forward_cached(&self, input: &Array2<f64>) -> Result<ForwardCache> {
        let n = self.gso.nrows();
        if input.nrows() != n || input.ncols() != self.feature_widths[0] {
            return Err(Error::invalid(format!(
                "input must be {n}x{}, got {}x{}",
                self.feature_widths[0],
                input.nrows(),
                input.ncols()
            )));
        }
        let mut cache = ForwardCache {
            diffusions: Vec::with_capacity(self.layers.len()),
            activations: Vec::with_capacity(self.layers.len()),
        };
        let mut x = input.clone();
        for layer in &self.layers {
            // diffusion stack D_k = S^k X
            let mut diffusions = Vec::with_capacity(layer.taps.len());
            diffusions.push(x.clone());
            for k in 1..layer.taps.len() {
                let next = self.gso.dot(&diffusions[k - 1]);
                diffusions.push(next);
            }
            let mut z: Array2<f64> = Array2::zeros((x.nrows(), layer.taps[0].ncols()));
            for (d, h) in diffusions.iter().zip(&layer.taps) {
                z = z + d.dot(h);
            }
            let out = match layer.nonlinearity {
                Nonlinearity::Tanh => z.mapv(f64::tanh),
                Nonlinearity::None => z,
            };
            cache.diffusions.push(diffusions);
            cache.activations.push(out.clone());
            x = out;
        }
        Ok(cache)
    }

    pub fn to_params(&self) -> FilterNetParams {
        FilterNetParams {
            feature_widths: self.feature_widths.clone(),
            taps_per_layer: self.taps_per_layer,
            nonlinearities: self.layers.iter().map(|l| l.nonlinearity).collect(),
            taps: self
                .layers
                .iter()
                .map(|l| {
                    l.taps
                        .iter()
                        .map(|t| t.rows().into_iter().map(|r| r.to_vec()).collect())
                        .collect()
                })
                .collect(),
        }
    }

    pub fn from_params(gso: Arc<Array2<f64>>, params: &FilterNetParams) -> Result<Self> {
        let widths = &params.feature_widths;
        if widths.len() < 2 || params.nonlinearities.len() != widths.len() - 1 {
            return Err(Error::invalid("inconsistent model parameters"));
        }
        let mut layers = Vec::new();
        for (l, banks) in params.taps.iter().enumerate() {
            let mut taps = Vec::new();
            for bank in banks {
                let rows = bank.len();
                let cols = bank.first().map(|r| r.len()).unwrap_or(0);
                if rows != widths[l] || cols != widths[l + 1] {
                    return Err(Error::invalid("tap bank shape mismatch"));
                }
                let flat: Vec<f64> = bank.iter().flatten().copied().collect();
                taps.push(
                    Array2::from_shape_vec((rows, cols), flat)
                        .map_err(|e| Error::invalid(e.to_string()))?,
                );
            }
            layers.push(Layer {
                taps,
                nonlinearity: params.nonlinearities[l],
            });
        }
        Ok(FilterNet {
            gso,
            layers,
            feature_widths: widths.clone(),
            taps_per_layer: params.taps_per_layer,
        })
    }
}

struct ForwardCache {
    /// per layer: the diffusion stack [X, SX, S^2 X, ...]
    diffusions: Vec<Vec<Array2<f64>>>,
    /// per layer: post-nonlinearity output
    activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    fn into_output(mut self) -> Array2<f64> {
        self.activations.pop().expect("at least one layer")
    }
}

/// The graph shift operator used for training: the adjacency rescaled by its
/// largest eigenvalue (power-iteration estimate), keeping tap powers bounded.
pub fn training_gso(adjacency: &Array2<f64>) -> Result<Array2<f64>> {
    let n = adjacency.nrows();
    if n == 0 {
        return Err(Error::invalid("empty adjacency"));
    }
    let mut v = ndarray::Array1::<f64>::from_elem(n, 1.0 / (n as f64).sqrt());
    let mut lambda = 0.0f64;
    for _ in 0..200 {
        let next = adjacency.dot(&v);
        let norm = next.dot(&next).sqrt();
        if norm == 0.0 {
            return Err(Error::NumericalFailure("adjacency annihilated the probe".into()));
        }
        let next = next / norm;
        lambda = next.dot(&adjacency.dot(&next));
        v = next;
    }
    if lambda <= 0.0 {
        return Err(Error::NumericalFailure("nonpositive dominant eigenvalue".into()));
    }
    Ok(adjacency / lambda)
}

/// Full-batch gradient descent on the squared error between model outputs
/// and unit direction labels, summed over the labeled nodes. The labeled set
/// is small (a handful of shortest-path waypoints), so the summed loss keeps
/// gradient magnitudes in a range the reference learning rate can use.
/// Parameters are re-initialized from `seed`, so a fixed seed gives identical
/// training runs.
pub fn train_filter(
    model: &FilterNet,
    data: &NavDataset,
    epochs: usize,
    lr: f64,
    seed: u64,
) -> Result<TrainOutcome> {
    let n = model.gso.nrows();
    if data.cloud.len() != n {
        return Err(Error::invalid("dataset cloud does not match model gso"));
    }
    if data.labeled_indices.is_empty() {
        return Err(Error::invalid("dataset has no labels"));
    }

    let mut net = model.clone();
    net.reinit(seed);

    // input: node positions as a 2-feature signal
    let mut input = Array2::<f64>::zeros((n, 2));
    for i in 0..n {
        let p = data.cloud.point(i);
        input[(i, 0)] = p[0];
        input[(i, 1)] = p[1];
    }
    let mut target = Array2::<f64>::zeros((n, 2));
    let mut mask = vec![false; n];
    for (&i, dir) in data.labeled_indices.iter().zip(&data.labels) {
        target[(i, 0)] = dir[0];
        target[(i, 1)] = dir[1];
        mask[i] = true;
    }

    let mut history = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let cache = net.forward_cached(&input)?;
        let output = cache.activations.last().expect("layer output");

        // loss = (1/2) sum over labeled nodes of squared error
        let mut loss = 0.0f64;
        let mut grad_out = Array2::<f64>::zeros((n, 2));
        for i in 0..n {
            if !mask[i] {
                continue;
            }
            for c in 0..2 {
                let diff = output[(i, c)] - target[(i, c)];
                loss += diff * diff;
                grad_out[(i, c)] = diff;
            }
        }
        loss /= 2.0;
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        history.push(loss);

        let grads = backward(&net, &input, &cache, grad_out);
        for (layer, layer_grads) in net.layers.iter_mut().zip(grads) {
            for (tap, g) in layer.taps.iter_mut().zip(layer_grads) {
                tap.scaled_add(-lr, &g);
            }
        }
    }
    Ok(TrainOutcome {
        model: net,
        loss_history: history,
    })
}

/// Compares the reverse-mode gradient of the training loss against central
/// finite differences for every parameter; returns the worst relative error.
#[allow(clippy::needless_range_loop)]
pub fn gradient_check_max_rel_error(model: &FilterNet, data: &NavDataset) -> Result<f64> {
    let n = model.gso.nrows();
    if data.cloud.len() != n {
        return Err(Error::invalid("dataset cloud does not match model gso"));
    }
    let mut input = Array2::<f64>::zeros((n, 2));
    for i in 0..n {
        let p = data.cloud.point(i);
        input[(i, 0)] = p[0];
        input[(i, 1)] = p[1];
    }
    let mut target = Array2::<f64>::zeros((n, 2));
    let mut mask = vec![false; n];
    for (&i, dir) in data.labeled_indices.iter().zip(&data.labels) {
        target[(i, 0)] = dir[0];
        target[(i, 1)] = dir[1];
        mask[i] = true;
    }

    let loss_of = |net: &FilterNet| -> Result<f64> {
        let out = net.forward(&input)?;
        let mut loss = 0.0;
        for i in 0..n {
            if mask[i] {
                for c in 0..2 {
                    let d = out[(i, c)] - target[(i, c)];
                    loss += d * d;
                }
            }
        }
        Ok(loss / 2.0)
    };

    let cache = model.forward_cached(&input)?;
    let out = cache.activations.last().expect("layer output");
    let mut grad_out = Array2::<f64>::zeros((n, 2));
    for i in 0..n {
        if mask[i] {
            for c in 0..2 {
                grad_out[(i, c)] = out[(i, c)] - target[(i, c)];
            }
        }
    }
    let grads = backward(model, &input, &cache, grad_out);

    let h = 1e-6;
    let mut worst = 0.0f64;
    for l in 0..model.layers.len() {
        for k in 0..model.layers[l].taps.len() {
            let (rows, cols) = model.layers[l].taps[k].dim();
            for a in 0..rows {
                for b in 0..cols {
                    let mut plus = model.clone();
                    plus.layers[l].taps[k][(a, b)] += h;
                    let mut minus = model.clone();
                    minus.layers[l].taps[k][(a, b)] -= h;
                    let fd = (loss_of(&plus)? - loss_of(&minus)?) / (2.0 * h);
                    let an = grads[l][k][(a, b)];
                    let scale = fd.abs().max(an.abs()).max(1e-8);
                    worst = worst.max((fd - an).abs() / scale);
                }
            }
        }
    }
    Ok(worst)
}

/// Reverse-mode accumulation through the tap banks and nonlinearities.
/// Returns per-layer, per-tap gradients.
fn backward(
    net: &FilterNet,
    input: &Array2<f64>,
    cache: &ForwardCache,
    grad_output: Array2<f64>,
) -> Vec<Vec<Array2<f64>>> {
    let n_layers = net.layers.len();
    let mut grads: Vec<Vec<Array2<f64>>> = Vec::with_capacity(n_layers);
    let mut upstream = grad_output;

    for l in (0..n_layers).rev() {
        let layer = &net.layers[l];
        let out = &cache.activations[l];
        // through the nonlinearity: d tanh(z) = 1 - tanh(z)^2
        let gz = match layer.nonlinearity {
            Nonlinearity::Tanh => {
                let mut g = upstream.clone();
                g.zip_mut_with(out, |gv, &y| *gv *= 1.0 - y * y);
                g
            }
            Nonlinearity::None => upstream.clone(),
        };

        // tap gradients: dH_k = D_k^T G
        let layer_grads: Vec<Array2<f64>> = cache.diffusions[l]
            .iter()
            .map(|d| d.t().dot(&gz))
            .collect();

        // input gradient: sum_k S^k (G H_k^T), via a Horner-style recursion
        if l > 0 {
            let last = layer.taps.len() - 1;
            let mut acc = gz.dot(&layer.taps[last].t());
            for k in (0..last).rev() {
                acc = net.gso.dot(&acc) + gz.dot(&layer.taps[k].t());
            }
            upstream = acc;
        } else {
            let _ = input;
        }
        grads.push(layer_grads);
    }
    grads.reverse();
    grads
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{CloudDomain, PointCloud};
    use ndarray::array;

    fn six_node_setup() -> (Arc<Array2<f64>>, NavDataset) {
        let points = array![
            [0.1, 0.1],
            [0.3, 0.2],
            [0.5, 0.4],
            [0.6, 0.7],
            [0.8, 0.8],
            [0.2, 0.6]
        ];
        let cloud = Arc::new(PointCloud {
            points,
            intrinsic_dim: 2,
            domain: CloudDomain::PlanarFreeSpace,
            seed: 0,
        });
        let map = super::super::NavMap::new(
            super::super::Rect::new(0.0, 0.0, 1.0, 1.0),
            vec![],
            [0.8, 0.8],
        )
        .unwrap();
        let g = super::super::build_nav_graph(&map, &cloud, 0.15).unwrap();
        let gso = Arc::new(training_gso(&g.adjacency).unwrap());
        let data = super::super::dijkstra_labels(&g, &cloud, &map, 4, 2).unwrap();
        (gso, data)
    }

    #[test]
    fn gso_spectral_radius_is_one() {
        let (gso, _) = six_node_setup();
        let spec = crate::spectral::eig_sym(&gso, 1e-12).unwrap();
        let radius = spec
            .eigenvalues
            .iter()
            .fold(0.0f64, |a, &b| a.max(b.abs()));
        assert!((radius - 1.0).abs() < 1e-6, "radius {radius}");
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let (gso, data) = six_node_setup();
        let arch = FilterNet::two_layer(Arc::clone(&gso), 4, 0).unwrap();
        let out = train_filter(&arch, &data, 0, 2e-4, 42).unwrap();
        let mut fresh = arch.clone();
        fresh.reinit(42);
        for (a, b) in out.model.layers.iter().zip(&fresh.layers) {
            for (ta, tb) in a.taps.iter().zip(&b.taps) {
                assert_eq!(ta, tb);
            }
        }
        assert!(out.loss_history.is_empty());
    }

    #[test]
    fn training_is_deterministic() {
        let (gso, data) = six_node_setup();
        let arch = FilterNet::one_layer(Arc::clone(&gso), 0).unwrap();
        let a = train_filter(&arch, &data, 50, 1e-3, 7).unwrap();
        let b = train_filter(&arch, &data, 50, 1e-3, 7).unwrap();
        for (la, lb) in a.model.layers.iter().zip(&b.model.layers) {
            for (ta, tb) in la.taps.iter().zip(&lb.taps) {
                assert_eq!(ta, tb);
            }
        }
        assert_eq!(a.loss_history, b.loss_history);
    }

    #[test]
    fn overfits_a_single_label() {
        let (gso, data) = six_node_setup();
        let single = NavDataset {
            cloud: data.cloud.clone(),
            labeled_indices: vec![data.labeled_indices[0]],
            labels: vec![data.labels[0]],
            trajectories: vec![],
            goal_node: data.goal_node,
            skipped_trajectories: 0,
        };
        let arch = FilterNet::new(Arc::clone(&gso), &[2, 2], 5, false, 0).unwrap();
        let out = train_filter(&arch, &single, 2000, 0.05, 3).unwrap();
        let first = out.loss_history[0];
        let last = *out.loss_history.last().unwrap();
        assert!(
            last < 1e-3 * first,
            "single-sample loss should collapse: {first} -> {last}"
        );
    }

    #[test]
    fn loss_is_mostly_nonincreasing_at_reference_lr() {
        let (gso, data) = six_node_setup();
        let arch = FilterNet::two_layer(Arc::clone(&gso), 8, 0).unwrap();
        let out = train_filter(&arch, &data, 400, 2e-4, 11).unwrap();
        let mut nonincreasing = 0usize;
        for w in out.loss_history.windows(2) {
            if w[1] <= w[0] + 1e-15 {
                nonincreasing += 1;
            }
        }
        let frac = nonincreasing as f64 / (out.loss_history.len() - 1) as f64;
        assert!(frac >= 0.9, "only {frac:.3} of steps were non-increasing");
    }

    /// Central finite differences over every parameter of a 2-layer net.
    #[test]
    fn gradients_match_finite_differences() {
        let (gso, data) = six_node_setup();
        let mut net = FilterNet::two_layer(Arc::clone(&gso), 3, 0).unwrap();
        net.reinit(5);
        let worst = gradient_check_max_rel_error(&net, &data).unwrap();
        assert!(worst < 1e-5, "max relative gradient error {worst:.3e}");

        // and for the purely linear variant
        let mut linear = FilterNet::new(gso, &[2, 2], 5, false, 0).unwrap();
        linear.reinit(11);
        let worst = gradient_check_max_rel_error(&linear, &data).unwrap();
        assert!(worst < 1e-5, "linear net gradient error {worst:.3e}");
    }

    #[test]
    fn exploding_rate_reports_divergence() {
        let (gso, data) = six_node_setup();
        let arch = FilterNet::one_layer(gso, 0).unwrap();
        let err = train_filter(&arch, &data, 5000, 1e9, 3);
        assert!(matches!(err, Err(Error::Diverged { .. })));
    }

    #[test]
    fn params_round_trip() {
        let (gso, _) = six_node_setup();
        let mut net = FilterNet::two_layer(Arc::clone(&gso), 4, 9).unwrap();
        net.reinit(9);
        let params = net.to_params();
        let json = serde_json::to_string(&params).unwrap();
        let back: FilterNetParams = serde_json::from_str(&json).unwrap();
        let rebuilt = FilterNet::from_params(gso, &back).unwrap();
        for (a, b) in net.layers.iter().zip(&rebuilt.layers) {
            for (ta, tb) in a.taps.iter().zip(&b.taps) {
                assert_eq!(ta, tb);
            }
        }
    }
}
