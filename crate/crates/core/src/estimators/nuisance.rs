//! Nuisance model for the partial-linear score: a small ReLU network mapping
//! covariates to the coefficient vector `g(x)`, trained on the squared loss
//! `(y - g(x)ᵀt)^2` with full-batch Adam.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dml::DmlRows;
use crate::error::{Error, Result};
use crate::rng;

/// Hidden-layer shape. The default is two hidden layers of 10 units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub hidden_width: usize,
    pub hidden_layers: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            hidden_width: 10,
            hidden_layers: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Weights start from `U(-init_scale, init_scale)`; biases start at zero.
    pub init_scale: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            learning_rate: 0.01,
            init_scale: 0.1,
        }
    }
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
/// Ridge used when the empirical Hessian is singular.
const LAMBDA_RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct LayerShape {
    inputs: usize,
    outputs: usize,
    /// Offset of the weight block in the flat parameter vector; biases follow.
    offset: usize,
}

/// Dense ReLU network with standardized inputs. Immutable once trained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<LayerShape>,
    params: Vec<f64>,
    input_mean: Vec<f64>,
    input_scale: Vec<f64>,
}

/// Reusable activation buffers for one forward/backward pass.
struct Scratch {
    /// `acts[0]` is the standardized input, `acts[l + 1]` the output of layer `l`.
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Mlp {
    fn new(inputs: usize, outputs: usize, net: &NetworkConfig) -> Self {
        let mut widths = vec![inputs];
        widths.extend(std::iter::repeat_n(net.hidden_width, net.hidden_layers));
        widths.push(outputs);
        let mut layers = Vec::with_capacity(widths.len() - 1);
        let mut offset = 0;
        for w in widths.windows(2) {
            layers.push(LayerShape {
                inputs: w[0],
                outputs: w[1],
                offset,
            });
            offset += w[0] * w[1] + w[1];
        }
        Self {
            layers,
            params: vec![0.0; offset],
            input_mean: vec![0.0; inputs],
            input_scale: vec![1.0; inputs],
        }
    }

    pub fn inputs(&self) -> usize {
        self.input_mean.len()
    }

    pub fn outputs(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    fn scratch(&self) -> Scratch {
        let mut acts = vec![vec![0.0; self.inputs()]];
        acts.extend(self.layers.iter().map(|l| vec![0.0; l.outputs]));
        let deltas = self.layers.iter().map(|l| vec![0.0; l.outputs]).collect();
        Scratch { acts, deltas }
    }

    fn forward_into(&self, x: &[f64], s: &mut Scratch) {
        for (j, a) in s.acts[0].iter_mut().enumerate() {
            *a = (x[j] - self.input_mean[j]) / self.input_scale[j];
        }
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let (prev, next) = s.acts.split_at_mut(l + 1);
            let input = &prev[l];
            let out = &mut next[0];
            let w = &self.params[layer.offset..layer.offset + layer.inputs * layer.outputs];
            let b = &self.params[layer.offset + layer.inputs * layer.outputs..][..layer.outputs];
            for o in 0..layer.outputs {
                let row = &w[o * layer.inputs..(o + 1) * layer.inputs];
                let mut z = b[o];
                for (wi, ai) in row.iter().zip(input) {
                    z += wi * ai;
                }
                out[o] = if l < last { z.max(0.0) } else { z };
            }
        }
    }

    /// Accumulates `d loss / d params` given `d loss / d output` in `s.deltas[last]`.
    fn backward_into(&self, s: &mut Scratch, grad: &mut [f64]) {
        for l in (0..self.layers.len()).rev() {
            let layer = self.layers[l];
            let (w_off, b_off) = (layer.offset, layer.offset + layer.inputs * layer.outputs);
            {
                let input = &s.acts[l];
                let delta = &s.deltas[l];
                for o in 0..layer.outputs {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    grad[b_off + o] += d;
                    let g = &mut grad[w_off + o * layer.inputs..w_off + (o + 1) * layer.inputs];
                    for (gi, ai) in g.iter_mut().zip(input) {
                        *gi += d * ai;
                    }
                }
            }
            if l == 0 {
                break;
            }
            let (lower, upper) = s.deltas.split_at_mut(l);
            let prev_delta = &mut lower[l - 1];
            let delta = &upper[0];
            let prev_act = &s.acts[l];
            prev_delta.iter_mut().for_each(|v| *v = 0.0);
            let w = &self.params[w_off..b_off];
            for o in 0..layer.outputs {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &w[o * layer.inputs..(o + 1) * layer.inputs];
                for (pd, wi) in prev_delta.iter_mut().zip(row) {
                    *pd += d * wi;
                }
            }
            // ReLU derivative: zero where the activation was clipped.
            for (pd, a) in prev_delta.iter_mut().zip(prev_act) {
                if *a <= 0.0 {
                    *pd = 0.0;
                }
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        let mut s = self.scratch();
        self.forward_into(x, &mut s);
        s.acts.pop().unwrap_or_default()
    }
}

/// Trained nuisance pair for one cross-fitting fold.
#[derive(Debug, Clone, PartialEq)]
pub struct NuisanceFit {
    pub g_hat: Mlp,
    /// `2 * mean(t tᵀ)` over the training rows (constant in `x` under randomization).
    pub lambda_hat: DMatrix<f64>,
    pub lambda_inv: DMatrix<f64>,
    pub fold_id: usize,
}

impl NuisanceFit {
    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        self.g_hat.predict(x)
    }
}

fn estimate_lambda(rows: &DmlRows, idx: &[usize]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let p = rows.p;
    let mut lambda = DMatrix::<f64>::zeros(p, p);
    for &i in idx {
        let t = rows.t_row(i);
        for a in 0..p {
            for b in 0..p {
                lambda[(a, b)] += t[a] * t[b];
            }
        }
    }
    lambda *= 2.0 / idx.len() as f64;
    let lu = lambda.clone().full_piv_lu();
    let diag = lu.u().diagonal();
    let max = diag.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = diag.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if max > 0.0 && min / max > 1e-12 {
        if let Some(inv) = lu.try_inverse() {
            return Ok((lambda, inv));
        }
    }
    let mut ridged = lambda.clone();
    for i in 0..p {
        ridged[(i, i)] += LAMBDA_RIDGE;
    }
    let inv = ridged
        .pseudo_inverse(1e-14)
        .map_err(|_| Error::SingularLambda)?;
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularLambda);
    }
    Ok((lambda, inv))
}

/// Fits `g_hat` and `Λ̂` on the rows listed in `idx` (a fold complement).
pub fn train_nuisance(
    rows: &DmlRows,
    idx: &[usize],
    net: &NetworkConfig,
    training: &TrainingConfig,
    seed: u64,
    fold_id: usize,
) -> Result<NuisanceFit> {
    if idx.is_empty() {
        return Err(Error::EmptyInput("fold complement"));
    }
    if net.hidden_width == 0 {
        return Err(Error::Config("hidden width must be at least 1".into()));
    }
    let (lambda_hat, lambda_inv) = estimate_lambda(rows, idx)?;

    let mut mlp = Mlp::new(rows.dx, rows.p, net);
    let count = idx.len() as f64;
    for j in 0..rows.dx {
        let mean = idx.iter().map(|&i| rows.x_row(i)[j]).sum::<f64>() / count;
        let var = idx
            .iter()
            .map(|&i| (rows.x_row(i)[j] - mean).powi(2))
            .sum::<f64>()
            / count;
        mlp.input_mean[j] = mean;
        mlp.input_scale[j] = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
    }
    let mut rng = rng::stream(seed, &[rng::tag::NUISANCE, fold_id as u64]);
    for layer in &mlp.layers {
        let nw = layer.inputs * layer.outputs;
        for w in &mut mlp.params[layer.offset..layer.offset + nw] {
            *w = rng.random_range(-training.init_scale..training.init_scale);
        }
    }

    let np = mlp.params.len();
    let mut grad = vec![0.0; np];
    let mut m1 = vec![0.0; np];
    let mut m2 = vec![0.0; np];
    let mut scratch = mlp.scratch();
    let last = mlp.layers.len() - 1;
    let (mut b1t, mut b2t) = (1.0, 1.0);
    for epoch in 0..training.epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        for &i in idx {
            mlp.forward_into(rows.x_row(i), &mut scratch);
            let t = rows.t_row(i);
            let out = &scratch.acts[last + 1];
            let fitted: f64 = out.iter().zip(t).map(|(o, ti)| o * ti).sum();
            let r = rows.y[i] - fitted;
            loss += r * r;
            let scale = -2.0 * r / count;
            for (d, ti) in scratch.deltas[last].iter_mut().zip(t) {
                *d = scale * ti;
            }
            mlp.backward_into(&mut scratch, &mut grad);
        }
        loss /= count;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, loss });
        }
        b1t *= ADAM_BETA1;
        b2t *= ADAM_BETA2;
        let lr = training.learning_rate;
        for j in 0..np {
            let g = grad[j];
            m1[j] = ADAM_BETA1 * m1[j] + (1.0 - ADAM_BETA1) * g;
            m2[j] = ADAM_BETA2 * m2[j] + (1.0 - ADAM_BETA2) * g * g;
            let mhat = m1[j] / (1.0 - b1t);
            let vhat = m2[j] / (1.0 - b2t);
            mlp.params[j] -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
        }
        if mlp.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFiniteLoss {
                epoch,
                loss: f64::NAN,
            });
        }
    }
    Ok(NuisanceFit {
        g_hat: mlp,
        lambda_hat,
        lambda_inv,
        fold_id,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows_from(y: Vec<f64>, t: Vec<f64>, x: Vec<f64>, p: usize, dx: usize) -> DmlRows {
        DmlRows { y, t, x, p, dx }
    }

    fn random_rows(n: usize, seed: u64, truth: impl Fn(&[f64]) -> [f64; 2]) -> DmlRows {
        let mut r = rng::stream(seed, &[0]);
        let dx = 4;
        let x: Vec<f64> = (0..n * dx).map(|_| r.random::<f64>()).collect();
        let mut t = Vec::with_capacity(2 * n);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let d = f64::from(u8::from(r.random::<bool>()));
            let g = truth(&x[i * dx..(i + 1) * dx]);
            t.extend([1.0, d]);
            y.push(g[0] + g[1] * d);
        }
        rows_from(y, t, x, 2, dx)
    }

    #[test]
    fn fits_constant_coefficients() {
        let rows = random_rows(200, 5, |_| [0.8, -0.4]);
        let idx: Vec<usize> = (0..200).collect();
        let fit = train_nuisance(
            &rows,
            &idx,
            &NetworkConfig::default(),
            &TrainingConfig::default(),
            9,
            0,
        )
        .unwrap();
        let held_out = random_rows(50, 77, |_| [0.0, 0.0]);
        for i in 0..50 {
            let g = fit.predict(held_out.x_row(i));
            assert!((g[0] - 0.8).abs() < 0.05, "g0 = {}", g[0]);
            assert!((g[1] + 0.4).abs() < 0.05, "g1 = {}", g[1]);
        }
    }

    #[test]
    fn lambda_matches_bernoulli_expectation() {
        let rows = random_rows(10_000, 21, |_| [0.0, 0.0]);
        let idx: Vec<usize> = (0..10_000).collect();
        let (lambda, inv) = estimate_lambda(&rows, &idx).unwrap();
        let expected = [[2.0, 1.0], [1.0, 1.0]];
        for a in 0..2 {
            for b in 0..2 {
                assert!((lambda[(a, b)] - expected[a][b]).abs() < 0.05);
                assert_eq!(lambda[(a, b)], lambda[(b, a)]);
            }
        }
        let id = &lambda * inv;
        assert!((id[(0, 0)] - 1.0).abs() < 1e-10 && id[(0, 1)].abs() < 1e-10);
    }

    #[test]
    fn singular_lambda_falls_back_to_ridge() {
        // All rows treated: t = (1, 1) everywhere, Λ̂ is rank one.
        let rows = rows_from(vec![1.0; 4], vec![1.0; 8], vec![0.0; 4], 2, 1);
        let (lambda, inv) = estimate_lambda(&rows, &[0, 1, 2, 3]).unwrap();
        assert_eq!(lambda[(0, 1)], 2.0);
        assert!(inv.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn training_is_bit_reproducible() {
        let rows = random_rows(80, 3, |x| [x[0], x[1] - x[2]]);
        let idx: Vec<usize> = (0..80).collect();
        let net = NetworkConfig::default();
        let tr = TrainingConfig::default();
        let a = train_nuisance(&rows, &idx, &net, &tr, 42, 1).unwrap();
        let b = train_nuisance(&rows, &idx, &net, &tr, 42, 1).unwrap();
        assert_eq!(a, b);
        let c = train_nuisance(&rows, &idx, &net, &tr, 43, 1).unwrap();
        assert_ne!(a.g_hat, c.g_hat);
    }

    #[test]
    fn divergence_is_reported() {
        let rows = random_rows(40, 8, |x| [1e3 * x[0], 0.0]);
        let idx: Vec<usize> = (0..40).collect();
        let tr = TrainingConfig {
            learning_rate: f64::INFINITY,
            ..TrainingConfig::default()
        };
        let err = train_nuisance(&rows, &idx, &NetworkConfig::default(), &tr, 1, 0).unwrap_err();
        assert!(matches!(err, Error::NonFiniteLoss { .. }));
    }

    #[test]
    fn empty_complement_rejected() {
        let rows = random_rows(4, 8, |_| [0.0, 0.0]);
        let err = train_nuisance(
            &rows,
            &[],
            &NetworkConfig::default(),
            &TrainingConfig::default(),
            1,
            0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::EmptyInput(_)));
    }
}
