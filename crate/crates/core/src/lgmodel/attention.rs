//! Attention aggregation of a cross-section into one global vector.
//!
//! Keys and values are linear maps of the feature rows, `K = M W_key`, `V = M W_value`.
//! Each stock's weight is its cosine similarity with the query, clipped at zero and
//! renormalised to sum to one; if every similarity is clipped the weights fall back to
//! uniform. The aggregate is the weighted sum of value rows.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::params::{slice, slice_mut, ParamTensors};
use crate::rng::{self, Pcg32};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionAggregator {
    /// m x D
    pub w_key: Array2<f64>,
    /// m x D
    pub w_value: Array2<f64>,
    /// length D
    pub query: Array1<f64>,
}

/// Intermediate values of one aggregation, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct AttentionPass {
    keys: Array2<f64>,
    values: Array2<f64>,
    key_norms: Array1<f64>,
    query_norm: f64,
    pub similarities: Array1<f64>,
    pub weights: Array1<f64>,
    pub uniform_fallback: bool,
    pub output: Array1<f64>,
}

/// Clips similarities at zero and renormalises; uniform when nothing survives.
///
/// Returns the weights and whether the uniform fallback was used.
pub fn normalize_similarities(similarities: ArrayView1<'_, f64>) -> (Array1<f64>, bool) {
    let n = similarities.len();
    let clipped = similarities.mapv(|s| s.max(0.0));
    let total = clipped.sum();
    if total > 0.0 {
        (clipped / total, false)
    } else {
        (Array1::from_elem(n, 1.0 / n as f64), true)
    }
}

impl AttentionAggregator {
    pub fn init(m: usize, d: usize, rng: &mut Pcg32) -> Self {
        let b_m = 1.0 / (m as f64).sqrt();
        let b_d = 1.0 / (d as f64).sqrt();
        Self {
            w_key: Array2::from_shape_simple_fn((m, d), || rng::symmetric(rng, b_m)),
            w_value: Array2::from_shape_simple_fn((m, d), || rng::symmetric(rng, b_m)),
            query: Array1::from_shape_simple_fn(d, || rng::symmetric(rng, b_d)),
        }
    }

    pub fn zeros(m: usize, d: usize) -> Self {
        Self {
            w_key: Array2::zeros((m, d)),
            w_value: Array2::zeros((m, d)),
            query: Array1::zeros(d),
        }
    }

    pub fn factors(&self) -> usize {
        self.query.len()
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<AttentionPass> {
        if x.nrows() == 0 {
            return Err(Error::InvalidArgument("attention over an empty cross-section".into()));
        }
        if x.ncols() != self.w_key.nrows() {
            return Err(Error::dims("attention input columns", self.w_key.nrows(), x.ncols()));
        }
        let query_norm = self.query.dot(&self.query).sqrt();
        if query_norm == 0.0 {
            return Err(Error::DegenerateNorm("query vector is zero".into()));
        }
        let keys = x.dot(&self.w_key);
        let key_norms = keys.map_axis(Axis(1), |k| k.dot(&k).sqrt());
        if key_norms.iter().all(|k| *k == 0.0) {
            return Err(Error::DegenerateNorm("key matrix is zero".into()));
        }
        let dots = keys.dot(&self.query);
        let similarities = Array1::from_iter(
            dots.iter()
                .zip(&key_norms)
                .map(|(d, k)| if *k > 0.0 { d / (query_norm * k) } else { 0.0 }),
        );
        let (weights, uniform_fallback) = normalize_similarities(similarities.view());
        if uniform_fallback {
            log::debug!("all attention similarities clipped; using uniform weights");
        }
        let values = x.dot(&self.w_value);
        let output = weights.dot(&values);
        Ok(AttentionPass {
            keys,
            values,
            key_norms,
            query_norm,
            similarities,
            weights,
            uniform_fallback,
            output,
        })
    }

    pub fn attention_weights(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        Ok(self.forward(x)?.weights)
    }

    pub fn aggregate(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        Ok(self.forward(x)?.output)
    }

    /// Accumulates gradients given `d_out = dL/d(aggregate)`.
    pub fn backward(
        &self,
        x: ArrayView2<'_, f64>,
        pass: &AttentionPass,
        d_out: ArrayView1<'_, f64>,
        grads: &mut AttentionAggregator,
    ) {
        let n = x.nrows();
        let d = self.factors();

        // value path: output = sum_i a_i v_i
        let a_col = pass.weights.view().insert_axis(Axis(1));
        let g_row = d_out.insert_axis(Axis(0));
        let d_values = a_col.dot(&g_row);
        grads.w_value += &x.t().dot(&d_values);

        if pass.uniform_fallback {
            return;
        }

        // weight path: a = c / sum(c), c = max(0, s)
        let d_weights = pass.values.dot(&d_out);
        let total: f64 = pass.similarities.iter().map(|s| s.max(0.0)).sum();
        let mean_grad = d_weights.dot(&pass.weights);
        let d_sim = Array1::from_iter(
            d_weights
                .iter()
                .zip(&pass.similarities)
                .map(|(g, s)| if *s > 0.0 { (g - mean_grad) / total } else { 0.0 }),
        );

        // s_i = u . w_i with u = q/|q|, w_i = k_i/|k_i|
        let u = &self.query / pass.query_norm;
        let mut d_query = Array1::<f64>::zeros(d);
        let mut d_keys = Array2::<f64>::zeros((n, d));
        for i in 0..n {
            let ds = d_sim[i];
            let kn = pass.key_norms[i];
            if ds == 0.0 || kn == 0.0 {
                continue;
            }
            let s = pass.similarities[i];
            let w = pass.keys.row(i).mapv(|k| k / kn);
            d_query.scaled_add(ds / pass.query_norm, &(&w - &(s * &u)));
            d_keys
                .row_mut(i)
                .assign(&((&u - &(s * &w)) * (ds / kn)));
        }
        grads.query += &d_query;
        grads.w_key += &x.t().dot(&d_keys);
    }
}

impl ParamTensors for AttentionAggregator {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![slice(&self.w_key), slice(&self.w_value), slice(&self.query)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            slice_mut(&mut self.w_key),
            slice_mut(&mut self.w_value),
            slice_mut(&mut self.query),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn random(seed: u64, n: usize, m: usize, d: usize) -> (AttentionAggregator, Array2<f64>) {
        let mut r = rng::seeded(seed);
        let agg = AttentionAggregator::init(m, d, &mut r);
        let x = Array2::from_shape_simple_fn((n, m), || rng::normal(&mut r));
        (agg, x)
    }

    #[test]
    fn clipped_renormalisation() {
        let (w, fallback) = normalize_similarities(array![0.5, -0.2, 0.5].view());
        assert_eq!(w, array![0.5, 0.0, 0.5]);
        assert!(!fallback);
        let (w, fallback) = normalize_similarities(array![-0.1, -0.3, -0.9, 0.0].view());
        assert_eq!(w, array![0.25, 0.25, 0.25, 0.25]);
        assert!(fallback);
    }

    #[test]
    fn singleton_gets_full_weight() {
        let agg = AttentionAggregator {
            w_key: array![[1.0], [0.0]],
            w_value: array![[2.0], [3.0]],
            query: array![1.0],
        };
        let x = array![[0.7, 1.0]];
        assert_eq!(agg.attention_weights(x.view()).unwrap(), array![1.0]);
        assert_eq!(agg.aggregate(x.view()).unwrap(), array![0.7 * 2.0 + 3.0]);
    }

    #[test]
    fn degenerate_norms_are_errors() {
        let (mut agg, x) = random(1, 3, 4, 2);
        agg.query.fill(0.0);
        assert!(matches!(agg.forward(x.view()), Err(Error::DegenerateNorm(_))));
        let (agg, _) = random(1, 3, 4, 2);
        assert!(matches!(agg.forward(Array2::zeros((3, 4)).view()), Err(Error::DegenerateNorm(_))));
    }

    #[test]
    fn one_hot_weights_select_value_row() {
        // keys: stock 0 aligned with query, stock 1 opposite
        let agg = AttentionAggregator {
            w_key: array![[1.0, 0.0], [0.0, 1.0]],
            w_value: array![[1.0, 2.0], [3.0, 4.0]],
            query: array![1.0, 0.0],
        };
        let x = array![[1.0, 0.0], [-1.0, 0.0]];
        let pass = agg.forward(x.view()).unwrap();
        assert_eq!(pass.weights, array![1.0, 0.0]);
        assert_eq!(pass.output, x.dot(&agg.w_value).row(0).to_owned());
    }

    #[test]
    fn identical_stocks_give_that_value_row() {
        let (agg, x) = random(3, 1, 5, 3);
        let twice = ndarray::concatenate![Axis(0), x, x];
        let out = agg.aggregate(twice.view()).unwrap();
        let v = x.dot(&agg.w_value);
        for (a, b) in out.iter().zip(v.row(0)) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn matches_explicit_loops() {
        let (agg, x) = random(17, 4, 6, 3);
        let out = agg.aggregate(x.view()).unwrap();

        let (n, m, d) = (4, 6, 3);
        let mut sims = vec![0.0; n];
        let qn: f64 = (0..d).map(|k| agg.query[k] * agg.query[k]).sum::<f64>().sqrt();
        for i in 0..n {
            let mut key = vec![0.0; d];
            for k in 0..d {
                for j in 0..m {
                    key[k] += x[[i, j]] * agg.w_key[[j, k]];
                }
            }
            let kn: f64 = key.iter().map(|v| v * v).sum::<f64>().sqrt();
            let dot: f64 = (0..d).map(|k| key[k] * agg.query[k]).sum();
            sims[i] = (dot / (qn * kn)).max(0.0);
        }
        let total: f64 = sims.iter().sum();
        let weights: Vec<f64> = if total > 0.0 {
            sims.iter().map(|s| s / total).collect()
        } else {
            vec![1.0 / n as f64; n]
        };
        for k in 0..d {
            let mut expected = 0.0;
            for i in 0..n {
                let mut v = 0.0;
                for j in 0..m {
                    v += x[[i, j]] * agg.w_value[[j, k]];
                }
                expected += weights[i] * v;
            }
            assert!((out[k] - expected).abs() < 1e-12, "{} vs {}", out[k], expected);
        }
    }
}
