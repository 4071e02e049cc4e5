//! Finite-difference weights on arbitrary nodes and line-wise derivative
//! operators built from them.

use std::collections::HashMap;

use ndarray::{Array2, Axis};

/// Fornberg's recursion: weights `w[k][j]` such that
/// `f^(k)(z) ≈ Σ_j w[k][j] f(x_j)` for k = 0..=m.
pub fn fd_weights(z: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Stencil width giving at least `accuracy` order for derivative `order`:
/// odd so interior stencils are centred.
pub fn stencil_width(order: usize, accuracy: usize) -> usize {
    let w = order + accuracy;
    if w % 2 == 0 {
        w + 1
    } else {
        w
    }
}

/// A derivative operator along one grid line of `n` equispaced nodes.
#[derive(Clone, Debug)]
pub struct LineStencil {
    n: usize,
    width: usize,
    /// Weights keyed by the window start relative to the node.
    table: HashMap<isize, Vec<f64>>,
}

impl LineStencil {
    pub fn new(n: usize, order: usize, accuracy: usize, h: f64) -> Self {
        let width = stencil_width(order, accuracy).min(n);
        assert!(width > order, "grid line too short for derivative order {order}");
        let scale = h.powi(order as i32);
        let mut table = HashMap::new();
        for i in 0..n {
            let start = Self::start_for(i, n, width);
            let rel = start as isize - i as isize;
            table.entry(rel).or_insert_with(|| {
                let nodes: Vec<f64> = (0..width).map(|k| (rel + k as isize) as f64).collect();
                fd_weights(0.0, &nodes, order)[order].iter().map(|w| w / scale).collect()
            });
        }
        LineStencil { n, width, table }
    }

    fn start_for(i: usize, n: usize, width: usize) -> usize {
        let half = width / 2;
        i.saturating_sub(half).min(n - width)
    }

    /// Derivative at node `i` of a line read through `get`.
    #[inline]
    pub fn apply_at(&self, i: usize, get: impl Fn(usize) -> f64) -> f64 {
        let start = Self::start_for(i, self.n, self.width);
        let w = &self.table[&(start as isize - i as isize)];
        w.iter().enumerate().map(|(k, wk)| wk * get(start + k)).sum()
    }

    /// Apply along `axis` of a 2-D array (axis 0 is x, axis 1 is y).
    pub fn apply(&self, values: &Array2<f64>, axis: usize) -> Array2<f64> {
        let mut out = Array2::zeros(values.raw_dim());
        for (lane_in, mut lane_out) in values.lanes(Axis(axis)).into_iter().zip(out.lanes_mut(Axis(axis))) {
            for i in 0..self.n {
                lane_out[i] = self.apply_at(i, |k| lane_in[k]);
            }
        }
        out
    }
}

/// Derivative weights along a line of arbitrary increasing nodes.
#[derive(Clone, Debug)]
pub struct NonuniformStencil {
    starts: Vec<usize>,
    weights: Vec<Vec<f64>>,
}

impl NonuniformStencil {
    /// Windows of `width` nodes, centred where possible.
    pub fn new(nodes: &[f64], order: usize, width: usize) -> Self {
        let n = nodes.len();
        let width = width.min(n);
        assert!(width > order, "grid line too short for derivative order {order}");
        let mut starts = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            let start = LineStencil::start_for(i, n, width);
            let w = fd_weights(nodes[i], &nodes[start..start + width], order);
            starts.push(start);
            weights.push(w[order].clone());
        }
        NonuniformStencil { starts, weights }
    }

    #[inline]
    pub fn apply_at(&self, i: usize, get: impl Fn(usize) -> f64) -> f64 {
        let s = self.starts[i];
        self.weights[i].iter().enumerate().map(|(k, w)| w * get(s + k)).sum()
    }

    pub fn apply(&self, values: &Array2<f64>, axis: usize) -> Array2<f64> {
        let mut out = Array2::zeros(values.raw_dim());
        for (lane_in, mut lane_out) in values.lanes(Axis(axis)).into_iter().zip(out.lanes_mut(Axis(axis))) {
            for i in 0..self.starts.len() {
                lane_out[i] = self.apply_at(i, |k| lane_in[k]);
            }
        }
        out
    }
}
