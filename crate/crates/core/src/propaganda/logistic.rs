//! L2-regularized logistic regression fitted with L-BFGS.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Sparse row: `(column, value)` pairs.
pub type SparseRow<F> = Vec<(usize, F)>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainOptions {
    pub lambda: f64,
    pub max_iter: usize,
    /// Stop once the gradient L2 norm falls below this.
    pub tolerance: f64,
    /// L-BFGS history length.
    pub memory: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            lambda: 1e-3,
            max_iter: 1000,
            tolerance: 1e-6,
            memory: 10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainReport {
    pub iterations: usize,
    pub loss: f64,
    pub gradient_norm: f64,
    pub converged: bool,
}

/// `mean_i log(1 + exp(-y_i z_i)) + lambda/2 |w|^2` with `z = w.x + b`; the bias is
/// not penalized. Parameters are laid out as `[w_0 .. w_{d-1}, b]`.
pub struct Objective<'a, F> {
    rows: &'a [SparseRow<F>],
    labels: &'a [bool],
    dim: usize,
    lambda: F,
}

fn softplus<F: Scalar>(x: F) -> F {
    // log(1 + e^x) without overflow
    if x > F::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid<F: Scalar>(z: F) -> F {
    if z >= F::zero() {
        F::one() / (F::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (F::one() + e)
    }
}

fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).map(|(&x, &y)| x * y).fold(F::zero(), |s, v| s + v)
}

fn norm<F: Scalar>(a: &[F]) -> F {
    dot(a, a).sqrt()
}

impl<'a, F: Scalar> Objective<'a, F> {
    pub fn new(rows: &'a [SparseRow<F>], labels: &'a [bool], dim: usize, lambda: F) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if rows.iter().flatten().any(|&(j, _)| j >= dim) {
            return Err(Error::InvalidArgument(format!(
                "feature index out of range for dim {dim}"
            )));
        }
        if !(lambda >= F::zero()) {
            return Err(Error::InvalidArgument("lambda must be non-negative".into()));
        }
        Ok(Objective {
            rows,
            labels,
            dim,
            lambda,
        })
    }

    pub fn num_params(&self) -> usize {
        self.dim + 1
    }

    /// Loss and analytic gradient. Sums run in row order, so results do not
    /// depend on thread count.
    pub fn value_and_gradient(&self, params: &[F]) -> (F, Vec<F>) {
        let (w, b) = params.split_at(self.dim);
        let b = b[0];
        let n = F::from_usize_lossy(self.rows.len().max(1));
        let mut loss = F::zero();
        let mut grad = vec![F::zero(); self.dim + 1];
        for (row, &y) in self.rows.iter().zip(self.labels) {
            let z = row.iter().fold(b, |s, &(j, x)| s + w[j] * x);
            let s = if y { F::one() } else { -F::one() };
            loss = loss + softplus(-s * z);
            // d/dz softplus(-s z) = -s * sigmoid(-s z)
            let g = -s * sigmoid(-s * z);
            for &(j, x) in row {
                grad[j] = grad[j] + g * x;
            }
            grad[self.dim] = grad[self.dim] + g;
        }
        loss = loss / n;
        for g in &mut grad {
            *g = *g / n;
        }
        let half = F::lit(0.5);
        loss = loss + half * self.lambda * dot(w, w);
        for j in 0..self.dim {
            grad[j] = grad[j] + self.lambda * w[j];
        }
        (loss, grad)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogisticRegression<F> {
    pub weights: Vec<F>,
    pub bias: F,
}

impl<F: Scalar> LogisticRegression<F> {
    pub fn zeros(dim: usize) -> Self {
        LogisticRegression {
            weights: vec![F::zero(); dim],
            bias: F::zero(),
        }
    }

    pub fn decision(&self, row: &[(usize, F)]) -> F {
        row.iter()
            .filter(|&&(j, _)| j < self.weights.len())
            .fold(self.bias, |s, &(j, x)| s + self.weights[j] * x)
    }

    pub fn probability(&self, row: &[(usize, F)]) -> F {
        sigmoid(self.decision(row))
    }

    pub fn weight_norm(&self) -> F {
        norm(&self.weights)
    }

    /// Fits from a zero start. Errors when only one class is present.
    pub fn fit(
        rows: &[SparseRow<F>],
        labels: &[bool],
        dim: usize,
        options: &TrainOptions,
    ) -> Result<(Self, TrainReport)> {
        if !labels.iter().any(|&y| y) || labels.iter().all(|&y| y) {
            return Err(Error::SingleClass);
        }
        let objective = Objective::new(rows, labels, dim, F::lit(options.lambda))?;
        let (params, report) = lbfgs(&objective, vec![F::zero(); dim + 1], options);
        let bias = params[dim];
        let mut weights = params;
        weights.truncate(dim);
        Ok((LogisticRegression { weights, bias }, report))
    }
}

/// Two-loop L-BFGS with backtracking Armijo line search.
fn lbfgs<F: Scalar>(obj: &Objective<'_, F>, mut x: Vec<F>, options: &TrainOptions) -> (Vec<F>, TrainReport) {
    let tol = F::lit(options.tolerance);
    let c1 = F::lit(1e-4);
    let (mut fx, mut g) = obj.value_and_gradient(&x);
    let mut history: VecDeque<(Vec<F>, Vec<F>, F)> = VecDeque::new();
    let mut iterations = 0;
    let mut converged = norm(&g) < tol;
    while !converged && iterations < options.max_iter {
        iterations += 1;
        // two-loop recursion: d = -H g
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = *rho * dot(s, &q);
            for (qi, &yi) in q.iter_mut().zip(y) {
                *qi = *qi - a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            for qi in &mut q {
                *qi = *qi * gamma;
            }
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
            let beta = *rho * dot(y, &q);
            for (qi, &si) in q.iter_mut().zip(s) {
                *qi = *qi + (a - beta) * si;
            }
        }
        let mut d: Vec<F> = q.into_iter().map(|v| -v).collect();
        let mut slope = dot(&g, &d);
        if !(slope < F::zero()) {
            // not a descent direction: restart from steepest descent
            history.clear();
            d = g.iter().map(|&v| -v).collect();
            slope = dot(&g, &d);
        }
        let mut step = if history.is_empty() {
            F::one().min(F::one() / norm(&g))
        } else {
            F::one()
        };
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<F> = x.iter().zip(&d).map(|(&xi, &di)| xi + step * di).collect();
            let (ft, gt) = obj.value_and_gradient(&trial);
            if ft <= fx + c1 * step * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            step = step * F::lit(0.5);
        }
        let Some((xn, fn_, gn)) = accepted else {
            // no decrease representable at this precision
            break;
        };
        let s: Vec<F> = xn.iter().zip(&x).map(|(&a, &b)| a - b).collect();
        let y: Vec<F> = gn.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > F::epsilon() * dot(&y, &y) {
            if history.len() == options.memory.max(1) {
                history.pop_front();
            }
            history.push_back((s, y, F::one() / sy));
        }
        x = xn;
        fx = fn_;
        g = gn;
        converged = norm(&g) < tol;
    }
    let report = TrainReport {
        iterations,
        loss: fx.as_f64(),
        gradient_norm: norm(&g).as_f64(),
        converged,
    };
    (x, report)
}
