//! Least squares, ridge, and (ridge) logistic regression.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::{Model, Predictor};
use crate::data::Dataset;
use crate::evaluation::mean;

pub const IRLS_MAX_ITER: usize = 50;
/// Bound on every logistic coefficient, which keeps separable data finite.
pub const COEF_CLAMP: f64 = 30.0;
const DEVIANCE_TOL: f64 = 1e-8;
const GRADIENT_TOL: f64 = 1e-9;
const JITTERS: [f64; 5] = [0.0, 1e-10, 1e-8, 1e-6, 1e-4];

pub(super) fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

/// Solves `a x = b` for symmetric positive (semi-)definite `a`, adding a
/// diagonal jitter relative to the largest diagonal entry when needed.
fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let p = a.nrows();
    let scale = (0..p).map(|i| a[(i, i)].abs()).fold(0.0, f64::max).max(1.0);
    for jitter in JITTERS {
        let mut m = a.clone();
        for i in 0..p {
            m[(i, i)] += jitter * scale;
        }
        if let Some(chol) = Cholesky::new(m) {
            let x = chol.solve(b);
            if x.iter().all(|v| v.is_finite()) {
                return Some(x);
            }
        }
    }
    None
}

/// Ridge regression on centered data, `(Xc'Xc + n lambda I) beta = Xc'yc`.
/// `lambda = 0` is ordinary least squares.
pub(super) fn fit_ridge(train: &Dataset, lambda: f64) -> Model {
    let n = train.n_rows();
    let p = train.n_features();
    let y = train.target();
    let ybar = mean(y);
    let xbar: Vec<f64> = (0..p).map(|j| mean(&train.column(j))).collect();
    let mut xtx = DMatrix::<f64>::zeros(p, p);
    let mut xty = DVector::<f64>::zeros(p);
    let mut centered = vec![0.0; p];
    for i in 0..n {
        for (c, (x, m)) in centered.iter_mut().zip(train.row(i).iter().zip(&xbar)) {
            *c = x - m;
        }
        let dy = y[i] - ybar;
        for a in 0..p {
            xty[a] += centered[a] * dy;
            for b in a..p {
                xtx[(a, b)] += centered[a] * centered[b];
            }
        }
    }
    for a in 0..p {
        xtx[(a, a)] += n as f64 * lambda;
        for b in 0..a {
            xtx[(a, b)] = xtx[(b, a)];
        }
    }
    let Some(beta) = solve_spd(&xtx, &xty) else {
        return Model::constant(train, true);
    };
    let coef: Vec<f64> = beta.iter().copied().collect();
    let intercept = ybar - coef.iter().zip(&xbar).map(|(b, m)| b * m).sum::<f64>();
    if !intercept.is_finite() {
        return Model::constant(train, true);
    }
    Model { predictor: Predictor::Linear { intercept, coef }, task: train.task(), fallback: false }
}

struct Irls {
    grad: DVector<f64>,
    hess: DMatrix<f64>,
    deviance: f64,
}

/// Gradient, Hessian, and penalized deviance at `theta = (intercept, beta)`.
fn irls_terms(train: &Dataset, theta: &DVector<f64>, lambda: f64) -> Irls {
    let n = train.n_rows();
    let d = theta.len();
    let mut grad = DVector::zeros(d);
    let mut hess = DMatrix::zeros(d, d);
    let mut deviance = 0.0;
    let mut z = vec![1.0; d];
    for i in 0..n {
        z[1..].copy_from_slice(train.row(i));
        let eta: f64 = z.iter().zip(theta.iter()).map(|(a, b)| a * b).sum();
        let mu = sigmoid(eta);
        let y = train.target()[i];
        deviance += 2.0 * (softplus(eta) - y * eta);
        let w = (mu * (1.0 - mu)).max(1e-12);
        for a in 0..d {
            grad[a] += z[a] * (y - mu);
            for b in a..d {
                hess[(a, b)] += w * z[a] * z[b];
            }
        }
    }
    let pen = n as f64 * lambda;
    for a in 0..d {
        for b in 0..a {
            hess[(a, b)] = hess[(b, a)];
        }
    }
    for a in 1..d {
        grad[a] -= pen * theta[a];
        hess[(a, a)] += pen;
        deviance += pen * theta[a] * theta[a];
    }
    Irls { grad, hess, deviance }
}

/// Gradient of the penalized log-likelihood at a fitted model.
pub fn logistic_gradient(train: &Dataset, intercept: f64, coef: &[f64], lambda: f64) -> Vec<f64> {
    let mut theta = DVector::zeros(coef.len() + 1);
    theta[0] = intercept;
    for (t, c) in theta.iter_mut().skip(1).zip(coef) {
        *t = *c;
    }
    irls_terms(train, &theta, lambda).grad.iter().copied().collect()
}

/// IRLS (Newton) for logistic regression with an optional ridge penalty on
/// the non-intercept coefficients. Steps are halved when the penalized
/// deviance increases; coefficients are clamped to `[-COEF_CLAMP, COEF_CLAMP]`.
pub(super) fn fit_logistic(train: &Dataset, lambda: f64) -> Model {
    let d = train.n_features() + 1;
    let mut theta = DVector::zeros(d);
    let ybar = mean(train.target()).clamp(1e-6, 1.0 - 1e-6);
    theta[0] = (ybar / (1.0 - ybar)).ln();
    let mut state = irls_terms(train, &theta, lambda);
    for _ in 0..IRLS_MAX_ITER {
        let Some(step) = solve_spd(&state.hess, &state.grad) else {
            break;
        };
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let mut candidate = &theta + &step * scale;
            candidate.iter_mut().for_each(|v| *v = v.clamp(-COEF_CLAMP, COEF_CLAMP));
            let next = irls_terms(train, &candidate, lambda);
            if next.deviance <= state.deviance + 1e-12 * state.deviance.abs().max(1.0) {
                accepted = Some((candidate, next));
                break;
            }
            scale *= 0.5;
        }
        let Some((candidate, next)) = accepted else {
            break;
        };
        let change = (state.deviance - next.deviance).abs();
        theta = candidate;
        state = next;
        let grad_max = state.grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        let clamped = theta.iter().any(|v| v.abs() >= COEF_CLAMP);
        if change < DEVIANCE_TOL * (state.deviance.abs() + 0.1) && (grad_max <= GRADIENT_TOL || clamped) {
            break;
        }
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Model::constant(train, true);
    }
    let coef = theta.iter().skip(1).copied().collect();
    Model { predictor: Predictor::Logistic { intercept: theta[0], coef }, task: train.task(), fallback: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate, DgpSpec, Task};
    use crate::inducers::{fit, InducerKind, InducerSpec};

    #[test]
    fn irls_reaches_first_order_optimality() {
        let spec = DgpSpec::from_name("bates_classif_20").unwrap().with_seed(3);
        let data = generate(&spec, 400, 0).unwrap();
        for lambda in [0.0, 0.05] {
            let kind = if lambda == 0.0 { InducerKind::Logistic } else { InducerKind::RidgeLogistic };
            let model = fit(&InducerSpec::new(kind).with_lambda(lambda), &data).unwrap();
            let (b0, b) = model.coefficients().unwrap();
            let g = logistic_gradient(&data, b0, b, lambda);
            let max = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(max <= 1e-6, "lambda {lambda}: gradient {max}");
        }
    }

    #[test]
    fn separable_data_stays_finite_and_clamped() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|&v| if v >= 5.0 { 1.0 } else { 0.0 }).collect();
        let data = Dataset::new(x, 1, y, Task::Classification).unwrap();
        let model = fit(&InducerSpec::new(InducerKind::Logistic), &data).unwrap();
        let (b0, b) = model.coefficients().unwrap();
        assert!(b0.abs() <= COEF_CLAMP && b[0].abs() <= COEF_CLAMP);
        for i in 0..10 {
            let p = model.predict_row(data.row(i));
            assert!(p.is_finite() && (0.0..=1.0).contains(&p));
        }
        assert!(model.predict_row(&[9.0]) > 0.99);
        assert!(model.predict_row(&[0.0]) < 0.01);
    }

    #[test]
    fn collinear_ols_does_not_fail() {
        let x: Vec<f64> = (0..8).flat_map(|i| [f64::from(i), f64::from(i)]).collect();
        let y: Vec<f64> = (0..8).map(|i| f64::from(i) * 3.0).collect();
        let data = Dataset::new(x, 2, y, Task::Regression).unwrap();
        let model = fit(&InducerSpec::new(InducerKind::Ols), &data).unwrap();
        assert!((model.predict_row(&[4.0, 4.0]) - 12.0).abs() < 1e-4);
    }

    #[test]
    fn ridge_shrinks_toward_zero() {
        let spec = DgpSpec::from_name("bates_regr_20").unwrap().with_seed(5);
        let data = generate(&spec, 100, 0).unwrap();
        let norm = |lambda: f64| {
            let m = fit(&InducerSpec::new(InducerKind::Ridge).with_lambda(lambda), &data).unwrap();
            m.coefficients().unwrap().1.iter().map(|b| b * b).sum::<f64>()
        };
        assert!(norm(1.0) < norm(0.1));
        assert!(norm(0.1) < norm(0.0));
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
        assert!((softplus(-1000.0)).abs() < 1e-300);
        assert!((softplus(1000.0) - 1000.0).abs() < 1e-9);
    }
}
