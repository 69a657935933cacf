//! Negative-sampling surrogate loss for one skip-gram training pair.

use crate::error::{Error, Result};

/// Gradients of [`pair_loss`] with respect to each input vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PairGradients {
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// -log sigmoid(x), computed without catastrophic cancellation.
#[inline]
fn softplus_neg(x: f64) -> f64 {
    // -ln s(x) = ln(1 + e^-x) = softplus(-x)
    if x >= 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Loss and exact gradients for one (center, context, negatives) pair:
///
/// `L = -log s(context . center) - sum_n log s(-negative_n . center)`
///
/// The loss is non-negative, and zero only in the saturated limit.
pub fn pair_loss(
    center: &[f64],
    context: &[f64],
    negatives: &[&[f64]],
) -> Result<(f64, PairGradients)> {
    let dim = center.len();
    if context.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: context.len() });
    }
    for n in negatives {
        if n.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: n.len() });
        }
    }
    if center.iter().chain(context.iter()).any(|x| !x.is_finite())
        || negatives.iter().flat_map(|n| n.iter()).any(|x| !x.is_finite())
    {
        return Err(Error::Domain("non-finite input to pair_loss".into()));
    }

    let pos_score = dot(context, center);
    let mut loss = softplus_neg(pos_score);

    // d/d(pos_score) of -log s(pos_score)
    let pos_coeff = sigmoid(pos_score) - 1.0;
    let mut grad_center: Vec<f64> = context.iter().map(|&c| pos_coeff * c).collect();
    let grad_context: Vec<f64> = center.iter().map(|&c| pos_coeff * c).collect();

    let mut grad_negatives = Vec::with_capacity(negatives.len());
    for neg in negatives {
        let neg_score = dot(neg, center);
        loss += softplus_neg(-neg_score);
        let neg_coeff = sigmoid(neg_score);
        for (g, &n) in grad_center.iter_mut().zip(neg.iter()) {
            *g += neg_coeff * n;
        }
        grad_negatives.push(center.iter().map(|&c| neg_coeff * c).collect());
    }

    Ok((loss, PairGradients { center: grad_center, context: grad_context, negatives: grad_negatives }))
}
