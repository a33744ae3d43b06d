use super::ModelError;

/// Probabilities are clipped to `[LOSS_EPS, 1 - LOSS_EPS]` before the log.
pub const LOSS_EPS: f64 = 1e-7;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean binary cross-entropy `-[y ln p + (1 - y) ln(1 - p)]`.
pub fn bce_loss(probabilities: &[f64], labels: &[f64]) -> Result<f64, ModelError> {
    if probabilities.len() != labels.len() {
        return Err(ModelError::Length(format!("{} probabilities vs {} labels", probabilities.len(), labels.len())));
    }
    if probabilities.is_empty() {
        return Err(ModelError::Length("empty batch".into()));
    }
    let sum: f64 = probabilities.iter().zip(labels).map(|(&p, &y)| bce_term(p, y)).sum();
    Ok(sum / probabilities.len() as f64)
}

pub(crate) fn bce_term(p: f64, y: f64) -> f64 {
    let p = p.clamp(LOSS_EPS, 1.0 - LOSS_EPS);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// d(bce)/d(logit); zero where the clip is active.
pub(crate) fn bce_dlogit(p: f64, y: f64) -> f64 {
    if p <= LOSS_EPS || p >= 1.0 - LOSS_EPS {
        0.0
    } else {
        p - y
    }
}
