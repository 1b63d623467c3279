use super::model::LevelDist;
use super::trainer::TrainerConfig;
use super::proxy::ProxyTarget;
use crate::codec::NUM_LEVELS;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LossOutput {
    pub loss: f64,
    /// |acc_c − acc_r|
    pub loss1: f64,
    /// Penalty-weighted mean cross-entropy against the proxy target.
    pub loss2: f64,
    /// d(loss)/d(logit) per macroblock.
    pub grads: Vec<LevelDist>,
}

/// `loss = λ1·|acc_c − acc_r| + λ2·mean_m(penalty[proxy_m] · −ln pred_m[proxy_m])`.
///
/// Only the alignment term carries gradient; the accuracy term is piecewise
/// constant in the model parameters.
pub fn rer_loss(pred: &[LevelDist], proxy: &ProxyTarget, acc_r: f64, acc_c: f64, cfg: &TrainerConfig) -> Result<LossOutput> {
    let targets = proxy.levels();
    if pred.len() != targets.len() {
        return Err(Error::invalid_input(format!(
            "{} predictions for {} proxy entries",
            pred.len(),
            targets.len()
        )));
    }
    let m = pred.len().max(1) as f64;
    let loss1 = (acc_c - acc_r).abs();
    let mut loss2 = 0.0;
    let scale = if cfg.accuracy_scaled_gradient { 1.0 + loss1 } else { 1.0 };
    let mut grads = Vec::with_capacity(pred.len());
    for (dist, &t) in pred.iter().zip(targets) {
        let t = t as usize;
        let w = cfg.penalty[t];
        loss2 += w * -dist[t].ln();
        let coef = scale * cfg.lambda2 * w / m;
        let mut g = [0.0; NUM_LEVELS];
        for l in 0..NUM_LEVELS {
            g[l] = coef * (dist[l] - if l == t { 1.0 } else { 0.0 });
        }
        grads.push(g);
    }
    loss2 /= m;
    Ok(LossOutput {
        loss: cfg.lambda1 * loss1 + cfg.lambda2 * loss2,
        loss1,
        loss2,
        grads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::EmphasisMap;

    #[test]
    fn one_hot_prediction_has_no_alignment_loss() {
        let cfg = TrainerConfig::default();
        let proxy = EmphasisMap::from_levels(1, 3, vec![0, 2, 4]).unwrap();
        let pred: Vec<LevelDist> = proxy
            .levels()
            .iter()
            .map(|&t| {
                let mut d = [0.0; 5];
                d[t as usize] = 1.0;
                d
            })
            .collect();
        let out = rer_loss(&pred, &proxy, 0.9, 0.7, &cfg).unwrap();
        assert_eq!(out.loss2, 0.0);
        assert!((out.loss - 10.0 * 0.2).abs() < 1e-12);
    }

    #[test]
    fn uniform_prediction_level_two() {
        let cfg = TrainerConfig::default();
        let proxy = EmphasisMap::uniform(2, 2, 2).unwrap();
        let pred = vec![[0.2; 5]; 4];
        let out = rer_loss(&pred, &proxy, 1.0, 1.0, &cfg).unwrap();
        assert!((out.loss2 - 1.6 * 5f64.ln()).abs() < 1e-12);
        assert!((out.loss2 - 2.575).abs() < 1e-3);
    }

    #[test]
    fn length_mismatch() {
        let proxy = EmphasisMap::uniform(1, 2, 1).unwrap();
        assert!(rer_loss(&[[0.2; 5]], &proxy, 1.0, 1.0, &TrainerConfig::default()).is_err());
    }
}
