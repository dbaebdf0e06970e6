//! Synthetic data with one planted proxy for a sensitive attribute.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::EncodedMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedProxyConfig {
    pub n: usize,
    /// Probability that the sensitive attribute is 1.
    pub sensitive_rate: f64,
    /// Probability that the proxy disagrees with the sensitive attribute.
    pub flip: f64,
    /// Weight of the proxy in the target's latent score.
    pub proxy_effect: f64,
    pub seed: u64,
}

impl Default for PlantedProxyConfig {
    fn default() -> Self {
        PlantedProxyConfig {
            n: 2000,
            sensitive_rate: 0.3,
            flip: 0.05,
            proxy_effect: 1.0,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedProxy {
    /// Columns `f1`, `f2` (uniform noise, independent of `s`) and `f3`
    /// (`s` with flips), all in `[0, 1]`.
    pub matrix: EncodedMatrix,
    pub sensitive: Vec<u8>,
    /// `1` iff `f1 + f2 + proxy_effect·f3 + noise` exceeds its midpoint.
    pub target: Vec<u8>,
}

pub fn planted_proxy(cfg: &PlantedProxyConfig) -> PlantedProxy {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::with_capacity(cfg.n);
    let mut sensitive = Vec::with_capacity(cfg.n);
    let mut target = Vec::with_capacity(cfg.n);
    let cut = 1.0 + cfg.proxy_effect * cfg.sensitive_rate;
    for _ in 0..cfg.n {
        let s = u8::from(rng.random::<f64>() < cfg.sensitive_rate);
        let flipped = rng.random::<f64>() < cfg.flip;
        let f1: f64 = rng.random();
        let f2: f64 = rng.random();
        let f3 = f64::from(s ^ u8::from(flipped));
        let noise = 0.5 * (rng.random::<f64>() - 0.5);
        target.push(u8::from(f1 + f2 + cfg.proxy_effect * f3 + noise > cut));
        sensitive.push(s);
        rows.push(vec![f1, f2, f3]);
    }
    PlantedProxy {
        matrix: EncodedMatrix::from_rows(&["f1", "f2", "f3"], &rows)
            .expect("rows have three values"),
        sensitive,
        target,
    }
}
