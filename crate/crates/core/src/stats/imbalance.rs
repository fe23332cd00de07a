//! Beta-binomial imbalance test: a Beta posterior fitted on the overlap of
//! neutral facts predicts the overlap of polar facts; an observed overlap
//! in the far tail of the predictive distribution flags the bio.

use rand_distr::{Beta, Binomial, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;
use statrs::function::factorial::ln_binomial;

use super::PartitionCounts;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::seed;

pub const DEFAULT_DRAWS: u64 = 1000;
pub const DEFAULT_ALPHA: f64 = 0.05;
/// Draws per independently seeded chunk.
const CHUNK: u64 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    /// Positive facts shared less often than neutral ones predict.
    PositiveOmission,
    /// Negative facts shared more often than neutral ones predict.
    NegativeInclusion,
}

impl Polarity {
    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::PositiveOmission => "positive_omission",
            Polarity::NegativeInclusion => "negative_inclusion",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceResult {
    pub polarity: Polarity,
    pub x: u64,
    pub n: u64,
    pub x_pos: u64,
    pub n_pos: u64,
    #[serde(rename = "S")]
    pub s: u64,
    #[serde(rename = "K")]
    pub k: u64,
    pub p_value: f64,
    pub alpha: f64,
    pub seed: u64,
    pub imbalanced: bool,
}

fn check_counts(x: u64, n: u64, x_pos: u64, n_pos: u64) -> Result<()> {
    if x > n || x_pos > n_pos {
        return Err(Error::InvalidArgument(format!(
            "invalid counts x={x}, n={n}, x_pos={x_pos}, n_pos={n_pos}"
        )));
    }
    Ok(())
}

/// Counts draws `p ~ Beta(1+x, 1+n-x)`, `y ~ Binomial(n_pos, p)` with
/// `y > x_pos`; the p-value is `1 - K/S`.
#[allow(clippy::too_many_arguments)]
pub fn imbalance_test(x: u64, n: u64, x_pos: u64, n_pos: u64, s: u64, seed: u64, alpha: f64, exec: Exec) -> Result<ImbalanceResult> {
    check_counts(x, n, x_pos, n_pos)?;
    if s == 0 {
        return Err(Error::InvalidArgument("S must be at least 1".into()));
    }
    let beta = Beta::new(1.0 + x as f64, 1.0 + (n - x) as f64)
        .map_err(|e| Error::Internal(format!("beta distribution: {e}")))?;
    let chunks = s.div_ceil(CHUNK) as usize;
    let k = exec.sum_range(chunks, |c| {
        let mut rng = seed::rng(seed::item(seed, c as u64));
        let draws = CHUNK.min(s - c as u64 * CHUNK);
        (0..draws)
            .filter(|_| {
                let p = beta.sample(&mut rng);
                let y = Binomial::new(n_pos, p).expect("p in [0, 1]").sample(&mut rng);
                y > x_pos
            })
            .count() as u64
    });
    let p_value = 1.0 - k as f64 / s as f64;
    Ok(ImbalanceResult {
        polarity: Polarity::PositiveOmission,
        x,
        n,
        x_pos,
        n_pos,
        s,
        k,
        p_value,
        alpha,
        seed,
        imbalanced: p_value < alpha,
    })
}

/// Runs the test for one polarity from per-connotation counts. Negative
/// inclusion mirrors the positive case by counting unshared facts.
pub fn imbalance_for(counts: &PartitionCounts, polarity: Polarity, s: u64, seed: u64, alpha: f64, exec: Exec) -> Result<ImbalanceResult> {
    let neu = counts.neutral;
    let mut r = match polarity {
        Polarity::PositiveOmission => {
            let pos = counts.positive;
            imbalance_test(neu.shared, neu.total, pos.shared, pos.total, s, seed, alpha, exec)?
        }
        Polarity::NegativeInclusion => {
            let neg = counts.negative;
            imbalance_test(
                neu.total - neu.shared,
                neu.total,
                neg.total - neg.shared,
                neg.total,
                s,
                seed,
                alpha,
                exec,
            )?
        }
    };
    r.polarity = polarity;
    Ok(r)
}

/// Beta-binomial pmf `P(Y = y)` for `Y ~ BB(n; a, b)`.
pub fn beta_binomial_pmf(y: u64, n: u64, a: f64, b: f64) -> f64 {
    if y > n {
        return 0.0;
    }
    (ln_binomial(n, y) + ln_beta(y as f64 + a, (n - y) as f64 + b) - ln_beta(a, b)).exp()
}

/// Exact `P(BB(n_pos; 1+x, 1+n-x) <= x_pos)`, the limit of the Monte Carlo
/// p-value as S grows.
pub fn exact_imbalance_pvalue(x: u64, n: u64, x_pos: u64, n_pos: u64) -> Result<f64> {
    check_counts(x, n, x_pos, n_pos)?;
    let (a, b) = (1.0 + x as f64, 1.0 + (n - x) as f64);
    let p: f64 = (0..=x_pos).map(|y| beta_binomial_pmf(y, n_pos, a, b)).sum();
    Ok(p.min(1.0))
}
