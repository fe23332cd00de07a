//! Maximum-likelihood binomial regression with a logit link, fitted by
//! iteratively reweighted least squares (Newton steps with step-halving).

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use super::PartitionCounts;
use crate::connotation::Connotation;
use crate::corpus::Direction;
use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 100;
pub const GRADIENT_TOLERANCE: f64 = 1e-6;
const SEPARATION_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionDataPoint {
    pub bio_id: String,
    pub direction: Direction,
    pub conn: Connotation,
    pub is_lgbt: bool,
    #[serde(rename = "N_p")]
    pub n_p: u64,
    pub overlap: u64,
}

/// Three points per bio (positive, neutral, negative), empty partitions
/// included.
pub fn bio_points(bio_id: &str, direction: &Direction, is_lgbt: bool, counts: &PartitionCounts) -> [RegressionDataPoint; 3] {
    Connotation::ALL.map(|conn| {
        let t = counts.get(conn);
        RegressionDataPoint {
            bio_id: bio_id.to_string(),
            direction: direction.clone(),
            conn,
            is_lgbt,
            n_p: t.total,
            overlap: t.shared,
        }
    })
}

fn conn_code(c: Connotation) -> &'static str {
    match c {
        Connotation::Positive => "pos",
        Connotation::Neutral => "neutral",
        Connotation::Negative => "neg",
    }
}

pub fn write_csv<W: Write>(out: W, data: &[RegressionDataPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let wrap = |e: csv::Error| Error::Internal(format!("writing regression csv: {e}"));
    w.write_record(["bio_id", "direction", "conn", "is_lgbt", "N_p", "overlap"]).map_err(wrap)?;
    for d in data {
        w.write_record([
            d.bio_id.clone(),
            d.direction.to_string(),
            conn_code(d.conn).to_string(),
            d.is_lgbt.to_string(),
            d.n_p.to_string(),
            d.overlap.to_string(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::Internal(format!("writing regression csv: {e}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Term {
    Intercept,
    ConnPos,
    ConnNeg,
    IsLgbt,
    ConnPosIsLgbt,
    ConnNegIsLgbt,
}

impl Term {
    pub const FULL: [Term; 6] = [
        Term::Intercept,
        Term::ConnPos,
        Term::ConnNeg,
        Term::IsLgbt,
        Term::ConnPosIsLgbt,
        Term::ConnNegIsLgbt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Term::Intercept => "intercept",
            Term::ConnPos => "conn_pos",
            Term::ConnNeg => "conn_neg",
            Term::IsLgbt => "is_lgbt",
            Term::ConnPosIsLgbt => "conn_pos:is_lgbt",
            Term::ConnNegIsLgbt => "conn_neg:is_lgbt",
        }
    }

    pub fn value(self, conn: Connotation, is_lgbt: bool) -> f64 {
        let pos = (conn == Connotation::Positive) as u8 as f64;
        let neg = (conn == Connotation::Negative) as u8 as f64;
        let l = is_lgbt as u8 as f64;
        match self {
            Term::Intercept => 1.0,
            Term::ConnPos => pos,
            Term::ConnNeg => neg,
            Term::IsLgbt => l,
            Term::ConnPosIsLgbt => pos * l,
            Term::ConnNegIsLgbt => neg * l,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub coefficients: BTreeMap<String, f64>,
    pub log_likelihood: f64,
    pub converged: bool,
    /// Some fitted probability sits at 0 or 1 (perfect separation).
    pub separated: bool,
    pub iterations: usize,
    pub gradient_max_norm: f64,
}

impl RegressionFit {
    pub fn coefficient(&self, term: Term) -> f64 {
        self.coefficients.get(term.name()).copied().unwrap_or(0.0)
    }
}

/// Design matrix, trials, and successes for the given terms.
#[derive(Debug, Clone)]
pub struct Design {
    pub terms: Vec<Term>,
    pub x: DMatrix<f64>,
    pub trials: DVector<f64>,
    pub successes: DVector<f64>,
}

impl Design {
    pub fn new(data: &[RegressionDataPoint], terms: &[Term]) -> Result<Self> {
        if let Some(d) = data.iter().find(|d| d.overlap > d.n_p) {
            return Err(Error::InvalidArgument(format!(
                "bio {}: overlap {} exceeds N_p {}",
                d.bio_id, d.overlap, d.n_p
            )));
        }
        let x = DMatrix::from_fn(data.len(), terms.len(), |i, j| terms[j].value(data[i].conn, data[i].is_lgbt));
        Ok(Design {
            terms: terms.to_vec(),
            x,
            trials: DVector::from_iterator(data.len(), data.iter().map(|d| d.n_p as f64)),
            successes: DVector::from_iterator(data.len(), data.iter().map(|d| d.overlap as f64)),
        })
    }

    fn probabilities(&self, beta: &DVector<f64>) -> DVector<f64> {
        (&self.x * beta).map(inv_logit)
    }

    /// Binomial log-likelihood, including the binomial coefficients.
    pub fn log_likelihood(&self, beta: &DVector<f64>) -> f64 {
        let eta = &self.x * beta;
        (0..eta.len())
            .filter(|&i| self.trials[i] > 0.0)
            .map(|i| {
                let (n, y) = (self.trials[i], self.successes[i]);
                ln_binomial(n as u64, y as u64) + y * eta[i] - n * log1p_exp(eta[i])
            })
            .sum()
    }

    /// Analytic gradient `X^T (y - n p)`.
    pub fn gradient(&self, beta: &DVector<f64>) -> DVector<f64> {
        let p = self.probabilities(beta);
        let resid = DVector::from_fn(p.len(), |i, _| self.successes[i] - self.trials[i] * p[i]);
        self.x.transpose() * resid
    }

    fn information(&self, beta: &DVector<f64>) -> DMatrix<f64> {
        let p = self.probabilities(beta);
        let w = DVector::from_fn(p.len(), |i, _| self.trials[i] * p[i] * (1.0 - p[i]));
        let xw = DMatrix::from_fn(self.x.nrows(), self.x.ncols(), |i, j| self.x[(i, j)] * w[i]);
        self.x.transpose() * xw
    }
}

pub fn inv_logit(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn fit_binomial_regression(data: &[RegressionDataPoint]) -> Result<RegressionFit> {
    fit_with_terms(data, &Term::FULL)
}

pub fn fit_with_terms(data: &[RegressionDataPoint], terms: &[Term]) -> Result<RegressionFit> {
    if !data.iter().any(|d| d.n_p > 0) {
        return Err(Error::InvalidArgument("regression data has no trials".into()));
    }
    let design = Design::new(data, terms)?;
    fit_design(&design)
}

pub fn fit_design(design: &Design) -> Result<RegressionFit> {
    let k = design.terms.len();
    // Rank check on the trial-weighted Gram matrix.
    let gram = {
        let xw = DMatrix::from_fn(design.x.nrows(), k, |i, j| design.x[(i, j)] * design.trials[i]);
        design.x.transpose() * xw
    };
    let rank = gram.clone().svd(false, false).rank(1e-9 * gram.amax().max(1.0));
    if rank < k {
        return Err(Error::InvalidArgument(format!(
            "design matrix is rank deficient (rank {rank} < {k} terms)"
        )));
    }

    let mut beta = DVector::zeros(k);
    let mut ll = design.log_likelihood(&beta);
    let mut grad = design.gradient(&beta);
    let mut iterations = 0;
    while max_abs(&grad) >= GRADIENT_TOLERANCE && iterations < MAX_ITERATIONS {
        iterations += 1;
        let info = design.information(&beta);
        let Some(step) = info.cholesky().map(|c| c.solve(&grad)) else {
            break;
        };
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let candidate = &beta + &step * scale;
            let cll = design.log_likelihood(&candidate);
            if cll >= ll - 1e-12 * ll.abs().max(1.0) {
                beta = candidate;
                ll = cll;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
        grad = design.gradient(&beta);
    }

    let p = design.probabilities(&beta);
    let separated = (0..p.len()).any(|i| design.trials[i] > 0.0 && (p[i] < SEPARATION_EPS || p[i] > 1.0 - SEPARATION_EPS));
    let gradient_max_norm = max_abs(&grad);
    Ok(RegressionFit {
        coefficients: design
            .terms
            .iter()
            .zip(beta.iter())
            .map(|(t, b)| (t.name().to_string(), *b))
            .collect(),
        log_likelihood: ll,
        converged: gradient_max_norm < GRADIENT_TOLERANCE && !separated,
        separated,
        iterations,
        gradient_max_norm,
    })
}

/// Predicted inclusion probability for a covariate setting. `conn` is one
/// of `pos`, `neg`, `neutral` (or the long forms).
pub fn simulate_inclusion_rate(fit: &RegressionFit, conn: &str, is_lgbt: bool) -> Result<f64> {
    if !fit.converged {
        return Err(Error::InvalidArgument("regression fit did not converge".into()));
    }
    let conn: Connotation = conn.parse()?;
    let eta: f64 = Term::FULL
        .iter()
        .map(|t| fit.coefficient(*t) * t.value(conn, is_lgbt))
        .sum();
    Ok(inv_logit(eta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::Tally;

    fn pt(conn: Connotation, is_lgbt: bool, n_p: u64, overlap: u64) -> RegressionDataPoint {
        RegressionDataPoint {
            bio_id: "b".into(),
            direction: "en->fr".parse().unwrap(),
            conn,
            is_lgbt,
            n_p,
            overlap,
        }
    }

    fn fit_by_hand(coefs: &[(Term, f64)]) -> RegressionFit {
        RegressionFit {
            coefficients: coefs.iter().map(|(t, v)| (t.name().to_string(), *v)).collect(),
            log_likelihood: 0.0,
            converged: true,
            separated: false,
            iterations: 0,
            gradient_max_norm: 0.0,
        }
    }

    #[test]
    fn three_points_per_bio() {
        let counts = PartitionCounts {
            positive: Tally { shared: 2, total: 4 },
            neutral: Tally { shared: 3, total: 6 },
            negative: Tally::default(),
        };
        let pts = bio_points("x", &"en->fr".parse().unwrap(), false, &counts);
        let got: Vec<(u64, u64, Connotation)> = pts.iter().map(|p| (p.n_p, p.overlap, p.conn)).collect();
        assert_eq!(
            got,
            vec![(4, 2, Connotation::Positive), (6, 3, Connotation::Neutral), (0, 0, Connotation::Negative)]
        );
    }

    #[test]
    fn intercept_only_at_half() {
        let data = vec![pt(Connotation::Neutral, false, 10, 5), pt(Connotation::Positive, true, 4, 2)];
        let fit = fit_with_terms(&data, &[Term::Intercept]).unwrap();
        assert!(fit.converged);
        assert!(fit.coefficient(Term::Intercept).abs() < 1e-6);
    }

    #[test]
    fn intercept_matches_pooled_logit() {
        let data = vec![pt(Connotation::Neutral, false, 10, 3), pt(Connotation::Neutral, false, 10, 4)];
        let fit = fit_with_terms(&data, &[Term::Intercept]).unwrap();
        assert!((fit.coefficient(Term::Intercept) - logit(0.35)).abs() < 1e-9);
    }

    #[test]
    fn zero_trial_points_do_not_matter() {
        let a = vec![pt(Connotation::Neutral, false, 10, 3)];
        let mut b = a.clone();
        b.push(pt(Connotation::Neutral, false, 0, 0));
        let fa = fit_with_terms(&a, &[Term::Intercept]).unwrap();
        let fb = fit_with_terms(&b, &[Term::Intercept]).unwrap();
        assert_eq!(fa.coefficients, fb.coefficients);
    }

    #[test]
    fn separated_data_is_flagged() {
        let data = vec![pt(Connotation::Neutral, false, 10, 0), pt(Connotation::Positive, false, 10, 10)];
        let fit = fit_with_terms(&data, &[Term::Intercept, Term::ConnPos]).unwrap();
        assert!(!fit.converged);
        assert!(fit.separated);
    }

    #[test]
    fn degenerate_inputs() {
        let data = vec![pt(Connotation::Neutral, false, 10, 3)];
        assert!(fit_binomial_regression(&data).is_err());
        assert!(fit_with_terms(&[pt(Connotation::Neutral, false, 0, 0)], &[Term::Intercept]).is_err());
        assert!(fit_with_terms(&[pt(Connotation::Neutral, false, 1, 2)], &[Term::Intercept]).is_err());
    }

    #[test]
    fn inclusion_rate_formula() {
        assert_eq!(simulate_inclusion_rate(&fit_by_hand(&[]), "neutral", false).unwrap(), 0.5);
        let f = fit_by_hand(&[(Term::Intercept, logit(0.366)), (Term::ConnPos, -0.07)]);
        let r = simulate_inclusion_rate(&f, "pos", false).unwrap();
        assert!((r - 1.0 / (1.0 + (-(logit(0.366) - 0.07)).exp())).abs() < 1e-12);
        assert!((r - 0.350).abs() < 5e-4);
        let f = fit_by_hand(&[(Term::ConnPos, 20.0)]);
        assert!((simulate_inclusion_rate(&f, "positive", false).unwrap() - 1.0).abs() < 1e-6);
        assert!(simulate_inclusion_rate(&f, "mixed", false).is_err());
    }

    #[test]
    fn csv_columns() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[pt(Connotation::Positive, true, 4, 2)]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "bio_id,direction,conn,is_lgbt,N_p,overlap\nb,en->fr,pos,true,4,2\n"
        );
    }
}
