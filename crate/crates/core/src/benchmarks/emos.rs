//! Ensemble model output statistics: a normal (temperature) or zero-truncated
//! normal (wind) predictive distribution whose location is linear in the
//! ensemble mean and whose variance is a softplus of a linear function of the
//! ensemble variance. Coefficients minimize the mean closed-form CRPS over the
//! training pairs.

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::crps::crps_closed_form;
use super::simplex::{nelder_mead, NelderMeadSettings};
use crate::domain::{DomainError, Horizon, QuantileForecast, QuantileLevels, TargetKind};
use crate::normal;

/// Added to the softplus output so the predictive variance stays positive.
pub const VARIANCE_FLOOR: f64 = 1e-8;

/// Minimum number of training pairs for a fit.
pub const MIN_TRAINING_PAIRS: usize = 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmosError {
    #[error("EMOS needs at least {MIN_TRAINING_PAIRS} training pairs, got {0}")]
    TooFewPairs(usize),
    #[error("training pair {0} has a non-finite value")]
    NonFiniteInput(usize),
    #[error("ensemble means are constant across the training set")]
    DegenerateFeatures,
    #[error("optimizer stopped after {iterations} iterations without converging (objective {objective})")]
    NotConverged { iterations: usize, objective: f64 },
    #[error("no EMOS family for target {0}")]
    NoFamily(TargetKind),
    #[error("EMOS parameter file: {0}")]
    ParamsFile(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EmosFamily {
    #[serde(rename = "normal")]
    Normal,
    #[serde(rename = "truncated_normal_at_zero")]
    TruncatedNormal,
}

impl EmosFamily {
    pub fn for_target(target: TargetKind) -> Result<Self, EmosError> {
        match target {
            TargetKind::Temperature => Ok(EmosFamily::Normal),
            TargetKind::Wind => Ok(EmosFamily::TruncatedNormal),
            TargetKind::Dax => Err(EmosError::NoFamily(target)),
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            EmosFamily::Normal => "normal",
            EmosFamily::TruncatedNormal => "truncated_normal_at_zero",
        }
    }
}

impl fmt::Display for EmosFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for EmosFamily {
    type Err = EmosError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "normal" => Ok(EmosFamily::Normal),
            "truncated_normal_at_zero" => Ok(EmosFamily::TruncatedNormal),
            other => Err(EmosError::ParamsFile(format!("unknown family {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingPair {
    pub ens_mean: f64,
    pub ens_var: f64,
    pub obs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmosParams {
    pub family: EmosFamily,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    /// Length of the training window in days, `None` for all available history.
    pub training_window_days: Option<u32>,
    pub fitted_at: Option<NaiveDate>,
    pub n_train: usize,
}

fn softplus(z: f64) -> f64 {
    if z > 35.0 {
        z
    } else {
        libm::log1p(libm::exp(z))
    }
}

impl EmosParams {
    pub fn location(&self, ens_mean: f64) -> f64 {
        self.a + self.b * ens_mean
    }

    pub fn scale(&self, ens_var: f64) -> f64 {
        libm::sqrt(softplus(self.c + self.d * ens_var) + VARIANCE_FLOOR)
    }

    /// Serializes to `key=value` lines.
    pub fn to_kv(&self) -> String {
        let mut out = format!(
            "family={}\na={}\nb={}\nc={}\nd={}\n",
            self.family, self.a, self.b, self.c, self.d
        );
        if let Some(days) = self.training_window_days {
            out.push_str(&format!("training_window_days={days}\n"));
        }
        if let Some(at) = self.fitted_at {
            out.push_str(&format!("fitted_at={at}\n"));
        }
        out.push_str(&format!("n_train={}\n", self.n_train));
        out
    }

    pub fn from_kv(text: &str) -> Result<Self, EmosError> {
        let bad = |m: String| EmosError::ParamsFile(m);
        let mut family = None;
        let mut coefs = [None; 4];
        let mut params = EmosParams {
            family: EmosFamily::Normal,
            a: 0.0,
            b: 0.0,
            c: 0.0,
            d: 0.0,
            training_window_days: None,
            fitted_at: None,
            n_train: 0,
        };
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (key, value) = line.split_once('=').ok_or_else(|| bad(format!("line {line:?} is not key=value")))?;
            let num = || value.parse::<f64>().map_err(|_| bad(format!("{key}: {value:?} is not a number")));
            match key {
                "family" => family = Some(value.parse()?),
                "a" => coefs[0] = Some(num()?),
                "b" => coefs[1] = Some(num()?),
                "c" => coefs[2] = Some(num()?),
                "d" => coefs[3] = Some(num()?),
                "training_window_days" => {
                    params.training_window_days = Some(value.parse().map_err(|_| bad(format!("bad window {value:?}")))?)
                }
                "fitted_at" => params.fitted_at = Some(value.parse().map_err(|_| bad(format!("bad date {value:?}")))?),
                "n_train" => params.n_train = value.parse().map_err(|_| bad(format!("bad count {value:?}")))?,
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        params.family = family.ok_or_else(|| bad("missing family".into()))?;
        let missing = |k| bad(format!("missing {k}"));
        params.a = coefs[0].ok_or_else(|| missing("a"))?;
        params.b = coefs[1].ok_or_else(|| missing("b"))?;
        params.c = coefs[2].ok_or_else(|| missing("c"))?;
        params.d = coefs[3].ok_or_else(|| missing("d"))?;
        Ok(params)
    }
}

/// Optimizer configuration for [`emos_fit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSettings {
    pub start: [f64; 4],
    pub optimizer: NelderMeadSettings,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self { start: [0.0, 1.0, 1.0, 0.0], optimizer: NelderMeadSettings::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmosFit {
    pub params: EmosParams,
    /// Mean training CRPS at the optimum.
    pub objective: f64,
    pub iterations: usize,
    /// Best objective after each optimizer iteration.
    pub history: Vec<f64>,
}

fn mean_crps(family: EmosFamily, coefs: &[f64], training: &[TrainingPair]) -> f64 {
    let p = EmosParams {
        family,
        a: coefs[0],
        b: coefs[1],
        c: coefs[2],
        d: coefs[3],
        training_window_days: None,
        fitted_at: None,
        n_train: 0,
    };
    let total: f64 = training
        .iter()
        .map(|t| crps_closed_form(family, p.location(t.ens_mean), p.scale(t.ens_var), t.obs))
        .map(|s| if s.is_finite() && s >= 0.0 { s } else { f64::INFINITY })
        .sum();
    total / training.len() as f64
}

/// Fits EMOS coefficients by minimizing the mean closed-form CRPS.
pub fn emos_fit(training: &[TrainingPair], family: EmosFamily, settings: &FitSettings) -> Result<EmosFit, EmosError> {
    if training.len() < MIN_TRAINING_PAIRS {
        return Err(EmosError::TooFewPairs(training.len()));
    }
    if let Some(i) = training
        .iter()
        .position(|t| !(t.ens_mean.is_finite() && t.ens_var.is_finite() && t.obs.is_finite()))
    {
        return Err(EmosError::NonFiniteInput(i));
    }
    let first = training[0].ens_mean;
    if training.iter().all(|t| t.ens_mean == first) {
        return Err(EmosError::DegenerateFeatures);
    }

    let min = nelder_mead(|x| mean_crps(family, x, training), &settings.start, &settings.optimizer);
    if !min.converged {
        return Err(EmosError::NotConverged { iterations: min.iterations, objective: min.value });
    }
    Ok(EmosFit {
        params: EmosParams {
            family,
            a: min.x[0],
            b: min.x[1],
            c: min.x[2],
            d: min.x[3],
            training_window_days: None,
            fitted_at: None,
            n_train: training.len(),
        },
        objective: min.value,
        iterations: min.iterations,
        history: min.history,
    })
}

/// Predictive quantiles at `levels` via the inverse CDF.
pub fn emos_predict(params: &EmosParams, ens_mean: f64, ens_var: f64, levels: &QuantileLevels) -> [f64; 5] {
    let mu = params.location(ens_mean);
    let sigma = params.scale(ens_var);
    let mut out = [0.0; 5];
    for (q, alpha) in out.iter_mut().zip(levels.iter()) {
        *q = match params.family {
            EmosFamily::Normal => mu + sigma * normal::quantile(alpha),
            EmosFamily::TruncatedNormal => {
                // F(x) = alpha  <=>  Phi((x - mu)/sigma) = 1 - (1 - alpha) p, solved in the upper tail.
                let p = normal::cdf(mu / sigma);
                (mu - sigma * normal::quantile((1.0 - alpha) * p)).max(0.0)
            }
        };
    }
    out
}

/// EMOS forecast for one weather cell.
pub fn emos_forecast(
    params: &EmosParams,
    target: TargetKind,
    horizon: Horizon,
    round_date: NaiveDate,
    ens_mean: f64,
    ens_var: f64,
) -> Result<QuantileForecast, EmosError> {
    let expected = EmosFamily::for_target(target)?;
    if expected != params.family {
        return Err(EmosError::ParamsFile(format!("{} family fitted for {target}", params.family)));
    }
    let q = emos_predict(params, ens_mean, ens_var, &QuantileLevels::standard());
    Ok(QuantileForecast::new(target, horizon, round_date, q)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal, Uniform};
    use statrs::distribution::{ContinuousCDF, Normal as StatNormal};

    fn params(family: EmosFamily, sigma: f64) -> EmosParams {
        // softplus(c) + floor = sigma^2
        let c = (libm::exp(sigma * sigma - VARIANCE_FLOOR) - 1.0).ln();
        EmosParams { family, a: 0.0, b: 1.0, c, d: 0.0, training_window_days: None, fitted_at: None, n_train: 0 }
    }

    #[test]
    fn normal_quantiles() {
        let p = params(EmosFamily::Normal, 2.0);
        assert!((p.scale(0.0) - 2.0).abs() < 1e-12);
        let q = emos_predict(&p, 5.0, 0.0, &QuantileLevels::standard());
        assert!((q[2] - 5.0).abs() < 1e-12);
        let oracle = 5.0 + 2.0 * StatNormal::standard().inverse_cdf(0.975);
        assert!((q[4] - oracle).abs() < 1e-10);
        assert!((q[4] - 8.919_927_969_080_108).abs() < 1e-10);
        assert!(q.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn half_normal_median() {
        let p = params(EmosFamily::TruncatedNormal, 1.0);
        let q = emos_predict(&p, 0.0, 0.0, &QuantileLevels::standard());
        // Half-normal inverse CDF: Phi^-1((1 + alpha) / 2).
        let oracle = StatNormal::standard().inverse_cdf(0.75);
        assert!((q[2] - oracle).abs() < 1e-10);
        assert!((q[2] - 0.674_489_750_196_081_7).abs() < 1e-10);
        for (v, a) in q.iter().zip(crate::LEVELS) {
            assert!((v - StatNormal::standard().inverse_cdf((1.0 + a) / 2.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn params_file_round_trip() {
        let p = EmosParams {
            family: EmosFamily::TruncatedNormal,
            a: 0.25,
            b: 0.9,
            c: -1.5,
            d: 0.01,
            training_window_days: None,
            fitted_at: Some("2021-11-03".parse().unwrap()),
            n_train: 1000,
        };
        assert_eq!(EmosParams::from_kv(&p.to_kv()).unwrap(), p);
        assert!(EmosParams::from_kv("family=normal\na=1\n").is_err());
        assert!(EmosParams::from_kv("family=gamma\na=1\nb=1\nc=1\nd=1\n").is_err());
    }

    fn synthetic(n: usize, seed: u64) -> Vec<TrainingPair> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let means = Uniform::new(-5.0, 15.0).unwrap();
        let noise = Normal::new(0.0, 1.0).unwrap();
        (0..n)
            .map(|_| {
                let m: f64 = means.sample(&mut rng);
                TrainingPair { ens_mean: m, ens_var: 1.0, obs: m + noise.sample(&mut rng) }
            })
            .collect()
    }

    #[test]
    fn recovers_identity_mapping() {
        let fit = emos_fit(&synthetic(5000, 7), EmosFamily::Normal, &FitSettings::default()).unwrap();
        assert!(fit.params.a.abs() < 0.05, "{:?}", fit.params);
        assert!((fit.params.b - 1.0).abs() < 0.05);
        assert!((fit.params.scale(1.0) - 1.0).abs() < 0.05);
        assert!(fit.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn fit_is_reproducible() {
        let data = synthetic(500, 3);
        let a = emos_fit(&data, EmosFamily::TruncatedNormal, &FitSettings::default()).unwrap();
        let b = emos_fit(&data, EmosFamily::TruncatedNormal, &FitSettings::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn perfect_ensemble_drives_scale_to_floor() {
        let data: Vec<TrainingPair> = (0..100)
            .map(|i| {
                let m = i as f64 * 0.37 - 10.0;
                TrainingPair { ens_mean: m, ens_var: 1.0 + (i % 5) as f64, obs: m }
            })
            .collect();
        let fit = emos_fit(&data, EmosFamily::Normal, &FitSettings::default()).unwrap();
        assert!(fit.params.a.abs() < 1e-3, "{:?}", fit.params);
        assert!((fit.params.b - 1.0).abs() < 1e-3);
        assert!(fit.params.scale(2.0) < 1e-3);
    }

    #[test]
    fn fit_errors() {
        let few = synthetic(29, 1);
        assert_eq!(emos_fit(&few, EmosFamily::Normal, &FitSettings::default()), Err(EmosError::TooFewPairs(29)));
        let flat: Vec<TrainingPair> = (0..40).map(|i| TrainingPair { ens_mean: 3.0, ens_var: 1.0, obs: i as f64 }).collect();
        assert_eq!(emos_fit(&flat, EmosFamily::Normal, &FitSettings::default()), Err(EmosError::DegenerateFeatures));
        let mut nan = synthetic(40, 1);
        nan[5].obs = f64::NAN;
        assert_eq!(emos_fit(&nan, EmosFamily::Normal, &FitSettings::default()), Err(EmosError::NonFiniteInput(5)));
        let mut capped = FitSettings::default();
        capped.optimizer.max_iter = 3;
        assert!(matches!(
            emos_fit(&synthetic(40, 1), EmosFamily::Normal, &capped),
            Err(EmosError::NotConverged { iterations: 3, .. })
        ));
    }

    #[test]
    fn family_per_target() {
        assert_eq!(EmosFamily::for_target(TargetKind::Wind).unwrap(), EmosFamily::TruncatedNormal);
        assert_eq!(EmosFamily::for_target(TargetKind::Temperature).unwrap(), EmosFamily::Normal);
        assert!(EmosFamily::for_target(TargetKind::Dax).is_err());
        let p = params(EmosFamily::Normal, 1.0);
        let d = "2021-11-03".parse().unwrap();
        assert!(emos_forecast(&p, TargetKind::Wind, Horizon::hours(36), d, 10.0, 1.0).is_err());
        assert!(emos_forecast(&p, TargetKind::Temperature, Horizon::hours(36), d, 10.0, 1.0).is_ok());
    }
}
