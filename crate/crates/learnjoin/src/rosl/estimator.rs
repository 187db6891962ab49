//! Inverse-propensity estimates over adaptively selected partitions.

use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EstimateError {
    #[error("address {0} has no observations")]
    NoData(usize),
    #[error("sample size must be positive")]
    InsufficientSample,
    #[error("confidence level must lie in (0, 1)")]
    Confidence,
}

/// How per-step scores are weighted inside one address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    /// h_t = √(e_t / T_r).
    Adaptive,
    /// h_t = 1 / √T_r, the plain inverse-propensity mean.
    #[default]
    Constant,
}

/// How an observation becomes a score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scoring {
    /// Γ = Y / e.
    #[default]
    InversePropensity,
    /// Γ = Y, ignoring the selection probability. Biased; kept as a negative control.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation<T> {
    pub step: usize,
    pub y: T,
    pub e: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T> {
    pub q_hat: T,
    pub ci: (T, T),
    /// Steps logged so far.
    pub samples: usize,
}

/// Two-sided standard normal quantile for confidence level `p`.
pub fn normal_quantile<T: Real>(p: T) -> Result<T, EstimateError> {
    let p = p.to_f64().ok_or(EstimateError::Confidence)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(EstimateError::Confidence);
    }
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(T::of(n.inverse_cdf(0.5 + p / 2.0)))
}

/// Per-address logs of (Y_t, e_t).
#[derive(Debug, Clone)]
pub struct EstimatorState<T> {
    obs: Vec<Vec<Observation<T>>>,
    steps: usize,
    pub weighting: Weighting,
    pub scoring: Scoring,
}

impl<T: Real> EstimatorState<T> {
    pub fn new(addresses: usize) -> Self {
        EstimatorState {
            obs: vec![Vec::new(); addresses],
            steps: 0,
            weighting: Weighting::default(),
            scoring: Scoring::default(),
        }
    }

    pub fn with(mut self, weighting: Weighting, scoring: Scoring) -> Self {
        self.weighting = weighting;
        self.scoring = scoring;
        self
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Logs one step: `chosen` yielded `y`; every eligible address gets an
    /// observation carrying its selection probability and a zero value unless chosen.
    pub fn record_step(&mut self, chosen: usize, y: T, eligible: &[(usize, T)]) {
        let step = self.steps;
        for &(a, e) in eligible {
            if a >= self.obs.len() {
                self.obs.resize(a + 1, Vec::new());
            }
            let y = if a == chosen { y } else { T::zero() };
            self.obs[a].push(Observation { step, y, e });
        }
        self.steps += 1;
    }

    pub fn observations(&self, addr: usize) -> &[Observation<T>] {
        self.obs.get(addr).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn trials(&self, addr: usize) -> usize {
        self.observations(addr).len()
    }

    pub fn addresses(&self) -> impl Iterator<Item = usize> + '_ {
        self.obs.iter().enumerate().filter(|(_, o)| !o.is_empty()).map(|(a, _)| a)
    }

    fn weight(&self, e: T, t_r: T) -> T {
        match self.weighting {
            Weighting::Adaptive => (e / t_r).sqrt(),
            Weighting::Constant => t_r.sqrt().recip(),
        }
    }

    fn score(&self, o: &Observation<T>) -> T {
        match self.scoring {
            Scoring::InversePropensity => o.y / o.e,
            Scoring::Raw => o.y,
        }
    }

    /// Σ_t h_t²/e_t for one address.
    pub fn normalization(&self, addr: usize) -> T {
        let obs = self.observations(addr);
        let t_r = T::count(obs.len() as u64);
        obs.iter().fold(T::zero(), |acc, o| {
            let h = self.weight(o.e, t_r);
            acc + h * h / o.e
        })
    }

    /// Weighted score mean and its variance estimate for one address.
    pub fn per_tuple_estimate(&self, addr: usize) -> Result<(T, T), EstimateError> {
        let obs = self.observations(addr);
        if obs.is_empty() {
            return Err(EstimateError::NoData(addr));
        }
        let t_r = T::count(obs.len() as u64);
        let (mut sh, mut shg) = (T::zero(), T::zero());
        for o in obs {
            let h = self.weight(o.e, t_r);
            sh = sh + h;
            shg = shg + h * self.score(o);
        }
        let q = shg / sh;
        let mut num = T::zero();
        for o in obs {
            let h = self.weight(o.e, t_r);
            let d = self.score(o) - q;
            num = num + h * h * d * d;
        }
        Ok((q, num / (sh * sh)))
    }

    /// Trial-weighted mean of per-address estimates, with the interval
    /// ± z·Σ_r T_r·√V̂_r / T where T = Σ_r T_r.
    pub fn aggregate_estimate(&self, p_conf: T) -> Result<Estimate<T>, EstimateError> {
        let z = normal_quantile(p_conf)?;
        let (mut total, mut q_acc, mut sd_acc) = (T::zero(), T::zero(), T::zero());
        for a in self.addresses() {
            let t_r = T::count(self.trials(a) as u64);
            let (q, v) = self.per_tuple_estimate(a)?;
            total = total + t_r;
            q_acc = q_acc + t_r * q;
            sd_acc = sd_acc + t_r * v.sqrt();
        }
        if total == T::zero() {
            return Ok(Estimate { q_hat: T::zero(), ci: (T::zero(), T::zero()), samples: 0 });
        }
        let q_hat = q_acc / total;
        let half = z * sd_acc / total;
        Ok(Estimate { q_hat, ci: (q_hat - half, q_hat + half), samples: self.steps })
    }

    /// Equal-weight mean of per-address estimates over all logged addresses.
    ///
    /// The interval uses the variance of the whole estimator as a sum of
    /// per-step contributions, so covariance between addresses that compete
    /// for the same step is accounted for.
    pub fn population_estimate(&self, p_conf: T) -> Result<Estimate<T>, EstimateError> {
        let z = normal_quantile(p_conf)?;
        let addrs: Vec<usize> = self.addresses().collect();
        if addrs.is_empty() {
            return Ok(Estimate { q_hat: T::zero(), ci: (T::zero(), T::zero()), samples: 0 });
        }
        let w = T::count(addrs.len() as u64).recip();
        let mut per_step = vec![T::zero(); self.steps];
        let mut q_hat = T::zero();
        for &a in &addrs {
            let obs = self.observations(a);
            let t_r = T::count(obs.len() as u64);
            let (q, _) = self.per_tuple_estimate(a)?;
            let sh = obs.iter().fold(T::zero(), |acc, o| acc + self.weight(o.e, t_r));
            for o in obs {
                let h = self.weight(o.e, t_r);
                per_step[o.step] = per_step[o.step] + w * h / sh * (self.score(o) - q);
            }
            q_hat = q_hat + w * q;
        }
        let var = per_step.iter().fold(T::zero(), |acc, &c| acc + c * c);
        let half = z * var.sqrt();
        Ok(Estimate { q_hat, ci: (q_hat - half, q_hat + half), samples: self.steps })
    }
}

/// Q̂ · |R|·|S| / j.
pub fn count_estimate<T: Real>(q_hat: T, r_tuples: usize, s_tuples: usize, j: T) -> Result<T, EstimateError> {
    if j.is_nan() || j <= T::zero() {
        return Err(EstimateError::InsufficientSample);
    }
    Ok(q_hat * T::count(r_tuples as u64) * T::count(s_tuples as u64) / j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn single(y: f64, e: f64) -> EstimatorState<f64> {
        let mut s = EstimatorState::new(1);
        s.record_step(0, y, &[(0, e)]);
        s
    }

    #[test]
    fn one_sample() {
        for w in [Weighting::Adaptive, Weighting::Constant] {
            let s = single(2.0, 0.5).with(w, Scoring::InversePropensity);
            assert_eq!(s.per_tuple_estimate(0).unwrap(), (4.0, 0.0));
        }
        assert_eq!(EstimatorState::<f64>::new(2).per_tuple_estimate(1), Err(EstimateError::NoData(1)));
    }

    #[test]
    fn constant_propensity_is_sample_mean() {
        for w in [Weighting::Adaptive, Weighting::Constant] {
            let mut s = EstimatorState::<f64>::new(1).with(w, Scoring::InversePropensity);
            for y in [1.0, 4.0, 2.0, 5.0] {
                s.record_step(0, y, &[(0, 1.0)]);
            }
            let (q, _) = s.per_tuple_estimate(0).unwrap();
            assert_relative_eq!(q, 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn adaptive_normalization() {
        let mut s = EstimatorState::<f64>::new(2).with(Weighting::Adaptive, Scoring::InversePropensity);
        s.record_step(0, 1.0, &[(0, 0.25), (1, 0.75)]);
        s.record_step(1, 3.0, &[(0, 0.6), (1, 0.4)]);
        s.record_step(1, 0.0, &[(1, 1.0)]);
        assert_relative_eq!(s.normalization(0), 1.0, epsilon = 1e-12);
        assert_relative_eq!(s.normalization(1), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn aggregate_examples() {
        let s = single(3.0, 1.0);
        let e = s.aggregate_estimate(0.95).unwrap();
        assert_eq!(e.q_hat, 3.0);
        assert_eq!(e.ci, (3.0, 3.0));

        let mut s = EstimatorState::<f64>::new(2);
        s.record_step(0, 2.0, &[(0, 1.0)]);
        s.record_step(1, 4.0, &[(1, 1.0)]);
        let e = s.aggregate_estimate(0.95).unwrap();
        assert_relative_eq!(e.q_hat, 3.0);
        assert_eq!(e.ci.0, e.ci.1);
    }

    #[test]
    fn count_examples() {
        assert_relative_eq!(count_estimate(0.2, 10, 10, 10.0).unwrap(), 2.0, epsilon = 1e-12);
        assert_eq!(count_estimate(0.0, 10, 10, 10.0).unwrap(), 0.0);
        assert_eq!(count_estimate(1.0_f64, 4, 5, 20.0).unwrap(), 1.0);
        assert_eq!(count_estimate(1.0_f64, 4, 5, 0.0), Err(EstimateError::InsufficientSample));
    }

    #[test]
    fn quantile() {
        assert_relative_eq!(normal_quantile(0.95_f64).unwrap(), 1.959964, epsilon = 1e-6);
        assert!(normal_quantile(1.0_f64).is_err());
    }
}
