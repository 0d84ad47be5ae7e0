//! Penalty factor and learning-rate schedules.

use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};

/// Stopped geometric sequence `μ_k = min(μ₁ r^{k−1}, μ_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySchedule {
    pub mu1: f64,
    pub r: f64,
    pub mu_max: f64,
}

impl PenaltySchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu1 > 0.0) || !(self.r >= 1.0) || !(self.mu_max >= self.mu1) {
            return Err(Error::Config(format!(
                "penalty schedule needs mu1 > 0, r >= 1, mu_max >= mu1; got {self:?}"
            )));
        }
        Ok(())
    }

    /// `k` counts subproblems from 1.
    pub fn mu(&self, k: u64) -> f64 {
        debug_assert!(k >= 1);
        let exp = k.saturating_sub(1).min(i32::MAX as u64) as i32;
        (self.mu1 * self.r.powi(exp)).min(self.mu_max)
    }
}

/// Oscillating-then-decaying learning rate.
///
/// `δ(t) = L0·D0^{(t mod S0)/S0}` for `t < T`, else `L1·D1^{(t−T)/S1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LRSchedule {
    pub l0: f64,
    pub d0: f64,
    pub s0: u64,
    pub t: u64,
    pub l1: Option<f64>,
    pub d1: Option<f64>,
    pub s1: Option<u64>,
}

impl LRSchedule {
    pub fn delta(&self, t: u64) -> Result<f64> {
        if t < self.t {
            let e = (t % self.s0) as f64 / self.s0 as f64;
            return Ok(self.l0 * self.d0.powf(e));
        }
        match (self.l1, self.d1, self.s1) {
            (Some(l1), Some(d1), Some(s1)) if s1 > 0 => {
                Ok(l1 * d1.powf((t - self.t) as f64 / s1 as f64))
            }
            _ => usage(format!(
                "learning rate requested at t={t} past the tipping point {} but L1/D1 are unset",
                self.t
            )),
        }
    }

    /// Builds the schedule from the four rates and the derived `(S0, T, S1)`.
    pub fn from_rates(
        l0: f64,
        d0: f64,
        l1: Option<f64>,
        d1: Option<f64>,
        e: u64,
        p: u64,
        penalty: &PenaltySchedule,
    ) -> Result<Self> {
        let (s0, t, s1) = derive_lr_params(e, p, penalty)?;
        if !(l0 > 0.0) || !(d0 > 0.0) {
            return Err(Error::Config("learning rate needs L0 > 0 and D0 > 0".into()));
        }
        if t < e && (l1.is_none() || d1.is_none()) {
            return Err(Error::Config(format!(
                "tipping point T={t} falls inside the run (E={e}); lr.L1 and lr.D1 are required"
            )));
        }
        Ok(LRSchedule {
            l0,
            d0,
            s0,
            t,
            l1,
            d1,
            s1: (t <= e).then_some(s1),
        })
    }
}

/// `S0 = 2E/P`, `T = ⌊2E(μ_max−μ₁)/(P r)⌋`, `S1 = E − T` (0 when `T > E`).
pub fn derive_lr_params(e: u64, p: u64, penalty: &PenaltySchedule) -> Result<(u64, u64, u64)> {
    if e == 0 || p == 0 {
        return Err(Error::Config("E and P must be positive".into()));
    }
    if (2 * e) % p != 0 {
        return Err(Error::Config(format!("2E/P = {}/{p} is not an integer", 2 * e)));
    }
    penalty.validate()?;
    let s0 = 2 * e / p;
    let t = (2.0 * e as f64 * (penalty.mu_max - penalty.mu1) / (p as f64 * penalty.r)).floor();
    let t = t as u64;
    Ok((s0, t, e.saturating_sub(t)))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MS: PenaltySchedule = PenaltySchedule {
        mu1: 100.0,
        r: 1.01,
        mu_max: 5000.0,
    };

    #[test]
    fn penalty_values() {
        assert_eq!(MS.mu(1), 100.0);
        assert!((MS.mu(2) - 101.0).abs() < 1e-12);
        assert_eq!(MS.mu(395), 5000.0);
        assert!(MS.mu(394) < 5000.0);
        assert_eq!(MS.mu(100_000), 5000.0);
    }

    #[test]
    fn penalty_is_monotone() {
        let mut prev = 0.0;
        for k in 1..2000 {
            let m = MS.mu(k);
            assert!(m >= prev && m <= MS.mu_max);
            prev = m;
        }
    }

    #[test]
    fn derived_parameters() {
        assert_eq!(derive_lr_params(20000, 1000, &MS).unwrap(), (40, 194059, 0));
        let geo = PenaltySchedule {
            mu_max: 500.0,
            ..MS
        };
        assert_eq!(derive_lr_params(50000, 2500, &geo).unwrap(), (40, 15841, 34159));
        let gs = PenaltySchedule {
            mu_max: 1000.0,
            ..MS
        };
        assert_eq!(derive_lr_params(50000, 2500, &gs).unwrap().1, 35643);
        assert!(derive_lr_params(100, 3, &MS).is_err());
    }

    #[test]
    fn oscillating_phase() {
        let lr = LRSchedule::from_rates(1e-4, 1e-1, None, None, 20000, 1000, &MS).unwrap();
        assert_eq!(lr.delta(0).unwrap(), 1e-4);
        assert!((lr.delta(20).unwrap() - 1e-4 * 10f64.powf(-0.5)).abs() < 1e-18);
        assert_eq!(lr.delta(40).unwrap(), 1e-4);
        for t in 1..40 {
            assert!(lr.delta(t).unwrap() < lr.delta(t - 1).unwrap());
        }
        assert!(lr.delta(200_000).is_err());
    }

    #[test]
    fn decaying_phase() {
        let geo = PenaltySchedule {
            mu_max: 500.0,
            ..MS
        };
        let lr = LRSchedule::from_rates(1e-3, 1e-1, Some(1e-4), Some(1e-2), 50000, 2500, &geo)
            .unwrap();
        assert_eq!(lr.delta(15841).unwrap(), 1e-4);
        assert!((lr.delta(50000).unwrap() - 1e-6).abs() < 1e-18);
        assert!(LRSchedule::from_rates(1e-3, 1e-1, None, None, 50000, 2500, &geo).is_err());
    }
}
