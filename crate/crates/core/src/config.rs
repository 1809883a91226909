//! Physical, power and algorithmic parameters of one system instance.
//!
//! All powers are stored in watts and all Rician factors and reference losses
//! in dB; conversion from dBm happens when configuration files are loaded.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

/// Large-scale parameters of one link class (AP-IRS, IRS-user or AP-user).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    /// Path-loss exponent.
    pub pathloss_exp: f64,
    /// Rician factor in dB. `-inf` gives pure Rayleigh, `+inf` pure LoS.
    pub rician_db: f64,
}

/// Region in which users are dropped: the disk center is uniform on the segment
/// `start..end` (ground plane), users are uniform inside the disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserArea {
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub radius: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// M
    pub num_aps: usize,
    /// K
    pub num_users: usize,
    /// L
    pub num_irs: usize,
    /// N
    pub elements_per_irs: usize,
    pub ap_positions: Vec<[f64; 3]>,
    pub irs_positions: Vec<[f64; 3]>,
    pub user_area: UserArea,
    /// Path loss at the 1 m reference distance, dB.
    pub pathloss_ref_db: f64,
    pub ap_irs: LinkParams,
    pub irs_user: LinkParams,
    pub ap_user: LinkParams,
    /// Per-AP transmit power budget, W.
    pub p_max: f64,
    /// Minimum rate per user, bit/s/Hz.
    pub r_min: f64,
    /// Noise power, W.
    pub sigma2: f64,
    /// Power amplifier efficiency in (0, 1].
    pub upsilon: f64,
    /// Circuit power per AP, W.
    pub p_ap: f64,
    /// Circuit power per user, W.
    pub p_user: f64,
    /// Circuit power per reflecting element, W.
    pub p_irs: f64,
    /// Bandwidth, Hz.
    pub bandwidth: f64,
    /// Penalty weight for rate shortfall.
    pub beta1: f64,
    /// Penalty weight for per-AP power excess.
    pub beta2: f64,
    /// Whether the EE term of the penalized objective carries the bandwidth
    /// factor (bit/Joule) or is per Hz (bit/Joule/Hz).
    pub penalty_includes_bandwidth: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("{0} must be at least 1")]
    ZeroDimension(&'static str),
    #[error("expected {expected} {what} positions, found {found}")]
    PositionCount {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("upsilon must lie in (0, 1], got {0}")]
    Upsilon(f64),
    #[error("{0} must be positive, got {1}")]
    NotPositive(&'static str, f64),
    #[error("{0} must be non-negative, got {1}")]
    Negative(&'static str, f64),
    #[error("{0} is not finite")]
    NotFinite(&'static str),
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

/// AP `m` (zero-based) at `(10 m, -40, 5)`.
pub fn default_ap_positions(num_aps: usize) -> Vec<[f64; 3]> {
    (0..num_aps).map(|m| [10.0 * m as f64, -40.0, 5.0]).collect()
}

/// IRSs at `(40, 10, 10)`, `(80, 10, 10)`, then every further 40 m along x.
pub fn default_irs_positions(num_irs: usize) -> Vec<[f64; 3]> {
    (0..num_irs).map(|l| [40.0 * (l + 1) as f64, 10.0, 10.0]).collect()
}

impl ScenarioConfig {
    /// Default geometry and link/power parameters with the given dimensions.
    pub fn with_dims(num_aps: usize, num_users: usize, num_irs: usize, elements_per_irs: usize) -> Self {
        Self {
            num_aps,
            num_users,
            num_irs,
            elements_per_irs,
            ap_positions: default_ap_positions(num_aps),
            irs_positions: default_irs_positions(num_irs),
            user_area: UserArea {
                start: [0.0, 0.0],
                end: [120.0, 0.0],
                radius: 2.0,
                height: 1.65,
            },
            pathloss_ref_db: 30.0,
            ap_irs: LinkParams {
                pathloss_exp: 2.2,
                rician_db: 10.0,
            },
            irs_user: LinkParams {
                pathloss_exp: 2.8,
                rician_db: 5.0,
            },
            ap_user: LinkParams {
                pathloss_exp: 3.5,
                rician_db: f64::NEG_INFINITY,
            },
            p_max: 1.0,
            r_min: 1.0,
            sigma2: dbm_to_watts(-60.0),
            upsilon: 0.8,
            p_ap: dbm_to_watts(10.0),
            p_user: dbm_to_watts(10.0),
            p_irs: dbm_to_watts(0.0),
            bandwidth: 1e6,
            beta1: 50.0,
            beta2: 50.0,
            penalty_includes_bandwidth: true,
        }
    }

    /// Full-size system: 13 APs, 3 users, 2 IRSs of 50 elements.
    pub fn full_scale() -> Self {
        Self::with_dims(13, 3, 2, 50)
    }

    /// Desk-scale system used by tests and CI: 4 APs, 2 users, 2 IRSs of 8.
    pub fn desk() -> Self {
        Self::with_dims(4, 2, 2, 8)
    }

    /// I = L N.
    pub fn total_elements(&self) -> usize {
        self.num_irs * self.elements_per_irs
    }

    /// alpha = 1 / upsilon.
    pub fn alpha(&self) -> f64 {
        1.0 / self.upsilon
    }

    /// Static power `M P_AP + K P_User + I P_IRS`.
    pub fn p_fix(&self) -> f64 {
        self.num_aps as f64 * self.p_ap
            + self.num_users as f64 * self.p_user
            + self.total_elements() as f64 * self.p_irs
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, v) in [
            ("num_aps", self.num_aps),
            ("num_users", self.num_users),
            ("num_irs", self.num_irs),
            ("elements_per_irs", self.elements_per_irs),
        ] {
            if v == 0 {
                return Err(ConfigError::ZeroDimension(name));
            }
        }
        if self.ap_positions.len() != self.num_aps {
            return Err(ConfigError::PositionCount {
                what: "AP",
                expected: self.num_aps,
                found: self.ap_positions.len(),
            });
        }
        if self.irs_positions.len() != self.num_irs {
            return Err(ConfigError::PositionCount {
                what: "IRS",
                expected: self.num_irs,
                found: self.irs_positions.len(),
            });
        }
        if !(self.upsilon > 0.0 && self.upsilon <= 1.0) {
            return Err(ConfigError::Upsilon(self.upsilon));
        }
        for (name, v) in [("p_max", self.p_max), ("sigma2", self.sigma2)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ConfigError::NotPositive(name, v));
            }
        }
        for (name, v) in [
            ("p_ap", self.p_ap),
            ("p_user", self.p_user),
            ("p_irs", self.p_irs),
            ("r_min", self.r_min),
            ("bandwidth", self.bandwidth),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("user_area.radius", self.user_area.radius),
        ] {
            if !(v >= 0.0) {
                return Err(ConfigError::Negative(name, v));
            }
            if !v.is_finite() {
                return Err(ConfigError::NotFinite(name));
            }
        }
        for (name, v) in [
            ("pathloss_ref_db", self.pathloss_ref_db),
            ("ap_irs.pathloss_exp", self.ap_irs.pathloss_exp),
            ("irs_user.pathloss_exp", self.irs_user.pathloss_exp),
            ("ap_user.pathloss_exp", self.ap_user.pathloss_exp),
        ] {
            if !v.is_finite() {
                return Err(ConfigError::NotFinite(name));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_defaults_are_valid() {
        let cfg = ScenarioConfig::desk();
        cfg.validate().unwrap();
        assert_eq!(cfg.total_elements(), 16);
        assert!((cfg.alpha() - 1.25).abs() < 1e-15);
        // 4 * 10 mW + 2 * 10 mW + 16 * 1 mW
        assert!((cfg.p_fix() - 0.076).abs() < 1e-12);
    }

    #[test]
    fn full_scale_geometry() {
        let cfg = ScenarioConfig::full_scale();
        cfg.validate().unwrap();
        assert_eq!(cfg.ap_positions[12], [120.0, -40.0, 5.0]);
        assert_eq!(cfg.irs_positions, [[40.0, 10.0, 10.0], [80.0, 10.0, 10.0]]);
        assert!((cfg.sigma2 - 1e-9).abs() < 1e-21);
    }

    #[test]
    fn rejects_bad_values() {
        let mut cfg = ScenarioConfig::desk();
        cfg.upsilon = 0.0;
        assert_eq!(cfg.validate(), Err(ConfigError::Upsilon(0.0)));
        let mut cfg = ScenarioConfig::desk();
        cfg.num_users = 0;
        assert!(matches!(cfg.validate(), Err(ConfigError::ZeroDimension("num_users"))));
        let mut cfg = ScenarioConfig::desk();
        cfg.ap_positions.pop();
        assert!(matches!(cfg.validate(), Err(ConfigError::PositionCount { .. })));
        let mut cfg = ScenarioConfig::desk();
        cfg.p_irs = -1.0;
        assert!(matches!(cfg.validate(), Err(ConfigError::Negative("p_irs", _))));
    }

    #[test]
    fn unit_conversions() {
        assert!((dbm_to_watts(10.0) - 0.01).abs() < 1e-15);
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-15);
        assert_eq!(db_to_linear(f64::NEG_INFINITY), 0.0);
    }
}
