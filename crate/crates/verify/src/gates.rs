use serde::{Deserialize, Serialize};

/// Acceptance thresholds. Every field can be overridden from an experiment config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Gates {
    /// Largest accepted `|z|` for a z-score gate.
    pub z_max: f64,
    /// Smallest accepted chi-square p-value.
    pub p_min: f64,
    /// Largest accepted total-variation distance for the hole-height law.
    pub tv_max: f64,
    /// `|corr(Z_k, h~(z))| <= corr_factor / sqrt(N)`.
    pub corr_factor: f64,
    pub min_moment_samples: usize,
    pub min_gof_samples: usize,
    pub jackknife_groups: usize,
    /// Expected bin count below which chi-square bins are pooled.
    pub min_expected: f64,
    /// Largest accepted zero-divisor residual of the shift.
    pub zero_divisor_max: f64,
    /// Largest accepted `|Im e|`.
    pub imag_shift_max: f64,
    /// Largest accepted `||i B^{-1} - tau|| / ||tau||`.
    pub period_consistency_max: f64,
    /// Relative tolerance of the genus-1 contour identity.
    pub contour_rel_max: f64,
}

impl Default for Gates {
    fn default() -> Self {
        Self {
            z_max: 4.0,
            p_min: 1e-3,
            tv_max: 0.05,
            corr_factor: 4.0,
            min_moment_samples: 500,
            min_gof_samples: 2000,
            jackknife_groups: 100,
            min_expected: 5.0,
            zero_divisor_max: 1e-2,
            imag_shift_max: 1e-3,
            period_consistency_max: 1e-2,
            contour_rel_max: 1e-3,
        }
    }
}
