//! Circular low-Earth-orbit geometry.
//!
//! The Earth is a rotating sphere of radius [`EARTH_RADIUS_KM`]; satellites
//! move on circular two-body orbits. Ground stations sit on the rotating
//! surface, and a satellite is visible whenever its elevation above the
//! station's local horizon reaches the station's minimum elevation.
//!
//! Two pass models coexist on purpose:
//!
//! * [`max_pass_duration`] is the analytic non-rotating zenith-pass bound
//!   `T·λ/π`, used for the access-time report;
//! * [`visibility_windows`] / [`remaining_visibility`] propagate the orbit
//!   against the rotating Earth and find window edges numerically.
//!
//! All angles in public signatures are degrees unless a name says otherwise;
//! all times are seconds, all lengths kilometers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius [km].
pub const EARTH_RADIUS_KM: f64 = 6371.0;
/// Geocentric gravitational parameter [km³/s²].
pub const EARTH_MU_KM3_S2: f64 = 398600.4418;
/// Earth sidereal rotation rate [rad/s].
pub const EARTH_ROTATION_RAD_S: f64 = 7.2921159e-5;

/// Default visibility scan step [s]; passes last hundreds of seconds, so a
/// one-second scan cannot skip one.
pub const DEFAULT_SCAN_STEP_S: f64 = 1.0;
/// Window edges are bisected down to this resolution [s].
pub const EDGE_TOLERANCE_S: f64 = 1e-3;

#[derive(Debug, Error, PartialEq)]
pub enum OrbitError {
    #[error("altitude must be positive, got {0} km")]
    NonPositiveAltitude(f64),
    #[error("{0}")]
    Domain(String),
}

/// Circular orbit description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitElements {
    /// Altitude above the mean Earth surface [km].
    pub altitude_km: f64,
    /// Inclination [deg], in [0, 180).
    pub inclination_deg: f64,
    /// Right ascension of the ascending node [deg], in [0, 360).
    pub raan_deg: f64,
    /// In-plane anomaly at epoch [deg], in [0, 360).
    pub phase_deg: f64,
    /// Simulation time origin [s].
    pub epoch_s: f64,
}

impl OrbitElements {
    /// Validating constructor; altitude is restricted to the LEO band the
    /// simulator models.
    pub fn new(
        altitude_km: f64,
        inclination_deg: f64,
        raan_deg: f64,
        phase_deg: f64,
        epoch_s: f64,
    ) -> Result<Self, OrbitError> {
        let el = Self {
            altitude_km,
            inclination_deg,
            raan_deg,
            phase_deg,
            epoch_s,
        };
        el.validate()?;
        Ok(el)
    }

    pub fn validate(&self) -> Result<(), OrbitError> {
        if !(200.0..=2000.0).contains(&self.altitude_km) {
            return Err(OrbitError::Domain(format!(
                "altitude {} km outside [200, 2000]",
                self.altitude_km
            )));
        }
        if !(0.0..180.0).contains(&self.inclination_deg) {
            return Err(OrbitError::Domain(format!(
                "inclination {}° outside [0, 180)",
                self.inclination_deg
            )));
        }
        for (name, v) in [("raan", self.raan_deg), ("phase", self.phase_deg)] {
            if !(0.0..360.0).contains(&v) {
                return Err(OrbitError::Domain(format!(
                    "{name} {v}° outside [0, 360)"
                )));
            }
        }
        Ok(())
    }
}

/// Ground station on the rotating Earth surface.
///
/// The rotation reference is fixed so that at `t = 0` the rotating frame is
/// aligned with the inertial frame: a station at longitude 0 sits on the
/// +x axis at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundStation {
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    /// Visibility threshold [deg].
    pub min_elevation_deg: f64,
}

impl GroundStation {
    pub fn new(
        latitude_deg: f64,
        longitude_deg: f64,
        min_elevation_deg: f64,
    ) -> Result<Self, OrbitError> {
        if !(-90.0..=90.0).contains(&latitude_deg) {
            return Err(OrbitError::Domain(format!(
                "latitude {latitude_deg}° outside [-90, 90]"
            )));
        }
        if !(-180.0..=180.0).contains(&longitude_deg) {
            return Err(OrbitError::Domain(format!(
                "longitude {longitude_deg}° outside [-180, 180]"
            )));
        }
        if !(0.0..=90.0).contains(&min_elevation_deg) {
            return Err(OrbitError::Domain(format!(
                "min elevation {min_elevation_deg}° outside [0, 90]"
            )));
        }
        Ok(Self {
            latitude_deg,
            longitude_deg,
            min_elevation_deg,
        })
    }

    /// Inertial position of the station at time `t_s` [km].
    pub fn position(&self, t_s: f64) -> EciPosition {
        let lat = self.latitude_deg.to_radians();
        let theta = self.longitude_deg.to_radians() + EARTH_ROTATION_RAD_S * t_s;
        EciPosition {
            x_km: EARTH_RADIUS_KM * lat.cos() * theta.cos(),
            y_km: EARTH_RADIUS_KM * lat.cos() * theta.sin(),
            z_km: EARTH_RADIUS_KM * lat.sin(),
        }
    }
}

/// Interval during which a satellite stays above the station horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityWindow {
    pub start_s: f64,
    pub end_s: f64,
}

impl VisibilityWindow {
    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// Earth-centered inertial position [km].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EciPosition {
    pub x_km: f64,
    pub y_km: f64,
    pub z_km: f64,
}

impl EciPosition {
    pub fn norm_km(&self) -> f64 {
        (self.x_km * self.x_km + self.y_km * self.y_km + self.z_km * self.z_km).sqrt()
    }
}

/// Period of a circular orbit at `altitude_km`: `2π·sqrt((Re+h)³/μ)`.
pub fn orbital_period(altitude_km: f64) -> Result<f64, OrbitError> {
    if altitude_km <= 0.0 {
        return Err(OrbitError::NonPositiveAltitude(altitude_km));
    }
    let a = EARTH_RADIUS_KM + altitude_km;
    Ok(2.0 * std::f64::consts::PI * (a * a * a / EARTH_MU_KM3_S2).sqrt())
}

/// Earth-central half-angle of the coverage cone of a station with minimum
/// elevation `min_elevation_deg` for a satellite at `altitude_km`:
/// `λ = arccos(Re·cos ε / (Re+h)) − ε` [rad].
pub fn coverage_half_angle(altitude_km: f64, min_elevation_deg: f64) -> Result<f64, OrbitError> {
    if altitude_km <= 0.0 {
        return Err(OrbitError::NonPositiveAltitude(altitude_km));
    }
    if !(0.0..=90.0).contains(&min_elevation_deg) {
        return Err(OrbitError::Domain(format!(
            "min elevation {min_elevation_deg}° outside [0, 90]"
        )));
    }
    let eps = min_elevation_deg.to_radians();
    let cos_arg = EARTH_RADIUS_KM * eps.cos() / (EARTH_RADIUS_KM + altitude_km);
    Ok(cos_arg.acos() - eps)
}

/// Longest possible single pass over the station under the non-rotating
/// zenith-pass model: `orbital_period · λ/π`.
pub fn max_pass_duration(altitude_km: f64, min_elevation_deg: f64) -> Result<f64, OrbitError> {
    let period = orbital_period(altitude_km)?;
    let lambda = coverage_half_angle(altitude_km, min_elevation_deg)?;
    Ok(period * lambda / std::f64::consts::PI)
}

/// Inertial position of the satellite at time `t_s`.
///
/// The in-plane anomaly is `phase + 360·(t−epoch)/period`; the plane is
/// rotated by inclination about +x and then by RAAN about +z.
pub fn propagate(elements: &OrbitElements, t_s: f64) -> EciPosition {
    let r = EARTH_RADIUS_KM + elements.altitude_km;
    // Valid elements have positive altitude, so the period always exists.
    let period = orbital_period(elements.altitude_km).expect("validated altitude");
    let u = elements.phase_deg.to_radians()
        + 2.0 * std::f64::consts::PI * (t_s - elements.epoch_s) / period;
    let (sin_u, cos_u) = u.sin_cos();
    let (sin_i, cos_i) = elements.inclination_deg.to_radians().sin_cos();
    let (sin_o, cos_o) = elements.raan_deg.to_radians().sin_cos();
    EciPosition {
        x_km: r * (cos_o * cos_u - sin_o * sin_u * cos_i),
        y_km: r * (sin_o * cos_u + cos_o * sin_u * cos_i),
        z_km: r * (sin_u * sin_i),
    }
}

/// Geometric elevation [deg] of `pos` above the local horizon of `gs` at
/// time `t_s` (the station rotates with the Earth). Visibility holds iff the
/// returned angle is at least `gs.min_elevation_deg`.
pub fn elevation_angle(gs: &GroundStation, pos: &EciPosition, t_s: f64) -> f64 {
    let site = gs.position(t_s);
    let rel = EciPosition {
        x_km: pos.x_km - site.x_km,
        y_km: pos.y_km - site.y_km,
        z_km: pos.z_km - site.z_km,
    };
    let range = rel.norm_km();
    // Local vertical is the site vector on a sphere.
    let dot = (rel.x_km * site.x_km + rel.y_km * site.y_km + rel.z_km * site.z_km)
        / (range * EARTH_RADIUS_KM);
    dot.clamp(-1.0, 1.0).asin().to_degrees()
}

fn is_visible(gs: &GroundStation, elements: &OrbitElements, t_s: f64) -> bool {
    elevation_angle(gs, &propagate(elements, t_s), t_s) >= gs.min_elevation_deg
}

/// Bisect a visibility transition inside (lo, hi] where `vis(lo) != vis(hi)`
/// down to [`EDGE_TOLERANCE_S`]; returns the crossing time.
fn refine_edge(gs: &GroundStation, elements: &OrbitElements, mut lo: f64, mut hi: f64) -> f64 {
    let lo_vis = is_visible(gs, elements, lo);
    while hi - lo > EDGE_TOLERANCE_S {
        let mid = 0.5 * (lo + hi);
        if is_visible(gs, elements, mid) == lo_vis {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Maximal disjoint windows within `[t0_s, t1_s]` where the satellite is
/// visible from `gs`, scanned at `step_s` with bisection-refined edges.
///
/// An empty interval (`t1 ≤ t0`) yields an empty list.
///
/// # Panics
/// Panics if `step_s` is not strictly positive.
pub fn visibility_windows(
    gs: &GroundStation,
    elements: &OrbitElements,
    t0_s: f64,
    t1_s: f64,
    step_s: f64,
) -> Vec<VisibilityWindow> {
    assert!(step_s > 0.0, "scan step must be positive, got {step_s}");
    let mut windows = Vec::new();
    if t1_s <= t0_s {
        return windows;
    }

    let mut open_start: Option<f64> = None;
    let mut prev_t = t0_s;
    let mut prev_vis = is_visible(gs, elements, t0_s);
    if prev_vis {
        open_start = Some(t0_s);
    }

    let mut t = t0_s + step_s;
    loop {
        let clamped = t.min(t1_s);
        let vis = is_visible(gs, elements, clamped);
        if vis != prev_vis {
            let edge = refine_edge(gs, elements, prev_t, clamped);
            if vis {
                open_start = Some(edge);
            } else if let Some(start) = open_start.take() {
                if edge > start {
                    windows.push(VisibilityWindow {
                        start_s: start,
                        end_s: edge,
                    });
                }
            }
            prev_vis = vis;
        }
        prev_t = clamped;
        if clamped >= t1_s {
            break;
        }
        t += step_s;
    }
    if let Some(start) = open_start {
        if t1_s > start {
            windows.push(VisibilityWindow {
                start_s: start,
                end_s: t1_s,
            });
        }
    }
    windows
}

/// Time left in the current visibility window at `t_s`, or 0 when the
/// satellite is not visible.
///
/// The forward scan is bounded at three orbital periods past `t_s`; within
/// the modeled altitude band (≤ 2000 km) even the co-rotation-stretched
/// equatorial window stays well below that bound.
pub fn remaining_visibility(gs: &GroundStation, elements: &OrbitElements, t_s: f64) -> f64 {
    if !is_visible(gs, elements, t_s) {
        return 0.0;
    }
    let period = orbital_period(elements.altitude_km).expect("validated altitude");
    let horizon = t_s + 3.0 * period;
    let mut prev = t_s;
    let mut t = t_s + DEFAULT_SCAN_STEP_S;
    while t < horizon {
        if !is_visible(gs, elements, t) {
            return refine_edge(gs, elements, prev, t) - t_s;
        }
        prev = t;
        t += DEFAULT_SCAN_STEP_S;
    }
    horizon - t_s
}

// ===== Tests =====
