//! LwM2M-style virtual objects: ground-side counterparts of CubeSats.
//!
//! A [`VirtualObject`] mirrors one satellite at its hosting ground station
//! through an object/instance/resource tree. Registration binds the VO to
//! the current visibility window and converts the window into uplink and
//! downlink byte budgets; data operations are only allowed while registered
//! and within budget. Reads are served from the ground copy and therefore
//! work even when the satellite is out of view. VOs migrate between ground
//! stations with their tree preserved bit-for-bit.

use crate::catalog::{CubeSat, SatKey};
use crate::link::{deliverable_data, registration_overhead, LinkConfig, LinkError};
use crate::orbit::{remaining_visibility, GroundStation};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// (object id, instance id, resource id) address of one resource.
pub type ResourcePath = (u16, u16, u16);

/// Object id of the device object carrying the battery-level resource.
pub const DEVICE_OBJECT_ID: u16 = 3;
/// Resource id of the battery level inside the device object.
pub const BATTERY_RESOURCE_ID: u16 = 9;
/// Base object id for sensing payloads; type `k` maps to `3300 + k`.
pub const SENSOR_OBJECT_BASE: u16 = 3300;
/// Resource id of a sensor's current value.
pub const SENSOR_VALUE_RESOURCE_ID: u16 = 5700;

#[derive(Debug, Error, PartialEq)]
pub enum VoError {
    #[error("no contact: satellite not visible from the hosting ground station at t = {t_s} s")]
    NoContact { t_s: f64 },
    #[error("visibility window of {window_s} s is shorter than the registration overhead {overhead_s} s")]
    WindowTooShort { window_s: f64, overhead_s: f64 },
    #[error("registration handshake still in progress; data exchange possible from t = {ready_at_s} s")]
    HandshakeInProgress { ready_at_s: f64 },
    #[error("data operation on an unregistered virtual object")]
    NotRegistered,
    #[error("unknown resource path /{}/{}/{}", path.0, path.1, path.2)]
    UnknownPath { path: ResourcePath },
    #[error("value {value} outside [{min}, {max}] at /{}/{}/{}", path.0, path.1, path.2)]
    OutOfBounds {
        path: ResourcePath,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("uplink budget exhausted: write of {write_bytes} B exceeds the {remaining_bytes:.1} B left in this window")]
    BudgetExhausted {
        write_bytes: f64,
        remaining_bytes: f64,
    },
    #[error("duplicate resource path /{}/{}/{}", path.0, path.1, path.2)]
    DuplicatePath { path: ResourcePath },
    #[error("migration target equals the current hosting ground station")]
    SameGs,
    #[error("virtual object mirrors satellite {expected:?}, not {got:?}")]
    WrongSatellite { expected: SatKey, got: SatKey },
    #[error(transparent)]
    Link(#[from] LinkError),
}

/// One addressable value in the tree, with optional unit and bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LwResource {
    pub resource_id: u16,
    pub value: Option<f64>,
    pub unit: Option<String>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    /// Time of the last successful write, if any.
    pub updated_at_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LwInstance {
    pub instance_id: u16,
    pub resources: Vec<LwResource>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LwObject {
    pub object_id: u16,
    pub instances: Vec<LwInstance>,
}

/// The object/instance/resource tree describing one satellite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LwObjectTree {
    pub objects: Vec<LwObject>,
}

impl LwObjectTree {
    /// Default tree for a satellite: a device object with a battery-level
    /// resource (bounded to [0, 100] %) plus one sensor object per carried
    /// payload type, each exposing a current-value resource.
    pub fn for_cubesat(sat: &CubeSat) -> Self {
        let mut objects = vec![LwObject {
            object_id: DEVICE_OBJECT_ID,
            instances: vec![LwInstance {
                instance_id: 0,
                resources: vec![LwResource {
                    resource_id: BATTERY_RESOURCE_ID,
                    value: None,
                    unit: Some("%".to_string()),
                    min: Some(0.0),
                    max: Some(100.0),
                    updated_at_s: None,
                }],
            }],
        }];
        for &ty in &sat.payload {
            objects.push(LwObject {
                object_id: SENSOR_OBJECT_BASE + u16::from(ty),
                instances: vec![LwInstance {
                    instance_id: 0,
                    resources: vec![LwResource {
                        resource_id: SENSOR_VALUE_RESOURCE_ID,
                        value: None,
                        unit: None,
                        min: None,
                        max: None,
                        updated_at_s: None,
                    }],
                }],
            });
        }
        Self { objects }
    }

    pub fn resource(&self, path: ResourcePath) -> Option<&LwResource> {
        self.objects
            .iter()
            .find(|o| o.object_id == path.0)?
            .instances
            .iter()
            .find(|i| i.instance_id == path.1)?
            .resources
            .iter()
            .find(|r| r.resource_id == path.2)
    }

    fn resource_mut(&mut self, path: ResourcePath) -> Option<&mut LwResource> {
        self.objects
            .iter_mut()
            .find(|o| o.object_id == path.0)?
            .instances
            .iter_mut()
            .find(|i| i.instance_id == path.1)?
            .resources
            .iter_mut()
            .find(|r| r.resource_id == path.2)
    }

    /// All resource paths in tree order.
    pub fn paths(&self) -> Vec<ResourcePath> {
        let mut out = Vec::new();
        for o in &self.objects {
            for i in &o.instances {
                for r in &i.resources {
                    out.push((o.object_id, i.instance_id, r.resource_id));
                }
            }
        }
        out
    }

    /// Check path uniqueness and that every bounded value lies within its
    /// bounds.
    pub fn validate(&self) -> Result<(), VoError> {
        let mut seen = std::collections::BTreeSet::new();
        for o in &self.objects {
            for i in &o.instances {
                for r in &i.resources {
                    let path = (o.object_id, i.instance_id, r.resource_id);
                    if !seen.insert(path) {
                        return Err(VoError::DuplicatePath { path });
                    }
                    if let Some(value) = r.value {
                        let min = r.min.unwrap_or(f64::NEG_INFINITY);
                        let max = r.max.unwrap_or(f64::INFINITY);
                        if value < min || value > max {
                            return Err(VoError::OutOfBounds {
                                path,
                                value,
                                min,
                                max,
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Registration state of a virtual object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VoState {
    Unregistered,
    Registered,
}

/// Virtual-object parameters: the modeled size of a resource write and the
/// link over which windows are turned into byte budgets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoConfig {
    /// Payload bytes of one resource write.
    pub write_payload_bytes: u32,
    /// Protocol header bytes added to each write.
    pub write_header_bytes: u32,
    /// Registration lifetime [s]; windows are far shorter, so the timer
    /// never fires in the shipped scenarios.
    pub lifetime_s: f64,
    pub link: LinkConfig,
}

impl Default for VoConfig {
    fn default() -> Self {
        Self {
            write_payload_bytes: 16,
            write_header_bytes: 8,
            lifetime_s: 86_400.0,
            link: LinkConfig::default(),
        }
    }
}

/// Record of one VO hand-over between ground stations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MigrationEvent {
    /// The migrated VO, identified by its satellite key.
    pub vo: SatKey,
    pub from_gs: GroundStation,
    pub to_gs: GroundStation,
    pub time_s: f64,
}

/// Ground-side twin of one CubeSat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirtualObject {
    cubesat_id: SatKey,
    hosting_gs: GroundStation,
    tree: LwObjectTree,
    state: VoState,
    registered_at_s: f64,
    lifetime_s: f64,
    cfg: VoConfig,
    /// End of the registration handshake; first instant data may flow.
    ready_at_s: f64,
    /// End of the visibility window backing the current registration.
    window_end_s: f64,
    ul_budget_bytes: f64,
    ul_used_bytes: f64,
    dl_budget_bytes: f64,
    dl_used_bytes: f64,
}

impl VirtualObject {
    /// Register `cubesat` at `gs` at time `t_s` with default parameters.
    ///
    /// Fails with [`VoError::NoContact`] when the satellite is below the
    /// station's horizon and with [`VoError::WindowTooShort`] when the rest
    /// of the window cannot even fit the registration handshake.
    pub fn register(cubesat: &CubeSat, gs: &GroundStation, t_s: f64) -> Result<Self, VoError> {
        Self::register_with(cubesat, gs, t_s, VoConfig::default())
    }

    /// [`VirtualObject::register`] with explicit parameters.
    pub fn register_with(
        cubesat: &CubeSat,
        gs: &GroundStation,
        t_s: f64,
        cfg: VoConfig,
    ) -> Result<Self, VoError> {
        let mut vo = Self {
            cubesat_id: cubesat.key(),
            hosting_gs: *gs,
            tree: LwObjectTree::for_cubesat(cubesat),
            state: VoState::Unregistered,
            registered_at_s: 0.0,
            lifetime_s: cfg.lifetime_s,
            cfg,
            ready_at_s: 0.0,
            window_end_s: 0.0,
            ul_budget_bytes: 0.0,
            ul_used_bytes: 0.0,
            dl_budget_bytes: 0.0,
            dl_used_bytes: 0.0,
        };
        vo.bind_window(cubesat, t_s)?;
        Ok(vo)
    }

    /// Re-register an unregistered VO (e.g. after migration) against the
    /// current hosting station, starting a fresh window and fresh budgets.
    /// The tree is left untouched.
    pub fn reregister(&mut self, cubesat: &CubeSat, t_s: f64) -> Result<(), VoError> {
        if cubesat.key() != self.cubesat_id {
            return Err(VoError::WrongSatellite {
                expected: self.cubesat_id,
                got: cubesat.key(),
            });
        }
        self.bind_window(cubesat, t_s)
    }

    fn bind_window(&mut self, cubesat: &CubeSat, t_s: f64) -> Result<(), VoError> {
        let window_s = remaining_visibility(&self.hosting_gs, &cubesat.elements, t_s);
        if window_s <= 0.0 {
            return Err(VoError::NoContact { t_s });
        }
        let overhead_s = registration_overhead(&self.cfg.link)?;
        if window_s <= overhead_s {
            return Err(VoError::WindowTooShort {
                window_s,
                overhead_s,
            });
        }
        self.state = VoState::Registered;
        self.registered_at_s = t_s;
        self.ready_at_s = t_s + overhead_s;
        self.window_end_s = t_s + window_s;
        self.dl_budget_bytes = deliverable_data(window_s, overhead_s, self.cfg.link.dl_rate_bps)?;
        self.ul_budget_bytes = deliverable_data(window_s, overhead_s, self.cfg.link.ul_rate_bps)?;
        self.dl_used_bytes = 0.0;
        self.ul_used_bytes = 0.0;
        Ok(())
    }

    /// Write `value` to a resource at time `t_s`, debiting the window's
    /// uplink budget by the modeled write size.
    pub fn update_resource(
        &mut self,
        object_id: u16,
        instance_id: u16,
        resource_id: u16,
        value: f64,
        t_s: f64,
    ) -> Result<(), VoError> {
        if self.state != VoState::Registered {
            return Err(VoError::NotRegistered);
        }
        if t_s < self.registered_at_s || t_s > self.window_end_s {
            return Err(VoError::NoContact { t_s });
        }
        if t_s < self.ready_at_s {
            return Err(VoError::HandshakeInProgress {
                ready_at_s: self.ready_at_s,
            });
        }
        let path = (object_id, instance_id, resource_id);
        let write_bytes = f64::from(self.cfg.write_payload_bytes + self.cfg.write_header_bytes);
        let remaining_bytes = self.ul_budget_bytes - self.ul_used_bytes;
        let resource = self
            .tree
            .resource_mut(path)
            .ok_or(VoError::UnknownPath { path })?;
        let min = resource.min.unwrap_or(f64::NEG_INFINITY);
        let max = resource.max.unwrap_or(f64::INFINITY);
        if value < min || value > max {
            return Err(VoError::OutOfBounds {
                path,
                value,
                min,
                max,
            });
        }
        if write_bytes > remaining_bytes {
            return Err(VoError::BudgetExhausted {
                write_bytes,
                remaining_bytes,
            });
        }
        resource.value = Some(value);
        resource.updated_at_s = Some(t_s);
        self.ul_used_bytes += write_bytes;
        Ok(())
    }

    /// Read a resource's last stored value and write timestamp. Served from
    /// the ground copy, so this works regardless of satellite visibility;
    /// a never-written resource reads as `(None, None)`.
    pub fn read_resource(&self, path: ResourcePath) -> Result<(Option<f64>, Option<f64>), VoError> {
        let resource = self.tree.resource(path).ok_or(VoError::UnknownPath { path })?;
        Ok((resource.value, resource.updated_at_s))
    }

    /// Hand the VO over to another ground station. The tree moves
    /// unchanged; the state drops to [`VoState::Unregistered`] until the VO
    /// re-registers at the new station.
    pub fn migrate(
        mut self,
        to_gs: &GroundStation,
        t_s: f64,
    ) -> Result<(Self, MigrationEvent), VoError> {
        if *to_gs == self.hosting_gs {
            return Err(VoError::SameGs);
        }
        let event = MigrationEvent {
            vo: self.cubesat_id,
            from_gs: self.hosting_gs,
            to_gs: *to_gs,
            time_s: t_s,
        };
        self.hosting_gs = *to_gs;
        self.state = VoState::Unregistered;
        self.ready_at_s = t_s;
        self.window_end_s = t_s;
        self.ul_budget_bytes = 0.0;
        self.ul_used_bytes = 0.0;
        self.dl_budget_bytes = 0.0;
        self.dl_used_bytes = 0.0;
        Ok((self, event))
    }

    pub fn cubesat_id(&self) -> SatKey {
        self.cubesat_id
    }

    pub fn hosting_gs(&self) -> &GroundStation {
        &self.hosting_gs
    }

    pub fn tree(&self) -> &LwObjectTree {
        &self.tree
    }

    pub fn state(&self) -> VoState {
        self.state
    }

    pub fn registered_at_s(&self) -> f64 {
        self.registered_at_s
    }

    pub fn lifetime_s(&self) -> f64 {
        self.lifetime_s
    }

    /// First instant data may flow in the current window.
    pub fn ready_at_s(&self) -> f64 {
        self.ready_at_s
    }

    /// End of the current visibility window.
    pub fn window_end_s(&self) -> f64 {
        self.window_end_s
    }

    /// Seconds of the current window left for data exchange after the
    /// registration handshake.
    pub fn usable_window_s(&self) -> f64 {
        (self.window_end_s - self.ready_at_s).max(0.0)
    }

    pub fn uplink_budget_bytes(&self) -> f64 {
        self.ul_budget_bytes
    }

    pub fn uplink_used_bytes(&self) -> f64 {
        self.ul_used_bytes
    }

    pub fn downlink_budget_bytes(&self) -> f64 {
        self.dl_budget_bytes
    }

    pub fn downlink_used_bytes(&self) -> f64 {
        self.dl_used_bytes
    }
}

// ===== Tests =====

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::CubeSat;
    use crate::link;
    use crate::orbit::{self, GroundStation, OrbitElements, EARTH_ROTATION_RAD_S};
    use approx::assert_relative_eq;

    /// Satellite on a 500 km equatorial prograde orbit, over (0° N, 0° E)
    /// at t = 0.
    fn sat_overhead() -> CubeSat {
        CubeSat {
            id: 7,
            constellation_id: 2,
            payload: vec![1, 3],
            elements: OrbitElements::new(500.0, 0.0, 0.0, 0.0, 0.0).unwrap(),
        }
    }

    fn gs_origin() -> GroundStation {
        GroundStation::new(0.0, 0.0, 0.0).unwrap()
    }

    #[test]
    fn register_binds_the_window_and_budgets() {
        let sat = sat_overhead();
        let gs = gs_origin();
        let vo = VirtualObject::register(&sat, &gs, 0.0).unwrap();

        assert_eq!(vo.state(), VoState::Registered);
        assert_eq!(vo.cubesat_id(), (2, 7));

        let window = orbit::remaining_visibility(&gs, &sat.elements, 0.0);
        let overhead = link::registration_overhead(&LinkConfig::default()).unwrap();
        assert!(window > 0.0);
        assert_relative_eq!(vo.ready_at_s(), overhead, max_relative = 1e-12);
        assert_relative_eq!(vo.window_end_s(), window, max_relative = 1e-12);
        // The handshake eats exactly the overhead out of the window.
        assert_relative_eq!(
            vo.usable_window_s(),
            window - overhead,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            vo.uplink_budget_bytes(),
            link::deliverable_data(window, overhead, 2_400.0).unwrap(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            vo.downlink_budget_bytes(),
            link::deliverable_data(window, overhead, 1_000_000.0).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn register_below_horizon_is_no_contact() {
        let mut sat = sat_overhead();
        sat.elements.phase_deg = 180.0; // antipode
        let err = VirtualObject::register(&sat, &gs_origin(), 0.0).unwrap_err();
        assert_eq!(err, VoError::NoContact { t_s: 0.0 });
    }

    #[test]
    fn register_near_window_end_is_window_too_short() {
        let sat = sat_overhead();
        let gs = gs_origin();
        let windows = orbit::visibility_windows(&gs, &sat.elements, 0.0, 2_000.0, 1.0);
        let end = windows[0].end_s;

        let err = VirtualObject::register(&sat, &gs, end - 0.3).unwrap_err();
        match err {
            VoError::WindowTooShort {
                window_s,
                overhead_s,
            } => {
                assert!(window_s <= overhead_s);
                assert_relative_eq!(overhead_s, 0.5008, max_relative = 1e-12);
            }
            other => panic!("expected WindowTooShort, got {other:?}"),
        }
    }

    #[test]
    fn update_then_read_returns_value_and_timestamp() {
        let sat = sat_overhead();
        let mut vo = VirtualObject::register(&sat, &gs_origin(), 0.0).unwrap();
        let t = vo.ready_at_s() + 10.0;

        vo.update_resource(DEVICE_OBJECT_ID, 0, BATTERY_RESOURCE_ID, 87.5, t)
            .unwrap();
        let (value, stamp) = vo
            .read_resource((DEVICE_OBJECT_ID, 0, BATTERY_RESOURCE_ID))
            .unwrap();
        assert_eq!(value, Some(87.5));
        assert_eq!(stamp, Some(t));

        // Sensor objects exist for both carried payload types.
        assert!(vo
            .read_resource((SENSOR_OBJECT_BASE + 1, 0, SENSOR_VALUE_RESOURCE_ID))
            .is_ok());
        assert!(vo
            .read_resource((SENSOR_OBJECT_BASE + 3, 0, SENSOR_VALUE_RESOURCE_ID))
            .is_ok());
    }

    #[test]
    fn never_written_resource_reads_as_absent() {
        let sat = sat_overhead();
        let vo = VirtualObject::register(&sat, &gs_origin(), 0.0).unwrap();
        assert_eq!(
            vo.read_resource((SENSOR_OBJECT_BASE + 1, 0, SENSOR_VALUE_RESOURCE_ID))
                .unwrap(),
            (None, None)
        );
    }

    #[test]
    fn read_works_after_the_window_closes() {
        let sat = sat_overhead();
        let mut vo = VirtualObject::register(&sat, &gs_origin(), 0.0).unwrap();
        let t = vo.ready_at_s() + 1.0;
        vo.update_resource(SENSOR_OBJECT_BASE + 1, 0, SENSOR_VALUE_RESOURCE_ID, -4.25, t)
            .unwrap();

        // Long after the pass the satellite is below the horizon, but the
        // ground copy still serves the last value.
        assert_eq!(
            orbit::remaining_visibility(&gs_origin(), &sat.elements, 3_000.0),
            0.0
        );
        assert_eq!(
            vo.read_resource((SENSOR_OBJECT_BASE + 1, 0, SENSOR_VALUE_RESOURCE_ID))
                .unwrap(),
            (Some(-4.25), Some(t))
        );
        // Writing in that state fails instead.
        let err = vo
            .update_resource(SENSOR_OBJECT_BASE + 1, 0, SENSOR_VALUE_RESOURCE_ID, 1.0, 3_000.0)
            .unwrap_err();
        assert_eq!(err, VoError::NoContact { t_s: 3_000.0 });
    }

    #[test]
    fn writes_wait_for_the_handshake() {
        let sat = sat_overhead();
        let mut vo = VirtualObject::register(&sat, &gs_origin(), 0.0).unwrap();
        let err = vo
            .update_resource(DEVICE_OBJECT_ID, 0, BATTERY_RESOURCE_ID, 50.0, 0.1)
            .unwrap_err();
        assert_eq!(
            err,
            VoError::HandshakeInProgress {
                ready_at_s: vo.ready_at_s()
            }
        );
    }

    #[test]
    fn unknown_path_and_bounds_are_rejected() {
        let sat = sat_overhead();
        let mut vo = VirtualObject::register(&sat, &gs_origin(), 0.0).unwrap();
        let t = vo.ready_at_s() + 1.0;

        let err = vo.update_resource(9_999, 0, 5_700, 1.0, t).unwrap_err();
        assert_eq!(
            err,
            VoError::UnknownPath {
                path: (9_999, 0, 5_700)
            }
        );

        // Battery level is bounded to [0, 100].
        let err = vo
            .update_resource(DEVICE_OBJECT_ID, 0, BATTERY_RESOURCE_ID, 150.0, t)
            .unwrap_err();
        assert!(matches!(err, VoError::OutOfBounds { value, .. } if value == 150.0));
        // Nothing was stored or debited by the failed writes.
        assert_eq!(
            vo.read_resource((DEVICE_OBJECT_ID, 0, BATTERY_RESOURCE_ID))
                .unwrap(),
            (None, None)
        );
        assert_eq!(vo.uplink_used_bytes(), 0.0);
    }

    #[test]
    fn writes_stop_when_the_uplink_budget_runs_out() {
        let sat = sat_overhead();
        // Huge writes so a handful exhausts the ~111 KB half-pass budget.
        let cfg = VoConfig {
            write_payload_bytes: 50_000,
            write_header_bytes: 8,
            ..VoConfig::default()
        };
        let mut vo = VirtualObject::register_with(&sat, &gs_origin(), 0.0, cfg).unwrap();
        let t = vo.ready_at_s() + 1.0;
        let path = (SENSOR_OBJECT_BASE + 1, 0, SENSOR_VALUE_RESOURCE_ID);

        let mut writes = 0u32;
        let exhausted = loop {
            match vo.update_resource(path.0, path.1, path.2, writes.into(), t) {
                Ok(()) => writes += 1,
                Err(err) => break err,
            }
        };
        assert!(matches!(exhausted, VoError::BudgetExhausted { .. }));
        assert!(writes >= 1);
        assert!(vo.uplink_used_bytes() <= vo.uplink_budget_bytes());
        // The last accepted value survived the failed attempt.
        assert_eq!(
            vo.read_resource(path).unwrap().0,
            Some(f64::from(writes - 1))
        );
    }

    #[test]
    fn unregistered_writes_are_state_errors() {
        let sat = sat_overhead();
        let vo = VirtualObject::register(&sat, &gs_origin(), 0.0).unwrap();
        let t = vo.ready_at_s() + 1.0;
        let gs2 = GroundStation::new(0.0, 30.0, 0.0).unwrap();
        let (mut vo, _) = vo.migrate(&gs2, t).unwrap();
        let err = vo
            .update_resource(DEVICE_OBJECT_ID, 0, BATTERY_RESOURCE_ID, 10.0, t)
            .unwrap_err();
        assert_eq!(err, VoError::NotRegistered);
    }

    #[test]
    fn migration_preserves_the_tree_bit_for_bit() {
        let sat = sat_overhead();
        let mut vo = VirtualObject::register(&sat, &gs_origin(), 0.0).unwrap();
        let t = vo.ready_at_s() + 5.0;
        vo.update_resource(DEVICE_OBJECT_ID, 0, BATTERY_RESOURCE_ID, 61.0, t)
            .unwrap();
        vo.update_resource(SENSOR_OBJECT_BASE + 3, 0, SENSOR_VALUE_RESOURCE_ID, 2.5e-3, t)
            .unwrap();
        let before = serde_json::to_string(vo.tree()).unwrap();

        let gs2 = GroundStation::new(10.0, -45.0, 0.0).unwrap();
        let (vo, event) = vo.migrate(&gs2, t + 1.0).unwrap();

        assert_eq!(vo.state(), VoState::Unregistered);
        assert_eq!(vo.hosting_gs(), &gs2);
        assert_eq!(event.vo, (2, 7));
        assert_eq!(event.from_gs, gs_origin());
        assert_eq!(event.to_gs, gs2);
        assert_eq!(event.time_s, t + 1.0);
        assert_ne!(event.from_gs, event.to_gs);

        let after = serde_json::to_string(vo.tree()).unwrap();
        assert_eq!(before, after);
        assert_eq!(
            vo.read_resource((DEVICE_OBJECT_ID, 0, BATTERY_RESOURCE_ID))
                .unwrap(),
            (Some(61.0), Some(t))
        );
    }

    #[test]
    fn migrating_to_the_current_station_is_an_error() {
        let sat = sat_overhead();
        let vo = VirtualObject::register(&sat, &gs_origin(), 0.0).unwrap();
        let err = vo.migrate(&gs_origin(), 1.0).unwrap_err();
        assert_eq!(err, VoError::SameGs);
    }

    #[test]
    fn migrate_and_reregister_debit_two_overheads() {
        let sat = sat_overhead();
        let gs1 = gs_origin();
        let mut vo = VirtualObject::register(&sat, &gs1, 0.0).unwrap();
        let window1 = orbit::remaining_visibility(&gs1, &sat.elements, 0.0);
        let usable1 = vo.usable_window_s();

        // Second station placed under the satellite's ground track at
        // t = 3000 s, so re-registration finds it overhead again.
        let t2 = 3_000.0;
        let period = orbit::orbital_period(500.0).unwrap();
        let rel_rate = 2.0 * std::f64::consts::PI / period - EARTH_ROTATION_RAD_S;
        let lon2 = (rel_rate * t2).to_degrees();
        assert!(lon2 < 180.0);
        let gs2 = GroundStation::new(0.0, lon2, 0.0).unwrap();

        let (mut vo2, _) = vo.migrate(&gs2, 1_000.0).unwrap();
        vo2.reregister(&sat, t2).unwrap();
        assert_eq!(vo2.state(), VoState::Registered);
        let window2 = orbit::remaining_visibility(&gs2, &sat.elements, t2);
        let usable2 = vo2.usable_window_s();

        // Each registration spends one handshake out of its window.
        let overhead = link::registration_overhead(&LinkConfig::default()).unwrap();
        assert_relative_eq!(
            (window1 - usable1) + (window2 - usable2),
            2.0 * overhead,
            max_relative = 1e-9
        );

        // Re-registering someone else's VO is refused.
        let mut other = sat.clone();
        other.id = 8;
        vo = VirtualObject::register(&other, &gs1, 0.0).unwrap();
        let (mut vo, _) = vo.migrate(&gs2, 1_000.0).unwrap();
        assert_eq!(
            vo.reregister(&sat, t2).unwrap_err(),
            VoError::WrongSatellite {
                expected: (2, 8),
                got: (2, 7)
            }
        );
    }

    #[test]
    fn tree_validation_catches_duplicates_and_bound_violations() {
        let sat = sat_overhead();
        let mut tree = LwObjectTree::for_cubesat(&sat);
        assert!(tree.validate().is_ok());
        assert_eq!(
            tree.paths().first().copied(),
            Some((DEVICE_OBJECT_ID, 0, BATTERY_RESOURCE_ID))
        );

        // A second battery resource under the same instance duplicates the
        // path.
        let dup = tree.objects[0].instances[0].resources[0].clone();
        tree.objects[0].instances[0].resources.push(dup);
        assert_eq!(
            tree.validate().unwrap_err(),
            VoError::DuplicatePath {
                path: (DEVICE_OBJECT_ID, 0, BATTERY_RESOURCE_ID)
            }
        );

        tree.objects[0].instances[0].resources.pop();
        tree.objects[0].instances[0].resources[0].value = Some(130.0);
        assert!(matches!(
            tree.validate().unwrap_err(),
            VoError::OutOfBounds { value, .. } if value == 130.0
        ));
    }

    #[test]
    fn virtual_object_serde_roundtrip() {
        let sat = sat_overhead();
        let mut vo = VirtualObject::register(&sat, &gs_origin(), 0.0).unwrap();
        vo.update_resource(DEVICE_OBJECT_ID, 0, BATTERY_RESOURCE_ID, 42.0, vo.ready_at_s())
            .unwrap();
        let json = serde_json::to_string(&vo).unwrap();
        let back: VirtualObject = serde_json::from_str(&json).unwrap();
        assert_eq!(back, vo);
    }
}
