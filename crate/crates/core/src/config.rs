//! Flat key-value scenario configuration.
//!
//! The format is one `key = value` pair per line with `#` comments; values
//! are scalars or whitespace-separated vectors. The checked-in
//! `config/default.cfg` defines every key with its default; user files and
//! `--set` overrides may replace any subset, and unknown keys are rejected
//! with the offending line number.

use crate::contact::DetectionConfig;
use crate::kinematics::{ArmParams, ArmSide};
use crate::landing::LandingConfig;
use crate::observer::{AllocationMap, BodyInertia};
use crate::se3::Vec3;
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

/// The built-in defaults, kept in one file so every physical constant is
/// greppable in a single place.
pub const DEFAULT_CONFIG_TEXT: &str = include_str!("../../../config/default.cfg");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { key: String, line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { key: String, line: usize },
    #[error("line {line}: key `{key}`: expected {expected}, got `{value}`")]
    BadValue { key: String, line: usize, expected: &'static str, value: String },
    #[error("missing key `{key}`")]
    MissingKey { key: String },
    #[error("key `{key}`: {message}")]
    Invalid { key: String, message: String },
}

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    value: String,
}

/// Parsed but untyped key-value content, keyed by the full dotted name.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, Entry>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line, text: content.to_string() })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() || value.is_empty() {
                return Err(ConfigError::Syntax { line, text: content.to_string() });
            }
            if entries.contains_key(&key) {
                return Err(ConfigError::DuplicateKey { key, line });
            }
            entries.insert(key, Entry { line, value });
        }
        Ok(RawConfig { entries })
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|k| k.as_str())
    }

    pub fn line_of(&self, key: &str) -> usize {
        self.entries.get(key).map(|e| e.line).unwrap_or(0)
    }

    /// Inserts or replaces `key`; used for `--set` style overrides.
    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.to_string(), Entry { line: 0, value: value.to_string() });
    }

    /// Overlays `other` on top of `self` (`other` wins).
    pub fn merged_with(&self, other: &RawConfig) -> RawConfig {
        let mut out = self.clone();
        for (k, v) in &other.entries {
            out.entries.insert(k.clone(), v.clone());
        }
        out
    }

    fn raw(&self, key: &str) -> Result<&Entry, ConfigError> {
        self.entries.get(key).ok_or_else(|| ConfigError::MissingKey { key: key.to_string() })
    }

    pub fn get_str(&self, key: &str) -> Result<&str, ConfigError> {
        Ok(self.raw(key)?.value.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Result<f64, ConfigError> {
        let e = self.raw(key)?;
        e.value.parse::<f64>().map_err(|_| ConfigError::BadValue {
            key: key.to_string(),
            line: e.line,
            expected: "a number",
            value: e.value.clone(),
        })
    }

    pub fn get_usize(&self, key: &str) -> Result<usize, ConfigError> {
        let e = self.raw(key)?;
        e.value.parse::<usize>().map_err(|_| ConfigError::BadValue {
            key: key.to_string(),
            line: e.line,
            expected: "a non-negative integer",
            value: e.value.clone(),
        })
    }

    pub fn get_u64(&self, key: &str) -> Result<u64, ConfigError> {
        let e = self.raw(key)?;
        e.value.parse::<u64>().map_err(|_| ConfigError::BadValue {
            key: key.to_string(),
            line: e.line,
            expected: "a non-negative integer",
            value: e.value.clone(),
        })
    }

    fn get_floats(&self, key: &str, n: usize, expected: &'static str) -> Result<Vec<f64>, ConfigError> {
        let e = self.raw(key)?;
        let parts: Result<Vec<f64>, _> =
            e.value.split_whitespace().map(|p| p.parse::<f64>()).collect();
        match parts {
            Ok(v) if v.len() == n => Ok(v),
            _ => Err(ConfigError::BadValue {
                key: key.to_string(),
                line: e.line,
                expected,
                value: e.value.clone(),
            }),
        }
    }

    pub fn get_vec3(&self, key: &str) -> Result<Vec3, ConfigError> {
        let v = self.get_floats(key, 3, "three numbers")?;
        Ok(Vec3::new(v[0], v[1], v[2]))
    }

    pub fn get_pair(&self, key: &str) -> Result<[f64; 2], ConfigError> {
        let v = self.get_floats(key, 2, "two numbers")?;
        Ok([v[0], v[1]])
    }

    pub fn get_f64_list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let e = self.raw(key)?;
        let parts: Result<Vec<f64>, _> =
            e.value.split_whitespace().map(|p| p.parse::<f64>()).collect();
        parts.map_err(|_| ConfigError::BadValue {
            key: key.to_string(),
            line: e.line,
            expected: "a list of numbers",
            value: e.value.clone(),
        })
    }
}

macro_rules! positive {
    ($cfg:expr, $key:literal) => {{
        let v = $cfg.get_f64($key)?;
        if !(v > 0.0) || !v.is_finite() {
            return Err(ConfigError::Invalid {
                key: $key.to_string(),
                message: format!("must be positive, got {v}"),
            });
        }
        v
    }};
}

macro_rules! non_negative {
    ($cfg:expr, $key:literal) => {{
        let v = $cfg.get_f64($key)?;
        if !(v >= 0.0) || !v.is_finite() {
            return Err(ConfigError::Invalid {
                key: $key.to_string(),
                message: format!("must be >= 0, got {v}"),
            });
        }
        v
    }};
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub incline_deg: f64,
    pub uphill_azimuth_deg: f64,
    pub centroid: Vec3,
    pub half_extent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleConfig {
    pub total_mass: f64,
    pub body_mass: f64,
    pub battery_mass: f64,
    pub body_length: f64,
    pub body_width: f64,
    pub body_height: f64,
    pub rotor_arm: f64,
    pub yaw_drag_coeff: f64,
    pub gravity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmConfig {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub limits: [[f64; 2]; 3],
    pub mount_left: Vec3,
    pub mount_right: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorConfig {
    pub gyro_noise_sigma: f64,
    pub gyro_bias: Vec3,
    pub position_noise_sigma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContactModelConfig {
    pub stiffness: f64,
    pub damping: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlConfig {
    pub att_kp: f64,
    pub att_kd: f64,
    pub torque_limit: f64,
    pub pos_kp: f64,
    pub vel_max: f64,
    pub vel_lag: f64,
    pub yaw_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeConfig {
    pub direction: Vec3,
    pub speed: f64,
    pub y_spread: f64,
    pub start_depth: f64,
    pub approach_altitude: f64,
    pub search_step_down: f64,
    pub hop_up: f64,
    pub raise_delta: f64,
    pub raise_rate: f64,
    pub max_search_steps: usize,
    pub contacts_required: usize,
    pub reposition_x_shift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandingParams {
    pub preset_left: [f64; 2],
    pub preset_right: [f64; 2],
    pub rear_gear: Vec3,
    pub clearance: f64,
    pub descent_velocity: f64,
    pub final_descent_velocity: f64,
    pub slow_band: f64,
    pub max_incline_deg: f64,
    pub contact_band: f64,
    pub hold_time: f64,
    pub level_tol_deg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub dt: f64,
    pub max_time: f64,
    pub omega_damping: f64,
    pub model_mismatch: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StartConfig {
    pub position: Vec3,
    pub yaw_deg: f64,
}

/// Fully resolved scenario configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub world: WorldConfig,
    pub vehicle: VehicleConfig,
    pub arm: ArmConfig,
    pub observer_gain: f64,
    pub detection_threshold: f64,
    pub detection_timeout: f64,
    pub sensor: SensorConfig,
    pub contact: ContactModelConfig,
    pub control: ControlConfig,
    pub probe: ProbeConfig,
    pub landing: LandingParams,
    pub sim: SimParams,
    pub start: StartConfig,
}

impl ScenarioConfig {
    /// The built-in defaults from `config/default.cfg`.
    pub fn builtin_default() -> Self {
        let raw = RawConfig::parse(DEFAULT_CONFIG_TEXT).expect("default config parses");
        Self::from_raw(&raw).expect("default config is valid")
    }

    /// Defaults overlaid with a user file and then `--set` overrides.
    /// Keys not present in the defaults are rejected.
    pub fn load(
        path: Option<&Path>,
        overrides: &[(String, String)],
    ) -> Result<Self, ConfigError> {
        let defaults = RawConfig::parse(DEFAULT_CONFIG_TEXT).expect("default config parses");
        let mut merged = defaults.clone();
        if let Some(p) = path {
            let user = RawConfig::from_file(p)?;
            for key in user.keys() {
                if !defaults.contains(key) {
                    return Err(ConfigError::UnknownKey {
                        key: key.to_string(),
                        line: user.line_of(key),
                    });
                }
            }
            merged = merged.merged_with(&user);
        }
        for (key, value) in overrides {
            if !defaults.contains(key) {
                return Err(ConfigError::UnknownKey { key: key.clone(), line: 0 });
            }
            merged.set(key, value);
        }
        Self::from_raw(&merged)
    }

    pub fn from_raw(cfg: &RawConfig) -> Result<Self, ConfigError> {
        let contacts_required = cfg.get_usize("probe.contacts_required")?;
        if !(2..=3).contains(&contacts_required) {
            return Err(ConfigError::Invalid {
                key: "probe.contacts_required".into(),
                message: format!("must be 2 or 3, got {contacts_required}"),
            });
        }
        let probe_direction = cfg.get_vec3("probe.direction")?;
        if probe_direction.norm() < 1e-9 {
            return Err(ConfigError::Invalid {
                key: "probe.direction".into(),
                message: "must be a non-zero vector".into(),
            });
        }
        Ok(ScenarioConfig {
            world: WorldConfig {
                incline_deg: cfg.get_f64("world.incline_deg")?,
                uphill_azimuth_deg: cfg.get_f64("world.uphill_azimuth_deg")?,
                centroid: cfg.get_vec3("world.centroid")?,
                half_extent: positive!(cfg, "world.half_extent"),
            },
            vehicle: VehicleConfig {
                total_mass: positive!(cfg, "vehicle.total_mass"),
                body_mass: positive!(cfg, "vehicle.body_mass"),
                battery_mass: positive!(cfg, "vehicle.battery_mass"),
                body_length: positive!(cfg, "vehicle.body_length"),
                body_width: positive!(cfg, "vehicle.body_width"),
                body_height: positive!(cfg, "vehicle.body_height"),
                rotor_arm: positive!(cfg, "vehicle.rotor_arm"),
                yaw_drag_coeff: positive!(cfg, "vehicle.yaw_drag_coeff"),
                gravity: positive!(cfg, "vehicle.gravity"),
            },
            arm: ArmConfig {
                l1: positive!(cfg, "arm.l1"),
                l2: positive!(cfg, "arm.l2"),
                l3: positive!(cfg, "arm.l3"),
                limits: [
                    [cfg.get_f64("arm.q1_min")?, cfg.get_f64("arm.q1_max")?],
                    [cfg.get_f64("arm.q2_min")?, cfg.get_f64("arm.q2_max")?],
                    [cfg.get_f64("arm.q3_min")?, cfg.get_f64("arm.q3_max")?],
                ],
                mount_left: cfg.get_vec3("arm.mount_left")?,
                mount_right: cfg.get_vec3("arm.mount_right")?,
            },
            observer_gain: positive!(cfg, "observer.gain"),
            detection_threshold: positive!(cfg, "detection.threshold"),
            detection_timeout: positive!(cfg, "detection.timeout"),
            sensor: SensorConfig {
                gyro_noise_sigma: non_negative!(cfg, "sensor.gyro_noise_sigma"),
                gyro_bias: cfg.get_vec3("sensor.gyro_bias")?,
                position_noise_sigma: non_negative!(cfg, "sensor.position_noise_sigma"),
                seed: cfg.get_u64("sensor.seed")?,
            },
            contact: ContactModelConfig {
                stiffness: positive!(cfg, "contact.stiffness"),
                damping: non_negative!(cfg, "contact.damping"),
            },
            control: ControlConfig {
                att_kp: positive!(cfg, "control.att_kp"),
                att_kd: positive!(cfg, "control.att_kd"),
                torque_limit: positive!(cfg, "control.torque_limit"),
                pos_kp: positive!(cfg, "control.pos_kp"),
                vel_max: positive!(cfg, "control.vel_max"),
                vel_lag: positive!(cfg, "control.vel_lag"),
                yaw_rate: positive!(cfg, "control.yaw_rate"),
            },
            probe: ProbeConfig {
                direction: probe_direction.normalize(),
                speed: positive!(cfg, "probe.speed"),
                y_spread: positive!(cfg, "probe.y_spread"),
                start_depth: positive!(cfg, "probe.start_depth"),
                approach_altitude: positive!(cfg, "probe.approach_altitude"),
                search_step_down: positive!(cfg, "probe.search_step_down"),
                hop_up: non_negative!(cfg, "probe.hop_up"),
                raise_delta: positive!(cfg, "probe.raise_delta"),
                raise_rate: positive!(cfg, "probe.raise_rate"),
                max_search_steps: cfg.get_usize("probe.max_search_steps")?,
                contacts_required,
                reposition_x_shift: positive!(cfg, "probe.reposition_x_shift"),
            },
            landing: LandingParams {
                preset_left: cfg.get_pair("landing.preset_left")?,
                preset_right: cfg.get_pair("landing.preset_right")?,
                rear_gear: cfg.get_vec3("landing.rear_gear")?,
                clearance: positive!(cfg, "landing.clearance"),
                descent_velocity: positive!(cfg, "landing.descent_velocity"),
                final_descent_velocity: positive!(cfg, "landing.final_descent_velocity"),
                slow_band: positive!(cfg, "landing.slow_band"),
                max_incline_deg: positive!(cfg, "landing.max_incline_deg"),
                contact_band: positive!(cfg, "landing.contact_band"),
                hold_time: positive!(cfg, "landing.hold_time"),
                level_tol_deg: positive!(cfg, "landing.level_tol_deg"),
            },
            sim: SimParams {
                dt: positive!(cfg, "sim.dt"),
                max_time: positive!(cfg, "sim.max_time"),
                omega_damping: non_negative!(cfg, "sim.omega_damping"),
                model_mismatch: cfg.get_f64("sim.model_mismatch")?,
            },
            start: StartConfig {
                position: cfg.get_vec3("start.position")?,
                yaw_deg: cfg.get_f64("start.yaw_deg")?,
            },
        })
    }

    /// Deterministic flat dump of the resolved configuration (parseable by
    /// [`RawConfig::parse`]); written next to every run's outputs.
    pub fn to_flat_text(&self) -> String {
        let v3 = |v: &Vec3| format!("{} {} {}", v.x, v.y, v.z);
        let pairs: Vec<(String, String)> = vec![
            ("arm.l1".into(), self.arm.l1.to_string()),
            ("arm.l2".into(), self.arm.l2.to_string()),
            ("arm.l3".into(), self.arm.l3.to_string()),
            ("arm.mount_left".into(), v3(&self.arm.mount_left)),
            ("arm.mount_right".into(), v3(&self.arm.mount_right)),
            ("arm.q1_max".into(), self.arm.limits[0][1].to_string()),
            ("arm.q1_min".into(), self.arm.limits[0][0].to_string()),
            ("arm.q2_max".into(), self.arm.limits[1][1].to_string()),
            ("arm.q2_min".into(), self.arm.limits[1][0].to_string()),
            ("arm.q3_max".into(), self.arm.limits[2][1].to_string()),
            ("arm.q3_min".into(), self.arm.limits[2][0].to_string()),
            ("contact.damping".into(), self.contact.damping.to_string()),
            ("contact.stiffness".into(), self.contact.stiffness.to_string()),
            ("control.att_kd".into(), self.control.att_kd.to_string()),
            ("control.att_kp".into(), self.control.att_kp.to_string()),
            ("control.pos_kp".into(), self.control.pos_kp.to_string()),
            ("control.torque_limit".into(), self.control.torque_limit.to_string()),
            ("control.vel_lag".into(), self.control.vel_lag.to_string()),
            ("control.vel_max".into(), self.control.vel_max.to_string()),
            ("control.yaw_rate".into(), self.control.yaw_rate.to_string()),
            ("detection.threshold".into(), self.detection_threshold.to_string()),
            ("detection.timeout".into(), self.detection_timeout.to_string()),
            ("landing.clearance".into(), self.landing.clearance.to_string()),
            ("landing.contact_band".into(), self.landing.contact_band.to_string()),
            ("landing.descent_velocity".into(), self.landing.descent_velocity.to_string()),
            (
                "landing.final_descent_velocity".into(),
                self.landing.final_descent_velocity.to_string(),
            ),
            ("landing.hold_time".into(), self.landing.hold_time.to_string()),
            ("landing.level_tol_deg".into(), self.landing.level_tol_deg.to_string()),
            ("landing.max_incline_deg".into(), self.landing.max_incline_deg.to_string()),
            (
                "landing.preset_left".into(),
                format!("{} {}", self.landing.preset_left[0], self.landing.preset_left[1]),
            ),
            (
                "landing.preset_right".into(),
                format!("{} {}", self.landing.preset_right[0], self.landing.preset_right[1]),
            ),
            ("landing.rear_gear".into(), v3(&self.landing.rear_gear)),
            ("landing.slow_band".into(), self.landing.slow_band.to_string()),
            ("observer.gain".into(), self.observer_gain.to_string()),
            ("probe.approach_altitude".into(), self.probe.approach_altitude.to_string()),
            ("probe.contacts_required".into(), self.probe.contacts_required.to_string()),
            ("probe.direction".into(), v3(&self.probe.direction)),
            ("probe.hop_up".into(), self.probe.hop_up.to_string()),
            ("probe.max_search_steps".into(), self.probe.max_search_steps.to_string()),
            ("probe.raise_delta".into(), self.probe.raise_delta.to_string()),
            ("probe.raise_rate".into(), self.probe.raise_rate.to_string()),
            ("probe.reposition_x_shift".into(), self.probe.reposition_x_shift.to_string()),
            ("probe.search_step_down".into(), self.probe.search_step_down.to_string()),
            ("probe.speed".into(), self.probe.speed.to_string()),
            ("probe.start_depth".into(), self.probe.start_depth.to_string()),
            ("probe.y_spread".into(), self.probe.y_spread.to_string()),
            ("sensor.gyro_bias".into(), v3(&self.sensor.gyro_bias)),
            ("sensor.gyro_noise_sigma".into(), self.sensor.gyro_noise_sigma.to_string()),
            ("sensor.position_noise_sigma".into(), self.sensor.position_noise_sigma.to_string()),
            ("sensor.seed".into(), self.sensor.seed.to_string()),
            ("sim.dt".into(), self.sim.dt.to_string()),
            ("sim.max_time".into(), self.sim.max_time.to_string()),
            ("sim.model_mismatch".into(), self.sim.model_mismatch.to_string()),
            ("sim.omega_damping".into(), self.sim.omega_damping.to_string()),
            ("start.position".into(), v3(&self.start.position)),
            ("start.yaw_deg".into(), self.start.yaw_deg.to_string()),
            ("vehicle.battery_mass".into(), self.vehicle.battery_mass.to_string()),
            ("vehicle.body_height".into(), self.vehicle.body_height.to_string()),
            ("vehicle.body_length".into(), self.vehicle.body_length.to_string()),
            ("vehicle.body_mass".into(), self.vehicle.body_mass.to_string()),
            ("vehicle.body_width".into(), self.vehicle.body_width.to_string()),
            ("vehicle.gravity".into(), self.vehicle.gravity.to_string()),
            ("vehicle.rotor_arm".into(), self.vehicle.rotor_arm.to_string()),
            ("vehicle.total_mass".into(), self.vehicle.total_mass.to_string()),
            ("vehicle.yaw_drag_coeff".into(), self.vehicle.yaw_drag_coeff.to_string()),
            ("world.centroid".into(), v3(&self.world.centroid)),
            ("world.half_extent".into(), self.world.half_extent.to_string()),
            ("world.incline_deg".into(), self.world.incline_deg.to_string()),
            ("world.uphill_azimuth_deg".into(), self.world.uphill_azimuth_deg.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in pairs {
            out.push_str(&k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        }
        out
    }

    // ---- derived builders ------------------------------------------------

    pub fn arm_params(&self) -> [ArmParams; 2] {
        let base = |side: ArmSide, mount: Vec3| ArmParams {
            l1: self.arm.l1,
            l2: self.arm.l2,
            l3: self.arm.l3,
            joint_limits: self.arm.limits,
            side,
            mount_offset: mount,
        };
        [base(ArmSide::Left, self.arm.mount_left), base(ArmSide::Right, self.arm.mount_right)]
    }

    /// Box-model inertia of the body plus both batteries.
    pub fn body_inertia(&self) -> BodyInertia {
        let mass = self.vehicle.body_mass + 2.0 * self.vehicle.battery_mass;
        BodyInertia::box_model(
            mass,
            self.vehicle.body_length,
            self.vehicle.body_width,
            self.vehicle.body_height,
        )
        .expect("box model inertia is SPD for positive dims")
    }

    pub fn allocation(&self) -> AllocationMap {
        AllocationMap::x_quad(self.vehicle.rotor_arm, self.vehicle.yaw_drag_coeff)
    }

    pub fn detection_config(&self) -> DetectionConfig {
        DetectionConfig::new(self.detection_threshold, self.detection_timeout)
            .expect("validated at load")
    }

    pub fn landing_config(&self) -> LandingConfig {
        LandingConfig {
            preset_xy: [self.landing.preset_left, self.landing.preset_right],
            rear_gear_offset: self.landing.rear_gear,
            clearance: self.landing.clearance,
            descent_velocity: self.landing.descent_velocity,
            max_incline: self.landing.max_incline_deg.to_radians(),
        }
    }

    pub fn hover_thrust_per_rotor(&self) -> f64 {
        self.vehicle.total_mass * self.vehicle.gravity / 4.0
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::builtin_default()
    }
}
