//! Link budget, rate model, and instance construction.
//!
//! An instance couples a deployment geometry (HUEs scattered on the sea
//! surface under one LEO satellite, plus a relay UAV) with one channel
//! realization and the resulting rate model: a local computation rate per
//! HUE fixed by its energy budget, and linear-in-airtime uplink rates for
//! offload and backhaul traffic. Everything downstream (the decision
//! search, the baselines, the experiment harness) consumes only the
//! coefficients assembled here.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::benders::{TaskDecision, TimeAllocation};

/// Meters per nautical mile.
pub const NM_TO_M: f64 = 1852.0;

#[derive(Debug, Error)]
pub enum PhysicsError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("invalid channel realization: {0}")]
    InvalidChannel(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

fn param_err(field: &'static str, reason: impl Into<String>) -> PhysicsError {
    PhysicsError::InvalidParam {
        field,
        reason: reason.into(),
    }
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

/// System-wide radio and compute parameters.
///
/// Defaults hold the reference simulation values; every field can be
/// overridden through the experiment config. Angles of arrival, antenna
/// patterns, and Doppler are out of scope: gains are scalar dBi values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemParams {
    /// Uplink bandwidth B in Hz.
    pub bandwidth_hz: f64,
    /// Carrier frequency in Hz. Recorded for provenance; the path-loss
    /// model folds frequency into `intercept_db`.
    pub carrier_freq_hz: f64,
    /// Noise power at the receiver in dBm.
    pub noise_power_dbm: f64,
    /// Per-HUE transmit power P in dBm.
    pub tx_power_hue_dbm: f64,
    /// UAV transmit power in dBm.
    pub tx_power_uav_dbm: f64,
    /// Protocol overhead factor mu >= 1 shared by offload and backhaul links.
    pub overhead: f64,
    /// CPU cycles needed per bit of task data (chi).
    pub cycles_per_bit: f64,
    /// HUE terminal antenna gain in dBi.
    pub gain_hue_dbi: f64,
    /// UAV antenna gain in dBi.
    pub gain_uav_dbi: f64,
    /// Satellite antenna gain in dBi.
    pub gain_sat_dbi: f64,
    /// Shadow-fading standard deviation omega in dB (0 disables shadowing).
    pub shadow_std_db: f64,
    /// Path-loss intercept at the reference distance, in dB.
    pub intercept_db: f64,
    /// Path-loss exponent gamma.
    pub pathloss_exp: f64,
    /// Multiplicative channel power coefficient alpha (> 0). Deterministic
    /// unless `rician_random` is set.
    pub rician_coeff: f64,
    /// When true, each link additionally draws a unit-mean exponential
    /// small-scale power factor (folded into the fading term in dB).
    pub rician_random: bool,
    /// Path-loss reference distance d_0 in meters.
    pub ref_distance_m: f64,
    /// TDMA frame duration T in seconds.
    pub frame_duration_s: f64,
    /// Per-frame compute energy budget E_th in joules.
    pub energy_budget_j: f64,
    /// Effective switched-capacitance coefficient nu (J·s²/cycle³),
    /// uniform across HUEs.
    pub chip_coeff: f64,
    /// LEO orbit altitude in meters.
    pub leo_altitude_m: f64,
    /// Side length of the square deployment area, in nautical miles.
    pub area_side_nm: f64,
    /// Strict-positivity floor for the backhaul time share, in seconds.
    pub epsilon_tau_s: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            bandwidth_hz: 20e6,
            carrier_freq_hz: 30e9,
            noise_power_dbm: -104.0,
            tx_power_hue_dbm: 33.0,
            tx_power_uav_dbm: 33.0,
            overhead: 1.1,
            cycles_per_bit: 100.0,
            gain_hue_dbi: 25.0,
            gain_uav_dbi: 25.0,
            gain_sat_dbi: 30.0,
            shadow_std_db: 0.1,
            intercept_db: 46.4,
            pathloss_exp: 2.0,
            rician_coeff: 1.59,
            rician_random: false,
            ref_distance_m: 1.0,
            frame_duration_s: 1.0,
            energy_budget_j: 1e-3,
            chip_coeff: 1e-28,
            leo_altitude_m: 550e3,
            area_side_nm: 500.0,
            epsilon_tau_s: 1e-6,
        }
    }
}

impl SystemParams {
    /// Checks every range constraint, reporting the first offending field.
    pub fn validate(&self) -> Result<(), PhysicsError> {
        let positive: [(&'static str, f64); 9] = [
            ("bandwidth_hz", self.bandwidth_hz),
            ("carrier_freq_hz", self.carrier_freq_hz),
            ("cycles_per_bit", self.cycles_per_bit),
            ("rician_coeff", self.rician_coeff),
            ("ref_distance_m", self.ref_distance_m),
            ("frame_duration_s", self.frame_duration_s),
            ("energy_budget_j", self.energy_budget_j),
            ("chip_coeff", self.chip_coeff),
            ("leo_altitude_m", self.leo_altitude_m),
        ];
        for (field, v) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(param_err(field, format!("must be positive, got {v}")));
            }
        }
        if !self.area_side_nm.is_finite() || self.area_side_nm <= 0.0 {
            return Err(param_err(
                "area_side_nm",
                format!("must be positive, got {}", self.area_side_nm),
            ));
        }
        if !self.epsilon_tau_s.is_finite()
            || self.epsilon_tau_s <= 0.0
            || self.epsilon_tau_s >= self.frame_duration_s
        {
            return Err(param_err(
                "epsilon_tau_s",
                format!(
                    "must lie in (0, frame_duration_s), got {}",
                    self.epsilon_tau_s
                ),
            ));
        }
        if !self.overhead.is_finite() || self.overhead < 1.0 {
            return Err(param_err(
                "overhead",
                format!("must be >= 1, got {}", self.overhead),
            ));
        }
        if !self.shadow_std_db.is_finite() || self.shadow_std_db < 0.0 {
            return Err(param_err(
                "shadow_std_db",
                format!("must be >= 0, got {}", self.shadow_std_db),
            ));
        }
        let finite: [(&'static str, f64); 6] = [
            ("noise_power_dbm", self.noise_power_dbm),
            ("tx_power_hue_dbm", self.tx_power_hue_dbm),
            ("tx_power_uav_dbm", self.tx_power_uav_dbm),
            ("gain_hue_dbi", self.gain_hue_dbi),
            ("gain_uav_dbi", self.gain_uav_dbi),
            ("gain_sat_dbi", self.gain_sat_dbi),
        ];
        for (field, v) in finite {
            if !v.is_finite() {
                return Err(param_err(field, format!("must be finite, got {v}")));
            }
        }
        for (field, v) in [
            ("intercept_db", self.intercept_db),
            ("pathloss_exp", self.pathloss_exp),
        ] {
            if !v.is_finite() {
                return Err(param_err(field, format!("must be finite, got {v}")));
            }
        }
        Ok(())
    }

    /// Deployment square side in meters.
    pub fn area_side_m(&self) -> f64 {
        self.area_side_nm * NM_TO_M
    }
}

// ---------------------------------------------------------------------------
// dB helpers
// ---------------------------------------------------------------------------

/// Converts a dB-scale value to linear scale.
///
/// Panics on non-finite input; dB values are always finite in this model.
pub fn db_to_linear(x_db: f64) -> f64 {
    assert!(x_db.is_finite(), "dB value must be finite, got {x_db}");
    10f64.powf(x_db / 10.0)
}

/// Converts a linear-scale value to dB. Inverse of [`db_to_linear`].
pub fn linear_to_db(x: f64) -> f64 {
    assert!(
        x.is_finite() && x > 0.0,
        "linear value must be finite and positive, got {x}"
    );
    10.0 * x.log10()
}

// ---------------------------------------------------------------------------
// Link budget
// ---------------------------------------------------------------------------

/// Large-scale fading beta in dB at distance `d_m`:
/// intercept + 10·gamma·log10(d/d_0) + shadow term.
pub fn large_scale_fading_db(d_m: f64, params: &SystemParams, shadow_db: f64) -> f64 {
    assert!(d_m > 0.0, "distance must be positive, got {d_m}");
    params.intercept_db
        + 10.0 * params.pathloss_exp * (d_m / params.ref_distance_m).log10()
        + shadow_db
}

/// Composite linear channel power gain over a slant path of length `d_m`
/// into a terminal with gain `terminal_gain_dbi`.
pub fn channel_gain(
    d_m: f64,
    terminal_gain_dbi: f64,
    params: &SystemParams,
    shadow_db: f64,
) -> f64 {
    let beta_db = large_scale_fading_db(d_m, params, shadow_db);
    params.rician_coeff
        * db_to_linear(-beta_db)
        * db_to_linear(params.gain_sat_dbi)
        * db_to_linear(terminal_gain_dbi)
}

/// Local computation rate in bits/s for one HUE.
///
/// The CPU frequency is pinned by the per-frame energy budget
/// (nu·f³·T <= E_th), so the rate is (E_th/(nu·T))^(1/3) / chi and does
/// not depend on the channel or on any decision variable.
pub fn local_rate(params: &SystemParams) -> f64 {
    let f_star = (params.energy_budget_j / (params.chip_coeff * params.frame_duration_s)).cbrt();
    f_star / params.cycles_per_bit
}

/// Uplink rate earned per unit of allocated airtime, in bits/s.
///
/// Power and noise are both dBm, compared on the linear milliwatt scale.
/// The full-frame throughput is (B/mu)·log2(1 + SNR); multiplying by a
/// time share in [0, T] with T = 1 frame yields the realized rate.
pub fn rate_coefficient(gain: f64, tx_power_dbm: f64, params: &SystemParams) -> f64 {
    assert!(gain >= 0.0, "channel gain must be nonnegative, got {gain}");
    let snr = gain * db_to_linear(tx_power_dbm) / db_to_linear(params.noise_power_dbm);
    params.bandwidth_hz / params.overhead * (1.0 + snr).log2()
}

// ---------------------------------------------------------------------------
// Topology and channel realization
// ---------------------------------------------------------------------------

/// Node placement and the resulting slant ranges to the LEO satellite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    /// HUE positions in meters, relative to the deployment square origin.
    pub hue_positions: Vec<[f64; 2]>,
    pub num_hues: usize,
    /// LUE count, carried for reporting only; LUE links are not modeled.
    pub num_lues: usize,
    /// HUE-to-LEO slant ranges d_i in meters.
    pub hue_leo_distances_m: Vec<f64>,
    /// UAV-to-LEO distance d_u in meters.
    pub uav_leo_distance_m: f64,
}

impl Topology {
    pub fn validate(&self, params: &SystemParams) -> Result<(), PhysicsError> {
        if self.num_hues < 1 {
            return Err(PhysicsError::InvalidTopology(
                "at least one HUE required".into(),
            ));
        }
        if self.hue_positions.len() != self.num_hues
            || self.hue_leo_distances_m.len() != self.num_hues
        {
            return Err(PhysicsError::InvalidTopology(format!(
                "expected {} positions and distances, got {} and {}",
                self.num_hues,
                self.hue_positions.len(),
                self.hue_leo_distances_m.len()
            )));
        }
        for (i, &d) in self.hue_leo_distances_m.iter().enumerate() {
            // A slant range can never be shorter than the orbit altitude.
            if d.is_nan() || d < params.leo_altitude_m {
                return Err(PhysicsError::InvalidTopology(format!(
                    "d_{i} = {d} m is below the LEO altitude {} m",
                    params.leo_altitude_m
                )));
            }
        }
        if self.uav_leo_distance_m.is_nan() || self.uav_leo_distance_m <= 0.0 {
            return Err(PhysicsError::InvalidTopology(format!(
                "UAV-LEO distance must be positive, got {}",
                self.uav_leo_distance_m
            )));
        }
        Ok(())
    }
}

/// Samples `m_h` HUE positions uniformly over the deployment square and
/// derives slant ranges from the sub-satellite point at the square center.
pub fn sample_topology(
    params: &SystemParams,
    m_h: usize,
    m_l: usize,
    rng_seed: u64,
) -> Result<Topology, PhysicsError> {
    params.validate()?;
    if m_h < 1 {
        return Err(PhysicsError::InvalidTopology(
            "at least one HUE required".into(),
        ));
    }
    let side = params.area_side_m();
    let center = side / 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut positions = Vec::with_capacity(m_h);
    let mut distances = Vec::with_capacity(m_h);
    for _ in 0..m_h {
        let x: f64 = rand::Rng::random_range(&mut rng, 0.0..side);
        let y: f64 = rand::Rng::random_range(&mut rng, 0.0..side);
        positions.push([x, y]);
        let offset = (x - center).hypot(y - center);
        distances.push(params.leo_altitude_m.hypot(offset));
    }
    Ok(Topology {
        hue_positions: positions,
        num_hues: m_h,
        num_lues: m_l,
        hue_leo_distances_m: distances,
        uav_leo_distance_m: params.leo_altitude_m,
    })
}

/// One draw of the per-link fading terms and the gains they imply.
///
/// `shadow_draws_db` records the raw Gaussian shadow samples in draw
/// order: UAV link first, then each HUE. Drawing the UAV first keeps an
/// existing fleet's draws stable when HUEs are appended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub gain_hue: Vec<f64>,
    pub gain_uav: f64,
    pub fading_db_hue: Vec<f64>,
    pub fading_db_uav: f64,
    pub shadow_draws_db: Vec<f64>,
}

impl ChannelRealization {
    fn validate(&self, params: &SystemParams, topology: &Topology) -> Result<(), PhysicsError> {
        let m = topology.num_hues;
        if self.gain_hue.len() != m || self.fading_db_hue.len() != m {
            return Err(PhysicsError::InvalidChannel(format!(
                "expected {m} per-HUE gains and fading terms, got {} and {}",
                self.gain_hue.len(),
                self.fading_db_hue.len()
            )));
        }
        if self.shadow_draws_db.len() != m + 1 {
            return Err(PhysicsError::InvalidChannel(format!(
                "expected {} shadow draws (UAV + HUEs), got {}",
                m + 1,
                self.shadow_draws_db.len()
            )));
        }
        let sat_lin = db_to_linear(params.gain_sat_dbi);
        let check = |gain: f64, fading_db: f64, term_dbi: f64, label: String| {
            if gain.is_nan() || gain <= 0.0 {
                return Err(PhysicsError::InvalidChannel(format!(
                    "{label}: gain must be positive, got {gain}"
                )));
            }
            let expect =
                params.rician_coeff * db_to_linear(-fading_db) * sat_lin * db_to_linear(term_dbi);
            if (gain - expect).abs() > 1e-12 * expect.abs() {
                return Err(PhysicsError::InvalidChannel(format!(
                    "{label}: gain {gain} inconsistent with fading {fading_db} dB \
                     (expected {expect})"
                )));
            }
            Ok(())
        };
        for i in 0..m {
            check(
                self.gain_hue[i],
                self.fading_db_hue[i],
                params.gain_hue_dbi,
                format!("HUE {i}"),
            )?;
        }
        check(
            self.gain_uav,
            self.fading_db_uav,
            params.gain_uav_dbi,
            "UAV".into(),
        )
    }
}

// ---------------------------------------------------------------------------
// Instance
// ---------------------------------------------------------------------------

/// A fully materialized optimization instance. Immutable once built; all
/// solver layers read the precomputed rate coefficients from here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    params: SystemParams,
    topology: Topology,
    channel: ChannelRealization,
    local_rate_bps: Vec<f64>,
    leo_rate_coeff_bps: Vec<f64>,
    uav_rate_coeff_bps: f64,
    weights: Vec<f64>,
}

impl Instance {
    /// Assembles an instance from an explicit channel realization,
    /// validating dimensions and gain consistency, and derives every rate
    /// coefficient.
    pub fn from_parts(
        params: SystemParams,
        topology: Topology,
        channel: ChannelRealization,
        weights: Vec<f64>,
    ) -> Result<Self, PhysicsError> {
        params.validate()?;
        topology.validate(&params)?;
        channel.validate(&params, &topology)?;
        if weights.len() != topology.num_hues {
            return Err(PhysicsError::DimensionMismatch(format!(
                "expected {} weights, got {}",
                topology.num_hues,
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w <= 0.0) {
            return Err(PhysicsError::DimensionMismatch(format!(
                "weights must be positive and finite, got {w}"
            )));
        }
        let r_local = local_rate(&params);
        let local_rate_bps = vec![r_local; topology.num_hues];
        let leo_rate_coeff_bps = channel
            .gain_hue
            .iter()
            .map(|&g| rate_coefficient(g, params.tx_power_hue_dbm, &params))
            .collect();
        let uav_rate_coeff_bps =
            rate_coefficient(channel.gain_uav, params.tx_power_uav_dbm, &params);
        Ok(Instance {
            params,
            topology,
            channel,
            local_rate_bps,
            leo_rate_coeff_bps,
            uav_rate_coeff_bps,
            weights,
        })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }
    pub fn topology(&self) -> &Topology {
        &self.topology
    }
    pub fn channel(&self) -> &ChannelRealization {
        &self.channel
    }
    /// Per-HUE local computation rates R_i in bits/s.
    pub fn local_rate_bps(&self) -> &[f64] {
        &self.local_rate_bps
    }
    /// Per-HUE offload rates c_i earned per unit time share.
    pub fn leo_rate_coeff_bps(&self) -> &[f64] {
        &self.leo_rate_coeff_bps
    }
    /// Backhaul rate c_u earned per unit time share.
    pub fn uav_rate_coeff_bps(&self) -> f64 {
        self.uav_rate_coeff_bps
    }
    /// Per-HUE priority weights z_i.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn num_hues(&self) -> usize {
        self.topology.num_hues
    }
}

/// Draws one channel realization for `topology` and builds the instance.
///
/// Shadow terms are Normal(0, omega²) per link; with `rician_random` set,
/// each link also draws a unit-mean exponential power factor that enters
/// the fading term as -10·log10(e). Draw order is UAV first, then HUEs,
/// one pass for shadows and one for power factors.
pub fn build_instance(
    params: &SystemParams,
    topology: &Topology,
    rng_seed: u64,
    weights: &[f64],
) -> Result<Instance, PhysicsError> {
    params.validate()?;
    topology.validate(params)?;
    let m = topology.num_hues;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut shadow = vec![0.0; m + 1];
    if params.shadow_std_db > 0.0 {
        let normal = Normal::new(0.0, params.shadow_std_db).expect("validated std");
        for s in shadow.iter_mut() {
            *s = normal.sample(&mut rng);
        }
    }
    let mut extra_fading_db = vec![0.0; m + 1];
    if params.rician_random {
        for e in extra_fading_db.iter_mut() {
            let draw: f64 = Exp1.sample(&mut rng);
            *e = -10.0 * draw.max(f64::MIN_POSITIVE).log10();
        }
    }
    let fading_db_uav = large_scale_fading_db(topology.uav_leo_distance_m, params, shadow[0])
        + extra_fading_db[0];
    let gain_uav = params.rician_coeff
        * db_to_linear(-fading_db_uav)
        * db_to_linear(params.gain_sat_dbi)
        * db_to_linear(params.gain_uav_dbi);
    let mut fading_db_hue = Vec::with_capacity(m);
    let mut gain_hue = Vec::with_capacity(m);
    for i in 0..m {
        let beta = large_scale_fading_db(topology.hue_leo_distances_m[i], params, shadow[i + 1])
            + extra_fading_db[i + 1];
        fading_db_hue.push(beta);
        gain_hue.push(
            params.rician_coeff
                * db_to_linear(-beta)
                * db_to_linear(params.gain_sat_dbi)
                * db_to_linear(params.gain_hue_dbi),
        );
    }
    let channel = ChannelRealization {
        gain_hue,
        gain_uav,
        fading_db_hue,
        fading_db_uav,
        shadow_draws_db: shadow,
    };
    Instance::from_parts(params.clone(), topology.clone(), channel, weights.to_vec())
}

// ---------------------------------------------------------------------------
// Objective
// ---------------------------------------------------------------------------

/// Weighted sum rate of a (decision, allocation) pair:
/// sum_i z_i·((1-y_i)·R_i + y_i·c_i·tau_i) + c_u·tau_u.
pub fn objective_value(instance: &Instance, y: &TaskDecision, alloc: &TimeAllocation) -> f64 {
    let m = instance.num_hues();
    assert_eq!(y.len(), m, "decision length must match HUE count");
    assert_eq!(alloc.tau.len(), m, "allocation length must match HUE count");
    let mut total = instance.uav_rate_coeff_bps * alloc.tau_u;
    for i in 0..m {
        let z = instance.weights[i];
        total += if y.is_offloaded(i) {
            z * instance.leo_rate_coeff_bps[i] * alloc.tau[i]
        } else {
            z * instance.local_rate_bps[i]
        };
    }
    total
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
