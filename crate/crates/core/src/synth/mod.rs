//! Deterministic synthetic gear-vibration records.
//!
//! Each revolution is a sum of gear-mesh harmonics whose amplitude and phase
//! are locally modulated around one cracked tooth, plus independent Gaussian
//! noise per revolution. A life schedule strings such stages together into a
//! running-in / steady / wear-out sequence.

mod format;

pub use format::{
    read_recordset, read_recordset_prefix, write_recordset, FileFrameSource, RecordSetHeader,
    FORMAT_VERSION, MAGIC,
};

use std::f64::consts::PI;
use std::ops::Deref;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Peak amplitude modulation at full crack severity.
pub const CRACK_AMPLITUDE_GAIN: f64 = 0.8;
/// Peak phase modulation (radians) at full crack severity.
pub const CRACK_PHASE_GAIN: f64 = 0.5;

const RUNNING_IN_STAGES: usize = 2;
const RUNNING_IN_NOISE_GAIN: [f64; RUNNING_IN_STAGES] = [2.5, 1.75];

/// Parameters of one synthetic test stage.
#[derive(Debug, Clone, PartialEq)]
pub struct GearSignalSpec {
    pub teeth_count: u32,
    pub points_per_rev: usize,
    pub revolutions: usize,
    pub harmonic_amplitudes: Vec<f64>,
    pub harmonic_phases: Vec<f64>,
    pub noise_std: f64,
    pub crack_severity: f64,
    pub crack_tooth_index: u32,
    pub rng_seed: u64,
    /// Position of this stage in a life schedule.
    pub stage_index: u16,
    /// Fraction of gear life elapsed, in [0, 1].
    pub life_fraction: f64,
}

impl Default for GearSignalSpec {
    fn default() -> Self {
        Self {
            teeth_count: 25,
            points_per_rev: 1024,
            revolutions: 160,
            harmonic_amplitudes: vec![1.0, 0.6, 0.3],
            harmonic_phases: vec![0.0, 0.7, 1.9],
            noise_std: 0.5,
            crack_severity: 0.0,
            crack_tooth_index: 7,
            rng_seed: 0x5eed_0001,
            stage_index: 0,
            life_fraction: 0.0,
        }
    }
}

impl GearSignalSpec {
    pub fn validate(&self) -> Result<()> {
        if self.teeth_count == 0 {
            return Err(Error::validation("teeth_count", "must be at least 1"));
        }
        if self.harmonic_amplitudes.is_empty() {
            return Err(Error::validation(
                "harmonic_amplitudes",
                "need at least one harmonic",
            ));
        }
        if self.harmonic_amplitudes.len() != self.harmonic_phases.len() {
            return Err(Error::validation(
                "harmonic_phases",
                format!(
                    "length {} does not match {} amplitudes",
                    self.harmonic_phases.len(),
                    self.harmonic_amplitudes.len()
                ),
            ));
        }
        if self.harmonic_amplitudes.iter().any(|a| !a.is_finite()) {
            return Err(Error::validation("harmonic_amplitudes", "must be finite"));
        }
        if self.harmonic_phases.iter().any(|a| !a.is_finite()) {
            return Err(Error::validation("harmonic_phases", "must be finite"));
        }
        let needed = 2 * self.teeth_count as usize * self.harmonic_amplitudes.len();
        if self.points_per_rev < needed {
            return Err(Error::validation(
                "points_per_rev",
                format!(
                    "{} cannot resolve mesh harmonics, need at least {needed}",
                    self.points_per_rev
                ),
            ));
        }
        if u32::try_from(self.points_per_rev).is_err() {
            return Err(Error::validation("points_per_rev", "exceeds u32 range"));
        }
        if self.revolutions == 0 || u32::try_from(self.revolutions).is_err() {
            return Err(Error::validation(
                "revolutions",
                format!("{} is outside 1..=u32::MAX", self.revolutions),
            ));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::validation(
                "noise_std",
                format!("{} must be finite and non-negative", self.noise_std),
            ));
        }
        if !(0.0..=1.0).contains(&self.crack_severity) {
            return Err(Error::validation(
                "crack_severity",
                format!("{} is outside [0, 1]", self.crack_severity),
            ));
        }
        if self.crack_tooth_index >= self.teeth_count {
            return Err(Error::validation(
                "crack_tooth_index",
                format!(
                    "{} is not below teeth_count {}",
                    self.crack_tooth_index, self.teeth_count
                ),
            ));
        }
        if !(0.0..=1.0).contains(&self.life_fraction) {
            return Err(Error::validation(
                "life_fraction",
                format!("{} is outside [0, 1]", self.life_fraction),
            ));
        }
        Ok(())
    }

    /// Angular pitch of one tooth in radians.
    pub fn tooth_pitch(&self) -> f64 {
        2.0 * PI / f64::from(self.teeth_count)
    }

    /// Centre angle of the cracked tooth.
    pub fn crack_angle(&self) -> f64 {
        self.tooth_pitch() * f64::from(self.crack_tooth_index)
    }

    /// Raised-cosine window of one tooth pitch centred on the cracked tooth.
    pub fn crack_window(&self, theta: f64) -> f64 {
        let pitch = self.tooth_pitch();
        let delta = wrap_angle(theta - self.crack_angle());
        if delta.abs() < 0.5 * pitch {
            0.5 * (1.0 + (2.0 * PI * delta / pitch).cos())
        } else {
            0.0
        }
    }

    /// The noise-free revolution waveform, including crack modulation.
    pub fn clean_waveform(&self) -> Vec<f64> {
        let z = f64::from(self.teeth_count);
        let n = self.points_per_rev as f64;
        (0..self.points_per_rev)
            .map(|k| {
                let theta = 2.0 * PI * k as f64 / n;
                let w = self.crack_window(theta);
                let am = 1.0 + CRACK_AMPLITUDE_GAIN * self.crack_severity * w;
                let pm = CRACK_PHASE_GAIN * self.crack_severity * w;
                self.harmonic_amplitudes
                    .iter()
                    .zip(&self.harmonic_phases)
                    .enumerate()
                    .map(|(m, (a, phi))| {
                        let order = (m + 1) as f64 * z;
                        a * am * (order * theta + phi + pm).cos()
                    })
                    .sum()
            })
            .collect()
    }
}

/// Maps an angle onto (-pi, pi].
fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Samples of exactly one rotation-synchronized shaft revolution.
#[derive(Debug, Clone, PartialEq)]
pub struct RevolutionFrame(Vec<f64>);

impl RevolutionFrame {
    pub fn new(samples: Vec<f64>) -> Self {
        Self(samples)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for RevolutionFrame {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for RevolutionFrame {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// All revolutions recorded at one stage of gear life.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordSet {
    frames: Vec<RevolutionFrame>,
    points_per_rev: usize,
    pub stage_index: u16,
    pub life_fraction: f64,
    pub rng_seed: u64,
}

impl RecordSet {
    pub fn new(
        frames: Vec<RevolutionFrame>,
        points_per_rev: usize,
        stage_index: u16,
        life_fraction: f64,
        rng_seed: u64,
    ) -> Result<Self> {
        if points_per_rev == 0 {
            return Err(Error::validation("points_per_rev", "must be positive"));
        }
        for f in &frames {
            crate::error::check_dim("frame length", points_per_rev, f.len())?;
        }
        Ok(Self {
            frames,
            points_per_rev,
            stage_index,
            life_fraction,
            rng_seed,
        })
    }

    pub fn frames(&self) -> &[RevolutionFrame] {
        &self.frames
    }

    pub fn points_per_rev(&self) -> usize {
        self.points_per_rev
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn into_frames(self) -> Vec<RevolutionFrame> {
        self.frames
    }
}

/// Generates every revolution of one stage.
pub fn synthesize_stage(spec: &GearSignalSpec) -> Result<RecordSet> {
    spec.validate()?;
    let clean = spec.clean_waveform();
    let noise = Normal::new(0.0, spec.noise_std)
        .map_err(|e| Error::validation("noise_std", e.to_string()))?;
    let frames = (0..spec.revolutions)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
            rng.set_stream(r as u64);
            let samples = clean
                .iter()
                .map(|c| {
                    if spec.noise_std > 0.0 {
                        c + noise.sample(&mut rng)
                    } else {
                        *c
                    }
                })
                .collect();
            RevolutionFrame(samples)
        })
        .collect();
    RecordSet::new(
        frames,
        spec.points_per_rev,
        spec.stage_index,
        spec.life_fraction,
        spec.rng_seed,
    )
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// First stage index of the wear-out phase (last third of life).
pub fn wear_out_start(stages: usize) -> usize {
    stages - stages.div_ceil(3)
}

/// Derives `stages` specs spanning gear life from a healthy base spec.
///
/// The first two stages carry elevated noise (running-in), the middle of life
/// is crack free and the final third ramps the crack severity up to 1.0.
pub fn life_schedule(base: &GearSignalSpec, stages: usize) -> Result<Vec<GearSignalSpec>> {
    if stages < 2 {
        return Err(Error::validation(
            "stages",
            format!("{stages} is below the minimum of 2"),
        ));
    }
    if stages > usize::from(u16::MAX) + 1 {
        return Err(Error::validation("stages", "exceeds u16 stage index range"));
    }
    base.validate()?;
    let peak = base
        .harmonic_amplitudes
        .iter()
        .fold(0.0_f64, |m, a| m.max(a.abs()));
    let wear_start = wear_out_start(stages);
    let wear_len = stages - wear_start;
    Ok((0..stages)
        .map(|i| {
            let mut spec = base.clone();
            spec.stage_index = i as u16;
            spec.life_fraction = i as f64 / (stages - 1) as f64;
            spec.rng_seed = splitmix64(base.rng_seed ^ (i as u64 + 1).wrapping_mul(0x9e37_79b9));
            if let Some(gain) = RUNNING_IN_NOISE_GAIN.get(i) {
                // the floor keeps running-in noisy even for a noise-free base
                spec.noise_std = base.noise_std * gain + 0.05 * peak * (gain - 1.0);
            }
            spec.crack_severity = if i >= wear_start {
                (i - wear_start + 1) as f64 / wear_len as f64
            } else {
                0.0
            };
            spec
        })
        .collect())
}
