use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether the antennal lobe applies lateral inhibition or passes its
/// (gain-scaled, rectified) input straight through.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlMode {
    #[default]
    Normal,
    PassThrough,
}

/// How the home readout is driven during a training presentation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Supervision {
    /// Home readout clamped to `max + 1`; the other readouts keep their
    /// evoked rates and so also grow wherever they fire.
    ClampHome,
    /// Home readout clamped to `max + 1` and the other readouts held at
    /// zero, so their synapses from active MB units decay instead.
    #[default]
    ClampHomeSilenceOthers,
}

/// `Uniform(low, high)`, optionally divided by `sqrt(fan_in)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightInit {
    pub low: f64,
    pub high: f64,
    pub fan_in_scaled: bool,
}

impl WeightInit {
    pub const fn uniform(low: f64, high: f64, fan_in_scaled: bool) -> Self {
        Self {
            low,
            high,
            fan_in_scaled,
        }
    }

    pub(crate) fn scale(&self, fan_in: f64) -> f64 {
        if self.fan_in_scaled {
            1.0 / fan_in.max(1.0).sqrt()
        } else {
            1.0
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightInits {
    pub input_gain: WeightInit,
    pub lateral: WeightInit,
    pub al_to_mb: WeightInit,
    pub mb_to_readout: WeightInit,
}

impl Default for WeightInits {
    fn default() -> Self {
        Self {
            input_gain: WeightInit::uniform(0.5, 1.5, false),
            lateral: WeightInit::uniform(0.0, 1.0, false),
            al_to_mb: WeightInit::uniform(0.0, 1.0, true),
            mb_to_readout: WeightInit::uniform(0.0, 1e-3, true),
        }
    }
}

/// Distributional description of a MothNet; instances are sampled from it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Template {
    pub n_features: usize,
    pub n_mb: usize,
    pub n_readouts: usize,
    /// β: scale of lateral inhibition inside the AL.
    pub al_inhibition_strength: f64,
    /// ρ: probability that a given AL → MB connection exists.
    pub al_to_mb_density: f64,
    /// s: fraction of MB units allowed to fire per presentation.
    pub mb_active_fraction: f64,
    /// α
    pub hebbian_growth_rate: f64,
    /// δ, applied per presentation
    pub hebbian_decay_rate: f64,
    /// Growth rate on AL → MB synapses; decay there is scaled by the same
    /// ratio to `hebbian_growth_rate`.
    pub al_mb_learning_rate: f64,
    pub weight_init: WeightInits,
    pub n_timesteps: usize,
    /// Gaussian noise on AL rates during training. Evaluation is noise-free.
    pub noise_std: f64,
    pub training_passes: usize,
    pub supervision: Supervision,
    pub al_mode: AlMode,
    pub seed: u64,
}

impl Default for Template {
    fn default() -> Self {
        Self::for_features(85)
    }
}

impl Template {
    pub fn for_features(n_features: usize) -> Self {
        Self {
            n_features,
            n_mb: 2500,
            n_readouts: 10,
            al_inhibition_strength: 4.0 / n_features.max(1) as f64,
            al_to_mb_density: 0.15,
            mb_active_fraction: 0.10,
            hebbian_growth_rate: 0.02,
            hebbian_decay_rate: 0.01,
            al_mb_learning_rate: 0.0,
            weight_init: WeightInits::default(),
            n_timesteps: 20,
            noise_std: 0.02,
            training_passes: 1,
            supervision: Supervision::default(),
            al_mode: AlMode::Normal,
            seed: 0,
        }
    }

    /// Same template with the AL's lateral inhibition disabled.
    pub fn pass_through(mut self) -> Self {
        self.al_mode = AlMode::PassThrough;
        self
    }

    /// ⌈s · n_mb⌉
    pub fn max_active_mb(&self) -> usize {
        ((self.mb_active_fraction * self.n_mb as f64) - 1e-9)
            .ceil()
            .max(0.0) as usize
    }

    /// Steps averaged at the end of the evolution window (the final half).
    pub fn averaging_window(&self) -> usize {
        self.n_timesteps.div_ceil(2).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(format!("mothnet template: {m}")));
        if self.n_features == 0 || self.n_mb == 0 || self.n_readouts == 0 {
            return fail("layer sizes must be positive".into());
        }
        if !(self.al_to_mb_density > 0.0 && self.al_to_mb_density <= 1.0) {
            return fail(format!(
                "al_to_mb_density {} outside (0, 1]",
                self.al_to_mb_density
            ));
        }
        if !(self.mb_active_fraction > 0.0 && self.mb_active_fraction < 1.0) {
            return fail(format!(
                "mb_active_fraction {} outside (0, 1)",
                self.mb_active_fraction
            ));
        }
        if !(self.hebbian_decay_rate >= 0.0 && self.hebbian_decay_rate < 1.0) {
            return fail(format!(
                "hebbian_decay_rate {} outside [0, 1)",
                self.hebbian_decay_rate
            ));
        }
        let rates = [
            ("al_inhibition_strength", self.al_inhibition_strength),
            ("hebbian_growth_rate", self.hebbian_growth_rate),
            ("al_mb_learning_rate", self.al_mb_learning_rate),
            ("noise_std", self.noise_std),
        ];
        for (name, v) in rates {
            if !(v.is_finite() && v >= 0.0) {
                return fail(format!(
                    "{name} must be a finite non-negative number, got {v}"
                ));
            }
        }
        for (name, w) in [
            ("input_gain", self.weight_init.input_gain),
            ("lateral", self.weight_init.lateral),
            ("al_to_mb", self.weight_init.al_to_mb),
            ("mb_to_readout", self.weight_init.mb_to_readout),
        ] {
            if !(w.low >= 0.0 && w.high >= w.low && w.high.is_finite()) {
                return fail(format!("{name} init must satisfy 0 <= low <= high"));
            }
        }
        if self.n_timesteps == 0 || self.training_passes == 0 {
            return fail("n_timesteps and training_passes must be positive".into());
        }
        Ok(())
    }
}
