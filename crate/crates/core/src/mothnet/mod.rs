//! The antennal lobe (AL) → mushroom body (MB) → readout network.
//!
//! An instance holds four non-negative weight sets: per-feature input gains,
//! AL lateral inhibition (zero diagonal), a sparse random AL → MB projection
//! and a dense MB → readout matrix. Presenting a sample runs a short
//! discrete-time firing-rate simulation of the AL; the MB reads the settled
//! AL rates through the sparse projection and global inhibition lets only
//! the strongest ⌈s·n_mb⌉ units fire; readouts are linear in the MB rates.
//!
//! Training is Hebbian: co-active MB/readout pairs grow by `α·f_j·f_k`, all
//! other MB → readout synapses decay by the factor `1 − δ`. During training
//! the readout assigned to the sample's class is driven above every other
//! readout, which routes growth to it.

mod dynamics;
mod readout;
mod sparse;
mod template;

use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

pub use readout::ReadoutStats;
pub use sparse::SparseMatrix;
pub use template::{AlMode, Supervision, Template, WeightInit, WeightInits};

/// Rates from one presentation, averaged over the end of the evolution window.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkResponse {
    pub al_rates: Vec<f64>,
    pub mb_rates: Vec<f64>,
    pub readout_rates: Vec<f64>,
}

impl NetworkResponse {
    pub fn active_mb(&self) -> usize {
        self.mb_rates.iter().filter(|&&r| r > 0.0).count()
    }
}

/// A concrete network sampled from a [`Template`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MothNet {
    pub template: Template,
    /// Diagonal of the 1-to-1 feature → AL map.
    pub input_gains: Vec<f64>,
    pub lateral: Array2<f64>,
    pub al_to_mb: SparseMatrix,
    pub mb_to_readout: Array2<f64>,
}

fn draw(rng: &mut impl Rng, init: &WeightInit, fan_in: f64) -> f64 {
    let u: f64 = rng.random();
    (init.low + (init.high - init.low) * u) * init.scale(fan_in)
}

impl MothNet {
    /// Samples connectivity and weights from `template`; the same seed always
    /// yields the same instance.
    pub fn generate(template: &Template, seed: u64) -> Result<Self> {
        template.validate()?;
        let t = template;
        let d = t.n_features;
        let mut rng = rng_from_seed(seed);
        let inits = &t.weight_init;

        let input_gains = (0..d)
            .map(|_| draw(&mut rng, &inits.input_gain, 1.0))
            .collect();

        let lateral_fan_in = (d.saturating_sub(1)) as f64;
        let lateral = Array2::from_shape_fn((d, d), |(i, j)| {
            let w = draw(&mut rng, &inits.lateral, lateral_fan_in);
            if i == j {
                0.0
            } else {
                w
            }
        });

        let mb_fan_in = t.al_to_mb_density * d as f64;
        let rows = (0..t.n_mb)
            .map(|_| {
                (0..d)
                    .filter_map(|i| {
                        let present = rng.random::<f64>() < t.al_to_mb_density;
                        let w = draw(&mut rng, &inits.al_to_mb, mb_fan_in);
                        present.then_some((i, w))
                    })
                    .collect()
            })
            .collect();
        let al_to_mb = SparseMatrix::from_triplets_by_row(t.n_mb, d, rows);

        let mb_to_readout = Array2::from_shape_fn((t.n_readouts, t.n_mb), |_| {
            draw(&mut rng, &inits.mb_to_readout, t.n_mb as f64)
        });

        Ok(Self {
            template: template.clone(),
            input_gains,
            lateral,
            al_to_mb,
            mb_to_readout,
        })
    }

    pub fn n_features(&self) -> usize {
        self.template.n_features
    }

    pub fn n_readouts(&self) -> usize {
        self.template.n_readouts
    }

    /// Applies one Hebbian step using the rates in `response`.
    ///
    /// MB → readout: `w += α·f_mb·f_ro` where both fire, else `w *= 1 − δ`.
    /// AL → MB synapses follow the same rule at `al_mb_learning_rate`, only
    /// on existing connections.
    pub fn hebbian_update(&mut self, response: &NetworkResponse) {
        let t = &self.template;
        let (alpha, delta) = (t.hebbian_growth_rate, t.hebbian_decay_rate);
        let keep = 1.0 - delta;
        for (mut row, &f_ro) in self
            .mb_to_readout
            .outer_iter_mut()
            .zip(&response.readout_rates)
        {
            for (w, &f_mb) in row.iter_mut().zip(&response.mb_rates) {
                let co = f_mb * f_ro;
                if co > 0.0 {
                    *w += alpha * co;
                } else {
                    *w *= keep;
                }
            }
        }

        let slow = t.al_mb_learning_rate;
        if slow > 0.0 {
            let slow_keep = if alpha > 0.0 {
                1.0 - delta * slow / alpha
            } else {
                1.0
            };
            let slow_keep = slow_keep.clamp(0.0, 1.0);
            for (j, &f_mb) in response.mb_rates.iter().enumerate() {
                let (cols, vals) = self.al_to_mb.row_mut(j);
                for (&i, w) in cols.iter().zip(vals.iter_mut()) {
                    let co = f_mb * response.al_rates[i];
                    if co > 0.0 {
                        *w += slow * co;
                    } else {
                        *w *= slow_keep;
                    }
                }
            }
        }
    }

    /// Readout rates for `x` with noise off: the generated features.
    pub fn extract_features(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.evolve(x, self.template.al_mode, None)?.readout_rates)
    }

    /// Smallest weight across every weight set.
    pub fn min_weight(&self) -> f64 {
        self.input_gains
            .iter()
            .chain(self.lateral.iter())
            .chain(self.al_to_mb.values())
            .chain(self.mb_to_readout.iter())
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let net: Self = serde_json::from_reader(std::io::BufReader::new(file))?;
        net.template.validate()?;
        Ok(net)
    }
}
