use rand_distr::{Distribution, Normal};

use super::{AlMode, MothNet, NetworkResponse};
use crate::error::{Error, Result};
use crate::rng::SimRng;

/// Global inhibition: subtracts the (k+1)-th largest pre-activation so at
/// most `k` units stay positive.
pub(crate) fn global_inhibition(pre: &[f64], k: usize) -> Vec<f64> {
    if k == 0 {
        return vec![0.0; pre.len()];
    }
    let threshold = if pre.len() > k {
        let mut scratch = pre.to_vec();
        let (_, kth, _) = scratch.select_nth_unstable_by(k, |a, b| b.total_cmp(a));
        kth.max(0.0)
    } else {
        0.0
    };
    pre.iter().map(|&v| (v - threshold).max(0.0)).collect()
}

impl MothNet {
    /// Runs `n_timesteps` of the AL rate dynamics
    ///
    /// `f(t+1) = relu(g ⊙ x − β · W_lat · f(t) + ε_t)`,  `ε_t ~ N(0, σ²)`
    ///
    /// (no inhibition term in pass-through mode), averages AL rates over the
    /// final half of the window and propagates the averaged state through
    /// global inhibition in the MB and the linear readout layer. Passing
    /// `noise: None` runs the deterministic, noise-free dynamics.
    pub fn evolve(
        &self,
        x: &[f64],
        mode: AlMode,
        noise: Option<&mut SimRng>,
    ) -> Result<NetworkResponse> {
        let t = &self.template;
        let d = t.n_features;
        if x.len() != d {
            return Err(Error::Input(format!(
                "sample has {} features, network expects {d}",
                x.len()
            )));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!("feature {i} is not finite")));
        }

        let drive: Vec<f64> = x
            .iter()
            .zip(&self.input_gains)
            .map(|(v, g)| v * g)
            .collect();
        let mut noise = match noise {
            Some(rng) if t.noise_std > 0.0 => Some((
                rng,
                Normal::new(0.0, t.noise_std).map_err(|e| Error::Config(e.to_string()))?,
            )),
            _ => None,
        };

        let window = t.averaging_window().min(t.n_timesteps);
        let start = t.n_timesteps - window;
        let beta = t.al_inhibition_strength;
        let mut rates = vec![0.0; d];
        let mut next = vec![0.0; d];
        let mut avg = vec![0.0; d];
        for step in 0..t.n_timesteps {
            for i in 0..d {
                let mut v = drive[i];
                if mode == AlMode::Normal && beta > 0.0 {
                    let inhibition: f64 = self
                        .lateral
                        .row(i)
                        .iter()
                        .zip(&rates)
                        .map(|(w, f)| w * f)
                        .sum();
                    v -= beta * inhibition;
                }
                if let Some((rng, dist)) = noise.as_mut() {
                    v += dist.sample(*rng);
                }
                next[i] = v.max(0.0);
            }
            std::mem::swap(&mut rates, &mut next);
            if step >= start {
                avg.iter_mut().zip(&rates).for_each(|(a, r)| *a += r);
            }
        }
        avg.iter_mut().for_each(|a| *a /= window as f64);

        let mb_pre = self.al_to_mb.matvec(&avg);
        let mb_rates = global_inhibition(&mb_pre, t.max_active_mb());
        let readout_rates = self
            .mb_to_readout
            .outer_iter()
            .map(|row| {
                row.iter()
                    .zip(&mb_rates)
                    .filter(|(_, f)| **f > 0.0)
                    .map(|(w, f)| w * f)
                    .sum()
            })
            .collect();

        Ok(NetworkResponse {
            al_rates: avg,
            mb_rates,
            readout_rates,
        })
    }
}
