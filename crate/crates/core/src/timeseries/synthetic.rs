use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::AgentSeries;
use crate::agent::AgentId;
use crate::error::{Error, Result};

/// Steps simulated and discarded before the first reported sample.
pub const BURN_IN: usize = 200;

fn check_phi(phi: f64, what: &str) -> Result<()> {
    if !(phi.abs() < 1.0) {
        return Err(Error::invalid(format!("{what} {phi} is not stationary (need |phi| < 1)")));
    }
    Ok(())
}

fn noise(std: f64) -> Result<Normal<f64>> {
    if !(std >= 0.0 && std.is_finite()) {
        return Err(Error::invalid(format!("noise std must be finite and >= 0, got {std}")));
    }
    Normal::new(0.0, std).map_err(|e| Error::invalid(e.to_string()))
}

/// `x_t = φ·x_{t−1} + ε_t`, `ε_t ~ N(0, σ²)`, started at zero with a burn-in.
pub fn generate_ar1(
    agent_id: impl Into<AgentId>,
    phi: f64,
    noise_std: f64,
    length: usize,
    seed: u64,
) -> Result<AgentSeries> {
    check_phi(phi, "AR coefficient")?;
    if length == 0 {
        return Err(Error::invalid("series length must be at least 1"));
    }
    let dist = noise(noise_std)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = 0.0;
    for _ in 0..BURN_IN {
        x = phi * x + dist.sample(&mut rng);
    }
    let values = (0..length)
        .map(|_| {
            x = phi * x + dist.sample(&mut rng);
            x
        })
        .collect();
    AgentSeries::from_values(agent_id, values, 0)
}

/// A dependent agent driven by the previous hour of each driver:
/// `p_t = φ·p_{t−1} + Σ_k c_k·d_{k,t−1} + ε_t`.
///
/// The own-lag recursion gets the same burn-in as [`generate_ar1`]; the
/// first output sample has no driver term because `d_{k,−1}` is unknown.
pub fn generate_var_dependent(
    agent_id: impl Into<AgentId>,
    drivers: &[AgentSeries],
    cross_coefficients: &[f64],
    own_phi: f64,
    noise_std: f64,
    seed: u64,
) -> Result<AgentSeries> {
    check_phi(own_phi, "own AR coefficient")?;
    let Some(first) = drivers.first() else {
        return Err(Error::invalid("at least one driver series is required"));
    };
    if cross_coefficients.len() != drivers.len() {
        return Err(Error::DimensionMismatch {
            context: "cross coefficients",
            expected: drivers.len(),
            found: cross_coefficients.len(),
        });
    }
    let length = first.len();
    if let Some(bad) = drivers.iter().find(|d| d.len() != length || d.first_hour() != first.first_hour()) {
        return Err(Error::invalid(format!(
            "driver {} covers {} samples from hour {}, expected {length} from hour {}",
            bad.agent_id,
            bad.len(),
            bad.first_hour(),
            first.first_hour()
        )));
    }
    let dist = noise(noise_std)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = 0.0;
    for _ in 0..BURN_IN {
        p = own_phi * p + dist.sample(&mut rng);
    }
    let mut values = Vec::with_capacity(length);
    for t in 0..length {
        let cross: f64 = if t == 0 {
            0.0
        } else {
            drivers
                .iter()
                .zip(cross_coefficients)
                .map(|(d, c)| c * d.values()[t - 1])
                .sum()
        };
        p = own_phi * p + cross + dist.sample(&mut rng);
        values.push(p);
    }
    AgentSeries::new(agent_id, values, first.history(), first.start_time())
}

/// The synthetic study: independent AR(1) agents `P2…` and a VAR agent `P1`
/// driven by the first lag of each of them.
///
/// Defaults are chosen so that a moderate uniform reservation separates the
/// true lag-1 links from noise at a ten-day window.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    /// AR(1) coefficient of each independent agent.
    pub ar_coefficients: Vec<f64>,
    /// Innovation std of each independent agent.
    pub noise_stds: Vec<f64>,
    /// Weight of each independent agent's lag 1 in `P1`.
    pub cross_coefficients: Vec<f64>,
    pub own_phi: f64,
    pub own_noise_std: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            ar_coefficients: vec![0.85, 0.5, 0.5, 0.8],
            noise_stds: vec![0.7, 1.5, 2.0, 2.0],
            cross_coefficients: vec![0.4, 0.3, 0.2, 0.1],
            own_phi: 0.2,
            own_noise_std: 0.5,
            seed: 42,
        }
    }
}

impl SyntheticSpec {
    pub fn n_independent(&self) -> usize {
        self.ar_coefficients.len()
    }

    pub fn agent_ids(&self) -> Vec<AgentId> {
        (1..=self.n_independent() + 1).map(|i| AgentId::new(format!("P{i}"))).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_independent();
        if n == 0 {
            return Err(Error::invalid("synthetic spec needs at least one independent agent"));
        }
        for (what, len) in [("noise_stds", self.noise_stds.len()), ("cross_coefficients", self.cross_coefficients.len())] {
            if len != n {
                return Err(Error::invalid(format!("{what} has {len} entries, expected {n}")));
            }
        }
        for &phi in self.ar_coefficients.iter().chain([&self.own_phi]) {
            check_phi(phi, "AR coefficient")?;
        }
        for &s in self.noise_stds.iter().chain([&self.own_noise_std]) {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::invalid(format!("noise std must be positive, got {s}")));
            }
        }
        if self.cross_coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("cross coefficients must be finite"));
        }
        Ok(())
    }

    /// Seed of the `k`-th generated agent (0 = `P1`), split from the spec seed.
    pub fn agent_seed(&self, k: usize) -> u64 {
        splitmix64(self.seed ^ splitmix64(k as u64 + 1))
    }

    /// `P1, P2, …` each with `history + length` samples; the window starts after `history`.
    pub fn generate(&self, length: usize, history: usize) -> Result<Vec<AgentSeries>> {
        self.validate()?;
        let ids = self.agent_ids();
        let total = BURN_IN + history + length;
        let drivers = self
            .ar_coefficients
            .iter()
            .zip(&self.noise_stds)
            .enumerate()
            .map(|(k, (&phi, &std))| generate_ar1(ids[k + 1].clone(), phi, std, total, self.agent_seed(k + 1)))
            .collect::<Result<Vec<_>>>()?;
        let dependent = generate_var_dependent(
            ids[0].clone(),
            &drivers,
            &self.cross_coefficients,
            self.own_phi,
            self.own_noise_std,
            self.agent_seed(0),
        )?;
        std::iter::once(dependent)
            .chain(drivers)
            .map(|s| AgentSeries::from_values(s.agent_id.clone(), s.values()[BURN_IN..].to_vec(), history))
            .collect()
    }

    /// Non-zero generating coefficients of `target`'s series, as `(agent, lag, value)`.
    pub fn true_coefficients(&self, target: &AgentId) -> Vec<(AgentId, usize, f64)> {
        let ids = self.agent_ids();
        if *target == ids[0] {
            let mut out = vec![(ids[0].clone(), 1, self.own_phi)];
            out.extend(
                ids[1..]
                    .iter()
                    .zip(&self.cross_coefficients)
                    .map(|(id, &c)| (id.clone(), 1, c)),
            );
            out
        } else if let Some(k) = ids[1..].iter().position(|id| id == target) {
            vec![(target.clone(), 1, self.ar_coefficients[k])]
        } else {
            Vec::new()
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
